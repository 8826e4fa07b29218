// divrec: diversity-aware collaborative filtering engine and evaluation harness.
//
// Subcommands cover the full pipeline: simulate synthetic panels, ingest
// traffic/survey/score files, compute audience diversity, produce CF / CF+D /
// popularity / actual-visits rankings, and run the evaluation suites
// (per-k metrics, delta-Q, stratification, resampling null, fairness,
// observational statistics). Every run writes a resolved run_config.json next
// to its reports so any output can be reproduced from inputs alone.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "divrec/csv.hpp"
#include "divrec/diversity.hpp"
#include "divrec/error.hpp"
#include "divrec/evaluation.hpp"
#include "divrec/ingest.hpp"
#include "divrec/mathx.hpp"
#include "divrec/parallel.hpp"
#include "divrec/recommender.hpp"
#include "divrec/similarity.hpp"
#include "divrec/stats.hpp"
#include "divrec/synth.hpp"

namespace {

using nlohmann::json;

struct CommonOptions {
    std::vector<std::string> traffic;
    std::string survey;
    std::string scores;
    std::string slants;
    int min_visitors = 30;

    std::string split_mode = "random";
    double train_fraction = 0.7;
    std::uint64_t seed = 42;
    std::string boundary;

    std::string kernel = "kendall";
    std::size_t neighbors = 10;
    std::string metric = "variance";
    std::string level = "user";
    double logistic_a = 1.0;
    double logistic_psi = 1.0;
    std::string logistic_t = "auto";
    double dirichlet_alpha = 1.0;

    std::string out_dir;
    int threads = 0;
};

void add_input_options(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--traffic", opt.traffic, "Traffic CSV files, one per wave")
        ->required()
        ->expected(-1);
    cmd->add_option("--survey", opt.survey, "Survey CSV (user_id,partisanship)")->required();
    cmd->add_option("--scores", opt.scores, "Reliability scores CSV")->required();
    cmd->add_option("--slants", opt.slants, "Slants CSV (optional)");
    cmd->add_option("--min-visitors", opt.min_visitors,
                    "Distinct-visitor threshold per domain");
}

void add_split_options(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--split", opt.split_mode, "random|longitudinal")
        ->check(CLI::IsMember({"random", "longitudinal"}));
    cmd->add_option("--train-fraction", opt.train_fraction, "Training share in (0,1)");
    cmd->add_option("--seed", opt.seed, "RNG seed");
    cmd->add_option("--boundary", opt.boundary,
                    "ISO-8601 boundary timestamp (longitudinal split)");
}

void add_recommender_options(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--kernel", opt.kernel, "Similarity kernel: kendall|pearson")
        ->check(CLI::IsMember({"kendall", "pearson"}));
    cmd->add_option("--neighbors", opt.neighbors, "Neighborhood size");
    cmd->add_option("--metric", opt.metric, "Diversity metric for the re-ranking signal")
        ->check(CLI::IsMember({"variance", "entropy_ml", "entropy_dirichlet", "entropy_nsb",
                               "comp_max_prob", "comp_gini"}));
    cmd->add_option("--level", opt.level, "user|pageview")
        ->check(CLI::IsMember({"user", "pageview"}));
    cmd->add_option("--a", opt.logistic_a, "Logistic upper asymptote");
    cmd->add_option("--psi", opt.logistic_psi, "Logistic inverse growth rate");
    cmd->add_option("--t", opt.logistic_t,
                    "Logistic location: 'auto' (mean training diversity) or a number");
    cmd->add_option("--dirichlet-alpha", opt.dirichlet_alpha,
                    "Alpha for the Dirichlet entropy estimator");
}

void add_output_options(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--out", opt.out_dir, "Output directory (or env DIVREC_OUT)");
    cmd->add_option("--threads", opt.threads, "Worker thread cap (or env DIVREC_THREADS)");
}

std::string resolve_out_dir(const CommonOptions& opt) {
    std::string dir = opt.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("DIVREC_OUT")) dir = env;
    }
    if (dir.empty()) throw divrec::InputError("no output directory: pass --out or set DIVREC_OUT");
    std::filesystem::create_directories(dir);
    return dir;
}

int resolve_threads(const CommonOptions& opt) {
    return opt.threads >= 1 ? opt.threads : divrec::default_threads();
}

std::string out_file(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

divrec::SplitOptions split_options(const CommonOptions& opt) {
    divrec::SplitOptions s;
    s.mode = opt.split_mode == "longitudinal" ? divrec::SplitMode::Longitudinal
                                              : divrec::SplitMode::Random;
    s.train_fraction = opt.train_fraction;
    s.seed = opt.seed;
    if (!opt.boundary.empty()) {
        auto ts = divrec::parse_iso8601_utc(opt.boundary);
        if (!ts) throw divrec::InputError("invalid --boundary timestamp: " + opt.boundary);
        s.boundary = *ts;
    }
    return s;
}

json config_json(const std::string& subcommand, const CommonOptions& opt,
                 const std::string& out_dir) {
    json j;
    j["subcommand"] = subcommand;
    j["traffic"] = opt.traffic;
    j["survey"] = opt.survey;
    j["scores"] = opt.scores;
    j["slants"] = opt.slants;
    j["min_visitors"] = opt.min_visitors;
    j["split"] = opt.split_mode;
    j["train_fraction"] = opt.train_fraction;
    j["seed"] = opt.seed;
    j["boundary"] = opt.boundary;
    j["kernel"] = opt.kernel;
    j["neighbors"] = opt.neighbors;
    j["metric"] = opt.metric;
    j["level"] = opt.level;
    j["logistic_a"] = opt.logistic_a;
    j["logistic_psi"] = opt.logistic_psi;
    j["logistic_t"] = opt.logistic_t;
    j["dirichlet_alpha"] = opt.dirichlet_alpha;
    j["out"] = out_dir;
    return j;
}

void write_config(const json& j, const std::string& dir) {
    std::ofstream out(out_file(dir, "run_config.json"));
    if (!out) throw divrec::InputError("cannot write run_config.json");
    out << j.dump(1) << '\n';
}

// Everything the analysis subcommands share: panel, split, similarity table,
// ranking inputs, per-user candidate sets.
struct Pipeline {
    divrec::PanelDataset panel;
    divrec::RatingsMatrix matrix;
    divrec::SimilarityTable table;
    divrec::RankingInputs inputs;
    std::vector<divrec::UserCandidates> users;
    double resolved_t = 0.0;
};

Pipeline build_pipeline(const CommonOptions& opt) {
    Pipeline p;
    std::optional<std::string> slants;
    if (!opt.slants.empty()) slants = opt.slants;
    p.panel = divrec::load_panel(opt.traffic, opt.survey, opt.scores, slants, opt.min_visitors);
    p.matrix = divrec::split(p.panel, split_options(opt));
    const auto kernel = divrec::kernel_from_name(opt.kernel);
    const int threads = resolve_threads(opt);
    p.table = divrec::SimilarityTable::build(p.matrix, *kernel, threads);

    std::optional<double> pinned_t;
    if (opt.logistic_t != "auto") {
        auto v = divrec::parse_double(opt.logistic_t);
        if (!v) throw divrec::InputError("--t must be 'auto' or a number");
        pinned_t = *v;
    }
    p.inputs = divrec::make_ranking_inputs(
        p.panel, p.matrix, p.table, opt.neighbors, *divrec::metric_from_name(opt.metric),
        *divrec::level_from_name(opt.level), pinned_t, opt.logistic_a, opt.logistic_psi,
        opt.dirichlet_alpha);
    p.resolved_t = p.inputs.logistic.t;
    p.users = divrec::candidates_for_all_users(p.inputs, threads);
    return p;
}

std::vector<divrec::Algorithm> parse_algorithms(const std::string& csv) {
    std::vector<divrec::Algorithm> algos;
    for (const auto& name : divrec::split_csv_line(csv)) {
        auto a = divrec::algorithm_from_name(name);
        if (!a) throw divrec::InputError("unknown algorithm `" + name + "`");
        algos.push_back(*a);
    }
    if (algos.empty()) throw divrec::InputError("--algo list is empty");
    return algos;
}

std::vector<std::optional<double>> slant_by_domain(const divrec::PanelDataset& panel) {
    std::vector<std::optional<double>> out(panel.domains.size());
    for (std::uint32_t d = 0; d < panel.domains.size(); ++d) out[d] = panel.slant_for(d);
    return out;
}

int run_simulate(const divrec::SynthConfig& cfg, const CommonOptions& opt) {
    const std::string dir = resolve_out_dir(opt);
    divrec::generate(cfg, dir);
    json j;
    j["subcommand"] = "simulate";
    j["n_users"] = cfg.n_users;
    j["n_domains"] = cfg.n_domains;
    j["seed"] = cfg.seed;
    j["n_waves"] = cfg.n_waves;
    j["beta0"] = cfg.beta0;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["noise_sd"] = cfg.noise_sd;
    j["score_coverage"] = cfg.score_coverage;
    j["slant_coverage"] = cfg.slant_coverage;
    j["symmetric_slants"] = cfg.symmetric_slants;
    j["out"] = dir;
    write_config(j, dir);
    return 0;
}

int run_ingest(const CommonOptions& opt) {
    const std::string dir = resolve_out_dir(opt);
    std::optional<std::string> slants;
    if (!opt.slants.empty()) slants = opt.slants;
    auto panel = divrec::load_panel(opt.traffic, opt.survey, opt.scores, slants,
                                    opt.min_visitors);
    auto matrix = divrec::split(panel, split_options(opt));
    divrec::write_panel_json(panel, out_file(dir, "panel.json"));
    divrec::write_ratings_csv(matrix, out_file(dir, "ratings.csv"));
    write_config(config_json("ingest", opt, dir), dir);
    return 0;
}

int run_diversity(const CommonOptions& opt, bool restrict_to_train) {
    const std::string dir = resolve_out_dir(opt);
    std::optional<std::string> slants;
    if (!opt.slants.empty()) slants = opt.slants;
    auto panel = divrec::load_panel(opt.traffic, opt.survey, opt.scores, slants,
                                    opt.min_visitors);
    std::vector<std::optional<divrec::AudienceProfile>> profiles;
    if (restrict_to_train) {
        auto matrix = divrec::split(panel, split_options(opt));
        profiles = divrec::profile_domains_train(matrix);
    } else {
        profiles = divrec::profile_domains(panel);
    }
    divrec::CsvWriter w(out_file(dir, "diversity.csv"));
    w.row({"domain", "metric", "level", "value", "mean_partisanship", "extremity", "n_users",
           "n_pageviews"});
    for (std::uint32_t d = 0; d < profiles.size(); ++d) {
        if (!profiles[d]) continue;
        for (int m = 0; m < 6; ++m) {
            for (int l = 0; l < 2; ++l) {
                const auto metric = static_cast<divrec::DiversityMetric>(m);
                const auto level = static_cast<divrec::WeightLevel>(l);
                const auto v = divrec::compute_diversity(*profiles[d], metric, level,
                                                         opt.dirichlet_alpha);
                w.row({panel.domains[d], divrec::metric_name(metric), divrec::level_name(level),
                       divrec::fmt_double(v.value), divrec::fmt_double(v.mean_partisanship),
                       divrec::fmt_double(v.extremity),
                       divrec::fmt_int(profiles[d]->n_users()),
                       divrec::fmt_double(profiles[d]->total_mass())});
            }
        }
    }
    w.close();
    auto j = config_json("diversity", opt, dir);
    j["restrict_to_train"] = restrict_to_train;
    write_config(j, dir);
    return 0;
}

int run_recommend(const CommonOptions& opt, const std::string& algo_csv) {
    const std::string dir = resolve_out_dir(opt);
    auto pipeline = build_pipeline(opt);
    const auto algos = parse_algorithms(algo_csv);
    divrec::CsvWriter w(out_file(dir, "recommendations.csv"));
    w.row({"user_id", "algorithm", "rank", "domain", "rating"});
    for (const auto& cand : pipeline.users) {
        for (auto algo : algos) {
            const auto list = divrec::make_list(cand, algo, pipeline.inputs);
            for (std::size_t r = 0; r < list.entries.size(); ++r) {
                w.row({pipeline.matrix.user_ids[cand.user], divrec::algorithm_name(algo),
                       divrec::fmt_int(static_cast<std::int64_t>(r + 1)),
                       pipeline.matrix.domains[list.entries[r].domain],
                       divrec::fmt_double(list.entries[r].rating)});
            }
        }
    }
    w.close();
    auto j = config_json("recommend", opt, dir);
    j["algo"] = algo_csv;
    j["resolved_t"] = pipeline.resolved_t;
    write_config(j, dir);
    return 0;
}

int run_evaluate(const CommonOptions& opt, const std::string& algo_csv, std::size_t k_max,
                 std::size_t min_bin_users, bool no_cap) {
    const std::string dir = resolve_out_dir(opt);
    auto pipeline = build_pipeline(opt);
    const auto algos = parse_algorithms(algo_csv);
    divrec::CsvWriter w(out_file(dir, "per_k_report.csv"));
    w.row({"algorithm", "k", "n_users", "trust_mean", "trust_mean_se", "trust_binary",
           "trust_binary_se", "precision", "precision_se", "rmse", "rmse_se"});
    for (auto algo : algos) {
        const auto bins =
            divrec::bin_over_users(pipeline.users, algo, pipeline.inputs, k_max, min_bin_users);
        for (const auto& bin : bins) {
            if (bin.n_users == 0) continue;
            if (bin.capped && !no_cap) continue;
            w.row({divrec::algorithm_name(algo), divrec::fmt_int(static_cast<std::int64_t>(bin.k)),
                   divrec::fmt_int(static_cast<std::int64_t>(bin.n_users)),
                   divrec::fmt_double(bin.trust_mean), divrec::fmt_double(bin.trust_mean_se),
                   divrec::fmt_double(bin.trust_binary), divrec::fmt_double(bin.trust_binary_se),
                   divrec::fmt_double(bin.precision), divrec::fmt_double(bin.precision_se),
                   divrec::fmt_double(bin.rmse), divrec::fmt_double(bin.rmse_se)});
        }
    }
    w.close();
    auto j = config_json("evaluate", opt, dir);
    j["algo"] = algo_csv;
    j["k_max"] = k_max;
    j["min_bin_users"] = min_bin_users;
    j["no_cap"] = no_cap;
    j["resolved_t"] = pipeline.resolved_t;
    write_config(j, dir);
    return 0;
}

int run_deltaq(const CommonOptions& opt, const std::string& algo_csv, double alpha) {
    const std::string dir = resolve_out_dir(opt);
    auto pipeline = build_pipeline(opt);
    const auto algos = parse_algorithms(algo_csv);
    divrec::CsvWriter w(out_file(dir, "delta_q.csv"));
    w.row({"user_id", "algorithm", "delta_q", "k", "alpha"});
    for (const auto& cand : pipeline.users) {
        const auto baseline = divrec::make_list(cand, divrec::Algorithm::ActualVisits,
                                                pipeline.inputs);
        for (auto algo : algos) {
            const auto rec = divrec::make_list(cand, algo, pipeline.inputs);
            const auto dq = divrec::delta_q(rec, baseline, pipeline.inputs.domain_scores, alpha);
            w.row({pipeline.matrix.user_ids[cand.user], divrec::algorithm_name(algo),
                   divrec::fmt_double(dq.delta_q),
                   divrec::fmt_int(static_cast<std::int64_t>(dq.k)),
                   divrec::fmt_double(alpha)});
        }
    }
    w.close();
    auto j = config_json("deltaq", opt, dir);
    j["algo"] = algo_csv;
    j["alpha"] = alpha;
    write_config(j, dir);
    return 0;
}

int run_stratify(const CommonOptions& opt, const std::string& algo_csv, double alpha) {
    const std::string dir = resolve_out_dir(opt);
    auto pipeline = build_pipeline(opt);
    const auto algos = parse_algorithms(algo_csv);

    std::vector<divrec::DeltaQResult> results;
    for (const auto& cand : pipeline.users) {
        const auto baseline = divrec::make_list(cand, divrec::Algorithm::ActualVisits,
                                                pipeline.inputs);
        for (auto algo : algos) {
            const auto rec = divrec::make_list(cand, algo, pipeline.inputs);
            results.push_back(
                divrec::delta_q(rec, baseline, pipeline.inputs.domain_scores, alpha));
        }
    }
    const auto stats = divrec::compute_user_statistics(pipeline.panel, pipeline.matrix,
                                                       pipeline.table, opt.neighbors);
    divrec::CsvWriter w(out_file(dir, "stratified.csv"));
    w.row({"key", "stratum", "algorithm", "mean_delta_q", "sem", "n_users"});
    using divrec::StratumKey;
    for (auto key : {StratumKey::SlantTercile, StratumKey::PartyId, StratumKey::AbsSlantTercile,
                     StratumKey::ActivityTercile, StratumKey::NDomainsTercile,
                     StratumKey::NeighborSimTercile, StratumKey::BaselineTrustTercile}) {
        if ((key == StratumKey::SlantTercile || key == StratumKey::AbsSlantTercile) &&
            pipeline.panel.slants.empty()) {
            continue;  // slant keys need the external slant file
        }
        const auto strata = divrec::stratify(stats, key);
        for (const auto& row : divrec::stratified_delta_q(strata, key, results)) {
            w.row({row.key, row.stratum, divrec::algorithm_name(row.algorithm),
                   divrec::fmt_double(row.mean_delta_q), divrec::fmt_double(row.sem),
                   divrec::fmt_int(static_cast<std::int64_t>(row.n_users))});
        }
    }
    w.close();
    auto j = config_json("stratify", opt, dir);
    j["algo"] = algo_csv;
    j["alpha"] = alpha;
    write_config(j, dir);
    return 0;
}

int run_nulltest(const CommonOptions& opt, std::size_t k, std::size_t replicates) {
    const std::string dir = resolve_out_dir(opt);
    auto pipeline = build_pipeline(opt);
    const auto result = divrec::resampling_null(pipeline.users, pipeline.inputs, k, replicates,
                                                opt.seed, resolve_threads(opt));
    json j;
    j["k"] = result.k;
    j["replicates"] = result.replicates;
    j["n_users"] = result.n_users;
    j["observed_precision"] = result.observed_precision;
    j["p_plus_one"] = result.p_plus_one;
    j["p_raw"] = result.p_raw;
    j["replicate_precision"] = result.replicate_precision;
    std::ofstream out(out_file(dir, "nulltest.json"));
    if (!out) throw divrec::InputError("cannot write nulltest.json");
    out << j.dump(1) << '\n';
    auto cfg = config_json("nulltest", opt, dir);
    cfg["k"] = k;
    cfg["replicates"] = replicates;
    write_config(cfg, dir);
    return 0;
}

int run_fairness(const CommonOptions& opt, std::size_t fp_k_max) {
    const std::string dir = resolve_out_dir(opt);
    if (opt.slants.empty()) {
        throw divrec::InputError("fairness analysis requires --slants");
    }
    auto pipeline = build_pipeline(opt);
    const auto rows = divrec::false_positive_rates(pipeline.users, pipeline.inputs,
                                                   slant_by_domain(pipeline.panel), fp_k_max);
    divrec::CsvWriter w(out_file(dir, "fairness.csv"));
    w.row({"k", "side", "rate_mean", "rate_se", "n_users", "welch_t", "p_raw", "p_bonferroni"});
    for (const auto& row : rows) {
        w.row({divrec::fmt_int(static_cast<std::int64_t>(row.k)),
               row.right_side ? "right" : "left", divrec::fmt_double(row.rate_mean),
               divrec::fmt_double(row.rate_se),
               divrec::fmt_int(static_cast<std::int64_t>(row.n_users)),
               divrec::fmt_double(row.welch_t), divrec::fmt_double(row.p_raw),
               divrec::fmt_double(row.p_bonferroni)});
    }
    w.close();
    auto j = config_json("fairness", opt, dir);
    j["fp_k_max"] = fp_k_max;
    write_config(j, dir);
    return 0;
}

int run_stats(const CommonOptions& opt) {
    const std::string dir = resolve_out_dir(opt);
    std::optional<std::string> slants;
    if (!opt.slants.empty()) slants = opt.slants;
    auto panel = divrec::load_panel(opt.traffic, opt.survey, opt.scores, slants,
                                    opt.min_visitors);
    const auto obs = divrec::domain_observations(panel, opt.dirichlet_alpha);
    if (obs.size() < 5) throw divrec::ComputeError("too few scored domains for analysis");

    using Obs = divrec::DomainObservation;
    auto column = [&](const std::function<double(const Obs&)>& getter,
                      const std::function<bool(const Obs&)>& filter) {
        std::vector<double> out;
        for (const auto& o : obs) {
            if (filter(o)) out.push_back(getter(o));
        }
        return out;
    };
    const std::function<bool(const Obs&)> all = [](const Obs&) { return true; };
    const std::function<bool(const Obs&)> rep = [](const Obs& o) { return o.republican; };
    const std::function<bool(const Obs&)> dem = [](const Obs& o) {
        return !o.republican && o.mean_partisanship != 4.0;
    };

    divrec::CsvWriter cw(out_file(dir, "correlations.csv"));
    cw.row({"analysis", "x", "y", "control", "r", "p", "n"});
    auto correlate = [&](const std::string& analysis, const std::string& xname,
                         const std::function<double(const Obs&)>& xget,
                         const std::string& control,
                         const std::function<bool(const Obs&)>& filter) {
        auto x = column(xget, filter);
        auto y = column([](const Obs& o) { return o.reliability; }, filter);
        try {
            divrec::CorrelationResult res;
            if (control.empty()) {
                res = divrec::pearson(x, y);
            } else if (control == "mean_partisanship") {
                res = divrec::partial_correlation(
                    x, y, column([](const Obs& o) { return o.mean_partisanship; }, filter));
            } else if (control == "extremity") {
                res = divrec::partial_correlation(
                    x, y, column([](const Obs& o) { return o.extremity; }, filter));
            } else if (control == "log_users") {
                res = divrec::partial_correlation(
                    x, y, column([](const Obs& o) { return o.log_users; }, filter));
            } else {
                res = divrec::partial_correlation(
                    x, y, column([](const Obs& o) { return o.log_pageviews; }, filter));
            }
            cw.row({analysis, xname, "reliability", control, divrec::fmt_double(res.r),
                    divrec::fmt_double(res.p),
                    divrec::fmt_int(static_cast<std::int64_t>(res.n))});
        } catch (const divrec::InputError&) {
            // subset too small or degenerate; skip the row
        } catch (const divrec::ComputeError&) {
        }
    };

    correlate("popularity_reliability_all", "log_users",
              [](const Obs& o) { return o.log_users; }, "", all);
    correlate("popularity_reliability_all", "log_pageviews",
              [](const Obs& o) { return o.log_pageviews; }, "", all);
    correlate("popularity_reliability_dem", "log_users",
              [](const Obs& o) { return o.log_users; }, "", dem);
    correlate("popularity_reliability_dem", "log_pageviews",
              [](const Obs& o) { return o.log_pageviews; }, "", dem);
    correlate("popularity_reliability_rep", "log_users",
              [](const Obs& o) { return o.log_users; }, "", rep);
    correlate("popularity_reliability_rep", "log_pageviews",
              [](const Obs& o) { return o.log_pageviews; }, "", rep);

    for (int m = 0; m < 6; ++m) {
        for (int l = 0; l < 2; ++l) {
            const std::string name =
                std::string(divrec::metric_name(static_cast<divrec::DiversityMetric>(m))) +
                "_" + divrec::level_name(static_cast<divrec::WeightLevel>(l));
            const std::function<double(const Obs&)> get = [m, l](const Obs& o) {
                return o.diversity[m][l];
            };
            correlate("diversity_reliability", name, get, "", all);
            correlate("diversity_reliability", name, get, "mean_partisanship", all);
            correlate("diversity_reliability", name, get, "extremity", all);
        }
    }

    correlate("diversity_reliability_pop_control", "variance_user",
              [](const Obs& o) { return o.diversity[0][0]; }, "log_users", all);
    correlate("diversity_reliability_pop_control", "variance_pageview",
              [](const Obs& o) { return o.diversity[0][1]; }, "log_pageviews", all);

    {
        auto vu = column([](const Obs& o) { return o.diversity[0][0]; }, all);
        auto vp = column([](const Obs& o) { return o.diversity[0][1]; }, all);
        auto nu = column([](const Obs& o) { return o.n_users; }, all);
        auto np = column([](const Obs& o) { return o.n_pageviews; }, all);
        auto emit = [&](const std::string& xname, const std::vector<double>& x,
                        const std::string& yname, const std::vector<double>& y) {
            try {
                const auto res = divrec::pearson(x, y);
                cw.row({"diversity_popularity", xname, yname, "", divrec::fmt_double(res.r),
                        divrec::fmt_double(res.p),
                        divrec::fmt_int(static_cast<std::int64_t>(res.n))});
            } catch (const divrec::InputError&) {
            }
        };
        emit("variance_user", vu, "n_users", nu);
        emit("variance_user", vu, "n_pageviews", np);
        emit("variance_pageview", vp, "n_users", nu);
        emit("variance_pageview", vp, "n_pageviews", np);
    }
    cw.close();

    divrec::CsvWriter rw(out_file(dir, "regressions.csv"));
    rw.row({"model", "term", "beta", "se", "p", "r2", "n"});
    auto regress =
        [&](const std::string& model, const std::function<bool(const Obs&)>& filter,
            const std::vector<std::pair<std::string, std::function<double(const Obs&)>>>&
                predictors) {
            std::vector<std::pair<std::string, std::vector<double>>> cols;
            for (const auto& [name, get] : predictors) {
                cols.push_back({name, column(get, filter)});
            }
            auto y = column([](const Obs& o) { return o.reliability; }, filter);
            try {
                const auto res = divrec::ols_standardized(y, cols);
                for (const auto& term : res.terms) {
                    rw.row({model, term.name, divrec::fmt_double(term.beta),
                            divrec::fmt_double(term.se), divrec::fmt_double(term.p),
                            divrec::fmt_double(res.r2),
                            divrec::fmt_int(static_cast<std::int64_t>(res.n))});
                }
            } catch (const divrec::InputError&) {
            } catch (const divrec::ComputeError&) {
            }
        };

    for (int level = 0; level < 2; ++level) {
        const std::string lv = level == 0 ? "user" : "pageview";
        const std::function<double(const Obs&)> getvar = [level](const Obs& o) {
            return o.diversity[0][level];
        };
        regress("q_on_variance_" + lv + "_all", all, {{"variance_" + lv, getvar}});
        regress("q_on_variance_" + lv + "_rep", rep, {{"variance_" + lv, getvar}});
        regress("q_on_variance_" + lv + "_dem", dem, {{"variance_" + lv, getvar}});
        regress("interaction_" + lv, all,
                {{"variance_" + lv, getvar},
                 {"conservative", [](const Obs& o) { return o.republican ? 1.0 : 0.0; }},
                 {"log_users", [](const Obs& o) { return o.log_users; }},
                 {"variance_x_conservative",
                  [getvar](const Obs& o) { return o.republican ? getvar(o) : 0.0; }}});
    }
    rw.close();

    write_config(config_json("stats", opt, dir), dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diversity-aware collaborative filtering engine and evaluation harness"};
    app.require_subcommand(1);

    CommonOptions opt;

    divrec::SynthConfig synth_cfg;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic panel");
    simulate->add_option("--users", synth_cfg.n_users, "Number of panelists");
    simulate->add_option("--domains", synth_cfg.n_domains, "Number of domains");
    simulate->add_option("--seed", synth_cfg.seed, "Generator seed");
    simulate->add_option("--waves", synth_cfg.n_waves, "Traffic waves to emit");
    simulate->add_option("--beta0", synth_cfg.beta0, "Reliability intercept");
    simulate->add_option("--beta1", synth_cfg.beta1, "Diversity slope");
    simulate->add_option("--beta2", synth_cfg.beta2, "Republican interaction slope");
    simulate->add_option("--noise-sd", synth_cfg.noise_sd, "Reliability noise sd");
    simulate->add_option("--score-coverage", synth_cfg.score_coverage,
                         "Fraction of domains with scores");
    simulate->add_option("--slant-coverage", synth_cfg.slant_coverage,
                         "Fraction of domains with slants");
    simulate->add_flag("--symmetric", synth_cfg.symmetric_slants,
                       "Mirror-paired domains with symmetric slants");
    add_output_options(simulate, opt);

    auto* ingest = app.add_subcommand("ingest", "Load panel files; write manifest and ratings");
    add_input_options(ingest, opt);
    add_split_options(ingest, opt);
    add_output_options(ingest, opt);

    bool restrict_to_train = false;
    auto* diversity = app.add_subcommand("diversity", "Audience diversity per domain");
    add_input_options(diversity, opt);
    add_split_options(diversity, opt);
    diversity->add_flag("--restrict-to-train", restrict_to_train,
                        "Profile training-partition pageviews only");
    diversity->add_option("--dirichlet-alpha", opt.dirichlet_alpha,
                          "Alpha for the Dirichlet entropy estimator");
    add_output_options(diversity, opt);

    std::string algo_csv = "cf,cfd,popularity,actual";
    auto* recommend = app.add_subcommand("recommend", "Emit ranked recommendation lists");
    add_input_options(recommend, opt);
    add_split_options(recommend, opt);
    add_recommender_options(recommend, opt);
    recommend->add_option("--algo", algo_csv, "Comma list: cf,cfd,popularity,actual");
    add_output_options(recommend, opt);

    std::size_t k_max = 28, min_bin_users = 100;
    bool no_cap = false;
    auto* evaluate = app.add_subcommand("evaluate", "Per-k trust/precision/RMSE report");
    add_input_options(evaluate, opt);
    add_split_options(evaluate, opt);
    add_recommender_options(evaluate, opt);
    evaluate->add_option("--algo", algo_csv, "Comma list: cf,cfd,popularity,actual");
    evaluate->add_option("--k-max", k_max, "Largest list length to report");
    evaluate->add_option("--min-bin-users", min_bin_users, "Bin population floor");
    evaluate->add_flag("--no-cap", no_cap, "Also emit bins under the population floor");
    add_output_options(evaluate, opt);

    double alpha = 1.0;
    std::string dq_algos = "cf,cfd";
    auto* deltaq = app.add_subcommand("deltaq", "Rank-discounted trust change per user");
    add_input_options(deltaq, opt);
    add_split_options(deltaq, opt);
    add_recommender_options(deltaq, opt);
    deltaq->add_option("--algo", dq_algos, "Comma list of recommenders");
    deltaq->add_option("--alpha", alpha, "Rank-discount exponent");
    add_output_options(deltaq, opt);

    auto* stratify = app.add_subcommand("stratify", "Delta-Q by user stratum");
    add_input_options(stratify, opt);
    add_split_options(stratify, opt);
    add_recommender_options(stratify, opt);
    stratify->add_option("--algo", dq_algos, "Comma list of recommenders");
    stratify->add_option("--alpha", alpha, "Rank-discount exponent");
    add_output_options(stratify, opt);

    std::size_t null_k = 1, replicates = 1000;
    auto* nulltest = app.add_subcommand("nulltest", "Resampling null for CF+D precision");
    add_input_options(nulltest, opt);
    add_split_options(nulltest, opt);
    add_recommender_options(nulltest, opt);
    nulltest->add_option("--k", null_k, "Precision list length");
    nulltest->add_option("--replicates", replicates, "Shuffle replicates");
    add_output_options(nulltest, opt);

    std::size_t fp_k_max = 28;
    auto* fairness = app.add_subcommand("fairness", "Left/right false-positive rates");
    add_input_options(fairness, opt);
    add_split_options(fairness, opt);
    add_recommender_options(fairness, opt);
    fairness->add_option("--fp-k-max", fp_k_max, "Largest k tested (Bonferroni factor)");
    add_output_options(fairness, opt);

    auto* stats = app.add_subcommand("stats", "Observational correlations and regressions");
    add_input_options(stats, opt);
    stats->add_option("--dirichlet-alpha", opt.dirichlet_alpha,
                      "Alpha for the Dirichlet entropy estimator");
    add_output_options(stats, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        nlohmann::json err;
        err["error"] = {{"type", "usage"}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return 1;
    }

    try {
        if (simulate->parsed()) return run_simulate(synth_cfg, opt);
        if (ingest->parsed()) return run_ingest(opt);
        if (diversity->parsed()) return run_diversity(opt, restrict_to_train);
        if (recommend->parsed()) return run_recommend(opt, algo_csv);
        if (evaluate->parsed()) return run_evaluate(opt, algo_csv, k_max, min_bin_users, no_cap);
        if (deltaq->parsed()) return run_deltaq(opt, dq_algos, alpha);
        if (stratify->parsed()) return run_stratify(opt, dq_algos, alpha);
        if (nulltest->parsed()) return run_nulltest(opt, null_k, replicates);
        if (fairness->parsed()) return run_fairness(opt, fp_k_max);
        if (stats->parsed()) return run_stats(opt);
    } catch (const divrec::InputError& e) {
        nlohmann::json err;
        err["error"] = {{"type", "input"}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return 1;
    } catch (const divrec::ComputeError& e) {
        nlohmann::json err;
        err["error"] = {{"type", "compute"}, {"message", e.what()}};
        std::cerr << err.dump() << '\n';
        return 2;
    }
    return 0;
}
