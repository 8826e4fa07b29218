#include "divrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "divrec/csv.hpp"
#include "divrec/error.hpp"
#include "divrec/rng.hpp"

namespace divrec {

namespace {

constexpr std::int64_t kEpochBase = 1475280000;  // 2016-10-01T00:00:00Z
constexpr std::int64_t kWaveSpacing = 60 * 86400;
constexpr std::int64_t kWaveLength = 30 * 86400;

std::string padded_id(const char* prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
    return buf;
}

void validate(const SynthConfig& c) {
    if (c.n_users < 50 || c.n_domains < 20) {
        throw InputError("synth config needs n_users >= 50 and n_domains >= 20");
    }
    if (c.n_waves < 1 || c.n_waves > 12) throw InputError("n_waves must be in 1..12");
    if (c.score_coverage < 0.0 || c.score_coverage > 1.0 || c.slant_coverage < 0.0 ||
        c.slant_coverage > 1.0) {
        throw InputError("coverage fractions must be in [0,1]");
    }
    if (c.budget_min < 1 || c.budget_max < c.budget_min) {
        throw InputError("invalid pageview budget range");
    }
    if (!(c.kappa_min > 0.0) || c.kappa_max < c.kappa_min) {
        throw InputError("invalid kappa range");
    }
    if (!(c.budget_exponent > 1.0)) throw InputError("budget exponent must exceed 1");
}

}  // namespace

SynthFiles generate(const SynthConfig& config, const std::string& out_dir) {
    validate(config);
    std::filesystem::create_directories(out_dir);
    Rng rng(config.seed);

    const int n_users = config.n_users;
    const int n_domains = config.n_domains;
    const double beta2 = config.symmetric_slants ? 0.0 : config.beta2;

    // Users: quota sample over a symmetric, mildly bimodal partisanship
    // distribution. Quotas keep the panel's left/right composition exactly
    // balanced; independents absorb the rounding.
    const double party_weights[7] = {0.18, 0.12, 0.08, 0.24, 0.08, 0.12, 0.18};
    std::vector<int> partisanship;
    partisanship.reserve(n_users);
    for (int j = 1; j <= 3; ++j) {
        const int quota = static_cast<int>(n_users * party_weights[j - 1]);
        for (int i = 0; i < quota; ++i) partisanship.push_back(j);
        for (int i = 0; i < quota; ++i) partisanship.push_back(8 - j);
    }
    while (static_cast<int>(partisanship.size()) < n_users) partisanship.push_back(4);
    rng.shuffle(partisanship);

    // Domains: location mu, concentration kappa, base popularity, slant.
    std::vector<double> mu(n_domains), kappa(n_domains), slant(n_domains);
    auto draw_kappa = [&]() {
        if (config.kappa_bimodal) {
            return rng.bernoulli(0.5) ? config.kappa_max : config.kappa_min;
        }
        return config.kappa_min + (config.kappa_max - config.kappa_min) * rng.uniform01();
    };
    if (config.symmetric_slants) {
        for (int d = 0; d + 1 < n_domains; d += 2) {
            const double m = 1.5 + 5.0 * rng.uniform01();
            const double k = draw_kappa();
            const double s =
                std::clamp((m - 4.0) / 3.0 + 0.15 * rng.normal(), -1.5, 1.5);
            mu[d] = m;
            mu[d + 1] = 8.0 - m;
            kappa[d] = kappa[d + 1] = k;
            slant[d] = s;
            slant[d + 1] = -s;
        }
        if (n_domains % 2 == 1) {
            mu[n_domains - 1] = 4.0;
            kappa[n_domains - 1] = draw_kappa();
            slant[n_domains - 1] = 0.0;
        }
    } else {
        for (int d = 0; d < n_domains; ++d) {
            mu[d] = 1.5 + 5.0 * rng.uniform01();
            kappa[d] = draw_kappa();
            slant[d] = std::clamp((mu[d] - 4.0) / 3.0 + 0.15 * rng.normal(), -1.5, 1.5);
        }
    }

    std::vector<double> popularity(n_domains);
    {
        // Zipf weights over a random rank permutation; mirror pairs share.
        const int units = config.symmetric_slants ? (n_domains + 1) / 2 : n_domains;
        std::vector<std::uint32_t> ranks(units);
        std::iota(ranks.begin(), ranks.end(), 0);
        rng.shuffle(ranks);
        for (int i = 0; i < units; ++i) {
            const double w = std::pow(static_cast<double>(ranks[i] + 1), -config.popularity_zipf);
            if (config.symmetric_slants) {
                popularity[2 * i] = w;
                if (2 * i + 1 < n_domains) popularity[2 * i + 1] = w;
            } else {
                popularity[i] = w;
            }
        }
    }

    std::vector<double> depth(n_domains);
    {
        const int units = config.symmetric_slants ? (n_domains + 1) / 2 : n_domains;
        for (int i = 0; i < units; ++i) {
            const double d = std::exp(config.depth_sigma * rng.normal());
            if (config.symmetric_slants) {
                depth[2 * i] = d;
                if (2 * i + 1 < n_domains) depth[2 * i + 1] = d;
            } else {
                depth[i] = d;
            }
        }
    }

    // Taste groups: per-group, per-domain lognormal affinities. Symmetric
    // panels mirror groups in pairs alongside the domain pairs, so the flip
    // (group g <-> g^1, domain d <-> d^1) leaves the panel law unchanged.
    const int n_groups = std::max(1, config.n_taste_groups);
    std::vector<std::vector<double>> taste(n_groups, std::vector<double>(n_domains, 1.0));
    if (config.n_taste_groups > 1) {
        if (config.symmetric_slants) {
            for (int g = 0; g + 1 < n_groups; g += 2) {
                for (int d = 0; d + 1 < n_domains; d += 2) {
                    const double a = std::exp(config.taste_sigma * rng.normal());
                    const double b = std::exp(config.taste_sigma * rng.normal());
                    taste[g][d] = a;
                    taste[g + 1][d + 1] = a;
                    taste[g][d + 1] = b;
                    taste[g + 1][d] = b;
                }
                if (n_domains % 2 == 1) {
                    const double a = std::exp(config.taste_sigma * rng.normal());
                    taste[g][n_domains - 1] = a;
                    taste[g + 1][n_domains - 1] = a;
                }
            }
            if (n_groups % 2 == 1) {
                // Leftover group: self-mirrored affinities.
                for (int d = 0; d + 1 < n_domains; d += 2) {
                    const double a = std::exp(config.taste_sigma * rng.normal());
                    taste[n_groups - 1][d] = a;
                    taste[n_groups - 1][d + 1] = a;
                }
            }
        } else {
            for (int g = 0; g < n_groups; ++g) {
                for (int d = 0; d < n_domains; ++d) {
                    taste[g][d] = std::exp(config.taste_sigma * rng.normal());
                }
            }
        }
    }
    std::vector<int> group_of(n_users);
    for (int u = 0; u < n_users; ++u) group_of[u] = u % n_groups;
    rng.shuffle(group_of);

    // Traffic: per user, heavy-tailed budget allocated over domains by
    // popularity x partisan affinity; draws spread across waves.
    const int id_width = static_cast<int>(std::to_string(std::max(n_users, n_domains)).size());
    std::vector<std::string> user_ids(n_users), domain_names(n_domains);
    for (int u = 0; u < n_users; ++u) user_ids[u] = padded_id("u", u + 1, id_width);
    for (int d = 0; d < n_domains; ++d) {
        domain_names[d] = padded_id("d", d + 1, id_width) + ".example";
    }

    // counts[wave][(user, domain)] -> pageviews
    std::vector<std::map<std::pair<int, int>, std::int64_t>> counts(config.n_waves);
    std::vector<std::vector<char>> visited(n_users, std::vector<char>(n_domains, 0));
    std::vector<double> cdf(n_domains);
    for (int u = 0; u < n_users; ++u) {
        const double su = static_cast<double>(partisanship[u]);
        const auto& group_taste = taste[group_of[u]];
        double acc = 0.0;
        for (int d = 0; d < n_domains; ++d) {
            const double z = (su - mu[d]) / kappa[d];
            // Personal interest: heavy-tailed multiplier per (user, domain).
            const double interest = std::min(
                config.interest_cap,
                std::pow(1.0 - rng.uniform01(), -1.0 / config.interest_tail));
            acc += popularity[d] * std::exp(-0.5 * z * z) * group_taste[d] * interest;
            cdf[d] = acc;
        }
        const double u01 = rng.uniform01();
        const double pareto =
            config.budget_min / std::pow(1.0 - u01, 1.0 / (config.budget_exponent - 1.0));
        const std::int64_t budget =
            std::min<std::int64_t>(config.budget_max, static_cast<std::int64_t>(pareto));
        for (std::int64_t i = 0; i < budget; ++i) {
            const double r = rng.uniform01() * acc;
            const int d = std::min(
                static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin()),
                n_domains - 1);
            const int wave = static_cast<int>(rng.uniform_below(config.n_waves));
            // Each visit event carries 1 + geometric extra pageviews with the
            // domain's characteristic depth.
            const double u01 = rng.uniform01();
            const std::int64_t extra =
                static_cast<std::int64_t>(-depth[d] * std::log(1.0 - u01));
            counts[wave][{u, d}] += 1 + std::min<std::int64_t>(extra, 200);
            visited[u][d] = 1;
        }
    }

    // Realized user-level audience statistics per domain.
    std::vector<double> realized_var(n_domains, 0.0), realized_mean(n_domains, 4.0);
    std::vector<int> realized_visitors(n_domains, 0);
    for (int d = 0; d < n_domains; ++d) {
        std::int64_t n = 0;
        double sum = 0.0;
        for (int u = 0; u < n_users; ++u) {
            if (visited[u][d]) {
                n += 1;
                sum += partisanship[u];
            }
        }
        realized_visitors[d] = static_cast<int>(n);
        if (n == 0) continue;
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (int u = 0; u < n_users; ++u) {
            if (visited[u][d]) ss += (partisanship[u] - mean) * (partisanship[u] - mean);
        }
        realized_mean[d] = mean;
        realized_var[d] = ss / static_cast<double>(n);
    }

    // Reliability scores from the planted model.
    std::vector<double> score(n_domains, 0.0);
    for (int d = 0; d < n_domains; ++d) {
        const double rep = realized_mean[d] > 4.0 ? 1.0 : 0.0;
        const double q = config.beta0 + config.beta1 * realized_var[d] +
                         beta2 * rep * realized_var[d] + config.noise_sd * rng.normal();
        score[d] = std::clamp(q, 0.0, 100.0);
    }

    // Category and file coverage; mirror pairs share the coverage decisions.
    std::vector<std::string> category(n_domains);
    std::vector<char> has_score(n_domains, 0), has_slant(n_domains, 0);
    {
        auto decide = [&](int d) {
            has_score[d] = rng.bernoulli(config.score_coverage) ? 1 : 0;
            has_slant[d] = rng.bernoulli(config.slant_coverage) ? 1 : 0;
            const double c = rng.uniform01();
            if (c < config.satire_fraction) {
                category[d] = "satire";
            } else if (c < config.satire_fraction + config.platform_fraction) {
                category[d] = "platform";
            } else {
                category[d] = score[d] >= 60.0 ? "green" : "red";
            }
        };
        if (config.symmetric_slants) {
            for (int d = 0; d + 1 < n_domains; d += 2) {
                decide(d);
                has_score[d + 1] = has_score[d];
                has_slant[d + 1] = has_slant[d];
                category[d + 1] = category[d] == "green" || category[d] == "red"
                                      ? (score[d + 1] >= 60.0 ? "green" : "red")
                                      : category[d];
            }
            if (n_domains % 2 == 1) decide(n_domains - 1);
        } else {
            for (int d = 0; d < n_domains; ++d) decide(d);
        }
        // Domains with a degenerate audience produce no usable signal.
        for (int d = 0; d < n_domains; ++d) {
            if (realized_visitors[d] < 2) has_score[d] = 0;
        }
    }

    // Emit files.
    SynthFiles files;
    for (int w = 0; w < config.n_waves; ++w) {
        const std::string path =
            (std::filesystem::path(out_dir) / ("traffic_wave" + std::to_string(w + 1) + ".csv"))
                .string();
        CsvWriter writer(path);
        writer.row({"user_id", "domain", "timestamp", "pageviews"});
        const std::int64_t wave_start = kEpochBase + w * kWaveSpacing;
        for (const auto& [key, pv] : counts[w]) {
            const std::int64_t ts =
                wave_start + static_cast<std::int64_t>(rng.uniform_below(kWaveLength));
            writer.row({user_ids[key.first], domain_names[key.second], format_iso8601_utc(ts),
                        fmt_int(pv)});
        }
        writer.close();
        files.traffic_paths.push_back(path);
    }
    {
        files.survey_path = (std::filesystem::path(out_dir) / "survey.csv").string();
        CsvWriter writer(files.survey_path);
        writer.row({"user_id", "partisanship"});
        for (int u = 0; u < n_users; ++u) {
            writer.row({user_ids[u], fmt_int(partisanship[u])});
        }
        writer.close();
    }
    {
        files.scores_path = (std::filesystem::path(out_dir) / "scores.csv").string();
        CsvWriter writer(files.scores_path);
        writer.row({"domain", "score", "category"});
        for (int d = 0; d < n_domains; ++d) {
            if (!has_score[d]) continue;
            writer.row({domain_names[d], fmt_double(score[d]), category[d]});
        }
        writer.close();
    }
    {
        files.slants_path = (std::filesystem::path(out_dir) / "slants.csv").string();
        CsvWriter writer(files.slants_path);
        writer.row({"domain", "slant"});
        for (int d = 0; d < n_domains; ++d) {
            if (!has_slant[d]) continue;
            writer.row({domain_names[d], fmt_double(slant[d])});
        }
        writer.close();
    }
    {
        files.manifest_path = (std::filesystem::path(out_dir) / "manifest.json").string();
        nlohmann::json j;
        j["n_users"] = config.n_users;
        j["n_domains"] = config.n_domains;
        j["seed"] = config.seed;
        j["n_waves"] = config.n_waves;
        j["beta0"] = config.beta0;
        j["beta1"] = config.beta1;
        j["beta2"] = beta2;
        j["noise_sd"] = config.noise_sd;
        j["symmetric_slants"] = config.symmetric_slants;
        j["score_coverage"] = config.score_coverage;
        j["slant_coverage"] = config.slant_coverage;
        int scored = 0;
        for (int d = 0; d < n_domains; ++d) scored += has_score[d];
        j["n_scored_domains"] = scored;
        std::ofstream out(files.manifest_path);
        if (!out) throw InputError("cannot write manifest: " + files.manifest_path);
        out << j.dump(1) << '\n';
    }
    return files;
}

}  // namespace divrec
