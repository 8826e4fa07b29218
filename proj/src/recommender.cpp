#include "divrec/recommender.hpp"

#include <algorithm>
#include <cmath>

#include "divrec/error.hpp"
#include "divrec/parallel.hpp"

namespace divrec {

double logistic_bump(double delta, const LogisticParams& params) {
    if (!(params.a > 0.0) || !(params.psi > 0.0)) {
        throw InputError("logistic parameters a and psi must be positive");
    }
    return params.a / (1.0 + std::exp(-(delta - params.t) / params.psi));
}

double estimate_logistic_location(const std::vector<std::optional<double>>& delta_by_domain) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& d : delta_by_domain) {
        if (d) {
            sum += *d;
            ++n;
        }
    }
    if (n == 0) throw ComputeError("no training diversity values; cannot estimate t");
    return sum / static_cast<double>(n);
}

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::CF: return "cf";
        case Algorithm::CFD: return "cfd";
        case Algorithm::GlobalPopularity: return "popularity";
        case Algorithm::ActualVisits: return "actual";
    }
    return "cf";
}

std::optional<Algorithm> algorithm_from_name(const std::string& name) {
    if (name == "cf") return Algorithm::CF;
    if (name == "cfd") return Algorithm::CFD;
    if (name == "popularity") return Algorithm::GlobalPopularity;
    if (name == "actual") return Algorithm::ActualVisits;
    return std::nullopt;
}

namespace {

double user_mean_rating(const RatingsMatrix& matrix, std::uint32_t user) {
    const auto& cells = matrix.train[user];
    if (cells.empty()) return 0.0;
    double s = 0.0;
    for (const auto& c : cells) s += c.rating;
    return s / static_cast<double>(cells.size());
}

std::optional<double> predict_from_neighbors(const RatingsMatrix& matrix,
                                             const std::vector<Neighbor>& hood,
                                             std::uint32_t user, std::uint32_t domain) {
    if (hood.empty()) return std::nullopt;
    std::vector<NeighborRating> ratings;
    ratings.reserve(hood.size());
    for (const auto& nb : hood) {
        const RatedCell* cell = matrix.train_cell(nb.user, domain);
        ratings.push_back({nb.sim, cell->rating, user_mean_rating(matrix, nb.user)});
    }
    return combine_cf(user_mean_rating(matrix, user), ratings);
}

}  // namespace

double combine_cf(double own_mean, std::span<const NeighborRating> hood) {
    double weight = 0.0, acc = 0.0;
    for (const auto& nb : hood) {
        acc += nb.sim * (nb.rating - nb.neighbor_mean);
        weight += nb.sim;
    }
    if (weight <= 0.0) return own_mean;  // degenerate: all similarities zero
    return own_mean + acc / weight;
}

std::optional<double> predict_cf(const RatingsMatrix& matrix, const SimilarityTable& table,
                                 std::uint32_t user, std::uint32_t domain, std::size_t n) {
    const auto hood = neighbors(matrix, table, user, domain, n);
    return predict_from_neighbors(matrix, hood, user, domain);
}

std::optional<double> predict_cfd(const RatingsMatrix& matrix, const SimilarityTable& table,
                                  std::uint32_t user, std::uint32_t domain,
                                  const std::vector<std::optional<double>>& delta_by_domain,
                                  const LogisticParams& params, std::size_t n) {
    const auto cf = predict_cf(matrix, table, user, domain, n);
    if (!cf) return std::nullopt;
    const double delta = delta_by_domain[domain] ? *delta_by_domain[domain] : params.t;
    return *cf + logistic_bump(delta, params);
}

RankingInputs make_ranking_inputs(const PanelDataset& panel, const RatingsMatrix& matrix,
                                  const SimilarityTable& table, std::size_t n_neighbors,
                                  DiversityMetric metric, WeightLevel level,
                                  std::optional<double> pinned_t, double a, double psi,
                                  double dirichlet_alpha) {
    RankingInputs inputs;
    inputs.matrix = &matrix;
    inputs.table = &table;
    inputs.n_neighbors = n_neighbors;

    inputs.domain_scores.resize(matrix.n_domains());
    for (std::uint32_t d = 0; d < matrix.n_domains(); ++d) {
        const ScoreRecord* rec = panel.score_for(d);
        if (rec && (rec->category == ScoreCategory::Green || rec->category == ScoreCategory::Red)) {
            inputs.domain_scores[d] = rec->score;
        }
    }

    const auto profiles = profile_domains_train(matrix);
    inputs.delta_by_domain = diversity_by_domain(profiles, metric, level, dirichlet_alpha);

    inputs.logistic.a = a;
    inputs.logistic.psi = psi;
    inputs.logistic.t =
        pinned_t ? *pinned_t : estimate_logistic_location(inputs.delta_by_domain);

    inputs.popularity = matrix.train_visitor_counts();
    inputs.raters = raters_by_domain(matrix);
    return inputs;
}

std::optional<UserCandidates> candidates_for_user(const RankingInputs& inputs,
                                                  std::uint32_t user) {
    const RatingsMatrix& matrix = *inputs.matrix;
    UserCandidates out;
    out.user = user;
    for (const auto& cell : matrix.test[user]) {
        if (!inputs.domain_scores[cell.domain]) continue;
        const auto hood = neighbors_from_raters(inputs.raters[cell.domain], *inputs.table, user,
                                                inputs.n_neighbors);
        const auto cf = predict_from_neighbors(matrix, hood, user, cell.domain);
        if (!cf) continue;  // no neighborhood rating: domain discarded
        out.domains.push_back(cell.domain);
        out.cf_rating.push_back(*cf);
        const auto& delta = inputs.delta_by_domain[cell.domain];
        if (!delta) out.missing_delta += 1;
        out.g_term.push_back(
            logistic_bump(delta ? *delta : inputs.logistic.t, inputs.logistic));
        out.actual_rating.push_back(cell.rating);
    }
    if (out.domains.empty()) return std::nullopt;
    return out;
}

std::vector<UserCandidates> candidates_for_all_users(const RankingInputs& inputs, int threads) {
    const std::size_t n = inputs.matrix->n_users();
    std::vector<std::optional<UserCandidates>> slots(n);
    parallel_for(n, threads, [&](std::size_t u) {
        slots[u] = candidates_for_user(inputs, static_cast<std::uint32_t>(u));
    });
    std::vector<UserCandidates> out;
    for (auto& s : slots) {
        if (s) out.push_back(std::move(*s));
    }
    return out;
}

RankedList make_list(const UserCandidates& candidates, Algorithm algorithm,
                     const RankingInputs& inputs) {
    RankedList list;
    list.user = candidates.user;
    list.algorithm = algorithm;
    const std::size_t n = candidates.domains.size();
    list.entries.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t d = candidates.domains[i];
        double rating = 0.0;
        switch (algorithm) {
            case Algorithm::CF: rating = candidates.cf_rating[i]; break;
            case Algorithm::CFD: rating = candidates.cf_rating[i] + candidates.g_term[i]; break;
            case Algorithm::GlobalPopularity:
                rating = static_cast<double>(inputs.popularity[d]);
                break;
            case Algorithm::ActualVisits: rating = candidates.actual_rating[i]; break;
        }
        list.entries[i] = {d, rating};
    }
    // Rating descending, domain name ascending on ties (reproducible).
    const auto& domains = inputs.matrix->domains;
    std::stable_sort(list.entries.begin(), list.entries.end(),
                     [&](const RankedEntry& a, const RankedEntry& b) {
                         if (a.rating != b.rating) return a.rating > b.rating;
                         return domains[a.domain] < domains[b.domain];
                     });
    return list;
}

RankedList rank_for_user(const RankingInputs& inputs, std::uint32_t user, Algorithm algorithm) {
    const auto candidates = candidates_for_user(inputs, user);
    if (!candidates) {
        RankedList empty;
        empty.user = user;
        empty.algorithm = algorithm;
        return empty;
    }
    return make_list(*candidates, algorithm, inputs);
}

}  // namespace divrec
