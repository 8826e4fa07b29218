#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divrec/diversity.hpp"
#include "divrec/ingest.hpp"
#include "divrec/similarity.hpp"

namespace divrec {

// g(delta) = a / (1 + exp(-(delta - t) / psi))
struct LogisticParams {
    double a = 1.0;
    double psi = 1.0;
    double t = 0.0;
};

double logistic_bump(double delta, const LogisticParams& params);

// Location t as the mean training-set diversity across domains with a value.
double estimate_logistic_location(const std::vector<std::optional<double>>& delta_by_domain);

enum class Algorithm { CF, CFD, GlobalPopularity, ActualVisits };

const char* algorithm_name(Algorithm a);
std::optional<Algorithm> algorithm_from_name(const std::string& name);

struct RankedEntry {
    std::uint32_t domain = 0;
    double rating = 0.0;  // predicted or observed, by algorithm
};

struct RankedList {
    std::uint32_t user = 0;
    Algorithm algorithm = Algorithm::CF;
    std::vector<RankedEntry> entries;  // rating descending; rank = index + 1
};

// One neighbor's contribution to a CF prediction.
struct NeighborRating {
    double sim = 0.0;
    double rating = 0.0;        // the neighbor's training rating of the domain
    double neighbor_mean = 0.0; // the neighbor's mean training rating
};

// own_mean + sum(sim * (rating - neighbor_mean)) / sum(sim); falls back to
// own_mean when the similarities sum to zero.
double combine_cf(double own_mean, std::span<const NeighborRating> hood);

std::optional<double> predict_cf(const RatingsMatrix& matrix, const SimilarityTable& table,
                                 std::uint32_t user, std::uint32_t domain, std::size_t n = 10);

std::optional<double> predict_cfd(const RatingsMatrix& matrix, const SimilarityTable& table,
                                  std::uint32_t user, std::uint32_t domain,
                                  const std::vector<std::optional<double>>& delta_by_domain,
                                  const LogisticParams& params, std::size_t n = 10);

// Shared inputs for ranking every user; the table and diversity map are
// computed once per (kernel, split).
struct RankingInputs {
    const RatingsMatrix* matrix = nullptr;
    const SimilarityTable* table = nullptr;
    std::size_t n_neighbors = 10;
    // Q for Green/Red domains only, index-aligned with matrix domains.
    std::vector<std::optional<double>> domain_scores;
    std::vector<std::optional<double>> delta_by_domain;
    LogisticParams logistic;
    std::vector<std::int64_t> popularity;  // training distinct-visitor counts
    std::vector<std::vector<std::uint32_t>> raters;  // training raters per domain
};

RankingInputs make_ranking_inputs(const PanelDataset& panel, const RatingsMatrix& matrix,
                                  const SimilarityTable& table, std::size_t n_neighbors,
                                  DiversityMetric metric, WeightLevel level,
                                  std::optional<double> pinned_t, double a = 1.0,
                                  double psi = 1.0, double dirichlet_alpha = 1.0);

// Per-user candidate set: the user's test-set domains that are Green/Red
// scored and have a nonempty training neighborhood. All four ranked lists
// are permutations of this set.
struct UserCandidates {
    std::uint32_t user = 0;
    std::vector<std::uint32_t> domains;  // ascending
    std::vector<double> cf_rating;       // aligned with domains
    std::vector<double> g_term;          // logistic re-ranking term
    std::vector<double> actual_rating;   // observed test rating
    std::size_t missing_delta = 0;       // candidates whose g fell back to a/2
};

std::optional<UserCandidates> candidates_for_user(const RankingInputs& inputs,
                                                  std::uint32_t user);

std::vector<UserCandidates> candidates_for_all_users(const RankingInputs& inputs,
                                                     int threads = 1);

RankedList make_list(const UserCandidates& candidates, Algorithm algorithm,
                     const RankingInputs& inputs);

RankedList rank_for_user(const RankingInputs& inputs, std::uint32_t user, Algorithm algorithm);

}  // namespace divrec
