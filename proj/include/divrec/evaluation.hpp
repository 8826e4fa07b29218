#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "divrec/recommender.hpp"

namespace divrec {

// Mean reliability score of the top k entries; k clipped to list length.
double trust_mean(const RankedList& list, std::size_t k,
                  const std::vector<std::optional<double>>& scores);

// Fraction of the top k with score >= 60.
double trust_binary(const RankedList& list, std::size_t k,
                    const std::vector<std::optional<double>>& scores);

double precision_at_k(const RankedList& predicted, const RankedList& actual, std::size_t k);

// Rank-aligned RMSE between the two rating sequences.
double rmse_at_k(const RankedList& predicted, const RankedList& actual, std::size_t k);

// P(r) proportional to r^-alpha over ranks 1..k.
std::vector<double> discount_distribution(std::size_t k, double alpha = 1.0);

struct DeltaQResult {
    std::uint32_t user = 0;
    Algorithm algorithm = Algorithm::CF;
    double delta_q = 0.0;
    std::size_t k = 0;
    double alpha = 1.0;
};

DeltaQResult delta_q(const RankedList& rec, const RankedList& baseline,
                     const std::vector<std::optional<double>>& scores, double alpha = 1.0);

struct PerKBin {
    std::size_t k = 0;
    std::size_t n_users = 0;
    bool capped = false;  // below min_bin_users
    double trust_mean = 0.0, trust_mean_se = 0.0;
    double trust_binary = 0.0, trust_binary_se = 0.0;
    double precision = 0.0, precision_se = 0.0;
    double rmse = 0.0, rmse_se = 0.0;
};

// Per-k means and standard errors over users with >= k candidates.
// precision/rmse are NaN where the algorithm does not define them.
std::vector<PerKBin> bin_over_users(std::span<const UserCandidates> users, Algorithm algorithm,
                                    const RankingInputs& inputs, std::size_t k_max,
                                    std::size_t min_bin_users = 100);

struct NullTestResult {
    std::size_t k = 0;
    std::size_t replicates = 0;
    std::size_t n_users = 0;
    double observed_precision = 0.0;
    std::vector<double> replicate_precision;
    double p_plus_one = 0.0;  // (1 + #{rep >= obs}) / (1 + B)
    double p_raw = 0.0;       // #{rep > obs} / B
};

// Sampling distribution of mean precision@k when each user's logistic terms
// are shuffled across their candidate domains before re-ranking.
NullTestResult resampling_null(std::span<const UserCandidates> users,
                               const RankingInputs& inputs, std::size_t k,
                               std::size_t replicates, std::uint64_t seed, int threads = 1);

struct FairnessRow {
    std::size_t k = 0;
    bool right_side = false;  // false: left (slant < 0), true: right (slant > 0)
    double rate_mean = 0.0;
    double rate_se = 0.0;
    std::size_t n_users = 0;
    double welch_t = 0.0;
    double p_raw = 0.0;
    double p_bonferroni = 0.0;
};

// Per-k false-positive rates of CF+D vs CF for trustworthy left/right-slanted
// domains, with a two-sided Welch test per k (Bonferroni factor = k_max).
std::vector<FairnessRow> false_positive_rates(std::span<const UserCandidates> users,
                                              const RankingInputs& inputs,
                                              const std::vector<std::optional<double>>& slants,
                                              std::size_t k_max = 28);

}  // namespace divrec
