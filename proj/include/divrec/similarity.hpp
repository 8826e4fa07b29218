#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divrec/ingest.hpp"

namespace divrec {

enum class SimilarityKernel { Kendall, Pearson };

const char* kernel_name(SimilarityKernel k);
std::optional<SimilarityKernel> kernel_from_name(const std::string& name);

// Tie-corrected Kendall tau_b via merge-sort inversion counting; NaN when a
// vector is entirely tied.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

// Similarities map the correlation into [0,1]; NaN marks "no similarity"
// (a constant vector carries no preference signal, the pair is excluded).
double kendall_sim(std::span<const double> x, std::span<const double> y);
double pearson_sim(std::span<const double> x, std::span<const double> y);

inline bool is_no_similarity(double sim) { return sim != sim; }

// Dense training-rating row over a fixed domain universe, zero-filled.
std::vector<double> user_vector(const RatingsMatrix& matrix, std::uint32_t user,
                                std::span<const std::uint32_t> universe);

// Precomputed symmetric user-user similarity table over training vectors.
class SimilarityTable {
public:
    static SimilarityTable build(const RatingsMatrix& matrix, SimilarityKernel kernel,
                                 int threads = 1);

    double sim(std::uint32_t a, std::uint32_t b) const { return values_[a * n_ + b]; }
    std::size_t n_users() const { return n_; }
    SimilarityKernel kernel() const { return kernel_; }

private:
    std::size_t n_ = 0;
    SimilarityKernel kernel_ = SimilarityKernel::Kendall;
    std::vector<double> values_;
};

struct Neighbor {
    std::uint32_t user;
    double sim;
};

// The n most similar users holding a training cell for `domain`, similarity
// descending, user id ascending on ties. May be shorter than n; empty when
// nobody rated the domain.
std::vector<Neighbor> neighbors(const RatingsMatrix& matrix, const SimilarityTable& table,
                                std::uint32_t user, std::uint32_t domain, std::size_t n = 10);

// Same, against a precomputed raters-by-domain index (pipeline hot path).
std::vector<Neighbor> neighbors_from_raters(std::span<const std::uint32_t> raters,
                                            const SimilarityTable& table, std::uint32_t user,
                                            std::size_t n);

std::vector<std::vector<std::uint32_t>> raters_by_domain(const RatingsMatrix& matrix);

}  // namespace divrec
