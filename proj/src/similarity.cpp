#include "divrec/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "divrec/error.hpp"
#include "divrec/parallel.hpp"

namespace divrec {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Counts pairs i<j with seq[i] > seq[j] (strict inversions) by merge sort.
std::uint64_t count_inversions(std::vector<double>& seq, std::vector<double>& buf) {
    const std::size_t n = seq.size();
    std::uint64_t swaps = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, n);
            const std::size_t hi = std::min(lo + 2 * width, n);
            if (mid >= hi) continue;
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (seq[i] <= seq[j]) {
                    buf[k++] = seq[i++];
                } else {
                    swaps += mid - i;
                    buf[k++] = seq[j++];
                }
            }
            while (i < mid) buf[k++] = seq[i++];
            while (j < hi) buf[k++] = seq[j++];
            std::copy(buf.begin() + lo, buf.begin() + hi, seq.begin() + lo);
        }
    }
    return swaps;
}

std::uint64_t tie_pairs(std::uint64_t run) { return run * (run - 1) / 2; }

}  // namespace

const char* kernel_name(SimilarityKernel k) {
    return k == SimilarityKernel::Kendall ? "kendall" : "pearson";
}

std::optional<SimilarityKernel> kernel_from_name(const std::string& name) {
    if (name == "kendall") return SimilarityKernel::Kendall;
    if (name == "pearson") return SimilarityKernel::Pearson;
    return std::nullopt;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw InputError("kendall_tau_b needs two equal vectors, n >= 2");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    // Tie counts among x and among joint (x, y) runs.
    std::uint64_t xtie = 0, xytie = 0;
    std::size_t run_x = 1, run_xy = 1;
    for (std::size_t i = 1; i < n; ++i) {
        const bool same_x = x[order[i]] == x[order[i - 1]];
        const bool same_xy = same_x && y[order[i]] == y[order[i - 1]];
        if (same_x) {
            ++run_x;
        } else {
            xtie += tie_pairs(run_x);
            run_x = 1;
        }
        if (same_xy) {
            ++run_xy;
        } else {
            xytie += tie_pairs(run_xy);
            run_xy = 1;
        }
    }
    xtie += tie_pairs(run_x);
    xytie += tie_pairs(run_xy);

    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    const std::uint64_t swaps = count_inversions(ys, buf);

    // ys is now sorted; count ties among y.
    std::uint64_t ytie = 0;
    std::size_t run_y = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (ys[i] == ys[i - 1]) {
            ++run_y;
        } else {
            ytie += tie_pairs(run_y);
            run_y = 1;
        }
    }
    ytie += tie_pairs(run_y);

    const std::uint64_t total = tie_pairs(n);
    if (xtie == total || ytie == total) return kNaN;  // a fully tied vector

    const double con_minus_dis = static_cast<double>(total) - static_cast<double>(xtie) -
                                 static_cast<double>(ytie) + static_cast<double>(xytie) -
                                 2.0 * static_cast<double>(swaps);
    const double denom = std::sqrt(static_cast<double>(total - xtie)) *
                         std::sqrt(static_cast<double>(total - ytie));
    return con_minus_dis / denom;
}

double kendall_sim(std::span<const double> x, std::span<const double> y) {
    const double tau = kendall_tau_b(x, y);
    return (tau + 1.0) / 2.0;
}

double pearson_sim(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw InputError("pearson_sim needs two equal vectors, n >= 2");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return kNaN;
    const double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
    return (std::clamp(r, -1.0, 1.0) + 1.0) / 2.0;
}

std::vector<double> user_vector(const RatingsMatrix& matrix, std::uint32_t user,
                                std::span<const std::uint32_t> universe) {
    if (user >= matrix.n_users()) throw InputError("unknown user index");
    std::vector<double> v(universe.size(), 0.0);
    const auto& cells = matrix.train[user];
    std::size_t ci = 0;
    for (std::size_t i = 0; i < universe.size(); ++i) {
        while (ci < cells.size() && cells[ci].domain < universe[i]) ++ci;
        if (ci < cells.size() && cells[ci].domain == universe[i]) v[i] = cells[ci].rating;
    }
    return v;
}

SimilarityTable SimilarityTable::build(const RatingsMatrix& matrix, SimilarityKernel kernel,
                                       int threads) {
    SimilarityTable table;
    table.n_ = matrix.n_users();
    table.kernel_ = kernel;
    table.values_.assign(table.n_ * table.n_, kNaN);

    const auto universe = matrix.train_universe();
    std::vector<std::vector<double>> rows(table.n_);
    parallel_for(table.n_, threads, [&](std::size_t u) {
        rows[u] = user_vector(matrix, static_cast<std::uint32_t>(u), universe);
    });

    // A user vector that is entirely tied (typically all zero) never produces
    // a valid similarity; precompute to skip the pair work.
    std::vector<char> constant(table.n_, 1);
    for (std::size_t u = 0; u < table.n_; ++u) {
        const auto& row = rows[u];
        for (std::size_t i = 1; i < row.size(); ++i) {
            if (row[i] != row[0]) {
                constant[u] = 0;
                break;
            }
        }
        if (row.size() < 2) constant[u] = 1;
    }

    const std::size_t n = table.n_;
    parallel_for(n, threads, [&](std::size_t u) {
        if (constant[u]) return;
        table.values_[u * n + u] = 1.0;
        for (std::size_t v = u + 1; v < n; ++v) {
            if (constant[v]) continue;
            const double s = kernel == SimilarityKernel::Kendall
                                 ? kendall_sim(rows[u], rows[v])
                                 : pearson_sim(rows[u], rows[v]);
            table.values_[u * n + v] = s;
            table.values_[v * n + u] = s;
        }
    });
    return table;
}

std::vector<Neighbor> neighbors_from_raters(std::span<const std::uint32_t> raters,
                                            const SimilarityTable& table, std::uint32_t user,
                                            std::size_t n) {
    std::vector<Neighbor> candidates;
    candidates.reserve(raters.size());
    for (std::uint32_t r : raters) {
        if (r == user) continue;
        const double s = table.sim(user, r);
        if (is_no_similarity(s)) continue;
        candidates.push_back({r, s});
    }
    const std::size_t keep = std::min(n, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                          if (a.sim != b.sim) return a.sim > b.sim;
                          return a.user < b.user;
                      });
    candidates.resize(keep);
    return candidates;
}

std::vector<Neighbor> neighbors(const RatingsMatrix& matrix, const SimilarityTable& table,
                                std::uint32_t user, std::uint32_t domain, std::size_t n) {
    if (n < 1) throw InputError("neighborhood size must be >= 1");
    std::vector<std::uint32_t> raters;
    for (std::uint32_t u = 0; u < matrix.n_users(); ++u) {
        if (matrix.train_cell(u, domain)) raters.push_back(u);
    }
    return neighbors_from_raters(raters, table, user, n);
}

std::vector<std::vector<std::uint32_t>> raters_by_domain(const RatingsMatrix& matrix) {
    std::vector<std::vector<std::uint32_t>> raters(matrix.n_domains());
    for (std::uint32_t u = 0; u < matrix.n_users(); ++u) {
        for (const auto& cell : matrix.train[u]) raters[cell.domain].push_back(u);
    }
    return raters;
}

}  // namespace divrec
