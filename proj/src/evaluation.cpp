#include "divrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "divrec/error.hpp"
#include "divrec/mathx.hpp"
#include "divrec/parallel.hpp"
#include "divrec/rng.hpp"
#include "divrec/stats.hpp"

namespace divrec {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double score_of(const RankedEntry& e, const std::vector<std::optional<double>>& scores) {
    const auto& q = scores[e.domain];
    if (!q) throw ComputeError("ranked list contains an unscored domain");
    return *q;
}

std::size_t clip_k(const RankedList& list, std::size_t k) {
    if (list.entries.empty()) throw InputError("metric on an empty ranked list");
    return std::min(k, list.entries.size());
}

}  // namespace

double trust_mean(const RankedList& list, std::size_t k,
                  const std::vector<std::optional<double>>& scores) {
    k = clip_k(list, k);
    double s = 0.0;
    for (std::size_t r = 0; r < k; ++r) s += score_of(list.entries[r], scores);
    return s / static_cast<double>(k);
}

double trust_binary(const RankedList& list, std::size_t k,
                    const std::vector<std::optional<double>>& scores) {
    k = clip_k(list, k);
    std::size_t good = 0;
    for (std::size_t r = 0; r < k; ++r) {
        if (score_of(list.entries[r], scores) >= 60.0) ++good;
    }
    return static_cast<double>(good) / static_cast<double>(k);
}

double precision_at_k(const RankedList& predicted, const RankedList& actual, std::size_t k) {
    if (predicted.entries.size() != actual.entries.size()) {
        throw InputError("precision requires lists over the same candidate set");
    }
    k = clip_k(predicted, k);
    std::unordered_set<std::uint32_t> top_actual;
    for (std::size_t r = 0; r < k; ++r) top_actual.insert(actual.entries[r].domain);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) {
        if (top_actual.count(predicted.entries[r].domain)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

double rmse_at_k(const RankedList& predicted, const RankedList& actual, std::size_t k) {
    if (predicted.entries.size() != actual.entries.size()) {
        throw InputError("rmse requires lists over the same candidate set");
    }
    k = clip_k(predicted, k);
    double ss = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        const double d = predicted.entries[r].rating - actual.entries[r].rating;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(k));
}

std::vector<double> discount_distribution(std::size_t k, double alpha) {
    if (k < 1) throw InputError("discount distribution needs k >= 1");
    if (alpha < 0.0) throw InputError("discount exponent must be >= 0");
    std::vector<double> p(k);
    double norm = 0.0;
    for (std::size_t r = 1; r <= k; ++r) {
        p[r - 1] = std::pow(static_cast<double>(r), -alpha);
        norm += p[r - 1];
    }
    for (double& v : p) v /= norm;
    return p;
}

DeltaQResult delta_q(const RankedList& rec, const RankedList& baseline,
                     const std::vector<std::optional<double>>& scores, double alpha) {
    if (rec.entries.empty() || baseline.entries.empty()) {
        throw InputError("delta_q on an empty ranked list");
    }
    const std::size_t k = std::min(rec.entries.size(), baseline.entries.size());
    const auto p = discount_distribution(k, alpha);
    double dq = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        dq += p[r] * (score_of(rec.entries[r], scores) - score_of(baseline.entries[r], scores));
    }
    DeltaQResult result;
    result.user = rec.user;
    result.algorithm = rec.algorithm;
    result.delta_q = dq;
    result.k = k;
    result.alpha = alpha;
    return result;
}

namespace {

struct Accumulator {
    std::vector<double> values;
    void add(double v) { values.push_back(v); }
    double mean() const { return mean_of(values); }
    double se() const { return standard_error(values); }
};

}  // namespace

std::vector<PerKBin> bin_over_users(std::span<const UserCandidates> users, Algorithm algorithm,
                                    const RankingInputs& inputs, std::size_t k_max,
                                    std::size_t min_bin_users) {
    const bool has_precision =
        algorithm == Algorithm::CF || algorithm == Algorithm::CFD ||
        algorithm == Algorithm::GlobalPopularity;
    const bool has_rmse = algorithm == Algorithm::CF || algorithm == Algorithm::CFD;

    struct UserLists {
        RankedList rec, actual;
    };
    std::vector<UserLists> lists;
    lists.reserve(users.size());
    for (const auto& cand : users) {
        lists.push_back({make_list(cand, algorithm, inputs),
                         make_list(cand, Algorithm::ActualVisits, inputs)});
    }

    std::vector<PerKBin> bins;
    for (std::size_t k = 1; k <= k_max; ++k) {
        Accumulator tm, tb, pr, rm;
        for (const auto& ul : lists) {
            if (ul.rec.entries.size() < k) continue;
            tm.add(trust_mean(ul.rec, k, inputs.domain_scores));
            tb.add(trust_binary(ul.rec, k, inputs.domain_scores));
            if (has_precision) pr.add(precision_at_k(ul.rec, ul.actual, k));
            if (has_rmse) rm.add(rmse_at_k(ul.rec, ul.actual, k));
        }
        PerKBin bin;
        bin.k = k;
        bin.n_users = tm.values.size();
        bin.capped = bin.n_users < min_bin_users;
        if (bin.n_users == 0) {
            bins.push_back(bin);
            continue;
        }
        bin.trust_mean = tm.mean();
        bin.trust_mean_se = tm.se();
        bin.trust_binary = tb.mean();
        bin.trust_binary_se = tb.se();
        bin.precision = has_precision ? pr.mean() : kNaN;
        bin.precision_se = has_precision ? pr.se() : kNaN;
        bin.rmse = has_rmse ? rm.mean() : kNaN;
        bin.rmse_se = has_rmse ? rm.se() : kNaN;
        bins.push_back(bin);
    }
    return bins;
}

namespace {

// Precision@k of the CF ratings shifted by an arbitrary assignment of the
// user's g terms, without materializing RankedLists.
double shuffled_precision(const UserCandidates& cand, const RankingInputs& inputs,
                          std::span<const double> g, std::size_t k) {
    const std::size_t n = cand.domains.size();
    const auto& domains = inputs.matrix->domains;
    std::vector<std::uint32_t> order(n), actual_order(n);
    std::iota(order.begin(), order.end(), 0);
    std::iota(actual_order.begin(), actual_order.end(), 0);
    auto by_rating = [&](const std::vector<double>& rating) {
        return [&](std::uint32_t a, std::uint32_t b) {
            const double ra = rating[a], rb = rating[b];
            if (ra != rb) return ra > rb;
            return domains[cand.domains[a]] < domains[cand.domains[b]];
        };
    };
    std::vector<double> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = cand.cf_rating[i] + g[i];
    std::sort(order.begin(), order.end(), by_rating(shifted));
    std::sort(actual_order.begin(), actual_order.end(), by_rating(cand.actual_rating));

    std::unordered_set<std::uint32_t> top_actual;
    for (std::size_t r = 0; r < k; ++r) top_actual.insert(actual_order[r]);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) {
        if (top_actual.count(order[r])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace

NullTestResult resampling_null(std::span<const UserCandidates> users,
                               const RankingInputs& inputs, std::size_t k,
                               std::size_t replicates, std::uint64_t seed, int threads) {
    if (k < 1) throw InputError("resampling_null needs k >= 1");
    std::vector<const UserCandidates*> eligible;
    bool any_shufflable = false;
    for (const auto& cand : users) {
        if (cand.domains.size() >= k) {
            eligible.push_back(&cand);
            if (cand.domains.size() >= 2) any_shufflable = true;
        }
    }
    if (eligible.empty() || !any_shufflable) {
        throw InputError("resampling_null: no user has enough candidates to shuffle");
    }

    NullTestResult result;
    result.k = k;
    result.replicates = replicates;
    result.n_users = eligible.size();

    double observed = 0.0;
    for (const auto* cand : eligible) {
        observed += shuffled_precision(*cand, inputs, cand->g_term, k);
    }
    observed /= static_cast<double>(eligible.size());
    result.observed_precision = observed;

    result.replicate_precision.assign(replicates, 0.0);
    parallel_for(replicates, threads, [&](std::size_t rep) {
        Rng rng(Rng::mix(seed, rep));
        std::vector<double> g;
        double acc = 0.0;
        for (const auto* cand : eligible) {
            g = cand->g_term;
            rng.shuffle(g);
            acc += shuffled_precision(*cand, inputs, g, k);
        }
        result.replicate_precision[rep] = acc / static_cast<double>(eligible.size());
    });

    std::size_t ge = 0, gt = 0;
    for (double p : result.replicate_precision) {
        if (p >= observed) ++ge;
        if (p > observed) ++gt;
    }
    result.p_plus_one =
        static_cast<double>(1 + ge) / static_cast<double>(1 + replicates);
    result.p_raw = replicates == 0 ? kNaN
                                   : static_cast<double>(gt) / static_cast<double>(replicates);
    return result;
}

std::vector<FairnessRow> false_positive_rates(std::span<const UserCandidates> users,
                                              const RankingInputs& inputs,
                                              const std::vector<std::optional<double>>& slants,
                                              std::size_t k_max) {
    struct UserTop {
        std::vector<std::uint32_t> cf_order;   // candidate indices by CF rank
        std::vector<std::uint32_t> cfd_order;  // by CF+D rank
        const UserCandidates* cand;
    };
    std::vector<UserTop> tops;
    tops.reserve(users.size());
    for (const auto& cand : users) {
        UserTop t;
        t.cand = &cand;
        const auto cf = make_list(cand, Algorithm::CF, inputs);
        const auto cfd = make_list(cand, Algorithm::CFD, inputs);
        for (const auto& e : cf.entries) t.cf_order.push_back(e.domain);
        for (const auto& e : cfd.entries) t.cfd_order.push_back(e.domain);
        tops.push_back(std::move(t));
    }

    std::vector<FairnessRow> rows;
    for (std::size_t k = 1; k <= k_max; ++k) {
        std::vector<double> left_rates, right_rates;
        for (const auto& t : tops) {
            if (t.cf_order.size() < k) continue;  // same rule as the per-k bins
            const std::size_t kk = k;
            std::unordered_set<std::uint32_t> cfd_top(t.cfd_order.begin(),
                                                      t.cfd_order.begin() + kk);
            std::size_t denom[2] = {0, 0};
            std::size_t excluded[2] = {0, 0};
            for (std::size_t r = 0; r < kk; ++r) {
                const std::uint32_t d = t.cf_order[r];
                const auto& q = inputs.domain_scores[d];
                const auto& s = slants[d];
                if (!q || *q < 60.0 || !s || *s == 0.0) continue;
                const int side = *s > 0.0 ? 1 : 0;
                denom[side] += 1;
                if (!cfd_top.count(d)) excluded[side] += 1;
            }
            if (denom[0] > 0) {
                left_rates.push_back(static_cast<double>(excluded[0]) /
                                     static_cast<double>(denom[0]));
            }
            if (denom[1] > 0) {
                right_rates.push_back(static_cast<double>(excluded[1]) /
                                      static_cast<double>(denom[1]));
            }
        }

        WelchResult welch{kNaN, kNaN, kNaN};
        if (left_rates.size() >= 2 && right_rates.size() >= 2) {
            welch = welch_t_test(left_rates, right_rates);
        }
        const double p_bonf = std::isnan(welch.p)
                                  ? kNaN
                                  : std::min(1.0, welch.p * static_cast<double>(k_max));
        for (int side = 0; side < 2; ++side) {
            const auto& rates = side == 0 ? left_rates : right_rates;
            FairnessRow row;
            row.k = k;
            row.right_side = side == 1;
            row.n_users = rates.size();
            row.rate_mean = rates.empty() ? kNaN : mean_of(rates);
            row.rate_se = standard_error(rates);
            row.welch_t = welch.t;
            row.p_raw = welch.p;
            row.p_bonferroni = p_bonf;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace divrec
