#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "divrec/error.hpp"
#include "divrec/evaluation.hpp"
#include "support.hpp"

using namespace divrec;
using testsupport::CellSpec;

namespace {

RankedList list_of(std::vector<std::uint32_t> domains, std::vector<double> ratings,
                   Algorithm alg = Algorithm::CF) {
    RankedList l;
    l.algorithm = alg;
    for (std::size_t i = 0; i < domains.size(); ++i) {
        l.entries.push_back({domains[i], ratings.empty() ? 0.0 : ratings[i]});
    }
    return l;
}

std::vector<std::optional<double>> scores_of(std::vector<double> qs) {
    std::vector<std::optional<double>> out;
    for (double q : qs) out.emplace_back(q);
    return out;
}

}  // namespace

TEST_CASE("trust metrics") {
    const auto scores = scores_of({80.0, 40.0, 60.0});
    const auto list = list_of({0, 1, 2}, {3.0, 2.0, 1.0});
    CHECK(trust_mean(list, 3, scores) == doctest::Approx(60.0));
    CHECK(trust_mean(list, 1, scores) == doctest::Approx(80.0));
    CHECK(trust_mean(list, 99, scores) == doctest::Approx(60.0));  // k clipped
    CHECK(trust_binary(list, 3, scores) == doctest::Approx(2.0 / 3.0));
    CHECK(trust_binary(list, 2, scores) == doctest::Approx(0.5));

    SUBCASE("threshold boundary counts as trustworthy") {
        const auto one = list_of({2}, {1.0});
        CHECK(trust_binary(one, 1, scores) == doctest::Approx(1.0));
    }
    SUBCASE("all trustworthy") {
        const auto all = scores_of({61.0, 99.0});
        CHECK(trust_binary(list_of({0, 1}, {2.0, 1.0}), 2, all) == doctest::Approx(1.0));
    }
    SUBCASE("random lists match a direct sum") {
        std::mt19937_64 eng(3);
        for (int rep = 0; rep < 50; ++rep) {
            const std::size_t n = eng() % 10 + 1;
            std::vector<double> qs(n);
            std::vector<std::uint32_t> doms(n);
            std::iota(doms.begin(), doms.end(), 0);
            for (auto& q : qs) q = static_cast<double>(eng() % 101);
            const std::size_t k = eng() % n + 1;
            double direct = 0.0;
            for (std::size_t r = 0; r < k; ++r) direct += qs[r];
            direct /= static_cast<double>(k);
            CHECK(trust_mean(list_of(doms, {}), k, scores_of(qs)) ==
                  doctest::Approx(direct).epsilon(1e-12));
        }
    }
    SUBCASE("unscored domain in a list is a pipeline bug") {
        std::vector<std::optional<double>> holes{std::nullopt};
        CHECK_THROWS_AS(trust_mean(list_of({0}, {1.0}), 1, holes), ComputeError);
    }
}

TEST_CASE("precision at k") {
    const auto predicted = list_of({0, 1, 2, 3}, {4, 3, 2, 1});
    const auto actual = list_of({1, 4, 0, 2}, {4, 3, 2, 1});
    SUBCASE("mismatched candidate sets rejected") {
        CHECK_THROWS_AS(precision_at_k(predicted, list_of({0}, {1}), 1), InputError);
    }
    const auto actual_same = list_of({1, 3, 0, 2}, {4, 3, 2, 1});
    CHECK(precision_at_k(predicted, actual_same, 2) == doctest::Approx(0.5));  // {0,1} vs {1,3}
    CHECK(precision_at_k(predicted, actual_same, 4) == doctest::Approx(1.0));  // full set
    SUBCASE("symmetric in list roles at fixed k") {
        std::mt19937_64 eng(5);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<std::uint32_t> doms(8);
            std::iota(doms.begin(), doms.end(), 0);
            std::vector<std::uint32_t> a = doms, b = doms;
            std::shuffle(a.begin(), a.end(), eng);
            std::shuffle(b.begin(), b.end(), eng);
            const std::size_t k = eng() % 8 + 1;
            CHECK(precision_at_k(list_of(a, {}), list_of(b, {}), k) ==
                  doctest::Approx(precision_at_k(list_of(b, {}), list_of(a, {}), k)));
        }
    }
}

TEST_CASE("rank-aligned rmse") {
    SUBCASE("identical ratings and order give zero") {
        const auto a = list_of({0, 1}, {3.0, 1.0});
        CHECK(rmse_at_k(a, a, 2) == doctest::Approx(0.0));
    }
    SUBCASE("worked 2x2 example") {
        const auto predicted = list_of({0, 1}, {3.0, 1.0});
        const auto actual = list_of({1, 0}, {4.0, 2.0});
        CHECK(rmse_at_k(predicted, actual, 2) == doctest::Approx(1.0));
    }
    SUBCASE("matches the direct formula on random instances") {
        std::mt19937_64 eng(7);
        for (int rep = 0; rep < 50; ++rep) {
            const std::size_t n = eng() % 8 + 2;
            std::vector<std::uint32_t> doms(n);
            std::iota(doms.begin(), doms.end(), 0);
            std::vector<double> pr(n), ar(n);
            for (std::size_t i = 0; i < n; ++i) {
                pr[i] = static_cast<double>(eng() % 100) / 10.0;
                ar[i] = static_cast<double>(eng() % 100) / 10.0;
            }
            std::sort(pr.rbegin(), pr.rend());
            std::sort(ar.rbegin(), ar.rend());
            const std::size_t k = eng() % n + 1;
            double ss = 0.0;
            for (std::size_t r = 0; r < k; ++r) ss += (pr[r] - ar[r]) * (pr[r] - ar[r]);
            CHECK(rmse_at_k(list_of(doms, pr), list_of(doms, ar), k) ==
                  doctest::Approx(std::sqrt(ss / static_cast<double>(k))).epsilon(1e-12));
        }
    }
}

TEST_CASE("discount distribution") {
    SUBCASE("harmonic normalization at k=3, alpha=1") {
        const auto p = discount_distribution(3, 1.0);
        CHECK(p[0] == doctest::Approx(6.0 / 11.0).epsilon(1e-15));
        CHECK(p[1] == doctest::Approx(3.0 / 11.0).epsilon(1e-15));
        CHECK(p[2] == doctest::Approx(2.0 / 11.0).epsilon(1e-15));
    }
    SUBCASE("alpha=0 is uniform") {
        const auto p = discount_distribution(5, 0.0);
        for (double v : p) CHECK(v == doctest::Approx(0.2));
    }
    SUBCASE("k=50, alpha=1.7 matches a direct sum") {
        const auto p = discount_distribution(50, 1.7);
        double norm = 0.0;
        for (int r = 1; r <= 50; ++r) norm += std::pow(r, -1.7);
        for (int r = 1; r <= 50; ++r) {
            CHECK(p[r - 1] == doctest::Approx(std::pow(r, -1.7) / norm).epsilon(1e-12));
        }
    }
    SUBCASE("sums to one up to k = 10^4 across alphas") {
        for (double alpha : {0.0, 0.5, 1.0, 2.0, 3.0}) {
            for (std::size_t k : {1u, 7u, 100u, 10000u}) {
                const auto p = discount_distribution(k, alpha);
                double s = 0.0;
                for (double v : p) s += v;
                CHECK(std::fabs(s - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("delta q") {
    const auto scores = scores_of({90.0, 30.0});
    SUBCASE("identical rankings give exactly zero") {
        const auto rec = list_of({0, 1}, {2.0, 1.0});
        CHECK(delta_q(rec, rec, scores).delta_q == 0.0);
    }
    SUBCASE("worked example equals 20") {
        const auto rec = list_of({0, 1}, {2.0, 1.0});       // scores 90, 30
        const auto baseline = list_of({1, 0}, {5.0, 4.0});  // scores 30, 90
        const auto result = delta_q(rec, baseline, scores, 1.0);
        CHECK(result.delta_q == doctest::Approx(20.0).epsilon(1e-12));
        CHECK(result.k == 2);
    }
    SUBCASE("matches a direct sum on random users") {
        std::mt19937_64 eng(11);
        for (int rep = 0; rep < 50; ++rep) {
            const std::size_t n = eng() % 6 + 1;
            std::vector<double> qs(n);
            for (auto& q : qs) q = static_cast<double>(eng() % 101);
            std::vector<std::uint32_t> a(n), b(n);
            std::iota(a.begin(), a.end(), 0);
            std::iota(b.begin(), b.end(), 0);
            std::shuffle(a.begin(), a.end(), eng);
            std::shuffle(b.begin(), b.end(), eng);
            const double alpha = static_cast<double>(eng() % 3);
            const auto got = delta_q(list_of(a, {}), list_of(b, {}), scores_of(qs), alpha);
            const auto p = discount_distribution(n, alpha);
            double expected = 0.0;
            for (std::size_t r = 0; r < n; ++r) expected += p[r] * (qs[a[r]] - qs[b[r]]);
            CHECK(got.delta_q == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("invariant under a constant score shift") {
        std::vector<std::uint32_t> a{0, 1, 2}, b{2, 0, 1};
        const auto base =
            delta_q(list_of(a, {}), list_of(b, {}), scores_of({10, 50, 90})).delta_q;
        const auto shifted =
            delta_q(list_of(a, {}), list_of(b, {}), scores_of({20, 60, 100})).delta_q;
        CHECK(base == doctest::Approx(shifted).epsilon(1e-12));
    }
}

namespace {

// Small pipeline fixture shared by bin/null/fairness tests.
struct EvalFixture {
    RatingsMatrix matrix;
    SimilarityTable table;
    RankingInputs inputs;
    std::vector<UserCandidates> users;
    std::vector<std::optional<double>> slants;

    explicit EvalFixture(std::uint64_t seed, std::size_t n_users = 40,
                         std::size_t n_domains = 12) {
        std::mt19937_64 eng(seed);
        std::vector<CellSpec> cells;
        for (std::uint32_t u = 0; u < n_users; ++u) {
            for (std::uint32_t d = 0; d < n_domains; ++d) {
                const auto roll = eng() % 10;
                if (roll < 3) continue;
                cells.push_back({u, d, static_cast<double>(eng() % 1000) / 200.0, roll < 7,
                                 static_cast<std::int64_t>(eng() % 5) + 1});
            }
        }
        matrix = testsupport::make_matrix(n_users, n_domains, cells);
        table = SimilarityTable::build(matrix, SimilarityKernel::Kendall, 2);
        inputs.matrix = &matrix;
        inputs.table = &table;
        inputs.n_neighbors = 10;
        inputs.domain_scores.resize(n_domains);
        inputs.delta_by_domain.resize(n_domains);
        slants.resize(n_domains);
        for (std::uint32_t d = 0; d < n_domains; ++d) {
            inputs.domain_scores[d] = static_cast<double>(eng() % 101);
            inputs.delta_by_domain[d] = static_cast<double>(eng() % 900) / 100.0;
            slants[d] = (d % 2 == 0 ? -1.0 : 1.0) * (static_cast<double>(eng() % 90) / 100.0 + 0.05);
        }
        inputs.logistic = {1.0, 1.0, 4.25};
        inputs.popularity = matrix.train_visitor_counts();
        inputs.raters = raters_by_domain(matrix);
        users = candidates_for_all_users(inputs);
    }
};

}  // namespace

TEST_CASE("bin_over_users") {
    EvalFixture fx(21);
    REQUIRE(!fx.users.empty());

    SUBCASE("single user occupies every bin up to their list length") {
        std::vector<UserCandidates> one{fx.users.front()};
        const std::size_t len = one[0].domains.size();
        const auto bins = bin_over_users(one, Algorithm::CF, fx.inputs, len + 2, 100);
        for (std::size_t k = 1; k <= len; ++k) {
            CHECK(bins[k - 1].n_users == 1);
            CHECK(bins[k - 1].capped);  // below min_bin_users
            CHECK(std::isnan(bins[k - 1].trust_mean_se));
        }
        CHECK(bins[len].n_users == 0);
        CHECK(bins[len + 1].n_users == 0);
    }
    SUBCASE("bin population is non-increasing in k") {
        const auto bins = bin_over_users(fx.users, Algorithm::CFD, fx.inputs, 12, 1);
        for (std::size_t i = 1; i < bins.size(); ++i) {
            CHECK(bins[i].n_users <= bins[i - 1].n_users);
        }
    }
    SUBCASE("bin means match a flat recomputation") {
        const auto bins = bin_over_users(fx.users, Algorithm::CF, fx.inputs, 6, 1);
        for (const auto& bin : bins) {
            if (bin.n_users == 0) continue;
            double tm = 0.0, prec = 0.0;
            std::size_t n = 0;
            for (const auto& cand : fx.users) {
                if (cand.domains.size() < bin.k) continue;
                const auto rec = make_list(cand, Algorithm::CF, fx.inputs);
                const auto act = make_list(cand, Algorithm::ActualVisits, fx.inputs);
                tm += trust_mean(rec, bin.k, fx.inputs.domain_scores);
                prec += precision_at_k(rec, act, bin.k);
                ++n;
            }
            CHECK(n == bin.n_users);
            CHECK(bin.trust_mean == doctest::Approx(tm / n).epsilon(1e-12));
            CHECK(bin.precision == doctest::Approx(prec / n).epsilon(1e-12));
        }
    }
    SUBCASE("popularity carries precision but no rmse; actual carries neither") {
        const auto pop = bin_over_users(fx.users, Algorithm::GlobalPopularity, fx.inputs, 3, 1);
        CHECK_FALSE(std::isnan(pop[0].precision));
        CHECK(std::isnan(pop[0].rmse));
        const auto act = bin_over_users(fx.users, Algorithm::ActualVisits, fx.inputs, 3, 1);
        CHECK(std::isnan(act[0].precision));
        CHECK(std::isnan(act[0].rmse));
    }
}

TEST_CASE("resampling null") {
    EvalFixture fx(33);

    SUBCASE("equal g terms make every replicate reproduce the observation") {
        RankingInputs inputs = fx.inputs;
        auto users = fx.users;
        for (auto& cand : users) {
            std::fill(cand.g_term.begin(), cand.g_term.end(), 0.5);
        }
        const auto result = resampling_null(users, inputs, 1, 200, 42);
        for (double p : result.replicate_precision) {
            CHECK(p == doctest::Approx(result.observed_precision));
        }
        CHECK(result.p_plus_one == doctest::Approx(1.0));
    }
    SUBCASE("plus-one estimator floor") {
        // If the observation beats every replicate, p = 1/(B+1).
        auto users = fx.users;
        const auto result = resampling_null(users, fx.inputs, 1, 1000, 7);
        std::size_t ge = 0;
        for (double p : result.replicate_precision) {
            if (p >= result.observed_precision) ++ge;
        }
        CHECK(result.p_plus_one ==
              doctest::Approx(static_cast<double>(1 + ge) / 1001.0).epsilon(1e-12));
        if (ge == 0) CHECK(result.p_plus_one == doctest::Approx(1.0 / 1001.0));
    }
    SUBCASE("deterministic under seed, across thread counts") {
        const auto a = resampling_null(fx.users, fx.inputs, 2, 100, 99, 1);
        const auto b = resampling_null(fx.users, fx.inputs, 2, 100, 99, 2);
        CHECK(a.observed_precision == b.observed_precision);
        CHECK(a.replicate_precision == b.replicate_precision);
    }
    SUBCASE("degenerate candidate sets are an error") {
        std::vector<UserCandidates> singletons;
        UserCandidates c;
        c.user = 0;
        c.domains = {0};
        c.cf_rating = {1.0};
        c.g_term = {0.5};
        c.actual_rating = {1.0};
        singletons.push_back(c);
        CHECK_THROWS_AS(resampling_null(singletons, fx.inputs, 1, 10, 1), InputError);
    }
}

TEST_CASE("false positive rates") {
    EvalFixture fx(55);

    SUBCASE("identical lists give rate zero everywhere") {
        // Zero-width logistic contribution: g constant, CF == CF+D ordering.
        auto users = fx.users;
        for (auto& cand : users) std::fill(cand.g_term.begin(), cand.g_term.end(), 0.25);
        const auto rows = false_positive_rates(users, fx.inputs, fx.slants, 6);
        for (const auto& row : rows) {
            if (row.n_users == 0) continue;
            CHECK(row.rate_mean == doctest::Approx(0.0));
        }
    }
    SUBCASE("k at full list length cannot exclude anything") {
        const std::size_t k_max = 40;  // far beyond any candidate list here
        const auto rows = false_positive_rates(fx.users, fx.inputs, fx.slants, k_max);
        const auto& last_left = rows[2 * (k_max - 1)];
        const auto& last_right = rows[2 * (k_max - 1) + 1];
        if (last_left.n_users > 0) CHECK(last_left.rate_mean == doctest::Approx(0.0));
        if (last_right.n_users > 0) CHECK(last_right.rate_mean == doctest::Approx(0.0));
    }
    SUBCASE("rows carry the shared per-k Welch test") {
        const auto rows = false_positive_rates(fx.users, fx.inputs, fx.slants, 5);
        REQUIRE(rows.size() == 10);
        for (std::size_t k = 0; k < 5; ++k) {
            CHECK(rows[2 * k].k == k + 1);
            CHECK(rows[2 * k].right_side == false);
            CHECK(rows[2 * k + 1].right_side == true);
            if (!std::isnan(rows[2 * k].p_raw)) {
                CHECK(rows[2 * k].p_raw == rows[2 * k + 1].p_raw);
                CHECK(rows[2 * k].p_bonferroni >= rows[2 * k].p_raw);
            }
        }
    }
}
