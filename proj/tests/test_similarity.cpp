#include <doctest.h>

#include <cmath>
#include <random>

#include "divrec/error.hpp"
#include "divrec/similarity.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace divrec;
using testsupport::CellSpec;

namespace {

std::vector<double> tie_heavy_vector(std::mt19937_64& eng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) {
        const auto roll = eng() % 10;
        if (roll < 6) {
            x = 0.0;  // zero-filled like a sparse ratings row
        } else {
            x = static_cast<double>(eng() % 5) * 0.25;
        }
    }
    return v;
}

}  // namespace

TEST_CASE("kendall similarity on monotone patterns") {
    std::vector<double> asc{1, 2, 3};
    std::vector<double> desc{3, 2, 1};
    CHECK(kendall_sim(asc, asc) == doctest::Approx(1.0));
    CHECK(kendall_sim(asc, desc) == doctest::Approx(0.0));
}

TEST_CASE("kendall tau_b matches the pair-counting oracle on tie-heavy vectors") {
    std::mt19937_64 eng(101);
    for (int rep = 0; rep < 300; ++rep) {
        auto x = tie_heavy_vector(eng, 50);
        auto y = tie_heavy_vector(eng, 50);
        const double oracle = oracles::kendall_tau_b_pairs(x, y);
        const double fast = kendall_tau_b(x, y);
        if (std::isnan(oracle)) {
            CHECK(std::isnan(fast));
        } else {
            CHECK(fast == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("kendall is invariant under strictly monotone transforms") {
    std::mt19937_64 eng(103);
    for (int rep = 0; rep < 50; ++rep) {
        auto x = tie_heavy_vector(eng, 30);
        auto y = tie_heavy_vector(eng, 30);
        const double base = kendall_tau_b(x, y);
        auto xt = x;
        for (auto& v : xt) v = v * v * v + 2.0;  // strictly monotone on these values
        const double transformed = kendall_tau_b(xt, y);
        if (std::isnan(base)) {
            CHECK(std::isnan(transformed));
        } else {
            CHECK(transformed == doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("fully tied vectors yield the no-similarity sentinel") {
    std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    std::vector<double> live{1.0, 0.0, 2.0, 3.0};
    CHECK(is_no_similarity(kendall_sim(flat, live)));
    CHECK(is_no_similarity(kendall_sim(live, flat)));
    CHECK(is_no_similarity(pearson_sim(flat, live)));
}

TEST_CASE("pearson similarity") {
    std::vector<double> x{0.0, 1.0, 2.0, 5.0};
    SUBCASE("perfect linear relation") {
        std::vector<double> y;
        for (double v : x) y.push_back(2.0 * v + 1.0);
        CHECK(pearson_sim(x, y) == doctest::Approx(1.0));
    }
    SUBCASE("perfect inverse relation") {
        std::vector<double> y;
        for (double v : x) y.push_back(-v);
        CHECK(pearson_sim(x, y) == doctest::Approx(0.0));
    }
    SUBCASE("matches the direct formula") {
        std::mt19937_64 eng(107);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> a(20), b(20);
            for (std::size_t i = 0; i < a.size(); ++i) {
                a[i] = static_cast<double>(eng() % 1000) / 100.0;
                b[i] = static_cast<double>(eng() % 1000) / 100.0;
            }
            const double expected = (oracles::pearson_direct(a, b) + 1.0) / 2.0;
            CHECK(pearson_sim(a, b) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("positive affine transforms leave it unchanged") {
        std::mt19937_64 eng(109);
        std::vector<double> a(15), b(15);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<double>(eng() % 100);
            b[i] = static_cast<double>(eng() % 100);
        }
        const double base = pearson_sim(a, b);
        auto bt = b;
        for (auto& v : bt) v = 3.5 * v + 11.0;
        CHECK(pearson_sim(a, bt) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("similarity is symmetric and bounded on random sparse vectors") {
    std::mt19937_64 eng(113);
    for (int rep = 0; rep < 100; ++rep) {
        auto x = tie_heavy_vector(eng, 25);
        auto y = tie_heavy_vector(eng, 25);
        for (auto kernel : {SimilarityKernel::Kendall, SimilarityKernel::Pearson}) {
            const auto f = kernel == SimilarityKernel::Kendall ? kendall_sim : pearson_sim;
            const double ab = f(x, y);
            const double ba = f(y, x);
            if (is_no_similarity(ab)) {
                CHECK(is_no_similarity(ba));
                continue;
            }
            CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
        }
    }
}

TEST_CASE("user_vector zero-fills over the training universe") {
    auto m = testsupport::make_matrix(
        2, 3, {CellSpec{0, 1, 0.5, true}, CellSpec{1, 0, 0.3, true}, CellSpec{1, 2, 0.9, true}});
    const auto universe = m.train_universe();
    CHECK(universe == std::vector<std::uint32_t>{0, 1, 2});
    const auto v0 = user_vector(m, 0, universe);
    CHECK(v0 == std::vector<double>{0.0, 0.5, 0.0});

    SUBCASE("a user with no training visits maps to all zeros") {
        auto m2 = testsupport::make_matrix(2, 2, {CellSpec{0, 0, 0.5, true},
                                                  CellSpec{1, 1, 0.25, false}});
        const auto uni = m2.train_universe();
        const auto v1 = user_vector(m2, 1, uni);
        for (double x : v1) CHECK(x == 0.0);
    }
    SUBCASE("nonzero entries round-trip to matrix cells") {
        for (std::uint32_t u = 0; u < 2; ++u) {
            const auto v = user_vector(m, u, universe);
            for (std::size_t i = 0; i < universe.size(); ++i) {
                const auto* cell = m.train_cell(u, universe[i]);
                CHECK(v[i] == (cell ? cell->rating : 0.0));
            }
        }
    }
    SUBCASE("unknown user rejected") {
        CHECK_THROWS_AS(user_vector(m, 9, universe), InputError);
    }
}

TEST_CASE("neighbors ranks raters by similarity with id tie-break") {
    // Four users over four domains; target user 0. Users 1..3 rate domain 3.
    auto m = testsupport::make_matrix(4, 4,
                                      {
                                          CellSpec{0, 0, 1.0, true},
                                          CellSpec{0, 1, 2.0, true},
                                          CellSpec{0, 2, 3.0, true},
                                          CellSpec{1, 0, 2.0, true},
                                          CellSpec{1, 1, 4.0, true},
                                          CellSpec{1, 2, 6.0, true},
                                          CellSpec{1, 3, 1.0, true},
                                          CellSpec{2, 0, 5.0, true},
                                          CellSpec{2, 1, 6.0, true},
                                          CellSpec{2, 2, 7.0, true},
                                          CellSpec{2, 3, 2.0, true},
                                          CellSpec{3, 0, 9.0, true},
                                          CellSpec{3, 1, 4.0, true},
                                          CellSpec{3, 2, 1.0, true},
                                          CellSpec{3, 3, 3.0, true},
                                      });
    auto table = SimilarityTable::build(m, SimilarityKernel::Kendall);

    SUBCASE("only one rater exists") {
        auto m2 = testsupport::make_matrix(
            3, 2,
            {CellSpec{0, 0, 1.0, true}, CellSpec{1, 0, 2.0, true}, CellSpec{1, 1, 5.0, true},
             CellSpec{2, 0, 3.0, true}});
        auto t2 = SimilarityTable::build(m2, SimilarityKernel::Pearson);
        auto hood = neighbors(m2, t2, 0, 1, 10);
        REQUIRE(hood.size() == 1);
        CHECK(hood[0].user == 1);
    }
    SUBCASE("equal similarities break ties by ascending user id") {
        // Users 1 and 2 have identical rating *order*, so their Kendall
        // similarity to user 0 is identical.
        CHECK(table.sim(0, 1) == doctest::Approx(table.sim(0, 2)));
        auto hood = neighbors(m, table, 0, 3, 10);
        REQUIRE(hood.size() == 3);
        CHECK(hood[0].user == 1);
        CHECK(hood[1].user == 2);
    }
    SUBCASE("matches an exhaustive sort oracle on a larger panel") {
        std::mt19937_64 eng(127);
        std::vector<CellSpec> cells;
        for (std::uint32_t u = 0; u < 30; ++u) {
            for (std::uint32_t d = 0; d < 10; ++d) {
                if (eng() % 3 == 0) continue;
                cells.push_back(
                    {u, d, static_cast<double>(eng() % 100) / 10.0, true});
            }
        }
        auto big = testsupport::make_matrix(30, 10, cells);
        auto t = SimilarityTable::build(big, SimilarityKernel::Kendall, 2);
        for (std::uint32_t domain = 0; domain < 10; ++domain) {
            const auto fast = neighbors(big, t, 0, domain, 5);
            // Oracle: collect, sort fully, truncate.
            std::vector<Neighbor> all;
            for (std::uint32_t u = 1; u < 30; ++u) {
                if (!big.train_cell(u, domain)) continue;
                const double s = t.sim(0, u);
                if (!is_no_similarity(s)) all.push_back({u, s});
            }
            std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
                if (a.sim != b.sim) return a.sim > b.sim;
                return a.user < b.user;
            });
            all.resize(std::min<std::size_t>(5, all.size()));
            REQUIRE(fast.size() == all.size());
            for (std::size_t i = 0; i < all.size(); ++i) {
                CHECK(fast[i].user == all[i].user);
                CHECK(fast[i].sim == doctest::Approx(all[i].sim));
            }
        }
    }
}

TEST_CASE("similarity table marks constant users as unusable") {
    auto m = testsupport::make_matrix(3, 3,
                                      {CellSpec{0, 0, 1.0, true}, CellSpec{0, 1, 2.0, true},
                                       CellSpec{1, 0, 2.0, true}, CellSpec{1, 1, 1.0, true}});
    // User 2 has no training cells at all.
    auto table = SimilarityTable::build(m, SimilarityKernel::Kendall);
    CHECK(is_no_similarity(table.sim(0, 2)));
    CHECK(is_no_similarity(table.sim(2, 2)));
    CHECK_FALSE(is_no_similarity(table.sim(0, 1)));
    CHECK(table.sim(0, 0) == doctest::Approx(1.0));
    CHECK(table.sim(0, 1) == doctest::Approx(table.sim(1, 0)));
}
