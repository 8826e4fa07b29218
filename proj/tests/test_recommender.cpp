#include <doctest.h>

#include <cmath>
#include <random>

#include "divrec/error.hpp"
#include "divrec/recommender.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace divrec;
using testsupport::CellSpec;

namespace {

// Random split matrix plus score/diversity side data for ranking tests.
struct Scenario {
    RatingsMatrix matrix;
    SimilarityTable table;
    RankingInputs inputs;
    std::vector<std::optional<double>> delta;
};

Scenario make_scenario(std::uint64_t seed, std::size_t n_users = 20, std::size_t n_domains = 15,
                       double a = 1.0, double psi = 1.0, double t = 4.25) {
    std::mt19937_64 eng(seed);
    std::vector<CellSpec> cells;
    for (std::uint32_t u = 0; u < n_users; ++u) {
        for (std::uint32_t d = 0; d < n_domains; ++d) {
            const auto roll = eng() % 10;
            if (roll < 4) continue;
            const double rating = static_cast<double>(eng() % 1000) / 250.0;
            cells.push_back({u, d, rating, roll < 8, static_cast<std::int64_t>(eng() % 9) + 1});
        }
    }
    Scenario s{testsupport::make_matrix(n_users, n_domains, cells), SimilarityTable(), {}, {}};
    s.table = SimilarityTable::build(s.matrix, SimilarityKernel::Kendall, 2);
    s.inputs.matrix = &s.matrix;
    s.inputs.table = &s.table;
    s.inputs.n_neighbors = 10;
    s.inputs.domain_scores.resize(n_domains);
    s.delta.resize(n_domains);
    for (std::uint32_t d = 0; d < n_domains; ++d) {
        s.inputs.domain_scores[d] = static_cast<double>(eng() % 101);
        if (eng() % 8 != 0) s.delta[d] = static_cast<double>(eng() % 900) / 100.0;
    }
    s.inputs.delta_by_domain = s.delta;
    s.inputs.logistic = {a, psi, t};
    s.inputs.popularity = s.matrix.train_visitor_counts();
    s.inputs.raters = raters_by_domain(s.matrix);
    return s;
}

}  // namespace

TEST_CASE("logistic re-ranking term") {
    LogisticParams params{1.0, 1.0, 4.25};
    CHECK(logistic_bump(4.25, params) == doctest::Approx(0.5));
    CHECK(logistic_bump(4.25 + 1.0, params) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(logistic_bump(5.25, params) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(logistic_bump(1e9, params) == doctest::Approx(1.0));
    CHECK(logistic_bump(-1e9, params) == doctest::Approx(0.0));
    CHECK_THROWS_AS(logistic_bump(1.0, LogisticParams{0.0, 1.0, 0.0}), InputError);
    CHECK_THROWS_AS(logistic_bump(1.0, LogisticParams{1.0, -1.0, 0.0}), InputError);
}

TEST_CASE("combine_cf algebra") {
    SUBCASE("single neighbor: weights cancel") {
        std::vector<NeighborRating> hood{{0.8, 5.0, 3.5}};
        CHECK(combine_cf(1.0, hood) == doctest::Approx(1.0 + (5.0 - 3.5)));
    }
    SUBCASE("equal similarities with opposite deviations cancel") {
        std::vector<NeighborRating> hood{{0.6, 2.0 + 0.7, 2.0}, {0.6, 3.0 - 0.7, 3.0}};
        CHECK(combine_cf(1.25, hood) == doctest::Approx(1.25));
    }
    SUBCASE("zero total similarity falls back to the user mean") {
        std::vector<NeighborRating> hood{{0.0, 9.0, 1.0}, {0.0, -2.0, 1.0}};
        CHECK(combine_cf(0.4, hood) == doctest::Approx(0.4));
    }
}

TEST_CASE("predict_cf on a hand-checked panel") {
    // u0 trains on {d0: 1, d2: 2}; u1 on {d0: 2, d1: 5, d2: 4}. Only u1 rated d1.
    auto m = testsupport::make_matrix(2, 3,
                                      {CellSpec{0, 0, 1.0, true}, CellSpec{0, 2, 2.0, true},
                                       CellSpec{0, 1, 1.0, false}, CellSpec{1, 0, 2.0, true},
                                       CellSpec{1, 1, 5.0, true}, CellSpec{1, 2, 4.0, true}});
    auto table = SimilarityTable::build(m, SimilarityKernel::Kendall);
    const auto v = predict_cf(m, table, 0, 1);
    REQUIRE(v);
    // Neighborhood = {u1}: v = mean(1,2) + (5 - mean(2,5,4)) = 1.5 + 4/3.
    CHECK(*v == doctest::Approx(1.5 + 4.0 / 3.0).epsilon(1e-12));

    SUBCASE("no raters means no prediction") {
        auto lonely = testsupport::make_matrix(2, 2, {CellSpec{0, 0, 1.0, true},
                                                      CellSpec{1, 0, 2.0, true}});
        auto t2 = SimilarityTable::build(lonely, SimilarityKernel::Kendall);
        CHECK_FALSE(predict_cf(lonely, t2, 0, 1));
    }
}

TEST_CASE("predict_cf matches a direct-summation oracle") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto s = make_scenario(seed);
        const auto& m = s.matrix;
        for (std::uint32_t u = 0; u < m.n_users(); ++u) {
            for (const auto& cell : m.test[u]) {
                const auto fast = predict_cf(m, *s.inputs.table, u, cell.domain, 10);
                // Oracle: recompute from scratch with plain loops.
                std::vector<std::pair<double, std::uint32_t>> rater_sims;
                for (std::uint32_t v = 0; v < m.n_users(); ++v) {
                    if (v == u || !m.train_cell(v, cell.domain)) continue;
                    const double sim = s.table.sim(u, v);
                    if (!is_no_similarity(sim)) rater_sims.push_back({sim, v});
                }
                std::sort(rater_sims.begin(), rater_sims.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return a.second < b.second;
                          });
                rater_sims.resize(std::min<std::size_t>(10, rater_sims.size()));
                if (rater_sims.empty()) {
                    CHECK_FALSE(fast);
                    continue;
                }
                auto mean_of_user = [&](std::uint32_t w) {
                    double sum = 0.0;
                    for (const auto& c : m.train[w]) sum += c.rating;
                    return m.train[w].empty() ? 0.0
                                              : sum / static_cast<double>(m.train[w].size());
                };
                std::vector<double> sims, ratings, means;
                for (const auto& [sim, v] : rater_sims) {
                    sims.push_back(sim);
                    ratings.push_back(m.train_cell(v, cell.domain)->rating);
                    means.push_back(mean_of_user(v));
                }
                const double expected =
                    oracles::naive_cf(mean_of_user(u), sims, ratings, means);
                REQUIRE(fast);
                CHECK(*fast == doctest::Approx(expected).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("predict_cfd adds the logistic term with neutral fallback") {
    auto s = make_scenario(77);
    const auto& m = s.matrix;
    for (std::uint32_t u = 0; u < m.n_users(); ++u) {
        for (const auto& cell : m.test[u]) {
            const auto cf = predict_cf(m, s.table, u, cell.domain, 10);
            const auto cfd =
                predict_cfd(m, s.table, u, cell.domain, s.delta, s.inputs.logistic, 10);
            if (!cf) {
                CHECK_FALSE(cfd);
                continue;
            }
            REQUIRE(cfd);
            const double delta =
                s.delta[cell.domain] ? *s.delta[cell.domain] : s.inputs.logistic.t;
            CHECK(*cfd == doctest::Approx(*cf + logistic_bump(delta, s.inputs.logistic)));
            if (!s.delta[cell.domain]) {
                CHECK(*cfd == doctest::Approx(*cf + 0.5));  // a/2 with defaults
            }
        }
    }
}

TEST_CASE("rank_for_user") {
    SUBCASE("single usable candidate gives a singleton list") {
        auto m = testsupport::make_matrix(2, 2,
                                          {CellSpec{0, 0, 1.5, true}, CellSpec{1, 0, 2.0, true},
                                           CellSpec{1, 1, 0.5, true}, CellSpec{0, 1, 0.8, false}});
        auto table = SimilarityTable::build(m, SimilarityKernel::Pearson);
        RankingInputs inputs;
        inputs.matrix = &m;
        inputs.table = &table;
        inputs.domain_scores = {std::nullopt, 75.0};
        inputs.delta_by_domain = {std::nullopt, 4.0};
        inputs.logistic = {1.0, 1.0, 4.0};
        inputs.popularity = m.train_visitor_counts();
        inputs.raters = raters_by_domain(m);
        auto list = rank_for_user(inputs, 0, Algorithm::CF);
        REQUIRE(list.entries.size() == 1);
        CHECK(list.entries[0].domain == 1);
    }
    SUBCASE("users sharing candidates keep the same popularity order") {
        auto s = make_scenario(5, 30, 12);
        auto users = candidates_for_all_users(s.inputs);
        REQUIRE(users.size() >= 2);
        for (std::size_t i = 0; i + 1 < users.size(); ++i) {
            const auto a = make_list(users[i], Algorithm::GlobalPopularity, s.inputs);
            const auto b = make_list(users[i + 1], Algorithm::GlobalPopularity, s.inputs);
            // Relative order of any shared pair must match.
            auto rank_of = [](const RankedList& l, std::uint32_t d) -> int {
                for (std::size_t r = 0; r < l.entries.size(); ++r) {
                    if (l.entries[r].domain == d) return static_cast<int>(r);
                }
                return -1;
            };
            for (const auto& ea : a.entries) {
                for (const auto& eb : a.entries) {
                    if (ea.domain == eb.domain) continue;
                    const int ia = rank_of(a, ea.domain), ja = rank_of(a, eb.domain);
                    const int ib = rank_of(b, ea.domain), jb = rank_of(b, eb.domain);
                    if (ib < 0 || jb < 0) continue;
                    CHECK((ia < ja) == (ib < jb));
                }
            }
        }
    }
    SUBCASE("cfd list equals cf ratings plus g, re-sorted") {
        auto s = make_scenario(9);
        auto users = candidates_for_all_users(s.inputs);
        for (const auto& cand : users) {
            const auto cfd = make_list(cand, Algorithm::CFD, s.inputs);
            // Oracle: add g to each cf rating independently, sort with the
            // same tie rule, compare domain sequences.
            std::vector<std::pair<double, std::string>> expect;
            for (std::size_t i = 0; i < cand.domains.size(); ++i) {
                expect.push_back({cand.cf_rating[i] + cand.g_term[i],
                                  s.matrix.domains[cand.domains[i]]});
            }
            std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            REQUIRE(expect.size() == cfd.entries.size());
            for (std::size_t i = 0; i < expect.size(); ++i) {
                CHECK(expect[i].second == s.matrix.domains[cfd.entries[i].domain]);
                CHECK(expect[i].first == doctest::Approx(cfd.entries[i].rating));
            }
        }
    }
}

TEST_CASE("ranking invariances") {
    auto s = make_scenario(13, 25, 14);
    auto users = candidates_for_all_users(s.inputs);
    REQUIRE(!users.empty());

    SUBCASE("constant shift of every g leaves the CF+D order unchanged") {
        for (const auto& cand : users) {
            const auto base = make_list(cand, Algorithm::CFD, s.inputs);
            UserCandidates shifted = cand;
            for (auto& g : shifted.g_term) g += 3.21;
            const auto moved = make_list(shifted, Algorithm::CFD, s.inputs);
            REQUIRE(base.entries.size() == moved.entries.size());
            for (std::size_t i = 0; i < base.entries.size(); ++i) {
                CHECK(base.entries[i].domain == moved.entries[i].domain);
            }
        }
    }
    SUBCASE("constant diversity reduces CF+D to CF") {
        for (const auto& cand : users) {
            UserCandidates flat = cand;
            std::fill(flat.g_term.begin(), flat.g_term.end(), 0.37);
            const auto cf = make_list(flat, Algorithm::CF, s.inputs);
            const auto cfd = make_list(flat, Algorithm::CFD, s.inputs);
            REQUIRE(cf.entries.size() == cfd.entries.size());
            for (std::size_t i = 0; i < cf.entries.size(); ++i) {
                CHECK(cf.entries[i].domain == cfd.entries[i].domain);
            }
        }
    }
    SUBCASE("higher diversity wins between equal CF ratings") {
        UserCandidates cand;
        cand.user = 0;
        cand.domains = {0, 1};
        cand.cf_rating = {1.0, 1.0};
        cand.g_term = {logistic_bump(2.0, s.inputs.logistic),
                       logistic_bump(6.0, s.inputs.logistic)};
        cand.actual_rating = {0.5, 0.25};
        const auto cfd = make_list(cand, Algorithm::CFD, s.inputs);
        CHECK(cfd.entries[0].domain == 1);  // the higher-delta domain
        CHECK(cand.g_term[1] > cand.g_term[0]);  // g strictly increasing
    }
    SUBCASE("reruns are identical") {
        auto again = candidates_for_all_users(s.inputs, 2);
        REQUIRE(again.size() == users.size());
        for (std::size_t i = 0; i < users.size(); ++i) {
            CHECK(users[i].user == again[i].user);
            CHECK(users[i].domains == again[i].domains);
            for (std::size_t j = 0; j < users[i].domains.size(); ++j) {
                CHECK(users[i].cf_rating[j] == again[i].cf_rating[j]);
                CHECK(users[i].g_term[j] == again[i].g_term[j]);
            }
        }
    }
}

TEST_CASE("estimate_logistic_location averages available deltas") {
    std::vector<std::optional<double>> deltas{1.0, std::nullopt, 3.0, 5.0};
    CHECK(estimate_logistic_location(deltas) == doctest::Approx(3.0));
    std::vector<std::optional<double>> none{std::nullopt};
    CHECK_THROWS_AS(estimate_logistic_location(none), ComputeError);
}
