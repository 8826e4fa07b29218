#include "divrec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "divrec/error.hpp"
#include "divrec/mathx.hpp"

namespace divrec {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double correlation(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw InputError("correlation on a zero-variance vector");
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

double correlation_p(double r, double df) {
    if (df <= 0.0) return kNaN;
    const double r2 = std::min(r * r, 1.0);
    if (r2 >= 1.0) return 0.0;
    const double t = r * std::sqrt(df / (1.0 - r2));
    return student_t_two_sided_p(t, df);
}

}  // namespace

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw InputError("pearson needs two equal vectors, n >= 3");
    }
    const double r = correlation(x, y);
    return {r, correlation_p(r, static_cast<double>(x.size() - 2)), x.size()};
}

CorrelationResult partial_correlation(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> z) {
    if (x.size() != y.size() || x.size() != z.size() || x.size() < 4) {
        throw InputError("partial_correlation needs three equal vectors, n >= 4");
    }
    const double rxy = correlation(x, y);
    const double rxz = correlation(x, z);
    const double ryz = correlation(y, z);
    const double denom2 = (1.0 - rxz * rxz) * (1.0 - ryz * ryz);
    if (denom2 <= 0.0) {
        throw ComputeError("partial correlation undefined: control collinear with a variable");
    }
    const double r = std::clamp((rxy - rxz * ryz) / std::sqrt(denom2), -1.0, 1.0);
    return {r, correlation_p(r, static_cast<double>(x.size() - 3)), x.size()};
}

namespace {

// Solves A x = b for symmetric positive-definite A via Cholesky; throws on
// rank deficiency. A is row-major p x p, modified in place.
std::vector<double> cholesky_solve(std::vector<double>& a, std::vector<double> b,
                                   std::size_t p) {
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
            if (i == j) {
                if (s <= 1e-12) throw ComputeError("design matrix is rank deficient");
                a[i * p + i] = std::sqrt(s);
            } else {
                a[i * p + j] = s / a[j * p + j];
            }
        }
    }
    // Forward then backward substitution.
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= a[i * p + k] * b[k];
        b[i] /= a[i * p + i];
    }
    for (std::size_t i = p; i-- > 0;) {
        for (std::size_t k = i + 1; k < p; ++k) b[i] -= a[k * p + i] * b[k];
        b[i] /= a[i * p + i];
    }
    return b;
}

// Inverse of symmetric positive-definite A (row-major p x p).
std::vector<double> spd_inverse(const std::vector<double>& a, std::size_t p) {
    std::vector<double> inv(p * p, 0.0);
    for (std::size_t col = 0; col < p; ++col) {
        std::vector<double> chol = a;  // cholesky_solve mutates
        std::vector<double> e(p, 0.0);
        e[col] = 1.0;
        auto x = cholesky_solve(chol, std::move(e), p);
        for (std::size_t row = 0; row < p; ++row) inv[row * p + col] = x[row];
    }
    return inv;
}

}  // namespace

OlsResult ols_standardized(std::span<const double> y,
                           const std::vector<std::pair<std::string, std::vector<double>>>&
                               predictors) {
    const std::size_t n = y.size();
    const std::size_t p = predictors.size() + 1;  // + intercept
    if (n <= p) throw InputError("ols needs more observations than parameters");
    for (const auto& [name, col] : predictors) {
        if (col.size() != n) throw InputError("predictor `" + name + "` has wrong length");
    }

    // z-score the predictors (sample sd), leave the response alone.
    std::vector<std::vector<double>> cols(predictors.size());
    for (std::size_t j = 0; j < predictors.size(); ++j) {
        const auto& raw = predictors[j].second;
        const double m = mean_of(raw);
        const double sd = std::sqrt(sample_variance(raw));
        if (sd <= 0.0) {
            throw ComputeError("predictor `" + predictors[j].first + "` has zero variance");
        }
        cols[j].resize(n);
        for (std::size_t i = 0; i < n; ++i) cols[j][i] = (raw[i] - m) / sd;
    }

    auto design = [&](std::size_t i, std::size_t j) -> double {
        return j == 0 ? 1.0 : cols[j - 1][i];
    };

    std::vector<double> xtx(p * p, 0.0), xty(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            const double xij = design(i, j);
            xty[j] += xij * y[i];
            for (std::size_t k = j; k < p; ++k) xtx[j * p + k] += xij * design(i, k);
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < j; ++k) xtx[j * p + k] = xtx[k * p + j];
    }

    const std::vector<double> xtx_saved = xtx;
    const auto beta = cholesky_solve(xtx, xty, p);

    double rss = 0.0, tss = 0.0;
    const double ybar = mean_of(y);
    for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < p; ++j) fit += beta[j] * design(i, j);
        rss += (y[i] - fit) * (y[i] - fit);
        tss += (y[i] - ybar) * (y[i] - ybar);
    }
    const double df = static_cast<double>(n - p);
    const double sigma2 = rss / df;
    const auto inv = spd_inverse(xtx_saved, p);

    OlsResult result;
    result.n = n;
    result.r2 = tss > 0.0 ? 1.0 - rss / tss : kNaN;
    for (std::size_t j = 0; j < p; ++j) {
        OlsTerm term;
        term.name = j == 0 ? "intercept" : predictors[j - 1].first;
        term.beta = beta[j];
        term.se = std::sqrt(sigma2 * inv[j * p + j]);
        term.p = term.se > 0.0 ? student_t_two_sided_p(term.beta / term.se, df) : kNaN;
        result.terms.push_back(std::move(term));
    }
    return result;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw InputError("welch test needs n >= 2 per sample");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a) / na;
    const double vb = sample_variance(b) / nb;
    const double denom = va + vb;
    if (denom <= 0.0) {
        // Identical constants on both sides: no evidence of a difference.
        return {0.0, na + nb - 2.0, 1.0};
    }
    const double t = (mean_of(a) - mean_of(b)) / std::sqrt(denom);
    const double df =
        denom * denom / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    return {t, df, student_t_two_sided_p(t, df)};
}

const char* stratum_key_name(StratumKey k) {
    switch (k) {
        case StratumKey::SlantTercile: return "slant";
        case StratumKey::PartyId: return "party_id";
        case StratumKey::AbsSlantTercile: return "abs_slant";
        case StratumKey::ActivityTercile: return "activity";
        case StratumKey::NDomainsTercile: return "n_domains";
        case StratumKey::NeighborSimTercile: return "neighbor_sim";
        case StratumKey::BaselineTrustTercile: return "baseline_trust";
    }
    return "slant";
}

std::optional<StratumKey> stratum_key_from_name(const std::string& name) {
    if (name == "slant") return StratumKey::SlantTercile;
    if (name == "party_id") return StratumKey::PartyId;
    if (name == "abs_slant") return StratumKey::AbsSlantTercile;
    if (name == "activity") return StratumKey::ActivityTercile;
    if (name == "n_domains") return StratumKey::NDomainsTercile;
    if (name == "neighbor_sim") return StratumKey::NeighborSimTercile;
    if (name == "baseline_trust") return StratumKey::BaselineTrustTercile;
    return std::nullopt;
}

UserStatistics compute_user_statistics(const PanelDataset& panel, const RatingsMatrix& matrix,
                                       const SimilarityTable& table, std::size_t n_neighbors) {
    const std::size_t n = matrix.n_users();
    UserStatistics stats;
    stats.party = matrix.partisanship;
    stats.diet_slant.resize(n);
    stats.diet_abs_slant.resize(n);
    stats.activity.resize(n);
    stats.n_domains.resize(n);
    stats.neighbor_sim.resize(n);
    stats.baseline_trust.resize(n);

    for (std::uint32_t u = 0; u < n; ++u) {
        double slant_sum = 0.0, abs_sum = 0.0;
        std::size_t slanted = 0;
        double activity = 0.0;
        std::size_t visited = 0;

        auto eat = [&](const RatedCell& cell) {
            activity += cell.rating;
            visited += 1;
            if (auto s = panel.slant_for(cell.domain)) {
                slant_sum += *s;
                abs_sum += std::fabs(*s);
                slanted += 1;
            }
        };
        for (const auto& c : matrix.train[u]) eat(c);
        for (const auto& c : matrix.test[u]) eat(c);

        if (visited > 0) {
            stats.activity[u] = activity;
            stats.n_domains[u] = static_cast<double>(visited);
        }
        if (slanted > 0) {
            stats.diet_slant[u] = slant_sum / static_cast<double>(slanted);
            stats.diet_abs_slant[u] = abs_sum / static_cast<double>(slanted);
        }

        // Mean similarity to the nearest training neighbors, any domain.
        std::vector<double> sims;
        for (std::uint32_t v = 0; v < n; ++v) {
            if (v == u) continue;
            const double s = table.sim(u, v);
            if (!is_no_similarity(s)) sims.push_back(s);
        }
        if (!sims.empty()) {
            const std::size_t keep = std::min(n_neighbors, sims.size());
            std::partial_sort(sims.begin(), sims.begin() + keep, sims.end(),
                              std::greater<double>());
            double s = 0.0;
            for (std::size_t i = 0; i < keep; ++i) s += sims[i];
            stats.neighbor_sim[u] = s / static_cast<double>(keep);
        }

        double trust_sum = 0.0;
        std::size_t scored = 0;
        for (const auto& c : matrix.train[u]) {
            const ScoreRecord* rec = panel.score_for(c.domain);
            if (rec &&
                (rec->category == ScoreCategory::Green || rec->category == ScoreCategory::Red)) {
                trust_sum += rec->score;
                scored += 1;
            }
        }
        if (scored > 0) stats.baseline_trust[u] = trust_sum / static_cast<double>(scored);
    }
    return stats;
}

namespace {

std::vector<Stratum> tercile_strata(const std::vector<std::optional<double>>& values) {
    std::vector<std::pair<double, std::uint32_t>> present;
    for (std::uint32_t u = 0; u < values.size(); ++u) {
        if (values[u]) present.push_back({*values[u], u});
    }
    if (present.size() < 3) throw InputError("tercile stratification needs >= 3 users");
    std::vector<double> sorted;
    sorted.reserve(present.size());
    for (const auto& [v, u] : present) sorted.push_back(v);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double q1 = sorted[(n + 2) / 3 - 1];  // smallest value covering ceil(n/3)
    const double q2 = sorted[(2 * n + 2) / 3 - 1];

    std::vector<Stratum> strata(3);
    strata[0].label = "t1";
    strata[1].label = "t2";
    strata[2].label = "t3";
    for (const auto& [v, u] : present) {
        if (v <= q1) {
            strata[0].users.push_back(u);
        } else if (v <= q2) {
            strata[1].users.push_back(u);
        } else {
            strata[2].users.push_back(u);
        }
    }
    return strata;
}

}  // namespace

std::vector<Stratum> stratify(const UserStatistics& stats, StratumKey key) {
    switch (key) {
        case StratumKey::PartyId: {
            std::vector<Stratum> strata(3);
            strata[0].label = "dem_1_3";
            strata[1].label = "ind_4";
            strata[2].label = "rep_5_7";
            for (std::uint32_t u = 0; u < stats.party.size(); ++u) {
                const int p = stats.party[u];
                strata[p <= 3 ? 0 : (p == 4 ? 1 : 2)].users.push_back(u);
            }
            return strata;
        }
        case StratumKey::SlantTercile: return tercile_strata(stats.diet_slant);
        case StratumKey::AbsSlantTercile: return tercile_strata(stats.diet_abs_slant);
        case StratumKey::ActivityTercile: return tercile_strata(stats.activity);
        case StratumKey::NDomainsTercile: return tercile_strata(stats.n_domains);
        case StratumKey::NeighborSimTercile: return tercile_strata(stats.neighbor_sim);
        case StratumKey::BaselineTrustTercile: return tercile_strata(stats.baseline_trust);
    }
    throw InputError("unknown stratum key");
}

std::vector<StratumDeltaQ> stratified_delta_q(const std::vector<Stratum>& strata,
                                              StratumKey key,
                                              std::span<const DeltaQResult> results) {
    std::vector<StratumDeltaQ> rows;
    for (const auto& stratum : strata) {
        std::vector<char> member;
        std::size_t max_user = 0;
        for (auto u : stratum.users) max_user = std::max<std::size_t>(max_user, u + 1);
        member.assign(max_user, 0);
        for (auto u : stratum.users) member[u] = 1;

        // Group delta-q values per algorithm for this stratum's users.
        for (Algorithm alg :
             {Algorithm::CF, Algorithm::CFD, Algorithm::GlobalPopularity,
              Algorithm::ActualVisits}) {
            std::vector<double> values;
            for (const auto& r : results) {
                if (r.algorithm == alg && r.user < member.size() && member[r.user]) {
                    values.push_back(r.delta_q);
                }
            }
            if (values.empty()) continue;
            StratumDeltaQ row;
            row.key = stratum_key_name(key);
            row.stratum = stratum.label;
            row.algorithm = alg;
            row.mean_delta_q = mean_of(values);
            row.sem = standard_error(values);  // NaN when n == 1
            row.n_users = values.size();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::vector<DomainObservation> domain_observations(const PanelDataset& panel,
                                                   double dirichlet_alpha) {
    const auto profiles = profile_domains(panel);
    std::vector<DomainObservation> out;
    for (std::uint32_t d = 0; d < panel.domains.size(); ++d) {
        const ScoreRecord* rec = panel.score_for(d);
        if (!rec ||
            (rec->category != ScoreCategory::Green && rec->category != ScoreCategory::Red)) {
            continue;
        }
        if (!profiles[d]) continue;
        const AudienceProfile& profile = *profiles[d];
        DomainObservation obs;
        obs.domain = d;
        obs.reliability = rec->score;
        obs.n_users = static_cast<double>(profile.n_users());
        obs.n_pageviews = profile.total_mass();
        obs.log_users = std::log(obs.n_users);
        obs.log_pageviews = std::log(obs.n_pageviews);
        obs.mean_partisanship = profile.mean_partisanship(WeightLevel::User);
        obs.extremity = std::fabs(obs.mean_partisanship - 4.0);
        obs.republican = obs.mean_partisanship > 4.0;
        for (int m = 0; m < 6; ++m) {
            for (int l = 0; l < 2; ++l) {
                obs.diversity[m][l] =
                    compute_diversity(profile, static_cast<DiversityMetric>(m),
                                      static_cast<WeightLevel>(l), dirichlet_alpha)
                        .value;
            }
        }
        obs.slant = panel.slant_for(d);
        out.push_back(obs);
    }
    return out;
}

}  // namespace divrec
