#include "divrec/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "divrec/error.hpp"
#include "divrec/mathx.hpp"

namespace divrec {

const char* metric_name(DiversityMetric m) {
    switch (m) {
        case DiversityMetric::Variance: return "variance";
        case DiversityMetric::EntropyML: return "entropy_ml";
        case DiversityMetric::EntropyDirichlet: return "entropy_dirichlet";
        case DiversityMetric::EntropyNSB: return "entropy_nsb";
        case DiversityMetric::CompMaxProb: return "comp_max_prob";
        case DiversityMetric::CompGini: return "comp_gini";
    }
    return "variance";
}

std::optional<DiversityMetric> metric_from_name(const std::string& name) {
    if (name == "variance") return DiversityMetric::Variance;
    if (name == "entropy_ml") return DiversityMetric::EntropyML;
    if (name == "entropy_dirichlet") return DiversityMetric::EntropyDirichlet;
    if (name == "entropy_nsb") return DiversityMetric::EntropyNSB;
    if (name == "comp_max_prob") return DiversityMetric::CompMaxProb;
    if (name == "comp_gini") return DiversityMetric::CompGini;
    return std::nullopt;
}

const char* level_name(WeightLevel l) {
    return l == WeightLevel::User ? "user" : "pageview";
}

std::optional<WeightLevel> level_from_name(const std::string& name) {
    if (name == "user") return WeightLevel::User;
    if (name == "pageview") return WeightLevel::Pageview;
    return std::nullopt;
}

void AudienceProfile::add_visitor(int partisanship, double pageviews) {
    if (partisanship < 1 || partisanship > kPartisanshipBins) {
        throw InputError("partisanship out of range");
    }
    user_counts[partisanship - 1] += 1;
    pageview_mass[partisanship - 1] += pageviews;
}

std::int64_t AudienceProfile::n_users() const {
    std::int64_t n = 0;
    for (auto c : user_counts) n += c;
    return n;
}

double AudienceProfile::total_mass() const {
    double w = 0.0;
    for (auto m : pageview_mass) w += m;
    return w;
}

double AudienceProfile::mean_partisanship(WeightLevel level) const {
    double num = 0.0, den = 0.0;
    for (int j = 0; j < kPartisanshipBins; ++j) {
        const double w = level == WeightLevel::User ? static_cast<double>(user_counts[j])
                                                    : pageview_mass[j];
        num += w * (j + 1);
        den += w;
    }
    return num / den;
}

namespace {

std::array<double, kPartisanshipBins> bin_weights(const AudienceProfile& p, WeightLevel level) {
    std::array<double, kPartisanshipBins> w{};
    for (int j = 0; j < kPartisanshipBins; ++j) {
        w[j] = level == WeightLevel::User ? static_cast<double>(p.user_counts[j])
                                          : p.pageview_mass[j];
    }
    return w;
}

void require_nonempty(const AudienceProfile& p, WeightLevel level) {
    if (level == WeightLevel::User ? p.n_users() < 1 : !(p.total_mass() > 0.0)) {
        throw InputError("diversity metric on an empty audience profile");
    }
}

DiversityValue finish(const AudienceProfile& p, DiversityMetric metric, WeightLevel level,
                      double value) {
    DiversityValue v;
    v.metric = metric;
    v.level = level;
    v.value = value;
    v.mean_partisanship = p.mean_partisanship(level);
    v.extremity = std::fabs(v.mean_partisanship - 4.0);
    return v;
}

double plugin_entropy(const std::array<double, kPartisanshipBins>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double s = 0.0;
    for (double x : w) {
        if (x > 0.0) {
            const double p = x / total;
            s -= p * std::log(p);
        }
    }
    return s;
}

}  // namespace

DiversityValue variance(const AudienceProfile& profile, WeightLevel level) {
    require_nonempty(profile, level);
    const auto w = bin_weights(profile, level);
    double total = 0.0, mean = 0.0;
    for (int j = 0; j < kPartisanshipBins; ++j) {
        total += w[j];
        mean += w[j] * (j + 1);
    }
    mean /= total;
    double ss = 0.0;
    for (int j = 0; j < kPartisanshipBins; ++j) {
        const double d = (j + 1) - mean;
        ss += w[j] * d * d;
    }
    return finish(profile, DiversityMetric::Variance, level, ss / total);
}

DiversityValue entropy_ml(const AudienceProfile& profile, WeightLevel level) {
    require_nonempty(profile, level);
    return finish(profile, DiversityMetric::EntropyML, level,
                  plugin_entropy(bin_weights(profile, level)));
}

DiversityValue entropy_dirichlet(const AudienceProfile& profile, WeightLevel level,
                                 double alpha) {
    if (!(alpha > 0.0)) throw InputError("dirichlet alpha must be positive");
    require_nonempty(profile, level);
    auto w = bin_weights(profile, level);
    for (double& x : w) x += alpha;
    return finish(profile, DiversityMetric::EntropyDirichlet, level, plugin_entropy(w));
}

namespace {

constexpr double kLog7 = 1.9459101490553132;  // ln 7

// Expected entropy of a symmetric Dirichlet(beta) prior over K bins.
double prior_entropy(double beta) {
    return digamma(kPartisanshipBins * beta + 1.0) - digamma(beta + 1.0);
}

// Invert prior_entropy by bisection; monotone increasing in beta.
double beta_for_xi(double xi) {
    double lo = 1e-12, hi = 1e12;
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);  // geometric: beta spans many decades
        if (prior_entropy(mid) < xi) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi / lo < 1.0 + 1e-14) break;
    }
    return std::sqrt(lo * hi);
}

const std::vector<double>& beta_grid(int n) {
    static std::mutex mu;
    static std::map<int, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) {
        const double xi = kLog7 * (i + 0.5) / n;
        grid[i] = beta_for_xi(xi);
    }
    return cache.emplace(n, std::move(grid)).first->second;
}

// Posterior-mean entropy and log evidence of counts under Dirichlet(beta).
struct NsbPoint {
    double log_evidence;
    double entropy;
};

NsbPoint nsb_point(const std::array<double, kPartisanshipBins>& counts, double total,
                   double beta) {
    const double kb = kPartisanshipBins * beta;
    double log_ev = std::lgamma(kb) - std::lgamma(total + kb) -
                    kPartisanshipBins * std::lgamma(beta);
    const double a_total = total + kb;
    double ent = digamma(a_total + 1.0);
    for (double x : counts) {
        const double a = x + beta;
        log_ev += std::lgamma(a);
        ent -= (a / a_total) * digamma(a + 1.0);
    }
    return {log_ev, ent};
}

double nsb_estimate(const std::array<double, kPartisanshipBins>& counts, double total, int n) {
    const auto& betas = beta_grid(n);
    std::vector<NsbPoint> pts(betas.size());
    double max_log = -1e300;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        pts[i] = nsb_point(counts, total, betas[i]);
        max_log = std::max(max_log, pts[i].log_evidence);
    }
    double wsum = 0.0, ssum = 0.0;
    for (const auto& p : pts) {
        const double w = std::exp(p.log_evidence - max_log);
        wsum += w;
        ssum += w * p.entropy;
    }
    return ssum / wsum;
}

}  // namespace

DiversityValue entropy_nsb(const AudienceProfile& profile, WeightLevel level) {
    require_nonempty(profile, level);
    const auto counts = bin_weights(profile, level);
    double total = 0.0;
    for (double x : counts) total += x;

    const double tol = 1e-6 * kLog7;
    double prev = nsb_estimate(counts, total, 200);
    for (int n = 400; n <= 25600; n *= 2) {
        const double cur = nsb_estimate(counts, total, n);
        if (std::fabs(cur - prev) <= tol) {
            return finish(profile, DiversityMetric::EntropyNSB, level, cur);
        }
        prev = cur;
    }
    throw ComputeError("NSB quadrature did not converge; residual " + std::to_string(prev));
}

DiversityValue comp_max_prob(const AudienceProfile& profile, WeightLevel level) {
    require_nonempty(profile, level);
    const auto w = bin_weights(profile, level);
    double total = 0.0, best = 0.0;
    for (double x : w) {
        total += x;
        best = std::max(best, x);
    }
    return finish(profile, DiversityMetric::CompMaxProb, level, 1.0 - best / total);
}

DiversityValue comp_gini(const AudienceProfile& profile, WeightLevel level) {
    require_nonempty(profile, level);
    const auto w = bin_weights(profile, level);
    double total = 0.0;
    for (double x : w) total += x;
    double abs_diff = 0.0;
    for (int i = 0; i < kPartisanshipBins; ++i) {
        for (int j = 0; j < kPartisanshipBins; ++j) {
            abs_diff += std::fabs(w[i] - w[j]);
        }
    }
    const double gini = abs_diff / (2.0 * kPartisanshipBins * total);
    return finish(profile, DiversityMetric::CompGini, level, 1.0 - gini);
}

DiversityValue compute_diversity(const AudienceProfile& profile, DiversityMetric metric,
                                 WeightLevel level, double dirichlet_alpha) {
    switch (metric) {
        case DiversityMetric::Variance: return variance(profile, level);
        case DiversityMetric::EntropyML: return entropy_ml(profile, level);
        case DiversityMetric::EntropyDirichlet:
            return entropy_dirichlet(profile, level, dirichlet_alpha);
        case DiversityMetric::EntropyNSB: return entropy_nsb(profile, level);
        case DiversityMetric::CompMaxProb: return comp_max_prob(profile, level);
        case DiversityMetric::CompGini: return comp_gini(profile, level);
    }
    throw InputError("unknown diversity metric");
}

std::vector<std::optional<AudienceProfile>> profile_domains(const PanelDataset& panel) {
    std::vector<std::optional<AudienceProfile>> profiles(panel.domains.size());
    for (const auto& c : panel.cells) {
        if (!profiles[c.domain]) profiles[c.domain].emplace();
        profiles[c.domain]->add_visitor(panel.users[c.user].partisanship,
                                        static_cast<double>(c.pageviews));
    }
    return profiles;
}

std::vector<std::optional<AudienceProfile>> profile_domains_train(const RatingsMatrix& matrix) {
    std::vector<std::optional<AudienceProfile>> profiles(matrix.n_domains());
    for (std::size_t u = 0; u < matrix.n_users(); ++u) {
        const int partisanship = matrix.partisanship[u];
        for (const auto& cell : matrix.train[u]) {
            if (!profiles[cell.domain]) profiles[cell.domain].emplace();
            profiles[cell.domain]->add_visitor(partisanship,
                                               static_cast<double>(cell.pageviews));
        }
    }
    return profiles;
}

std::vector<std::optional<double>> diversity_by_domain(
    const std::vector<std::optional<AudienceProfile>>& profiles, DiversityMetric metric,
    WeightLevel level, double dirichlet_alpha) {
    std::vector<std::optional<double>> out(profiles.size());
    for (std::size_t d = 0; d < profiles.size(); ++d) {
        if (profiles[d]) {
            out[d] = compute_diversity(*profiles[d], metric, level, dirichlet_alpha).value;
        }
    }
    return out;
}

}  // namespace divrec
