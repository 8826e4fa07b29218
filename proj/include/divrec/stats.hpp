#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divrec/diversity.hpp"
#include "divrec/evaluation.hpp"
#include "divrec/ingest.hpp"
#include "divrec/similarity.hpp"

namespace divrec {

struct CorrelationResult {
    double r = 0.0;
    double p = 1.0;  // two-sided
    std::size_t n = 0;
};

CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// First-order partial correlation of x and y given z; p from t with n-3 df.
CorrelationResult partial_correlation(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> z);

struct OlsTerm {
    std::string name;
    double beta = 0.0;
    double se = 0.0;
    double p = 1.0;
};

struct OlsResult {
    std::vector<OlsTerm> terms;  // intercept first
    double r2 = 0.0;
    std::size_t n = 0;
};

// OLS of y on z-scored predictors plus an intercept; classical standard
// errors. The response is left unstandardized.
OlsResult ols_standardized(std::span<const double> y,
                           const std::vector<std::pair<std::string, std::vector<double>>>&
                               predictors);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

enum class StratumKey {
    SlantTercile,
    PartyId,
    AbsSlantTercile,
    ActivityTercile,
    NDomainsTercile,
    NeighborSimTercile,
    BaselineTrustTercile,
};

const char* stratum_key_name(StratumKey k);
std::optional<StratumKey> stratum_key_from_name(const std::string& name);

struct Stratum {
    std::string label;
    std::vector<std::uint32_t> users;
};

// Per-user statistics backing the stratification keys; absent where a user
// lacks the inputs (e.g. no slanted domains visited).
struct UserStatistics {
    std::vector<int> party;                               // always present
    std::vector<std::optional<double>> diet_slant;        // mean slant of visited domains
    std::vector<std::optional<double>> diet_abs_slant;    // mean |slant|
    std::vector<std::optional<double>> activity;          // total TF-IDF pageview mass
    std::vector<std::optional<double>> n_domains;         // distinct domains visited
    std::vector<std::optional<double>> neighbor_sim;      // mean of top-10 train similarities
    std::vector<std::optional<double>> baseline_trust;    // mean Q of scored train domains
};

UserStatistics compute_user_statistics(const PanelDataset& panel, const RatingsMatrix& matrix,
                                       const SimilarityTable& table, std::size_t n_neighbors = 10);

// Tercile boundaries at the 1/3 and 2/3 empirical quantiles, ties assigned
// to the lower stratum; PartyId splits {1-3, 4, 5-7}.
std::vector<Stratum> stratify(const UserStatistics& stats, StratumKey key);

struct StratumDeltaQ {
    std::string key;
    std::string stratum;
    Algorithm algorithm = Algorithm::CF;
    double mean_delta_q = 0.0;
    double sem = 0.0;  // NaN when n < 2
    std::size_t n_users = 0;
};

std::vector<StratumDeltaQ> stratified_delta_q(const std::vector<Stratum>& strata,
                                              StratumKey key,
                                              std::span<const DeltaQResult> results);

// One observation per Green/Red-scored panel domain, for the observational
// correlation and regression analyses.
struct DomainObservation {
    std::uint32_t domain = 0;
    double reliability = 0.0;
    double log_users = 0.0;
    double log_pageviews = 0.0;
    double mean_partisanship = 0.0;  // user level
    double extremity = 0.0;
    double n_users = 0.0;
    double n_pageviews = 0.0;
    // [metric][level] diversity values
    double diversity[6][2] = {};
    bool republican = false;  // user-level mean > 4
    std::optional<double> slant;
};

std::vector<DomainObservation> domain_observations(const PanelDataset& panel,
                                                   double dirichlet_alpha = 1.0);

}  // namespace divrec
