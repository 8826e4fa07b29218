#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "divrec/ingest.hpp"

namespace divrec {

enum class DiversityMetric {
    Variance,
    EntropyML,
    EntropyDirichlet,
    EntropyNSB,
    CompMaxProb,
    CompGini,
};

enum class WeightLevel { User, Pageview };

const char* metric_name(DiversityMetric m);
std::optional<DiversityMetric> metric_from_name(const std::string& name);
const char* level_name(WeightLevel l);
std::optional<WeightLevel> level_from_name(const std::string& name);

inline constexpr int kPartisanshipBins = 7;

// Histogram of a domain's visitors over the 1..7 partisanship scale:
// distinct-user counts and pageview mass per bin. These are sufficient for
// every diversity metric at both weighting levels.
struct AudienceProfile {
    std::array<std::int64_t, kPartisanshipBins> user_counts{};
    std::array<double, kPartisanshipBins> pageview_mass{};

    void add_visitor(int partisanship, double pageviews);

    std::int64_t n_users() const;
    double total_mass() const;
    double mean_partisanship(WeightLevel level) const;
};

struct DiversityValue {
    DiversityMetric metric = DiversityMetric::Variance;
    WeightLevel level = WeightLevel::User;
    double value = 0.0;
    double mean_partisanship = 0.0;
    double extremity = 0.0;  // |mean - 4|
};

DiversityValue variance(const AudienceProfile& profile, WeightLevel level);
DiversityValue entropy_ml(const AudienceProfile& profile, WeightLevel level);
DiversityValue entropy_dirichlet(const AudienceProfile& profile, WeightLevel level,
                                 double alpha = 1.0);
DiversityValue entropy_nsb(const AudienceProfile& profile, WeightLevel level);
DiversityValue comp_max_prob(const AudienceProfile& profile, WeightLevel level);
DiversityValue comp_gini(const AudienceProfile& profile, WeightLevel level);

DiversityValue compute_diversity(const AudienceProfile& profile, DiversityMetric metric,
                                 WeightLevel level, double dirichlet_alpha = 1.0);

// One profile per domain with at least one visitor; index-aligned with
// panel.domains. Whole-panel variant counts all traffic; the train variant
// counts only training-partition pageviews and leaves domains with no
// training traffic empty.
std::vector<std::optional<AudienceProfile>> profile_domains(const PanelDataset& panel);
std::vector<std::optional<AudienceProfile>> profile_domains_train(const RatingsMatrix& matrix);

// Diversity value per domain for the re-ranking signal; absent where the
// profile is absent.
std::vector<std::optional<double>> diversity_by_domain(
    const std::vector<std::optional<AudienceProfile>>& profiles, DiversityMetric metric,
    WeightLevel level, double dirichlet_alpha = 1.0);

}  // namespace divrec
