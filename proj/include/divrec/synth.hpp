#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace divrec {

// Synthetic panel with a planted diversity-reliability relationship:
//   Q(d) = clamp(beta0 + beta1 * var(d) + beta2 * 1[republican] * var(d) + noise, 0, 100)
// where var(d) is the realized user-level partisanship variance of d's
// audience. Audience composition per domain follows a location/concentration
// model on the 1..7 scale; per-user pageview budgets are heavy-tailed.
struct SynthConfig {
    int n_users = 1000;
    int n_domains = 200;
    std::uint64_t seed = 1;
    int n_waves = 2;

    double beta0 = 40.0;
    double beta1 = 5.0;
    double beta2 = 4.0;  // extra slope for Republican-audience domains
    double noise_sd = 8.0;

    double score_coverage = 0.92;   // fraction of domains in the scores file
    double slant_coverage = 0.85;   // fraction of domains in the slants file
    double satire_fraction = 0.02;  // of scored domains
    double platform_fraction = 0.02;

    // Per-user pageview budget ~ Pareto(exponent) clipped to [budget_min, budget_max].
    double budget_exponent = 2.0;
    int budget_min = 60;
    int budget_max = 4000;

    // Audience concentration range; small kappa = homogeneous audience.
    // Bimodal mode draws kappa_min or kappa_max with equal probability,
    // giving a panel of clearly-concentrated and clearly-diverse domains.
    double kappa_min = 0.35;
    double kappa_max = 3.0;
    bool kappa_bimodal = false;
    double popularity_zipf = 1.0;  // domain base-popularity skew

    // Per-(user, domain) interest multipliers ~ Pareto(interest_tail), capped.
    // Heavy tails concentrate each user's traffic on personal favorites,
    // which is what gives TF-IDF ratings their spread.
    double interest_tail = 1.1;
    double interest_cap = 1000.0;

    // Per-domain engagement depth: extra pageviews per visit event,
    // lognormal across domains. Depth moves a domain's typical TF share
    // without recruiting extra visitors, so ratings carry a domain-level
    // component that survives neighborhood averaging.
    double depth_sigma = 1.0;

    // Latent interest structure: users belong to taste groups with lognormal
    // per-domain affinities. This is what gives user-user similarities signal
    // to find; without it CF predictions collapse toward domain means.
    // In symmetric mode groups and domains mirror jointly.
    int n_taste_groups = 8;
    double taste_sigma = 1.2;

    // Mirror-paired domains (mu, 8-mu) with slants (s, -s) and beta2 = 0;
    // used for fairness nulls.
    bool symmetric_slants = false;
};

struct SynthFiles {
    std::vector<std::string> traffic_paths;
    std::string survey_path;
    std::string scores_path;
    std::string slants_path;
    std::string manifest_path;
};

// Writes the panel input files plus a manifest of the planted parameters
// into out_dir. Deterministic under config.seed.
SynthFiles generate(const SynthConfig& config, const std::string& out_dir);

}  // namespace divrec
