#pragma once

#include <cstddef>
#include <span>

namespace divrec {

// Digamma for x > 0. Recurrence up to x >= 6, then asymptotic series.
double digamma(double x);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Survival function of the Kolmogorov distribution; used for KS tests.
double kolmogorov_sf(double lambda);

// One-sample KS test p-value of `values` against Uniform(0,1).
double ks_uniform_p(std::span<const double> values);

double mean_of(std::span<const double> xs);
// Sample variance (n - 1 denominator); 0 when n < 2.
double sample_variance(std::span<const double> xs);
// Standard error of the mean; NaN when n < 2.
double standard_error(std::span<const double> xs);

}  // namespace divrec
