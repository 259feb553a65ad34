#pragma once

#include <span>
#include <vector>

namespace dxi::stats {

double normal_cdf(double z);
double normal_quantile(double p);
// Two-sided critical value of Student's t: quantile at 1 - (1 - level)/2.
double student_t_critical(double df, double level = 0.95);

// Inverted-CDF percentile: the smallest sample x with F_n(x) >= q.
// Reorders `values`.
double percentile(std::vector<double>& values, double q);

double mean(std::span<const double> values);
// Sample variance (n - 1 denominator); 0 for fewer than two values.
double sample_variance(std::span<const double> values);

}  // namespace dxi::stats
