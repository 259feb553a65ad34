#include "dxi/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <stdexcept>

namespace dxi::stats {

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double student_t_critical(double df, double level) {
    if (!(df > 0.0)) throw std::invalid_argument("student_t_critical: df must be positive");
    const boost::math::students_t_distribution<double> dist(df);
    return boost::math::quantile(dist, 1.0 - (1.0 - level) / 2.0);
}

double percentile(std::vector<double>& values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(values.begin(), nth, values.end());
    return *nth;
}

double mean(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean: empty sample");
    double total = 0.0;
    for (const double v : values) total += v;
    return total / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double mu = mean(values);
    double ss = 0.0;
    for (const double v : values) ss += (v - mu) * (v - mu);
    return ss / static_cast<double>(values.size() - 1);
}

}  // namespace dxi::stats
