#pragma once

// Expected half-width of the 95% interval for the primary endpoint,
// X = 1.96 * sqrt(p (1 - p) / N), and its grid over p and N.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace dxi {

struct HalfWidthResult {
    std::size_t n = 0;
    double p = 0.0;
    double x = 0.0;
};

// The critical value is the fixed constant 1.96, not a recomputed quantile.
// Throws std::invalid_argument unless p in (0, 1) and n >= 1.
HalfWidthResult ci_halfwidth(double p, std::size_t n);

struct HalfWidthTable {
    std::vector<double> p_values;
    std::vector<std::size_t> n_values;
    std::vector<std::string> row_labels;  // one per n; defaults to "N=<n>"
    std::vector<std::vector<HalfWidthResult>> cells;  // [row (n)][column (p)]
};

// Throws std::invalid_argument for an empty grid or mismatched labels.
HalfWidthTable halfwidth_table(std::span<const double> p_values, std::span<const std::size_t> n_values,
                               std::span<const std::string> row_labels = {});

// Cells rendered as "+-4.12%".
std::string to_markdown(const HalfWidthTable& table);
// cohort,n,p,halfwidth rows.
std::string to_csv(const HalfWidthTable& table);
nlohmann::ordered_json to_json(const HalfWidthTable& table);

}  // namespace dxi
