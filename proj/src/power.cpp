#include "dxi/power.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace dxi {

HalfWidthResult ci_halfwidth(double p, std::size_t n) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument(fmt::format("ci_halfwidth: p = {} outside (0, 1)", p));
    if (n == 0) throw std::invalid_argument("ci_halfwidth: n must be >= 1");
    return {n, p, 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

HalfWidthTable halfwidth_table(std::span<const double> p_values, std::span<const std::size_t> n_values,
                               std::span<const std::string> row_labels) {
    if (p_values.empty()) throw std::invalid_argument("halfwidth_table: empty p list");
    if (n_values.empty()) throw std::invalid_argument("halfwidth_table: empty N list");
    if (!row_labels.empty() && row_labels.size() != n_values.size())
        throw std::invalid_argument("halfwidth_table: one label per N required");
    HalfWidthTable t;
    t.p_values.assign(p_values.begin(), p_values.end());
    t.n_values.assign(n_values.begin(), n_values.end());
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        t.row_labels.push_back(row_labels.empty() ? fmt::format("N={}", n_values[i]) : row_labels[i]);
        auto& row = t.cells.emplace_back();
        for (const double p : p_values) row.push_back(ci_halfwidth(p, n_values[i]));
    }
    return t;
}

std::string to_markdown(const HalfWidthTable& t) {
    std::string out = "| Cohort |";
    for (const double p : t.p_values) out += fmt::format(" p = {:g}% |", 100.0 * p);
    out += "\n|---|";
    for (std::size_t j = 0; j < t.p_values.size(); ++j) out += "---|";
    out += "\n";
    for (std::size_t i = 0; i < t.cells.size(); ++i) {
        out += fmt::format("| {} |", t.row_labels[i]);
        for (const auto& c : t.cells[i]) out += fmt::format(" ±{:.2f}% |", 100.0 * c.x);
        out += "\n";
    }
    return out;
}

std::string to_csv(const HalfWidthTable& t) {
    std::string out = "cohort,n,p,halfwidth\n";
    for (std::size_t i = 0; i < t.cells.size(); ++i) {
        for (const auto& c : t.cells[i]) out += fmt::format("{},{},{},{:.6f}\n", t.row_labels[i], c.n, c.p, c.x);
    }
    return out;
}

nlohmann::ordered_json to_json(const HalfWidthTable& t) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < t.cells.size(); ++i) {
        for (const auto& c : t.cells[i]) rows.push_back({{"cohort", t.row_labels[i]}, {"n", c.n}, {"p", c.p}, {"halfwidth", c.x}});
    }
    return rows;
}

}  // namespace dxi
