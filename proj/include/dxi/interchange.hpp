#pragma once

// Primary endpoint: agreement of the binarized AI assessments with the
// standard-of-care labels, its patient-level bootstrap interval, the margin
// comparison against radiologist agreement, and Holm-Bonferroni across
// cohorts.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dxi/agreement.hpp"
#include "json.hpp"

namespace dxi {

// Matches / N. Throws on length mismatch or empty input.
double agreement_proportion(std::span<const std::uint8_t> soc_labels, std::span<const std::uint8_t> ai_binary);

struct WaldBootstrapResult {
    double proportion = 0.0;
    double se_boot = 0.0;  // SD of the replicate proportions
    double ci_low = 0.0;   // proportion - 1.96 se_boot
    double ci_high = 0.0;  // proportion + 1.96 se_boot
    double percentile_low = 0.0;
    double percentile_high = 0.0;
    std::size_t replications = 0;
    std::size_t n_cases = 0;
    std::size_t n_patients = 0;
};

inline constexpr double kWaldCritical = 1.96;

// n-out-of-n bootstrap with the patient as resampling unit (all of a
// patient's cases travel together).
WaldBootstrapResult bootstrap_wald_ci(std::span<const std::uint8_t> soc_labels,
                                      std::span<const std::uint8_t> ai_binary,
                                      std::span<const std::string> patient_ids,
                                      const BootstrapOptions& options = {});

enum class Decision { Interchangeable, NotDemonstrated };
std::string to_string(Decision decision);

struct InterchangeResult {
    std::string cohort_name;
    double proportion = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double benchmark = 0.0;  // radiologist vs standard-of-care agreement (adjusted)
    double margin = 0.05;
    Decision decision = Decision::NotDemonstrated;
    std::optional<double> context_inter_reader;  // adjusted inter-reader agreement
    std::optional<WaldBootstrapResult> bootstrap;
    std::optional<double> p_value;  // one-sided, against benchmark - margin

    double decision_line() const { return benchmark - margin; }
};

// Interchangeable iff ci_low > benchmark - margin (strict).
InterchangeResult interchange_decision(double proportion, double ci_low, double ci_high, double benchmark,
                                       double margin, std::optional<double> context_inter_reader = std::nullopt,
                                       std::string cohort_name = {});

// Full test from a bootstrap result; adds the one-sided p-value.
InterchangeResult interchange_test(const WaldBootstrapResult& bootstrap, double benchmark, double margin,
                                   std::optional<double> context_inter_reader = std::nullopt,
                                   std::string cohort_name = {});

// Phi(-(proportion - (benchmark - margin)) / se). With se == 0 the p-value
// is 0 above the line and 1 otherwise.
double one_sided_p_value(double proportion, double se, double benchmark, double margin);

struct HolmResult {
    std::vector<bool> reject;
    std::vector<double> adjusted_p;  // Holm step-down adjusted p-values
};

HolmResult holm_bonferroni(std::span<const double> p_values, double alpha = 0.05);

nlohmann::ordered_json to_json(const WaldBootstrapResult& result);
nlohmann::ordered_json to_json(const InterchangeResult& result);

// Plot-ready rows (series,value) and a markdown rendering of the decision:
// estimate with CI, benchmark, decision line and inter-reader context.
std::string interchange_figure_csv(const InterchangeResult& result);
std::string interchange_markdown(const InterchangeResult& result);

}  // namespace dxi
