#pragma once

// ROC analysis and binary classification metrics.
//
// Thresholds use the rule "predict positive when score >= threshold".

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dxi/cohort.hpp"
#include "json.hpp"

namespace dxi {

struct RocPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
};

// Points in ascending threshold order. The first point (lowest observed
// score) has sensitivity 1 and specificity 0; the last point (threshold
// +inf) has sensitivity 0 and specificity 1.
struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

RocCurve roc_curve(std::span<const std::uint8_t> labels, std::span<const double> scores);
void write_roc_csv(std::ostream& out, const RocCurve& curve);

// Mann-Whitney estimate: fraction of (positive, negative) pairs ranked
// correctly, ties counting one half. Throws on single-class input.
double auroc(std::span<const std::uint8_t> labels, std::span<const double> scores);

struct AurocEstimate {
    double auroc = 0.0;
    double variance = 0.0;  // DeLong structural-components variance
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

AurocEstimate auroc_delong(std::span<const std::uint8_t> labels, std::span<const double> scores);

enum class OperatingRule { Youden, MatchedSpecificity, MatchedSensitivity, Fixed };
enum class YoudenTieBreak { HigherSpecificity, HigherSensitivity };
enum class MatchAxis { Sensitivity, Specificity };

struct OperatingPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    OperatingRule rule = OperatingRule::Youden;
    std::optional<double> target;
    bool target_reached = true;
};

std::string to_string(OperatingRule rule);

// Threshold maximizing sensitivity + specificity - 1.
OperatingPoint youden_point(const RocCurve& curve, YoudenTieBreak tie_break = YoudenTieBreak::HigherSpecificity);

// Specificity axis: the smallest threshold whose realized specificity is
// >= target. Sensitivity axis: the largest threshold whose realized
// sensitivity is >= target. Realized values are reported.
OperatingPoint matched_point(const RocCurve& curve, double target, MatchAxis axis);

std::vector<std::uint8_t> apply_threshold(std::span<const double> scores, double threshold);

struct BinaryMetrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> ppv;
    std::optional<double> npv;
    // rows: reference 0/1, columns: prediction 0/1
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    double agreement = 0.0;
};

BinaryMetrics binary_metrics(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predictions);

// Nominal Krippendorff's alpha for two raters without missing values.
// Throws when fewer than two units are given or all values fall in one
// category (expected disagreement 0).
double krippendorff_alpha(std::span<const std::uint8_t> rater_a, std::span<const std::uint8_t> rater_b);

// Count pair; value() is absent when the denominator is 0.
struct CountRatio {
    std::size_t numerator = 0;
    std::size_t denominator = 0;
    std::optional<double> value() const;
    std::string text() const;  // "n:d"
};

struct ReferenceOutcome {
    std::optional<std::uint8_t> label;
    std::optional<int> grade_group;  // histology grade group, 0 = benign
};

ReferenceOutcome reference_outcome(const CaseRecord& record);

struct BenefitHarmReport {
    std::size_t true_positives = 0;
    std::size_t gg1_false_positives = 0;
    std::size_t negative_predictions = 0;
    std::size_t true_negatives = 0;
    CountRatio tp_to_gg1;               // TP : GG1 detections
    CountRatio tp_to_gg1_and_negatives;  // TP : (GG1 detections + negative predictions)
    CountRatio tn_to_gg1;               // biopsies avoided : GG1 detections
};

BenefitHarmReport benefit_harm_ratios(std::span<const ReferenceOutcome> outcomes,
                                      std::span<const std::uint8_t> predictions);

nlohmann::ordered_json to_json(const OperatingPoint& point);
nlohmann::ordered_json to_json(const BinaryMetrics& metrics);
nlohmann::ordered_json to_json(const BenefitHarmReport& report);
nlohmann::ordered_json to_json(const AurocEstimate& estimate);

}  // namespace dxi
