#include "dxi/roc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "dxi/kernels.hpp"
#include "dxi/stats.hpp"

namespace dxi {

namespace {

void check_aligned(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

void check_scores(std::span<const double> scores) {
    for (const double s : scores) {
        if (std::isnan(s)) throw std::invalid_argument("scores must not be NaN");
    }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    return order;
}

// Twice the 1-based midrank of each element of `values` (exact integers).
std::vector<std::uint64_t> doubled_midranks(std::span<const double> values) {
    const auto order = order_by_score(values);
    std::vector<std::uint64_t> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const std::uint64_t doubled = i + 1 + j;  // (i+1 + j) / 2 is the midrank
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = doubled;
        i = j;
    }
    return ranks;
}

struct SplitScores {
    std::vector<double> pos;
    std::vector<double> neg;
};

SplitScores split_scores(std::span<const std::uint8_t> labels, std::span<const double> scores, const char* what) {
    check_aligned(labels.size(), scores.size(), what);
    check_scores(scores);
    SplitScores s;
    for (std::size_t k = 0; k < labels.size(); ++k) (labels[k] ? s.pos : s.neg).push_back(scores[k]);
    if (s.pos.empty() || s.neg.empty())
        throw std::invalid_argument(std::string(what) + ": single-class input (need positives and negatives)");
    return s;
}

OperatingPoint point_from(const RocPoint& p, OperatingRule rule) {
    OperatingPoint op;
    op.threshold = p.threshold;
    op.sensitivity = p.sensitivity;
    op.specificity = p.specificity;
    op.rule = rule;
    return op;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

}  // namespace

RocCurve roc_curve(std::span<const std::uint8_t> labels, std::span<const double> scores) {
    check_aligned(labels.size(), scores.size(), "roc_curve");
    check_scores(scores);
    RocCurve curve;
    curve.n_pos = kernels::active().count_nonzero_u8(labels);
    curve.n_neg = labels.size() - curve.n_pos;
    if (curve.n_pos == 0 || curve.n_neg == 0) throw std::invalid_argument("roc_curve: single-class input");

    const auto order = order_by_score(scores);
    const double inv_pos = 1.0 / static_cast<double>(curve.n_pos);
    const double inv_neg = 1.0 / static_cast<double>(curve.n_neg);
    auto make_point = [&](double threshold, std::size_t tp, std::size_t fp) {
        return RocPoint{threshold, static_cast<double>(tp) * inv_pos,
                        static_cast<double>(curve.n_neg - fp) * inv_neg, tp, fp};
    };

    // Walk from the highest score down, accumulating counts at or above each
    // distinct score.
    std::vector<RocPoint> descending;
    descending.push_back(make_point(std::numeric_limits<double>::infinity(), 0, 0));
    std::size_t tp = 0, fp = 0;
    std::size_t k = order.size();
    while (k > 0) {
        const double threshold = scores[order[k - 1]];
        while (k > 0 && scores[order[k - 1]] == threshold) {
            (labels[order[k - 1]] ? tp : fp) += 1;
            --k;
        }
        descending.push_back(make_point(threshold, tp, fp));
    }
    curve.points.assign(descending.rbegin(), descending.rend());
    return curve;
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
    out << "threshold,sensitivity,specificity\n";
    for (const auto& p : curve.points) {
        if (std::isinf(p.threshold))
            out << "inf";
        else
            out << p.threshold;
        out << ',' << p.sensitivity << ',' << p.specificity << '\n';
    }
}

double auroc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
    check_aligned(labels.size(), scores.size(), "auroc");
    check_scores(scores);
    const auto ranks = doubled_midranks(scores);
    std::uint64_t pos_rank_sum = 0;  // doubled
    std::uint64_t n_pos = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k]) {
            pos_rank_sum += ranks[k];
            ++n_pos;
        }
    }
    const std::uint64_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auroc: single-class input (need positives and negatives)");
    // U = R_pos - P(P+1)/2; doubled: 2U = 2R_pos - P(P+1)
    const std::uint64_t twice_u = pos_rank_sum - n_pos * (n_pos + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

AurocEstimate auroc_delong(std::span<const std::uint8_t> labels, std::span<const double> scores) {
    const auto split = split_scores(labels, scores, "auroc_delong");
    const auto all_ranks = doubled_midranks(scores);
    const auto pos_ranks = doubled_midranks(split.pos);
    const auto neg_ranks = doubled_midranks(split.neg);
    const auto n_pos = static_cast<double>(split.pos.size());
    const auto n_neg = static_cast<double>(split.neg.size());

    // Structural components: V10_i = fraction of negatives ranked below
    // positive i; V01_j = fraction of positives ranked above negative j.
    std::vector<double> v10, v01;
    v10.reserve(split.pos.size());
    v01.reserve(split.neg.size());
    std::size_t ip = 0, in = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k]) {
            const double below = 0.5 * static_cast<double>(all_ranks[k] - pos_ranks[ip++]);
            v10.push_back(below / n_neg);
        } else {
            const double below = 0.5 * static_cast<double>(all_ranks[k] - neg_ranks[in++]);
            v01.push_back(1.0 - below / n_pos);
        }
    }
    AurocEstimate est;
    est.auroc = auroc(labels, scores);
    est.variance = stats::sample_variance(v10) / n_pos + stats::sample_variance(v01) / n_neg;
    est.n_pos = split.pos.size();
    est.n_neg = split.neg.size();
    return est;
}

std::string to_string(OperatingRule rule) {
    switch (rule) {
        case OperatingRule::Youden:
            return "youden";
        case OperatingRule::MatchedSpecificity:
            return "matched_specificity";
        case OperatingRule::MatchedSensitivity:
            return "matched_sensitivity";
        case OperatingRule::Fixed:
            return "fixed";
    }
    return "fixed";
}

OperatingPoint youden_point(const RocCurve& curve, YoudenTieBreak tie_break) {
    if (curve.points.empty() || curve.n_pos == 0 || curve.n_neg == 0)
        throw std::invalid_argument("youden_point: degenerate curve");
    // J * P * N = tp * N + tn * P - P * N; compare the integer part exactly.
    std::size_t best = 0;
    std::uint64_t best_score = 0;
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
        const auto& p = curve.points[k];
        const std::uint64_t score = static_cast<std::uint64_t>(p.tp) * curve.n_neg +
                                    static_cast<std::uint64_t>(curve.n_neg - p.fp) * curve.n_pos;
        // Later points have higher specificity.
        const bool take = k == 0 || score > best_score ||
                          (score == best_score && tie_break == YoudenTieBreak::HigherSpecificity);
        if (take) {
            best = k;
            best_score = score;
        }
    }
    return point_from(curve.points[best], OperatingRule::Youden);
}

OperatingPoint matched_point(const RocCurve& curve, double target, MatchAxis axis) {
    if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("matched_point: target must lie in (0, 1)");
    if (curve.points.empty()) throw std::invalid_argument("matched_point: empty curve");
    const auto& pts = curve.points;
    std::optional<std::size_t> chosen;
    if (axis == MatchAxis::Specificity) {
        for (std::size_t k = 0; k < pts.size() && !chosen; ++k) {
            if (pts[k].specificity >= target) chosen = k;
        }
    } else {
        for (std::size_t k = pts.size(); k > 0 && !chosen; --k) {
            if (pts[k - 1].sensitivity >= target) chosen = k - 1;
        }
    }
    OperatingPoint op;
    const auto rule = axis == MatchAxis::Specificity ? OperatingRule::MatchedSpecificity : OperatingRule::MatchedSensitivity;
    if (chosen) {
        op = point_from(pts[*chosen], rule);
    } else {
        // Nearest achievable value on the requested axis.
        const auto& edge = axis == MatchAxis::Specificity ? pts.back() : pts.front();
        op = point_from(edge, rule);
        op.target_reached = false;
    }
    op.target = target;
    return op;
}

std::vector<std::uint8_t> apply_threshold(std::span<const double> scores, double threshold) {
    std::vector<std::uint8_t> out(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) out[k] = scores[k] >= threshold ? 1 : 0;
    return out;
}

BinaryMetrics binary_metrics(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predictions) {
    check_aligned(labels.size(), predictions.size(), "binary_metrics");
    BinaryMetrics m;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const bool truth = labels[k] != 0;
        const bool pred = predictions[k] != 0;
        if (truth && pred) ++m.tp;
        else if (truth) ++m.fn;
        else if (pred) ++m.fp;
        else ++m.tn;
    }
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.sensitivity = ratio(m.tp, m.tp + m.fn);
    m.specificity = ratio(m.tn, m.tn + m.fp);
    m.ppv = ratio(m.tp, m.tp + m.fp);
    m.npv = ratio(m.tn, m.tn + m.fn);
    m.confusion = {{{m.tn, m.fp}, {m.fn, m.tp}}};
    m.agreement = labels.empty() ? 0.0 : static_cast<double>(m.tp + m.tn) / static_cast<double>(labels.size());
    return m;
}

double krippendorff_alpha(std::span<const std::uint8_t> rater_a, std::span<const std::uint8_t> rater_b) {
    check_aligned(rater_a.size(), rater_b.size(), "krippendorff_alpha");
    const std::size_t units = rater_a.size();
    if (units < 2) throw std::invalid_argument("krippendorff_alpha: need at least 2 units");
    const auto& k = kernels::active();
    const std::size_t ones = k.count_nonzero_u8(rater_a) + k.count_nonzero_u8(rater_b);
    const std::size_t total = 2 * units;
    const std::size_t zeros = total - ones;
    if (ones == 0 || zeros == 0)
        throw std::domain_error("krippendorff_alpha: undefined, all values in one category (expected disagreement 0)");
    const std::size_t mismatches = units - k.count_equal_u8(rater_a, rater_b);
    // D_o = mismatches / N; D_e = 2 n0 n1 / (2N (2N - 1))
    const double observed = static_cast<double>(mismatches) / static_cast<double>(units);
    const double expected = 2.0 * static_cast<double>(zeros) * static_cast<double>(ones) /
                            (static_cast<double>(total) * static_cast<double>(total - 1));
    return 1.0 - observed / expected;
}

std::optional<double> CountRatio::value() const {
    if (denominator == 0) return std::nullopt;
    return static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::string CountRatio::text() const {
    return std::to_string(numerator) + ":" + std::to_string(denominator);
}

ReferenceOutcome reference_outcome(const CaseRecord& record) {
    return {record.label(), record.verification.gleason_grade_group};
}

BenefitHarmReport benefit_harm_ratios(std::span<const ReferenceOutcome> outcomes,
                                      std::span<const std::uint8_t> predictions) {
    check_aligned(outcomes.size(), predictions.size(), "benefit_harm_ratios");
    BenefitHarmReport r;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        const auto& o = outcomes[k];
        if (predictions[k]) {
            if (o.label && *o.label == 1) ++r.true_positives;
            if (o.grade_group && *o.grade_group == 1) ++r.gg1_false_positives;
        } else {
            ++r.negative_predictions;
            if (o.label && *o.label == 0) ++r.true_negatives;
        }
    }
    r.tp_to_gg1 = {r.true_positives, r.gg1_false_positives};
    r.tp_to_gg1_and_negatives = {r.true_positives, r.gg1_false_positives + r.negative_predictions};
    r.tn_to_gg1 = {r.true_negatives, r.gg1_false_positives};
    return r;
}

nlohmann::ordered_json to_json(const OperatingPoint& p) {
    nlohmann::ordered_json j;
    j["rule"] = to_string(p.rule);
    j["threshold"] = std::isinf(p.threshold) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(p.threshold);
    j["sensitivity"] = p.sensitivity;
    j["specificity"] = p.specificity;
    j["target"] = optional_json(p.target);
    j["target_reached"] = p.target_reached;
    return j;
}

nlohmann::ordered_json to_json(const BinaryMetrics& m) {
    nlohmann::ordered_json j;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["tn"] = m.tn;
    j["fn"] = m.fn;
    j["sensitivity"] = optional_json(m.sensitivity);
    j["specificity"] = optional_json(m.specificity);
    j["ppv"] = optional_json(m.ppv);
    j["npv"] = optional_json(m.npv);
    j["agreement"] = m.agreement;
    j["confusion"] = {{"reference_0", {{"predicted_0", m.confusion[0][0]}, {"predicted_1", m.confusion[0][1]}}},
                      {"reference_1", {{"predicted_0", m.confusion[1][0]}, {"predicted_1", m.confusion[1][1]}}}};
    return j;
}

nlohmann::ordered_json to_json(const BenefitHarmReport& r) {
    auto ratio = [](const CountRatio& c) {
        return nlohmann::ordered_json{{"numerator", c.numerator},
                                      {"denominator", c.denominator},
                                      {"ratio", c.text()},
                                      {"value", optional_json(c.value())}};
    };
    nlohmann::ordered_json j;
    j["true_positives"] = r.true_positives;
    j["gg1_false_positives"] = r.gg1_false_positives;
    j["negative_predictions"] = r.negative_predictions;
    j["true_negatives"] = r.true_negatives;
    j["tp_to_gg1"] = ratio(r.tp_to_gg1);
    j["tp_to_gg1_and_negatives"] = ratio(r.tp_to_gg1_and_negatives);
    j["tn_to_gg1"] = ratio(r.tn_to_gg1);
    return j;
}

nlohmann::ordered_json to_json(const AurocEstimate& e) {
    return {{"auroc", e.auroc}, {"variance", e.variance}, {"n_pos", e.n_pos}, {"n_neg", e.n_neg}};
}

}  // namespace dxi
