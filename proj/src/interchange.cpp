#include "dxi/interchange.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "dxi/parallel.hpp"
#include "dxi/stats.hpp"

namespace dxi {

namespace {

std::string pct(double v) {
    return fmt::format("{:.1f}%", 100.0 * v);
}

}  // namespace

double agreement_proportion(std::span<const std::uint8_t> soc_labels, std::span<const std::uint8_t> ai_binary) {
    if (soc_labels.size() != ai_binary.size()) throw std::invalid_argument("agreement_proportion: length mismatch");
    if (soc_labels.empty()) throw std::invalid_argument("agreement_proportion: empty input");
    const std::size_t matches = kernels::active().count_equal_u8(soc_labels, ai_binary);
    return static_cast<double>(matches) / static_cast<double>(soc_labels.size());
}

WaldBootstrapResult bootstrap_wald_ci(std::span<const std::uint8_t> soc_labels,
                                      std::span<const std::uint8_t> ai_binary,
                                      std::span<const std::string> patient_ids, const BootstrapOptions& options) {
    if (soc_labels.size() != ai_binary.size() || soc_labels.size() != patient_ids.size())
        throw std::invalid_argument("bootstrap_wald_ci: length mismatch");
    if (soc_labels.empty()) throw std::invalid_argument("bootstrap_wald_ci: no patients");
    if (options.replications == 0) throw std::invalid_argument("bootstrap_wald_ci: B must be >= 1");

    // Per-patient match and case counts, patients in first-appearance order.
    std::map<std::string_view, std::size_t> slot;
    std::vector<std::int32_t> matches, counts;
    for (std::size_t k = 0; k < soc_labels.size(); ++k) {
        const auto [it, inserted] = slot.emplace(patient_ids[k], matches.size());
        if (inserted) {
            matches.push_back(0);
            counts.push_back(0);
        }
        matches[it->second] += soc_labels[k] == ai_binary[k] ? 1 : 0;
        counts[it->second] += 1;
    }
    const auto n_patients = static_cast<std::uint32_t>(matches.size());
    const auto& k = options.kernels != nullptr ? *options.kernels : kernels::active();

    std::vector<double> replicates(options.replications);
    parallel_blocks(options.replications, options.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> idx(n_patients);
        for (std::size_t b = begin; b < end; ++b) {
            Stream rng(options.seed, b);
            for (auto& i : idx) i = rng.bounded(n_patients);
            const auto hit = k.gather_sum_i32(matches, idx);
            const auto total = k.gather_sum_i32(counts, idx);
            replicates[b] = static_cast<double>(hit) / static_cast<double>(total);
        }
    });

    WaldBootstrapResult r;
    r.proportion = agreement_proportion(soc_labels, ai_binary);
    r.replications = options.replications;
    r.n_cases = soc_labels.size();
    r.n_patients = n_patients;
    if (options.replications > 1) {
        const double mean = k.sum_f64(replicates) / static_cast<double>(options.replications);
        double ss = 0.0;
        for (const double v : replicates) ss += (v - mean) * (v - mean);
        r.se_boot = std::sqrt(ss / static_cast<double>(options.replications - 1));
    }
    r.ci_low = r.proportion - kWaldCritical * r.se_boot;
    r.ci_high = r.proportion + kWaldCritical * r.se_boot;
    r.percentile_low = stats::percentile(replicates, 0.025);
    r.percentile_high = stats::percentile(replicates, 0.975);
    return r;
}

std::string to_string(Decision decision) {
    return decision == Decision::Interchangeable ? "Interchangeable" : "NotDemonstrated";
}

InterchangeResult interchange_decision(double proportion, double ci_low, double ci_high, double benchmark,
                                       double margin, std::optional<double> context_inter_reader,
                                       std::string cohort_name) {
    if (!(margin >= 0.0)) throw std::invalid_argument("interchange_decision: margin must be >= 0");
    InterchangeResult r;
    r.cohort_name = std::move(cohort_name);
    r.proportion = proportion;
    r.ci_low = ci_low;
    r.ci_high = ci_high;
    r.benchmark = benchmark;
    r.margin = margin;
    r.context_inter_reader = context_inter_reader;
    r.decision = ci_low > benchmark - margin ? Decision::Interchangeable : Decision::NotDemonstrated;
    return r;
}

InterchangeResult interchange_test(const WaldBootstrapResult& bootstrap, double benchmark, double margin,
                                   std::optional<double> context_inter_reader, std::string cohort_name) {
    auto r = interchange_decision(bootstrap.proportion, bootstrap.ci_low, bootstrap.ci_high, benchmark, margin,
                                  context_inter_reader, std::move(cohort_name));
    r.bootstrap = bootstrap;
    r.p_value = one_sided_p_value(bootstrap.proportion, bootstrap.se_boot, benchmark, margin);
    return r;
}

double one_sided_p_value(double proportion, double se, double benchmark, double margin) {
    const double line = benchmark - margin;
    if (se <= 0.0) return proportion > line ? 0.0 : 1.0;
    return stats::normal_cdf(-(proportion - line) / se);
}

HolmResult holm_bonferroni(std::span<const double> p_values, double alpha) {
    for (const double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("holm_bonferroni: p-values must lie in [0, 1]");
    }
    const std::size_t k = p_values.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    HolmResult r;
    r.reject.assign(k, false);
    r.adjusted_p.assign(k, 1.0);
    bool still_rejecting = true;
    double running = 0.0;
    for (std::size_t rank = 0; rank < k; ++rank) {
        const std::size_t i = order[rank];
        const double factor = static_cast<double>(k - rank);
        running = std::max(running, std::min(1.0, factor * p_values[i]));
        r.adjusted_p[i] = running;
        if (still_rejecting && p_values[i] <= alpha / factor) {
            r.reject[i] = true;
        } else {
            still_rejecting = false;
        }
    }
    return r;
}

nlohmann::ordered_json to_json(const WaldBootstrapResult& r) {
    return {{"proportion", r.proportion},
            {"se_boot", r.se_boot},
            {"wald_ci", {r.ci_low, r.ci_high}},
            {"percentile_ci", {r.percentile_low, r.percentile_high}},
            {"replications", r.replications},
            {"n_cases", r.n_cases},
            {"n_patients", r.n_patients}};
}

nlohmann::ordered_json to_json(const InterchangeResult& r) {
    nlohmann::ordered_json j;
    j["cohort"] = r.cohort_name;
    j["proportion"] = r.proportion;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["benchmark"] = r.benchmark;
    j["margin"] = r.margin;
    j["decision_line"] = r.decision_line();
    j["decision"] = to_string(r.decision);
    j["context_inter_reader"] =
        r.context_inter_reader ? nlohmann::ordered_json(*r.context_inter_reader) : nlohmann::ordered_json();
    j["p_value_one_sided"] = r.p_value ? nlohmann::ordered_json(*r.p_value) : nlohmann::ordered_json();
    j["bootstrap"] = r.bootstrap ? to_json(*r.bootstrap) : nlohmann::ordered_json();
    return j;
}

std::string interchange_figure_csv(const InterchangeResult& r) {
    std::string out = "series,value\n";
    out += fmt::format("estimate,{}\n", r.proportion);
    out += fmt::format("ci_low,{}\n", r.ci_low);
    out += fmt::format("ci_high,{}\n", r.ci_high);
    out += fmt::format("benchmark,{}\n", r.benchmark);
    out += fmt::format("decision_line,{}\n", r.decision_line());
    if (r.context_inter_reader) out += fmt::format("inter_reader_context,{}\n", *r.context_inter_reader);
    return out;
}

std::string interchange_markdown(const InterchangeResult& r) {
    std::string out;
    if (!r.cohort_name.empty()) out += fmt::format("### Primary endpoint: {}\n\n", r.cohort_name);
    out += "| Quantity | Value |\n|---|---|\n";
    out += fmt::format("| AI agreement with standard of care | {} (95% CI {}, {}) |\n", pct(r.proportion), pct(r.ci_low),
                       pct(r.ci_high));
    out += fmt::format("| Radiologist agreement with standard of care (benchmark) | {} |\n", pct(r.benchmark));
    out += fmt::format("| Margin | {:.2f} |\n", r.margin);
    out += fmt::format("| Decision line (benchmark - margin) | {} |\n", pct(r.decision_line()));
    if (r.context_inter_reader)
        out += fmt::format("| Inter-reader agreement (context) | {} |\n", pct(*r.context_inter_reader));
    if (r.p_value) out += fmt::format("| One-sided p-value | {:.4g} |\n", *r.p_value);

    // Text rendering of the comparison on a 50-100% axis, one column per percent.
    auto column = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.5, 1.0) * 100.0)) - 50; };
    std::string axis(51, ' ');
    std::string marks(51, ' ');
    for (int c = column(r.ci_low); c <= column(r.ci_high); ++c) axis[static_cast<std::size_t>(c)] = '-';
    axis[static_cast<std::size_t>(column(r.ci_low))] = '[';
    axis[static_cast<std::size_t>(column(r.ci_high))] = ']';
    axis[static_cast<std::size_t>(column(r.proportion))] = '*';
    marks[static_cast<std::size_t>(column(r.decision_line()))] = '|';
    marks[static_cast<std::size_t>(column(r.benchmark))] = 'B';
    if (r.context_inter_reader) marks[static_cast<std::size_t>(column(*r.context_inter_reader))] = 'P';
    out += "\n```\n";
    out += "50%       60%       70%       80%       90%       100%\n";
    out += axis + "  AI estimate [95% CI]\n";
    out += marks + "  | decision line, B benchmark, P inter-reader\n";
    out += "```\n\n";
    const char* relation = r.decision == Decision::Interchangeable ? "exceeds" : "does not exceed";
    out += fmt::format("Decision: **{}**. The lower bound {} {} the decision line at {}.\n", to_string(r.decision),
                       pct(r.ci_low), relation, pct(r.decision_line()));
    return out;
}

}  // namespace dxi
