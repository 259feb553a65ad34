#include "dxi/agreement.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "dxi/parallel.hpp"
#include "dxi/stats.hpp"

namespace dxi {

namespace {

enum SubsetTag : std::uint64_t { kAll = 1, kNegative = 2, kPositive = 3 };

const kernels::KernelTable& kernels_for(const BootstrapOptions& options) {
    return options.kernels != nullptr ? *options.kernels : kernels::active();
}

std::optional<AgreementEstimate> bootstrap_or_empty(const std::vector<double>& values, const BootstrapOptions& options,
                                                    std::uint64_t tag) {
    if (values.empty()) return std::nullopt;
    BootstrapOptions sub = options;
    sub.seed = derive_seed(options.seed, tag);
    return mean_agreement_bootstrap(values, sub);
}

std::unordered_map<std::string_view, const CaseRecord*> index_cases(std::span<const CaseRecord> cases) {
    std::unordered_map<std::string_view, const CaseRecord*> index;
    for (const auto& c : cases) index.emplace(c.case_id, &c);
    return index;
}

}  // namespace

std::optional<double> pairwise_case_agreement(std::span<const std::uint8_t> decisions) {
    const std::size_t n = decisions.size();
    if (n < 2) return std::nullopt;
    const std::size_t ones = kernels::active().count_nonzero_u8(decisions);
    const std::size_t zeros = n - ones;
    auto choose2 = [](std::size_t k) { return k < 2 ? std::size_t{0} : k * (k - 1) / 2; };
    const std::size_t concordant = choose2(ones) + choose2(zeros);
    const std::size_t pairs = choose2(n);
    return static_cast<double>(concordant) / static_cast<double>(pairs);
}

double soc_case_agreement(std::span<const std::uint8_t> decisions, std::uint8_t soc_label) {
    if (decisions.empty()) throw std::invalid_argument("soc_case_agreement: no readers");
    const std::size_t ones = kernels::active().count_nonzero_u8(decisions);
    const std::size_t matches = soc_label != 0 ? ones : decisions.size() - ones;
    return static_cast<double>(matches) / static_cast<double>(decisions.size());
}

AgreementEstimate mean_agreement_bootstrap(std::span<const double> per_case, const BootstrapOptions& options) {
    if (per_case.empty()) throw std::invalid_argument("mean_agreement_bootstrap: empty input");
    if (options.replications == 0) throw std::invalid_argument("mean_agreement_bootstrap: B must be >= 1");
    if (per_case.size() > std::numeric_limits<std::int32_t>::max())
        throw std::invalid_argument("mean_agreement_bootstrap: too many cases");
    const auto& k = kernels_for(options);
    const auto m = static_cast<std::uint32_t>(per_case.size());
    const double inv_m = 1.0 / static_cast<double>(m);

    std::vector<double> replicate_means(options.replications);
    parallel_blocks(options.replications, options.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> idx(m);
        for (std::size_t b = begin; b < end; ++b) {
            Stream rng(options.seed, b);
            for (auto& i : idx) i = rng.bounded(m);
            replicate_means[b] = k.gather_sum_f64(per_case, idx) * inv_m;
        }
    });

    AgreementEstimate est;
    est.replications = options.replications;
    est.n_cases = per_case.size();
    est.sample_mean = k.sum_f64(per_case) * inv_m;
    est.mean = k.sum_f64(replicate_means) / static_cast<double>(options.replications);
    est.ci_low = stats::percentile(replicate_means, 0.025);
    est.ci_high = stats::percentile(replicate_means, 0.975);
    return est;
}

PrevalenceAdjusted prevalence_adjust(double p, double pos_estimate, double neg_estimate) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(p) || !unit(pos_estimate) || !unit(neg_estimate))
        throw std::invalid_argument("prevalence_adjust: inputs must lie in [0, 1]");
    return {p, pos_estimate, neg_estimate, p * pos_estimate + (1.0 - p) * neg_estimate};
}

std::vector<CaseDecisions> group_decisions(std::span<const ReaderScore> readings, CutoffRule cutoff) {
    std::map<std::string, std::vector<std::uint8_t>> grouped;
    for (const auto& r : readings) grouped[r.case_id].push_back(binarize(r.pirads, cutoff));
    std::vector<CaseDecisions> out;
    out.reserve(grouped.size());
    for (auto& [id, decisions] : grouped) out.push_back({id, std::move(decisions)});
    return out;
}

AgreementTable inter_reader_agreement(std::span<const ReaderScore> readings, std::span<const CaseRecord> cases,
                                      CutoffRule cutoff, const BootstrapOptions& options) {
    AgreementTable table;
    table.cutoff = cutoff;
    const auto index = index_cases(cases);
    std::vector<double> all, negative, positive;
    for (const auto& g : group_decisions(readings, cutoff)) {
        const auto p = pairwise_case_agreement(g.decisions);
        if (!p) {
            ++table.excluded_cases;
            continue;
        }
        all.push_back(*p);
        const auto it = index.find(g.case_id);
        if (it == index.end()) continue;
        if (const auto label = it->second->label()) (*label ? positive : negative).push_back(*p);
    }
    if (table.excluded_cases > 0)
        table.warnings.push_back(std::to_string(table.excluded_cases) + " cases with fewer than 2 readers excluded");
    table.all = bootstrap_or_empty(all, options, kAll);
    table.negative = bootstrap_or_empty(negative, options, kNegative);
    table.positive = bootstrap_or_empty(positive, options, kPositive);
    return table;
}

AgreementTable soc_agreement(std::span<const ReaderScore> readings, std::span<const CaseRecord> cases,
                             CutoffRule cutoff, const BootstrapOptions& options) {
    AgreementTable table;
    table.cutoff = cutoff;
    const auto index = index_cases(cases);
    std::vector<double> all, negative, positive;
    for (const auto& g : group_decisions(readings, cutoff)) {
        const auto it = index.find(g.case_id);
        const auto label = it == index.end() ? std::nullopt : it->second->label();
        if (!label) {
            ++table.excluded_cases;
            continue;
        }
        const double p = soc_case_agreement(g.decisions, *label);
        all.push_back(p);
        (*label ? positive : negative).push_back(p);
    }
    if (table.excluded_cases > 0)
        table.warnings.push_back(std::to_string(table.excluded_cases) + " cases without a reference label excluded");
    table.all = bootstrap_or_empty(all, options, kAll);
    table.negative = bootstrap_or_empty(negative, options, kNegative);
    table.positive = bootstrap_or_empty(positive, options, kPositive);
    return table;
}

nlohmann::ordered_json to_json(const AgreementEstimate& e) {
    return {{"mean", e.mean},         {"ci_low", e.ci_low},   {"ci_high", e.ci_high},
            {"sample_mean", e.sample_mean}, {"replications", e.replications}, {"n_cases", e.n_cases}};
}

nlohmann::ordered_json to_json(const PrevalenceAdjusted& a) {
    return {{"prevalence", a.p}, {"pos_estimate", a.pos_estimate}, {"neg_estimate", a.neg_estimate},
            {"adjusted", a.adjusted}};
}

nlohmann::ordered_json to_json(const AgreementTable& t) {
    auto opt = [](const std::optional<AgreementEstimate>& e) {
        return e ? to_json(*e) : nlohmann::ordered_json();
    };
    return {{"cutoff", std::string(to_string(t.cutoff))},
            {"all", opt(t.all)},
            {"negative", opt(t.negative)},
            {"positive", opt(t.positive)},
            {"excluded_cases", t.excluded_cases},
            {"warnings", t.warnings}};
}

}  // namespace dxi
