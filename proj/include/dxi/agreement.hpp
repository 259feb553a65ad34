#pragma once

// Agreement among radiologists and between radiologists and the standard of
// care, with case-level percentile bootstrap and prevalence adjustment.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dxi/cohort.hpp"
#include "dxi/kernels.hpp"
#include "dxi/rng.hpp"
#include "json.hpp"

namespace dxi {

struct BootstrapOptions {
    std::size_t replications = 1'000'000;
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 0;  // 0 = hardware concurrency
    const kernels::KernelTable* kernels = nullptr;  // nullptr = kernels::active()
};

// Bootstrapped proportion. `mean` is the average of the replicate means;
// the interval holds the 2.5th and 97.5th percentiles of the replicates.
struct AgreementEstimate {
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t replications = 0;
    std::size_t n_cases = 0;
    double sample_mean = 0.0;  // plain mean of the per-case proportions
};

struct PrevalenceAdjusted {
    double p = 0.0;
    double pos_estimate = 0.0;
    double neg_estimate = 0.0;
    double adjusted = 0.0;
};

// Fraction of concordant reader pairs in one case. nullopt when fewer than
// two readers scored the case.
std::optional<double> pairwise_case_agreement(std::span<const std::uint8_t> decisions);

// Fraction of readers whose decision matches the reference label.
double soc_case_agreement(std::span<const std::uint8_t> decisions, std::uint8_t soc_label);

// Resamples the case list with replacement, B times.
AgreementEstimate mean_agreement_bootstrap(std::span<const double> per_case, const BootstrapOptions& options = {});

PrevalenceAdjusted prevalence_adjust(double p, double pos_estimate, double neg_estimate);

struct CaseDecisions {
    std::string case_id;
    std::vector<std::uint8_t> decisions;
};

// Binarized decisions per case, ordered by case_id.
std::vector<CaseDecisions> group_decisions(std::span<const ReaderScore> readings, CutoffRule cutoff);

// Estimates over all cases and the negative/positive splits.
struct AgreementTable {
    CutoffRule cutoff = CutoffRule::PiradsGE3;
    std::optional<AgreementEstimate> all;
    std::optional<AgreementEstimate> negative;
    std::optional<AgreementEstimate> positive;
    std::size_t excluded_cases = 0;
    std::vector<std::string> warnings;
};

// Pairwise inter-reader agreement. Cases with fewer than two readers are
// excluded; unlabeled cases only enter the "all" split.
AgreementTable inter_reader_agreement(std::span<const ReaderScore> readings, std::span<const CaseRecord> cases,
                                      CutoffRule cutoff, const BootstrapOptions& options = {});

// Reader vs reference-label agreement. Cases without a label are excluded.
AgreementTable soc_agreement(std::span<const ReaderScore> readings, std::span<const CaseRecord> cases,
                             CutoffRule cutoff, const BootstrapOptions& options = {});

nlohmann::ordered_json to_json(const AgreementEstimate& estimate);
nlohmann::ordered_json to_json(const PrevalenceAdjusted& adjusted);
nlohmann::ordered_json to_json(const AgreementTable& table);

}  // namespace dxi
