#pragma once

// Multiple imputation of disease status for unverified (MRI-negative,
// non-biopsied) cases and Rubin's-rules pooling of the AUROC.
//
// Risk model: logistic regression of the reference label on age and log(PSA),
// fit by maximum likelihood on the MRI-negative cases (historical PI-RADS <= 2)
// of a fully verified cohort. After fitting, the intercept is shifted by a
// constant so that the mean predicted risk over the fit population equals the
// base probability of significant cancer after a negative MRI (0.03 by
// default). With no covariate signal the model therefore predicts exactly
// the base probability.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dxi/cohort.hpp"
#include "dxi/rng.hpp"
#include "json.hpp"

namespace dxi {

inline constexpr double kBaseProbability = 0.03;

struct RiskModel {
    double intercept = 0.0;  // includes calibration_offset
    double coef_age = 0.0;   // per year
    double coef_logpsa = 0.0;  // per unit of natural-log PSA (ng/mL)
    double base_probability = kBaseProbability;
    double calibration_offset = 0.0;
    std::string psa_transform = "log";
    bool separation_fallback = false;
    std::size_t n_fit = 0;
    // Covariance of (intercept, coef_age, coef_logpsa) from the inverse
    // Fisher information; absent for hand-set or fallback models.
    std::optional<std::array<double, 9>> covariance;

    // Intercept-only model predicting `base` for everyone.
    static RiskModel base_only(double base = kBaseProbability);
    std::array<double, 3> standard_errors() const;  // zeros without covariance
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FitOptions {
    double base_probability = kBaseProbability;
    bool mri_negative_only = true;
    int max_iterations = 100;
};

// Throws ModelError for cohorts with unverified cases or a single outcome
// class ("no positive outcomes" / "no negative outcomes"). Complete
// separation yields the base-only model with separation_fallback set.
RiskModel fit_risk_model(std::span<const CaseRecord> verified_cases, const FitOptions& options = {});

double case_probability(const RiskModel& model, double age, double psa);

enum class ImputationMode { Improper, Proper };

struct ImputationOptions {
    std::size_t imputations = 100;
    std::uint64_t seed = kDefaultSeed;
    ImputationMode mode = ImputationMode::Improper;
    unsigned threads = 0;
};

// m complete label vectors aligned with `cases`. Imputation is per patient:
// one Bernoulli draw per patient (risk from the patient's first unverified
// case) applied to all of that patient's unverified cases. Verified labels
// are copied unchanged. Imputation j draws from stream (seed, j).
std::vector<std::vector<std::uint8_t>> impute_statuses(std::span<const CaseRecord> cases, const RiskModel& model,
                                                       const ImputationOptions& options = {});

struct MiPooledAuroc {
    double q_pooled = 0.0;     // Q: mean of per-imputation AUROCs
    double within_var = 0.0;   // U: mean of per-imputation variances
    double between_var = 0.0;  // B: variance of per-imputation AUROCs
    double total_var = 0.0;    // T = B (1 + 1/m) + U
    std::size_t m = 0;         // imputations pooled
    std::size_t excluded = 0;  // single-class imputations dropped
    double t_critical = 0.0;   // t quantile with m - 1 df
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<double> estimates;
    std::vector<double> variances;
};

// Rubin's rules over m >= 2 completed-data estimates.
MiPooledAuroc rubin_pool(std::span<const double> estimates, std::span<const double> variances);

// AUROC (DeLong variance) on each imputed label vector, pooled by Rubin's rules.
MiPooledAuroc pooled_auroc_mi(std::span<const CaseRecord> cases, std::span<const double> scores,
                              const RiskModel& model, const ImputationOptions& options = {});

enum class Stratifier { AgeBand, PiQual, Ethnicity };
Stratifier parse_stratifier(std::string_view text);  // "age_band", "pi_qual", "ethnicity"
std::string to_string(Stratifier stratifier);

struct StratumAuroc {
    std::string stratum;
    std::size_t n_cases = 0;
    std::size_t n_unverified = 0;
    std::size_t n_positive = 0;  // among labeled cases
    std::size_t n_negative = 0;
    std::optional<double> auroc;
    std::optional<double> variance;  // DeLong, or Rubin's total variance
    bool imputed = false;
    std::optional<std::string> skipped;  // reason when no estimate
};

struct StratifiedAuroc {
    Stratifier stratifier = Stratifier::AgeBand;
    std::vector<StratumAuroc> strata;
    std::size_t unknown_excluded = 0;  // cases without a stratum value
};

// Per-stratum AUROC; strata with unverified cases go through
// pooled_auroc_mi (stratum k uses seed derive_seed(options.seed, k)).
// The age stratifier falls back to the band of the recorded age. Strata are
// ordered <50, 50-59, 60-69, >=70 / 1, 2, 3 / lexicographically.
StratifiedAuroc stratified_auroc(std::span<const CaseRecord> cases, std::span<const double> scores,
                                 Stratifier stratifier, const RiskModel& model,
                                 const ImputationOptions& options = {});

nlohmann::ordered_json to_json(const StratifiedAuroc& report);

nlohmann::ordered_json to_json(const RiskModel& model);
RiskModel risk_model_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const MiPooledAuroc& pooled, bool include_per_imputation = false);

}  // namespace dxi
