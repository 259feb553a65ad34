#pragma once

// Run configuration and the per-cohort analysis pipeline:
// validation -> agreement benchmarks -> operating point -> interchange test
// -> MI-adjusted AUROC -> additional metrics -> subset analyses.
//
// Config file (JSON; relative paths resolve against the config's directory):
//   {
//     "cohort": "PRIME",
//     "cases": "cases.csv",
//     "predictions": "predictions.csv",
//     "cutoff": "GE3",
//     "prevalence": 0.30,
//     "margin": 0.05,
//     "bootstrap_reps": 1000000,
//     "imputations": 100,
//     "seed": 42,
//     "operating_point": {"rule": "youden"},       // or matched_specificity /
//                                                   // matched_sensitivity with
//                                                   // "target", or fixed with
//                                                   // "threshold"
//     "reader_study": {"cases": "...", "readings": "..."},
//     "benchmarks": {"inter_reader": {"negative": 0.658, "positive": 0.887},
//                    "soc": {"negative": 0.581, "positive": 0.895}},
//     "calibration": {"cases": "...", "predictions": "..."},
//     "risk_model": {"path": "model.json"}          // or {"fit_cases": "..."}
//   }
// Exactly one of reader_study / benchmarks is required. calibration and
// risk_model are optional.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dxi/cohort.hpp"
#include "dxi/interchange.hpp"
#include "dxi/roc.hpp"
#include "json.hpp"

namespace dxi {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A module failure annotated with the pipeline stage it happened in.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what);
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct SubsetEstimates {
    double negative = 0.0;
    double positive = 0.0;
};

struct OperatingPointConfig {
    OperatingRule rule = OperatingRule::Youden;
    std::optional<double> target;     // matched rules
    std::optional<double> threshold;  // fixed rule
};

struct AnalysisConfig {
    std::string cohort;
    std::filesystem::path cases;
    std::filesystem::path predictions;
    CutoffRule cutoff = CutoffRule::PiradsGE3;
    double prevalence = 0.30;
    double margin = 0.05;
    std::size_t bootstrap_reps = 1'000'000;
    std::size_t imputations = 100;
    std::uint64_t seed = kDefaultSeed;
    OperatingPointConfig operating_point;
    std::optional<std::filesystem::path> reader_cases;
    std::optional<std::filesystem::path> reader_readings;
    std::optional<SubsetEstimates> inter_reader;  // given benchmarks
    std::optional<SubsetEstimates> soc;
    std::optional<std::filesystem::path> calibration_cases;
    std::optional<std::filesystem::path> calibration_predictions;
    std::optional<std::filesystem::path> risk_model_path;
    std::optional<std::filesystem::path> risk_model_fit_cases;
    unsigned threads = 0;  // not part of the embedded config; results do not depend on it
};

// Parses and checks a config: proportions in [0, 1], referenced files exist,
// exactly one benchmark source. Paths become absolute.
AnalysisConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AnalysisConfig load_config_file(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const AnalysisConfig& config);

struct AnalysisReport {
    nlohmann::ordered_json json;
    std::string markdown;
    InterchangeResult primary;
};

// Throws StageError.
AnalysisReport run_full_analysis(const AnalysisConfig& config);

struct MultiCohortReport {
    nlohmann::ordered_json json;
    std::string markdown;
    bool partial = false;  // a cohort failed; later cohorts were not run
};

// Cohorts run in order; the first failure stops the run and the report
// carries the completed cohorts, the error and partial = true. Holm-Bonferroni
// applies across the one-sided p-values of completed cohorts. Throws
// std::invalid_argument on an empty list.
MultiCohortReport run_multi_cohort(std::span<const AnalysisConfig> configs);

// Single config object, or {"cohorts": [...]} / a JSON array of configs.
std::vector<AnalysisConfig> load_configs_file(const std::filesystem::path& path);

}  // namespace dxi
