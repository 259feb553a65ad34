#pragma once

// Reader studies, case cohorts and AI predictions: data model, CSV/JSON
// ingestion and referential validation.
//
// File layouts (UTF-8, comma separated, '.' decimal point, fixed header):
//   readings.csv     case_id,reader_id,pirads
//   cases.csv        case_id,patient_id,age,psa,historical_pirads,verification,
//                    gleason_gg,age_band,pi_qual,ethnicity
//   predictions.csv  case_id,score
// The JSON form is an array of objects using the same field names.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dxi {

// Malformed or inconsistent input; `line` is 1-based (header is line 1), 0 when
// the problem is not tied to a line.
class DataError : public std::runtime_error {
public:
    DataError(const std::string& what, std::size_t line = 0);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

enum class Format { Csv, Json };

enum class CutoffRule { PiradsGE3, PiradsGE4 };

// 1 when the score meets the cutoff.
std::uint8_t binarize(int pirads, CutoffRule rule);
CutoffRule parse_cutoff(std::string_view text);
std::string_view to_string(CutoffRule rule);

struct ReaderScore {
    std::string case_id;
    std::string reader_id;
    int pirads = 0;

    bool operator==(const ReaderScore&) const = default;
};

enum class VerificationKind { HistologyVerified, ConsensusNegative, Unverified };

struct Verification {
    VerificationKind kind = VerificationKind::Unverified;
    // Grade group 0..5 (0 = benign histology); set only for HistologyVerified.
    std::optional<int> gleason_grade_group;

    bool operator==(const Verification&) const = default;
};

struct Strata {
    std::optional<std::string> age_band;
    std::optional<int> pi_qual;
    std::optional<std::string> ethnicity;

    bool operator==(const Strata&) const = default;
};

struct CaseRecord {
    std::string case_id;
    std::string patient_id;
    int age = 0;
    double psa = 0.0;
    int historical_pirads = 0;
    Verification verification;
    Strata strata;

    // Clinically significant cancer (grade group >= 2) -> 1; benign, grade
    // group 1 or consensus negative -> 0; unverified -> no label.
    std::optional<std::uint8_t> label() const;
    bool needs_imputation() const { return verification.kind == VerificationKind::Unverified; }

    bool operator==(const CaseRecord&) const = default;
};

struct AiPrediction {
    std::string case_id;
    double score = 0.0;

    bool operator==(const AiPrediction&) const = default;
};

std::vector<ReaderScore> load_readings(std::istream& in, Format format = Format::Csv);
std::vector<CaseRecord> load_cases(std::istream& in, Format format = Format::Csv);
std::vector<AiPrediction> load_predictions(std::istream& in, Format format = Format::Csv);

// File helpers; the format follows the extension (.json, anything else CSV).
std::vector<ReaderScore> load_readings_file(const std::string& path);
std::vector<CaseRecord> load_cases_file(const std::string& path);
std::vector<AiPrediction> load_predictions_file(const std::string& path);

void write_readings(std::ostream& out, std::span<const ReaderScore> readings);
void write_cases(std::ostream& out, std::span<const CaseRecord> cases);
void write_predictions(std::ostream& out, std::span<const AiPrediction> predictions);

// Scores aligned with `cases`. Throws DataError for a prediction whose case
// is not in the cohort ("unknown case"), a duplicated prediction, or a case
// without a prediction.
std::vector<double> align_predictions(std::span<const CaseRecord> cases,
                                      std::span<const AiPrediction> predictions);

// "<50", "50-59", "60-69" or ">=70".
std::string age_band_for(int age);

struct ReaderCountSummary {
    std::size_t min = 0;
    double median = 0.0;
    std::size_t max = 0;
};

struct ValidationReport {
    std::size_t n_cases = 0;
    std::size_t n_patients = 0;
    std::size_t n_labeled = 0;
    std::size_t n_positive = 0;
    std::optional<double> prevalence;  // positives / labeled
    std::size_t n_unverified = 0;
    double unverified_fraction = 0.0;
    std::size_t n_readings = 0;
    std::size_t n_readers = 0;
    std::optional<ReaderCountSummary> readers_per_case;  // over cases with >= 1 reading
    std::map<std::string, std::size_t> readers_by_case;
    std::size_t cases_without_readings = 0;
    std::size_t readings_with_unknown_case = 0;
    std::size_t predictions_with_unknown_case = 0;
    std::size_t cases_without_prediction = 0;
    std::vector<std::string> warnings;
};

ValidationReport validate_cohort(std::span<const CaseRecord> cases, std::span<const ReaderScore> readings,
                                 std::span<const AiPrediction> predictions);

nlohmann::ordered_json to_json(const ValidationReport& report);

}  // namespace dxi
