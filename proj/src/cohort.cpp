#include "dxi/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace dxi {

namespace {

using nlohmann::json;

constexpr std::string_view kReadingsHeader = "case_id,reader_id,pirads";
constexpr std::string_view kCasesHeader =
    "case_id,patient_id,age,psa,historical_pirads,verification,gleason_gg,age_band,pi_qual,ethnicity";
constexpr std::string_view kPredictionsHeader = "case_id,score";

std::string at_line(std::size_t line, const std::string& message) {
    return line == 0 ? message : "line " + std::to_string(line) + ": " + message;
}

[[noreturn]] void fail(std::size_t line, const std::string& message) {
    throw DataError(at_line(line, message), line);
}

std::vector<std::string_view> split(std::string_view row) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = row.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(row.substr(start));
            break;
        }
        fields.push_back(row.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

int parse_int(std::string_view text, std::size_t line, std::string_view field) {
    int value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end)
        fail(line, "malformed " + std::string(field) + " '" + std::string(text) + "'");
    return value;
}

double parse_double(std::string_view text, std::size_t line, std::string_view field) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value, std::chars_format::general);
    if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
        fail(line, "malformed " + std::string(field) + " '" + std::string(text) + "'");
    return value;
}

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

// Calls row(fields, line) for each data row after checking the header.
template <typename RowFn>
void read_csv(std::istream& in, std::string_view header, std::size_t n_fields, RowFn&& row) {
    std::string text;
    std::size_t line = 0;
    bool seen_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (line == 1 && text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
        if (text.empty()) continue;
        if (!seen_header) {
            if (text != header) fail(line, "expected header '" + std::string(header) + "'");
            seen_header = true;
            continue;
        }
        const auto fields = split(text);
        if (fields.size() != n_fields)
            fail(line, "malformed row: expected " + std::to_string(n_fields) + " fields, got " +
                           std::to_string(fields.size()));
        row(fields, line);
    }
    if (!seen_header) fail(0, "missing header '" + std::string(header) + "'");
}

void check_pirads(int pirads, std::size_t line, std::string_view field = "pirads") {
    if (pirads < 1 || pirads > 5) fail(line, std::string(field) + " out of range (" + std::to_string(pirads) + ")");
}

void check_score(double score, std::size_t line) {
    if (!(score >= 0.0 && score <= 100.0)) fail(line, "score out of range (" + format_double(score) + ")");
}

void check_unique_readings(const std::vector<ReaderScore>& readings, const std::vector<std::size_t>& lines) {
    std::set<std::pair<std::string_view, std::string_view>> seen;
    for (std::size_t k = 0; k < readings.size(); ++k) {
        if (!seen.emplace(readings[k].case_id, readings[k].reader_id).second)
            fail(lines[k], "duplicate pair (" + readings[k].case_id + ", " + readings[k].reader_id + ")");
    }
}

Verification make_verification(std::string_view code, std::optional<int> gg, std::size_t line) {
    Verification v;
    if (code == "HISTO") {
        v.kind = VerificationKind::HistologyVerified;
        if (!gg) fail(line, "missing required field gleason_gg for HISTO");
        if (*gg < 0 || *gg > 5) fail(line, "gleason_gg out of range (" + std::to_string(*gg) + ")");
        v.gleason_grade_group = gg;
    } else if (code == "CONSENSUS_NEG" || code == "UNVERIFIED") {
        v.kind = code == "CONSENSUS_NEG" ? VerificationKind::ConsensusNegative : VerificationKind::Unverified;
        if (gg) fail(line, "gleason_gg must be empty unless verification is HISTO");
    } else {
        fail(line, "unknown verification code '" + std::string(code) + "'");
    }
    return v;
}

std::string_view verification_code(const Verification& v) {
    switch (v.kind) {
        case VerificationKind::HistologyVerified:
            return "HISTO";
        case VerificationKind::ConsensusNegative:
            return "CONSENSUS_NEG";
        case VerificationKind::Unverified:
            return "UNVERIFIED";
    }
    return "UNVERIFIED";
}

void check_case(const CaseRecord& c, std::size_t line) {
    if (c.case_id.empty()) fail(line, "missing required field case_id");
    if (c.patient_id.empty()) fail(line, "missing required field patient_id");
    if (c.age <= 0) fail(line, "age must be a positive integer");
    if (!(c.psa > 0.0)) fail(line, "psa must be positive");
    check_pirads(c.historical_pirads, line, "historical_pirads");
    if (c.strata.pi_qual && (*c.strata.pi_qual < 1 || *c.strata.pi_qual > 3))
        fail(line, "pi_qual out of range (" + std::to_string(*c.strata.pi_qual) + ")");
}

json parse_json_array(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(0, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_array()) fail(0, "expected a JSON array of records");
    return doc;
}

template <typename T>
T json_field(const json& row, const char* name, std::size_t index) {
    if (!row.contains(name) || row.at(name).is_null())
        fail(0, "record " + std::to_string(index) + ": missing required field " + name);
    try {
        return row.at(name).get<T>();
    } catch (const json::exception&) {
        fail(0, "record " + std::to_string(index) + ": malformed " + name);
    }
}

template <typename T>
std::optional<T> json_optional(const json& row, const char* name, std::size_t index) {
    if (!row.contains(name) || row.at(name).is_null()) return std::nullopt;
    if constexpr (std::is_same_v<T, std::string>) {
        if (row.at(name).is_string() && row.at(name).get<std::string>().empty()) return std::nullopt;
    }
    return json_field<T>(row, name, index);
}

Format format_for(const std::string& path) {
    return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0 ? Format::Json : Format::Csv;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return in;
}

}  // namespace

DataError::DataError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}

std::uint8_t binarize(int pirads, CutoffRule rule) {
    const int cut = rule == CutoffRule::PiradsGE3 ? 3 : 4;
    return pirads >= cut ? 1 : 0;
}

CutoffRule parse_cutoff(std::string_view text) {
    if (text == "GE3" || text == "PiradsGE3" || text == "3") return CutoffRule::PiradsGE3;
    if (text == "GE4" || text == "PiradsGE4" || text == "4") return CutoffRule::PiradsGE4;
    throw std::invalid_argument("unknown cutoff rule '" + std::string(text) + "' (expected GE3 or GE4)");
}

std::string_view to_string(CutoffRule rule) {
    return rule == CutoffRule::PiradsGE3 ? "GE3" : "GE4";
}

std::optional<std::uint8_t> CaseRecord::label() const {
    switch (verification.kind) {
        case VerificationKind::HistologyVerified:
            return static_cast<std::uint8_t>(verification.gleason_grade_group.value_or(0) >= 2 ? 1 : 0);
        case VerificationKind::ConsensusNegative:
            return std::uint8_t{0};
        case VerificationKind::Unverified:
            return std::nullopt;
    }
    return std::nullopt;
}

std::vector<ReaderScore> load_readings(std::istream& in, Format format) {
    std::vector<ReaderScore> out;
    std::vector<std::size_t> lines;
    if (format == Format::Json) {
        const json doc = parse_json_array(in);
        for (std::size_t k = 0; k < doc.size(); ++k) {
            ReaderScore r{json_field<std::string>(doc[k], "case_id", k), json_field<std::string>(doc[k], "reader_id", k),
                          json_field<int>(doc[k], "pirads", k)};
            if (r.pirads < 1 || r.pirads > 5)
                fail(0, "record " + std::to_string(k) + ": pirads out of range (" + std::to_string(r.pirads) + ")");
            out.push_back(std::move(r));
            lines.push_back(0);
        }
    } else {
        read_csv(in, kReadingsHeader, 3, [&](const std::vector<std::string_view>& f, std::size_t line) {
            if (f[0].empty() || f[1].empty()) fail(line, "malformed row: empty identifier");
            const int pirads = parse_int(f[2], line, "pirads");
            check_pirads(pirads, line);
            out.push_back({std::string(f[0]), std::string(f[1]), pirads});
            lines.push_back(line);
        });
    }
    check_unique_readings(out, lines);
    return out;
}

std::vector<CaseRecord> load_cases(std::istream& in, Format format) {
    std::vector<CaseRecord> out;
    std::unordered_set<std::string> ids;
    auto add = [&](CaseRecord c, std::size_t line) {
        check_case(c, line);
        if (!ids.insert(c.case_id).second) fail(line, "duplicate case_id '" + c.case_id + "'");
        out.push_back(std::move(c));
    };
    if (format == Format::Json) {
        const json doc = parse_json_array(in);
        for (std::size_t k = 0; k < doc.size(); ++k) {
            const json& row = doc[k];
            CaseRecord c;
            c.case_id = json_field<std::string>(row, "case_id", k);
            c.patient_id = json_field<std::string>(row, "patient_id", k);
            c.age = json_field<int>(row, "age", k);
            c.psa = json_field<double>(row, "psa", k);
            c.historical_pirads = json_field<int>(row, "historical_pirads", k);
            c.verification = make_verification(json_field<std::string>(row, "verification", k),
                                               json_optional<int>(row, "gleason_gg", k), 0);
            c.strata.age_band = json_optional<std::string>(row, "age_band", k);
            c.strata.pi_qual = json_optional<int>(row, "pi_qual", k);
            c.strata.ethnicity = json_optional<std::string>(row, "ethnicity", k);
            add(std::move(c), 0);
        }
    } else {
        read_csv(in, kCasesHeader, 10, [&](const std::vector<std::string_view>& f, std::size_t line) {
            for (std::size_t k = 0; k < 6; ++k) {
                if (f[k].empty()) fail(line, "missing required field " + std::string(split(kCasesHeader)[k]));
            }
            CaseRecord c;
            c.case_id = std::string(f[0]);
            c.patient_id = std::string(f[1]);
            c.age = parse_int(f[2], line, "age");
            c.psa = parse_double(f[3], line, "psa");
            c.historical_pirads = parse_int(f[4], line, "historical_pirads");
            std::optional<int> gg;
            if (!f[6].empty()) gg = parse_int(f[6], line, "gleason_gg");
            c.verification = make_verification(f[5], gg, line);
            if (!f[7].empty()) c.strata.age_band = std::string(f[7]);
            if (!f[8].empty()) c.strata.pi_qual = parse_int(f[8], line, "pi_qual");
            if (!f[9].empty()) c.strata.ethnicity = std::string(f[9]);
            add(std::move(c), line);
        });
    }
    return out;
}

std::vector<AiPrediction> load_predictions(std::istream& in, Format format) {
    std::vector<AiPrediction> out;
    std::unordered_map<std::string, std::size_t> seen;
    auto add = [&](AiPrediction p, std::size_t line) {
        check_score(p.score, line);
        if (!seen.emplace(p.case_id, out.size()).second) fail(line, "duplicate prediction for case '" + p.case_id + "'");
        out.push_back(std::move(p));
    };
    if (format == Format::Json) {
        const json doc = parse_json_array(in);
        for (std::size_t k = 0; k < doc.size(); ++k)
            add({json_field<std::string>(doc[k], "case_id", k), json_field<double>(doc[k], "score", k)}, 0);
    } else {
        read_csv(in, kPredictionsHeader, 2, [&](const std::vector<std::string_view>& f, std::size_t line) {
            if (f[0].empty()) fail(line, "malformed row: empty case_id");
            add({std::string(f[0]), parse_double(f[1], line, "score")}, line);
        });
    }
    return out;
}

std::vector<ReaderScore> load_readings_file(const std::string& path) {
    auto in = open_input(path);
    return load_readings(in, format_for(path));
}

std::vector<CaseRecord> load_cases_file(const std::string& path) {
    auto in = open_input(path);
    return load_cases(in, format_for(path));
}

std::vector<AiPrediction> load_predictions_file(const std::string& path) {
    auto in = open_input(path);
    return load_predictions(in, format_for(path));
}

void write_readings(std::ostream& out, std::span<const ReaderScore> readings) {
    out << kReadingsHeader << '\n';
    for (const auto& r : readings) out << r.case_id << ',' << r.reader_id << ',' << r.pirads << '\n';
}

void write_cases(std::ostream& out, std::span<const CaseRecord> cases) {
    out << kCasesHeader << '\n';
    for (const auto& c : cases) {
        out << c.case_id << ',' << c.patient_id << ',' << c.age << ',' << format_double(c.psa) << ','
            << c.historical_pirads << ',' << verification_code(c.verification) << ',';
        if (c.verification.gleason_grade_group) out << *c.verification.gleason_grade_group;
        out << ',' << c.strata.age_band.value_or("") << ',';
        if (c.strata.pi_qual) out << *c.strata.pi_qual;
        out << ',' << c.strata.ethnicity.value_or("") << '\n';
    }
}

void write_predictions(std::ostream& out, std::span<const AiPrediction> predictions) {
    out << kPredictionsHeader << '\n';
    for (const auto& p : predictions) out << p.case_id << ',' << format_double(p.score) << '\n';
}

std::vector<double> align_predictions(std::span<const CaseRecord> cases, std::span<const AiPrediction> predictions) {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t k = 0; k < cases.size(); ++k) index.emplace(cases[k].case_id, k);
    std::vector<double> scores(cases.size(), 0.0);
    std::vector<bool> filled(cases.size(), false);
    for (const auto& p : predictions) {
        const auto it = index.find(p.case_id);
        if (it == index.end()) throw DataError("unknown case '" + p.case_id + "' in predictions");
        if (filled[it->second]) throw DataError("duplicate prediction for case '" + p.case_id + "'");
        scores[it->second] = p.score;
        filled[it->second] = true;
    }
    for (std::size_t k = 0; k < cases.size(); ++k) {
        if (!filled[k]) throw DataError("no prediction for case '" + cases[k].case_id + "'");
    }
    return scores;
}

std::string age_band_for(int age) {
    if (age < 50) return "<50";
    if (age < 60) return "50-59";
    if (age < 70) return "60-69";
    return ">=70";
}

ValidationReport validate_cohort(std::span<const CaseRecord> cases, std::span<const ReaderScore> readings,
                                 std::span<const AiPrediction> predictions) {
    ValidationReport report;
    report.n_cases = cases.size();
    std::unordered_set<std::string_view> case_ids;
    std::unordered_set<std::string_view> patients;
    for (const auto& c : cases) {
        case_ids.insert(c.case_id);
        patients.insert(c.patient_id);
        if (const auto label = c.label()) {
            ++report.n_labeled;
            report.n_positive += *label;
        } else {
            ++report.n_unverified;
        }
    }
    report.n_patients = patients.size();
    if (report.n_labeled > 0)
        report.prevalence = static_cast<double>(report.n_positive) / static_cast<double>(report.n_labeled);
    if (report.n_cases > 0)
        report.unverified_fraction = static_cast<double>(report.n_unverified) / static_cast<double>(report.n_cases);

    report.n_readings = readings.size();
    std::unordered_set<std::string_view> readers;
    for (const auto& r : readings) {
        readers.insert(r.reader_id);
        ++report.readers_by_case[r.case_id];
        if (!cases.empty() && !case_ids.contains(r.case_id)) ++report.readings_with_unknown_case;
    }
    report.n_readers = readers.size();
    if (!report.readers_by_case.empty()) {
        std::vector<std::size_t> counts;
        counts.reserve(report.readers_by_case.size());
        for (const auto& [id, n] : report.readers_by_case) counts.push_back(n);
        std::sort(counts.begin(), counts.end());
        const std::size_t mid = counts.size() / 2;
        const double median = counts.size() % 2 == 1
                                  ? static_cast<double>(counts[mid])
                                  : 0.5 * static_cast<double>(counts[mid - 1] + counts[mid]);
        report.readers_per_case = ReaderCountSummary{counts.front(), median, counts.back()};
    }
    if (readings.empty()) {
        report.warnings.emplace_back("no reader data");
    } else {
        for (const auto& c : cases) {
            if (!report.readers_by_case.contains(c.case_id)) ++report.cases_without_readings;
        }
    }

    std::unordered_set<std::string_view> predicted;
    for (const auto& p : predictions) {
        predicted.insert(p.case_id);
        if (!case_ids.contains(p.case_id)) ++report.predictions_with_unknown_case;
    }
    if (!predictions.empty()) {
        for (const auto& c : cases) {
            if (!predicted.contains(c.case_id)) ++report.cases_without_prediction;
        }
    }

    if (cases.empty()) report.warnings.emplace_back("no cases");
    if (report.readings_with_unknown_case > 0)
        report.warnings.push_back(std::to_string(report.readings_with_unknown_case) + " readings reference unknown cases");
    if (report.predictions_with_unknown_case > 0)
        report.warnings.push_back(std::to_string(report.predictions_with_unknown_case) +
                                  " predictions reference unknown cases");
    if (report.cases_without_prediction > 0)
        report.warnings.push_back(std::to_string(report.cases_without_prediction) + " cases have no prediction");
    if (report.readers_per_case && report.readers_per_case->min < 2)
        report.warnings.emplace_back("some cases have fewer than 2 readers; they are excluded from inter-reader agreement");
    return report;
}

nlohmann::ordered_json to_json(const ValidationReport& report) {
    nlohmann::ordered_json j;
    j["n_cases"] = report.n_cases;
    j["n_patients"] = report.n_patients;
    j["n_labeled"] = report.n_labeled;
    j["n_positive"] = report.n_positive;
    j["prevalence"] = report.prevalence ? nlohmann::ordered_json(*report.prevalence) : nlohmann::ordered_json();
    j["n_unverified"] = report.n_unverified;
    j["unverified_fraction"] = report.unverified_fraction;
    j["n_readings"] = report.n_readings;
    j["n_readers"] = report.n_readers;
    if (report.readers_per_case) {
        j["readers_per_case"] = {{"min", report.readers_per_case->min},
                                 {"median", report.readers_per_case->median},
                                 {"max", report.readers_per_case->max}};
    } else {
        j["readers_per_case"] = nullptr;
    }
    j["cases_without_readings"] = report.cases_without_readings;
    j["readings_with_unknown_case"] = report.readings_with_unknown_case;
    j["predictions_with_unknown_case"] = report.predictions_with_unknown_case;
    j["cases_without_prediction"] = report.cases_without_prediction;
    j["warnings"] = report.warnings;
    return j;
}

}  // namespace dxi
