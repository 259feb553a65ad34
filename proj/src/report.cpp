#include "dxi/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>

#include "dxi/agreement.hpp"
#include "dxi/mi.hpp"

namespace dxi {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Tags for derive_seed; one per random stage.
constexpr std::uint64_t kSeedInterReader = 10;
constexpr std::uint64_t kSeedSoc = 11;
constexpr std::uint64_t kSeedInterchange = 12;
constexpr std::uint64_t kSeedImputation = 13;
constexpr std::uint64_t kSeedSubsets = 14;

std::string pct(double v) {
    return fmt::format("{:.1f}%", 100.0 * v);
}

std::string pct(const std::optional<double>& v) {
    return v ? pct(*v) : std::string("n/a");
}

double proportion_field(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(fmt::format("'{}' must be a number", key));
    const double v = j.at(key).get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt::format("'{}' = {} outside [0, 1]", key, v));
    return v;
}

std::size_t count_field(const nlohmann::json& j, const char* key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(fmt::format("'{}' must be a non-negative integer", key));
    return j.at(key).get<std::size_t>();
}

fs::path existing_file(const nlohmann::json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || !j.at(key).is_string()) throw ConfigError(fmt::format("'{}' must be a file path", key));
    fs::path p = j.at(key).get<std::string>();
    if (p.is_relative()) p = base / p;
    p = p.lexically_normal();
    if (!fs::is_regular_file(p)) throw ConfigError(fmt::format("'{}': file not found: {}", key, p.string()));
    return p;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }
}

SubsetEstimates subset_estimates(const nlohmann::json& j, const char* where) {
    if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
    reject_unknown(j, {"negative", "positive"}, where);
    if (!j.contains("negative") || !j.contains("positive"))
        throw ConfigError(fmt::format("'{}' needs 'negative' and 'positive'", where));
    return {proportion_field(j, "negative", 0.0), proportion_field(j, "positive", 0.0)};
}

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// Standard-of-care reference used for the primary endpoint and the binary
// metrics: the case label when verified, 0 for an unverified MRI-negative
// case (PI-RADS <= 2), none otherwise.
std::optional<std::uint8_t> soc_reference(const CaseRecord& c) {
    if (const auto y = c.label()) return y;
    if (c.historical_pirads <= 2) return std::uint8_t{0};
    return std::nullopt;
}

struct LoadedCohort {
    std::vector<CaseRecord> cases;
    std::vector<AiPrediction> predictions;
    std::vector<double> scores;
};

LoadedCohort load_scored(const fs::path& cases_path, const fs::path& predictions_path) {
    LoadedCohort c;
    c.cases = load_cases_file(cases_path.string());
    c.predictions = load_predictions_file(predictions_path.string());
    c.scores = align_predictions(c.cases, c.predictions);
    return c;
}

OperatingPoint choose_operating_point(const OperatingPointConfig& op, std::span<const std::uint8_t> labels,
                                      std::span<const double> scores) {
    if (op.rule == OperatingRule::Fixed) {
        OperatingPoint p;
        p.rule = OperatingRule::Fixed;
        p.threshold = *op.threshold;
        const auto m = binary_metrics(labels, apply_threshold(scores, p.threshold));
        p.sensitivity = m.sensitivity.value_or(0.0);
        p.specificity = m.specificity.value_or(0.0);
        return p;
    }
    const auto curve = roc_curve(labels, scores);
    switch (op.rule) {
        case OperatingRule::MatchedSpecificity:
            return matched_point(curve, *op.target, MatchAxis::Specificity);
        case OperatingRule::MatchedSensitivity:
            return matched_point(curve, *op.target, MatchAxis::Sensitivity);
        default:
            return youden_point(curve);
    }
}

ojson optional_number(const std::optional<double>& v) {
    return v ? ojson(*v) : ojson();
}

}  // namespace

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}

AnalysisConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"cohort", "cases", "predictions", "cutoff", "prevalence", "margin", "bootstrap_reps",
                    "imputations", "seed", "operating_point", "reader_study", "benchmarks", "calibration",
                    "risk_model"},
                   "config");
    const fs::path base = base_dir.empty() ? fs::current_path() : fs::absolute(base_dir);
    AnalysisConfig c;
    try {
        c.cohort = j.value("cohort", std::string("cohort"));
        c.cases = existing_file(j, "cases", base);
        c.predictions = existing_file(j, "predictions", base);
        try {
            c.cutoff = parse_cutoff(j.value("cutoff", std::string("GE3")));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        c.prevalence = proportion_field(j, "prevalence", c.prevalence);
        c.margin = proportion_field(j, "margin", c.margin);
        c.bootstrap_reps = count_field(j, "bootstrap_reps", c.bootstrap_reps);
        c.imputations = count_field(j, "imputations", c.imputations);
        if (j.contains("seed")) {
            if (!j.at("seed").is_number_integer() || j.at("seed").get<std::int64_t>() < 0) throw ConfigError("'seed' must be a non-negative integer");
            c.seed = j.at("seed").get<std::uint64_t>();
        }
        if (c.bootstrap_reps < 2) throw ConfigError("'bootstrap_reps' must be >= 2");
        if (c.imputations < 2) throw ConfigError("'imputations' must be >= 2");

        if (j.contains("operating_point")) {
            const auto& op = j.at("operating_point");
            reject_unknown(op, {"rule", "target", "threshold"}, "operating_point");
            const auto rule = op.value("rule", std::string("youden"));
            if (rule == "youden") {
                c.operating_point.rule = OperatingRule::Youden;
            } else if (rule == "matched_specificity" || rule == "matched_sensitivity") {
                c.operating_point.rule =
                    rule == "matched_specificity" ? OperatingRule::MatchedSpecificity : OperatingRule::MatchedSensitivity;
                const double t = proportion_field(op, "target", -1.0);
                if (!(t > 0.0 && t < 1.0)) throw ConfigError("operating_point: 'target' in (0, 1) required");
                c.operating_point.target = t;
            } else if (rule == "fixed") {
                c.operating_point.rule = OperatingRule::Fixed;
                if (!op.contains("threshold") || !op.at("threshold").is_number())
                    throw ConfigError("operating_point: 'threshold' required for the fixed rule");
                c.operating_point.threshold = op.at("threshold").get<double>();
            } else {
                throw ConfigError("operating_point: unknown rule '" + rule + "'");
            }
        }

        const bool has_study = j.contains("reader_study");
        const bool has_benchmarks = j.contains("benchmarks");
        if (has_study == has_benchmarks) throw ConfigError("exactly one of 'reader_study' or 'benchmarks' is required");
        if (has_study) {
            const auto& rs = j.at("reader_study");
            reject_unknown(rs, {"cases", "readings"}, "reader_study");
            c.reader_cases = existing_file(rs, "cases", base);
            c.reader_readings = existing_file(rs, "readings", base);
        } else {
            const auto& b = j.at("benchmarks");
            reject_unknown(b, {"inter_reader", "soc"}, "benchmarks");
            if (!b.contains("soc")) throw ConfigError("benchmarks: 'soc' required");
            c.soc = subset_estimates(b.at("soc"), "benchmarks.soc");
            if (b.contains("inter_reader")) c.inter_reader = subset_estimates(b.at("inter_reader"), "benchmarks.inter_reader");
        }
        if (j.contains("calibration")) {
            const auto& cal = j.at("calibration");
            reject_unknown(cal, {"cases", "predictions"}, "calibration");
            c.calibration_cases = existing_file(cal, "cases", base);
            c.calibration_predictions = existing_file(cal, "predictions", base);
        }
        if (j.contains("risk_model")) {
            const auto& rm = j.at("risk_model");
            reject_unknown(rm, {"path", "fit_cases"}, "risk_model");
            if (rm.contains("path") == rm.contains("fit_cases"))
                throw ConfigError("risk_model: exactly one of 'path' or 'fit_cases'");
            if (rm.contains("path"))
                c.risk_model_path = existing_file(rm, "path", base);
            else
                c.risk_model_fit_cases = existing_file(rm, "fit_cases", base);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

AnalysisConfig load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j, fs::absolute(path).parent_path());
}

std::vector<AnalysisConfig> load_configs_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    const auto base = fs::absolute(path).parent_path();
    const nlohmann::json* list = nullptr;
    if (j.is_array()) {
        list = &j;
    } else if (j.is_object() && j.contains("cohorts")) {
        if (j.size() != 1) throw ConfigError("a multi-cohort file holds only 'cohorts'");
        list = &j.at("cohorts");
        if (!list->is_array()) throw ConfigError("'cohorts' must be an array");
    }
    std::vector<AnalysisConfig> out;
    if (!list) {
        out.push_back(parse_config(j, base));
        return out;
    }
    for (const auto& item : *list) out.push_back(parse_config(item, base));
    return out;
}

ojson to_json(const AnalysisConfig& c) {
    ojson j;
    j["cohort"] = c.cohort;
    j["cases"] = c.cases.string();
    j["predictions"] = c.predictions.string();
    j["cutoff"] = std::string(to_string(c.cutoff));
    j["prevalence"] = c.prevalence;
    j["margin"] = c.margin;
    j["bootstrap_reps"] = c.bootstrap_reps;
    j["imputations"] = c.imputations;
    j["seed"] = c.seed;
    ojson op;
    op["rule"] = to_string(c.operating_point.rule);
    if (c.operating_point.target) op["target"] = *c.operating_point.target;
    if (c.operating_point.threshold) op["threshold"] = *c.operating_point.threshold;
    j["operating_point"] = op;
    if (c.reader_cases) {
        j["reader_study"] = {{"cases", c.reader_cases->string()}, {"readings", c.reader_readings->string()}};
    } else {
        ojson b;
        if (c.inter_reader)
            b["inter_reader"] = {{"negative", c.inter_reader->negative}, {"positive", c.inter_reader->positive}};
        if (c.soc) b["soc"] = {{"negative", c.soc->negative}, {"positive", c.soc->positive}};
        j["benchmarks"] = b;
    }
    if (c.calibration_cases)
        j["calibration"] = {{"cases", c.calibration_cases->string()},
                            {"predictions", c.calibration_predictions->string()}};
    if (c.risk_model_path) j["risk_model"] = {{"path", c.risk_model_path->string()}};
    if (c.risk_model_fit_cases) j["risk_model"] = {{"fit_cases", c.risk_model_fit_cases->string()}};
    return j;
}

AnalysisReport run_full_analysis(const AnalysisConfig& config) {
    std::vector<std::string> warnings;
    AnalysisReport report;
    ojson& out = report.json;
    out["cohort"] = config.cohort;
    out["config"] = to_json(config);
    out["seeds"] = {{"base", config.seed},
                    {"inter_reader_bootstrap", derive_seed(config.seed, kSeedInterReader)},
                    {"soc_bootstrap", derive_seed(config.seed, kSeedSoc)},
                    {"interchange_bootstrap", derive_seed(config.seed, kSeedInterchange)},
                    {"imputation", derive_seed(config.seed, kSeedImputation)},
                    {"subset_imputation", derive_seed(config.seed, kSeedSubsets)}};

    // 1. validation
    const auto cohort = stage("validation", [&] {
        auto c = load_scored(config.cases, config.predictions);
        const auto v = validate_cohort(c.cases, {}, c.predictions);
        out["validation"] = to_json(v);
        for (const auto& w : v.warnings) {
            if (w != "no reader data") warnings.push_back("validation: " + w);
        }
        return c;
    });

    // 2. agreement benchmarks
    stage("agreement", [&] {
        PrevalenceAdjusted q_adj;
        std::optional<PrevalenceAdjusted> p_adj;
        ojson bench;
        if (config.reader_cases) {
            const auto cases = load_cases_file(config.reader_cases->string());
            const auto readings = load_readings_file(config.reader_readings->string());
            BootstrapOptions bo;
            bo.replications = config.bootstrap_reps;
            bo.threads = config.threads;
            bo.seed = derive_seed(config.seed, kSeedInterReader);
            const auto ir = inter_reader_agreement(readings, cases, config.cutoff, bo);
            bo.seed = derive_seed(config.seed, kSeedSoc);
            const auto soc = soc_agreement(readings, cases, config.cutoff, bo);
            for (const auto& w : ir.warnings) warnings.push_back("inter-reader agreement: " + w);
            for (const auto& w : soc.warnings) warnings.push_back("standard-of-care agreement: " + w);
            if (!soc.negative || !soc.positive)
                throw std::invalid_argument("reader study lacks positive or negative labeled cases");
            q_adj = prevalence_adjust(config.prevalence, soc.positive->mean, soc.negative->mean);
            if (ir.negative && ir.positive)
                p_adj = prevalence_adjust(config.prevalence, ir.positive->mean, ir.negative->mean);
            bench["source"] = "reader_study";
            bench["inter_reader"] = to_json(ir);
            bench["soc"] = to_json(soc);
        } else {
            q_adj = prevalence_adjust(config.prevalence, config.soc->positive, config.soc->negative);
            if (config.inter_reader)
                p_adj = prevalence_adjust(config.prevalence, config.inter_reader->positive, config.inter_reader->negative);
            bench["source"] = "given";
        }
        bench["q_adj"] = to_json(q_adj);
        bench["p_adj"] = p_adj ? to_json(*p_adj) : ojson();
        out["benchmarks"] = bench;
        return 0;
    });
    const double q_adj = out["benchmarks"]["q_adj"]["adjusted"].get<double>();
    const std::optional<double> p_adj = out["benchmarks"]["p_adj"].is_null()
                                            ? std::nullopt
                                            : std::optional(out["benchmarks"]["p_adj"]["adjusted"].get<double>());

    // Reference labels for the primary endpoint.
    std::vector<std::uint8_t> reference;
    std::vector<std::size_t> scored_index;
    std::size_t excluded = 0;
    for (std::size_t k = 0; k < cohort.cases.size(); ++k) {
        if (const auto y = soc_reference(cohort.cases[k])) {
            reference.push_back(*y);
            scored_index.push_back(k);
        } else {
            ++excluded;
        }
    }
    if (excluded > 0)
        warnings.push_back(fmt::format(
            "{} unverified cases with historical PI-RADS >= 3 have no standard-of-care label and are excluded "
            "from the primary endpoint",
            excluded));

    // 3. operating point
    const OperatingPoint op = stage("operating_point", [&] {
        std::vector<std::uint8_t> labels;
        std::vector<double> scores;
        std::string source;
        if (config.operating_point.rule == OperatingRule::Fixed) {
            for (std::size_t i = 0; i < scored_index.size(); ++i) {
                labels.push_back(reference[i]);
                scores.push_back(cohort.scores[scored_index[i]]);
            }
            source = "fixed";
        } else if (config.calibration_cases) {
            const auto cal = load_scored(*config.calibration_cases, *config.calibration_predictions);
            for (std::size_t k = 0; k < cal.cases.size(); ++k) {
                if (const auto y = cal.cases[k].label()) {
                    labels.push_back(*y);
                    scores.push_back(cal.scores[k]);
                }
            }
            source = "calibration_cohort";
        } else {
            for (std::size_t k = 0; k < cohort.cases.size(); ++k) {
                if (const auto y = cohort.cases[k].label()) {
                    labels.push_back(*y);
                    scores.push_back(cohort.scores[k]);
                }
            }
            source = "test_cohort_verified_cases";
            warnings.push_back("operating point derived from the verified cases of the test cohort itself; "
                               "supply a calibration cohort or a fixed threshold for a prespecified point");
        }
        auto point = choose_operating_point(config.operating_point, labels, scores);
        if (!point.target_reached) warnings.push_back("operating point target not reached");
        auto j = to_json(point);
        j["source"] = source;
        out["operating_point"] = j;
        return point;
    });

    std::vector<std::uint8_t> ai_binary, ai_scored;
    std::vector<std::string> patients;
    ai_binary = apply_threshold(cohort.scores, op.threshold);
    for (const std::size_t k : scored_index) {
        ai_scored.push_back(ai_binary[k]);
        patients.push_back(cohort.cases[k].patient_id);
    }

    // 4. interchange test
    report.primary = stage("interchange", [&] {
        BootstrapOptions bo;
        bo.replications = config.bootstrap_reps;
        bo.threads = config.threads;
        bo.seed = derive_seed(config.seed, kSeedInterchange);
        const auto bs = bootstrap_wald_ci(reference, ai_scored, patients, bo);
        auto r = interchange_test(bs, q_adj, config.margin, p_adj, config.cohort);
        auto j = to_json(r);
        j["excluded_cases"] = excluded;
        out["primary_endpoint"] = j;
        return r;
    });

    // 5. MI-adjusted AUROC
    const auto model = stage("auroc_mi", [&] {
        RiskModel m;
        std::string source;
        if (config.risk_model_path) {
            std::ifstream in(*config.risk_model_path);
            m = risk_model_from_json(nlohmann::json::parse(in));
            source = "file";
        } else if (config.risk_model_fit_cases) {
            m = fit_risk_model(load_cases_file(config.risk_model_fit_cases->string()));
            source = "fitted";
            if (m.separation_fallback) warnings.push_back("risk model fit separated; base probability used");
        } else {
            m = RiskModel::base_only();
            source = "base_probability";
            std::size_t unverified = 0;
            for (const auto& c : cohort.cases) unverified += c.needs_imputation() ? 1 : 0;
            if (unverified > 0)
                warnings.push_back("no risk model configured; unverified cases imputed at the base probability");
        }
        ImputationOptions io;
        io.imputations = config.imputations;
        io.seed = derive_seed(config.seed, kSeedImputation);
        io.threads = config.threads;
        const auto pooled = pooled_auroc_mi(cohort.cases, cohort.scores, m, io);
        ojson j;
        j["risk_model_source"] = source;
        j["risk_model"] = to_json(m);
        j["pooled"] = to_json(pooled);
        std::vector<std::uint8_t> labels;
        std::vector<double> scores;
        for (std::size_t k = 0; k < cohort.cases.size(); ++k) {
            if (const auto y = cohort.cases[k].label()) {
                labels.push_back(*y);
                scores.push_back(cohort.scores[k]);
            }
        }
        try {
            j["complete_case"] = to_json(auroc_delong(labels, scores));
        } catch (const std::invalid_argument&) {
            j["complete_case"] = ojson();
        }
        out["auroc_mi"] = j;
        return m;
    });

    // 6. additional metrics
    stage("metrics", [&] {
        const auto m = binary_metrics(reference, ai_scored);
        std::vector<ReferenceOutcome> outcomes;
        for (const std::size_t k : scored_index) outcomes.push_back(reference_outcome(cohort.cases[k]));
        ojson j;
        j["binary"] = to_json(m);
        try {
            j["krippendorff_alpha"] = krippendorff_alpha(ai_scored, reference);
        } catch (const std::exception&) {
            j["krippendorff_alpha"] = ojson();
        }
        j["benefit_harm"] = to_json(benefit_harm_ratios(outcomes, ai_scored));
        out["metrics"] = j;
        return 0;
    });

    // 7. subset analyses
    stage("subsets", [&] {
        ImputationOptions io;
        io.imputations = config.imputations;
        io.seed = derive_seed(config.seed, kSeedSubsets);
        io.threads = config.threads;
        ojson subsets = ojson::array();
        for (const auto s : {Stratifier::AgeBand, Stratifier::PiQual, Stratifier::Ethnicity}) {
            auto r = stratified_auroc(cohort.cases, cohort.scores, s, model, io);
            subsets.push_back(to_json(r));
        }
        out["subsets"] = subsets;
        return 0;
    });

    out["warnings"] = warnings;

    // Markdown in reporting order: primary endpoint, then secondary measures.
    std::string md = fmt::format("# Analysis report: {}\n\n", config.cohort);
    md += fmt::format("Cutoff {}, prevalence {:.2f}, margin {:.2f}, B = {}, m = {}, seed {}.\n\n",
                      to_string(config.cutoff), config.prevalence, config.margin, config.bootstrap_reps,
                      config.imputations, config.seed);
    md += "## Primary endpoint\n\n";
    md += interchange_markdown(report.primary);
    md += fmt::format("\nOperating point: {} at threshold {} (sensitivity {}, specificity {}; source {}).\n\n",
                      to_string(op.rule), std::isinf(op.threshold) ? std::string("inf") : fmt::format("{:.4g}", op.threshold),
                      pct(op.sensitivity), pct(op.specificity), out["operating_point"]["source"].get<std::string>());
    md += "## Agreement benchmarks\n\n| Estimate | Value |\n|---|---|\n";
    md += fmt::format("| Radiologist agreement with standard of care, prevalence adjusted | {} |\n", pct(q_adj));
    md += fmt::format("| Inter-reader agreement, prevalence adjusted | {} |\n\n", pct(p_adj));
    md += "## Secondary measures\n\n### AUROC adjusted for verification bias\n\n";
    const auto& mi = out["auroc_mi"]["pooled"];
    md += fmt::format("Pooled AUROC {:.3f} (95% CI {:.3f}, {:.3f}) over m = {} imputations; risk model: {}.\n\n",
                      mi["q_pooled"].get<double>(), mi["ci_low"].get<double>(), mi["ci_high"].get<double>(),
                      mi["m"].get<std::size_t>(), out["auroc_mi"]["risk_model_source"].get<std::string>());
    const auto& bin = out["metrics"]["binary"];
    auto opt_pct = [](const ojson& v) { return v.is_null() ? std::string("n/a") : pct(v.get<double>()); };
    md += "### Binary metrics at the operating point\n\n| Metric | Value |\n|---|---|\n";
    md += fmt::format("| Sensitivity | {} |\n| Specificity | {} |\n| PPV | {} |\n| NPV | {} |\n",
                      opt_pct(bin["sensitivity"]), opt_pct(bin["specificity"]), opt_pct(bin["ppv"]),
                      opt_pct(bin["npv"]));
    const auto& alpha = out["metrics"]["krippendorff_alpha"];
    md += fmt::format("| Krippendorff's alpha | {} |\n\n",
                      alpha.is_null() ? std::string("n/a") : fmt::format("{:.3f}", alpha.get<double>()));
    const auto& bh = out["metrics"]["benefit_harm"];
    md += "### Benefit-to-harm ratios\n\n";
    md += fmt::format("| TP : GG1 detections | {} |\n|---|---|\n", bh["tp_to_gg1"]["ratio"].get<std::string>());
    md += fmt::format("| TP : (GG1 detections + negative predictions) | {} |\n",
                      bh["tp_to_gg1_and_negatives"]["ratio"].get<std::string>());
    md += fmt::format("| Biopsies avoided (TN) : GG1 detections | {} |\n\n", bh["tn_to_gg1"]["ratio"].get<std::string>());
    md += "## Subset analyses\n\n";
    for (const auto& s : out["subsets"]) {
        md += fmt::format("### {}\n\n| Stratum | N | Unverified | AUROC |\n|---|---|---|---|\n",
                          s["stratifier"].get<std::string>());
        for (const auto& st : s["strata"]) {
            const std::string value = st["auroc"].is_null() ? "skipped: " + st["skipped"].get<std::string>()
                                                            : fmt::format("{:.3f}", st["auroc"].get<double>());
            md += fmt::format("| {} | {} | {} | {} |\n", st["stratum"].get<std::string>(),
                              st["n_cases"].get<std::size_t>(), st["n_unverified"].get<std::size_t>(), value);
        }
        md += fmt::format("\nCases without a value: {}.\n\n", s["unknown_excluded"].get<std::size_t>());
    }
    if (!warnings.empty()) {
        md += "## Warnings\n\n";
        for (const auto& w : warnings) md += "- " + w + "\n";
    }
    report.markdown = std::move(md);
    return report;
}

MultiCohortReport run_multi_cohort(std::span<const AnalysisConfig> configs) {
    if (configs.empty()) throw std::invalid_argument("usage: at least one cohort config is required");
    MultiCohortReport report;
    std::vector<AnalysisReport> done;
    ojson error;
    for (const auto& c : configs) {
        try {
            done.push_back(run_full_analysis(c));
        } catch (const StageError& e) {
            error = {{"cohort", c.cohort}, {"stage", e.stage()}, {"message", e.what()}};
            report.partial = true;
            break;
        }
    }
    std::vector<double> p_values;
    for (const auto& r : done) p_values.push_back(r.primary.p_value.value_or(1.0));
    const auto holm = holm_bonferroni(p_values);

    ojson& out = report.json;
    out["partial"] = report.partial;
    out["error"] = error;
    ojson cohorts = ojson::array();
    ojson multiplicity = ojson::array();
    std::string md = "# Multi-cohort analysis\n\n";
    if (report.partial)
        md += fmt::format("**Partial report**: cohort {} failed ({}).\n\n", error["cohort"].get<std::string>(),
                          error["message"].get<std::string>());
    md += "| Cohort | Agreement (95% CI) | Decision line | Decision | Holm-adjusted p | Holm decision |\n"
          "|---|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < done.size(); ++i) {
        const auto& r = done[i].primary;
        cohorts.push_back(done[i].json);
        const bool both = r.decision == Decision::Interchangeable && holm.reject[i];
        multiplicity.push_back({{"cohort", r.cohort_name},
                                {"p_value_one_sided", optional_number(r.p_value)},
                                {"holm_adjusted_p", holm.adjusted_p[i]},
                                {"holm_reject", static_cast<bool>(holm.reject[i])},
                                {"decision", to_string(r.decision)},
                                {"decision_after_holm", to_string(both ? Decision::Interchangeable
                                                                       : Decision::NotDemonstrated)}});
        md += fmt::format("| {} | {} ({}, {}) | {} | {} | {:.4g} | {} |\n", r.cohort_name, pct(r.proportion),
                          pct(r.ci_low), pct(r.ci_high), pct(r.decision_line()), to_string(r.decision),
                          holm.adjusted_p[i], holm.reject[i] ? "reject" : "retain");
    }
    md += "\n";
    for (const auto& r : done) md += r.markdown + "\n";
    out["multiplicity"] = {{"method", "holm"}, {"alpha", 0.05}, {"cohorts", multiplicity}};
    out["cohorts"] = cohorts;
    report.markdown = std::move(md);
    return report;
}

}  // namespace dxi
