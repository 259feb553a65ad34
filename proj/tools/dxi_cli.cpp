// dxi: command-line front end for the interchangeability analysis toolkit.
//
// Output goes to stdout unless an output directory is given (--out-dir or
// the DXI_OUTPUT_DIR environment variable), in which case each command
// writes <command>.<ext> there.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dxi/agreement.hpp"
#include "dxi/cohort.hpp"
#include "dxi/interchange.hpp"
#include "dxi/mi.hpp"
#include "dxi/power.hpp"
#include "dxi/report.hpp"
#include "dxi/roc.hpp"
#include "dxi/simulate.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
    std::uint64_t seed = dxi::kDefaultSeed;
    std::optional<std::size_t> bootstrap_reps;
    std::optional<std::size_t> imputations;
    std::optional<double> margin;
    std::string output = "json";
    unsigned threads = 0;
    std::string out_dir;
};

// Exit codes.
constexpr int kExitAnalysis = 1;  // data, config or stage failure
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;   // multi-cohort run stopped early

struct Output {
    ojson json;
    std::string markdown;
    std::optional<std::string> csv;
};

void emit(const Globals& g, const std::string& name, const Output& out) {
    std::string text;
    std::string ext = g.output;
    if (g.output == "json") {
        text = out.json.dump(2) + "\n";
    } else if (g.output == "md") {
        text = out.markdown;
    } else {
        if (!out.csv) throw std::invalid_argument("csv output is not available for '" + name + "'");
        text = *out.csv;
    }
    if (g.out_dir.empty()) {
        std::cout << text;
        return;
    }
    fs::create_directories(g.out_dir);
    const fs::path path = fs::path(g.out_dir) / (name + "." + ext);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    std::cerr << "wrote " << path.string() << "\n";
}

std::string pct(double v) {
    return fmt::format("{:.1f}%", 100.0 * v);
}

dxi::BootstrapOptions bootstrap_options(const Globals& g) {
    dxi::BootstrapOptions o;
    o.replications = g.bootstrap_reps.value_or(1'000'000);
    o.seed = g.seed;
    o.threads = g.threads;
    return o;
}

dxi::ImputationOptions imputation_options(const Globals& g) {
    dxi::ImputationOptions o;
    o.imputations = g.imputations.value_or(100);
    o.seed = g.seed;
    o.threads = g.threads;
    return o;
}

std::string estimate_cell(const std::optional<dxi::AgreementEstimate>& e) {
    return e ? fmt::format("{} ({}, {})", pct(e->mean), pct(e->ci_low), pct(e->ci_high)) : std::string("n/a");
}

std::string agreement_csv_rows(const std::string& kind, const dxi::AgreementTable& t) {
    std::string out;
    const std::pair<const char*, const std::optional<dxi::AgreementEstimate>*> rows[] = {
        {"all", &t.all}, {"negative", &t.negative}, {"positive", &t.positive}};
    for (const auto& [subset, e] : rows) {
        if (*e)
            out += fmt::format("{},{},{},{},{},{},{}\n", kind, dxi::to_string(t.cutoff), subset, (*e)->mean,
                               (*e)->ci_low, (*e)->ci_high, (*e)->n_cases);
    }
    return out;
}

// Shared operating-point options for interchange and metrics.
struct OperatingArgs {
    std::optional<double> threshold;
    std::string rule = "youden";
    double target = 0.577;
};

dxi::OperatingPoint resolve_operating_point(const OperatingArgs& a, std::span<const dxi::CaseRecord> cases,
                                            std::span<const double> scores) {
    if (a.threshold) {
        dxi::OperatingPoint p;
        p.rule = dxi::OperatingRule::Fixed;
        p.threshold = *a.threshold;
        return p;
    }
    std::vector<std::uint8_t> labels;
    std::vector<double> s;
    for (std::size_t k = 0; k < cases.size(); ++k) {
        if (const auto y = cases[k].label()) {
            labels.push_back(*y);
            s.push_back(scores[k]);
        }
    }
    const auto curve = dxi::roc_curve(labels, s);
    if (a.rule == "youden") return dxi::youden_point(curve);
    if (a.rule == "matched_specificity") return dxi::matched_point(curve, a.target, dxi::MatchAxis::Specificity);
    if (a.rule == "matched_sensitivity") return dxi::matched_point(curve, a.target, dxi::MatchAxis::Sensitivity);
    throw std::invalid_argument("unknown operating rule '" + a.rule + "'");
}

void add_operating_options(CLI::App* cmd, OperatingArgs& a) {
    cmd->add_option("--threshold", a.threshold, "Fixed threshold (score >= threshold is positive)");
    cmd->add_option("--rule", a.rule, "youden | matched_specificity | matched_sensitivity (on verified cases)")
        ->check(CLI::IsMember({"youden", "matched_specificity", "matched_sensitivity"}));
    cmd->add_option("--target", a.target, "Target for the matched rules")->check(CLI::Range(0.0, 1.0));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diagnostic interchangeability analysis of AI prostate MRI assessments"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    if (const char* dir = std::getenv("DXI_OUTPUT_DIR")) g.out_dir = dir;
    app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
    app.add_option("--bootstrap-reps", g.bootstrap_reps, "Bootstrap replications (default 1000000)");
    app.add_option("--imputations", g.imputations, "Multiple imputations m (default 100)");
    app.add_option("--margin", g.margin, "Interchangeability margin (default 0.05)")->check(CLI::Range(0.0, 1.0));
    app.add_option("--output", g.output, "Output format")->check(CLI::IsMember({"json", "md", "csv"}))->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores); results do not depend on it");
    app.add_option("--out-dir", g.out_dir, "Write <command>.<ext> here (default: $DXI_OUTPUT_DIR, else stdout)");

    // validate
    auto* validate = app.add_subcommand("validate", "Check cohort files and summarize them");
    std::string v_cases, v_readings, v_predictions;
    validate->add_option("--cases", v_cases, "Cases file")->required()->check(CLI::ExistingFile);
    validate->add_option("--readings", v_readings, "Reader scores file")->check(CLI::ExistingFile);
    validate->add_option("--predictions", v_predictions, "AI predictions file")->check(CLI::ExistingFile);

    // agreement
    auto* agreement = app.add_subcommand("agreement", "Inter-reader and reader vs standard-of-care agreement");
    std::string a_cases, a_readings, a_cutoff = "GE3";
    double a_prevalence = 0.30;
    agreement->add_option("--cases", a_cases, "Reader-study cases file")->required()->check(CLI::ExistingFile);
    agreement->add_option("--readings", a_readings, "Reader scores file")->required()->check(CLI::ExistingFile);
    agreement->add_option("--cutoff", a_cutoff, "GE3 or GE4")->capture_default_str();
    agreement->add_option("--prevalence", a_prevalence, "Target-cohort prevalence for adjustment")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    // interchange
    auto* interchange = app.add_subcommand("interchange", "Primary endpoint and interchangeability decision");
    std::string i_cases, i_predictions, i_name = "cohort";
    double i_benchmark = 0.0;
    std::optional<double> i_context;
    OperatingArgs i_op;
    interchange->add_option("--cases", i_cases, "Cases file")->required()->check(CLI::ExistingFile);
    interchange->add_option("--predictions", i_predictions, "AI predictions file")->required()->check(CLI::ExistingFile);
    interchange->add_option("--benchmark", i_benchmark, "Adjusted radiologist vs standard-of-care agreement")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    interchange->add_option("--context", i_context, "Adjusted inter-reader agreement shown for context")
        ->check(CLI::Range(0.0, 1.0));
    interchange->add_option("--name", i_name, "Cohort name");
    add_operating_options(interchange, i_op);

    // auroc-mi
    auto* auroc_mi = app.add_subcommand("auroc-mi", "AUROC adjusted for verification bias by multiple imputation");
    std::string m_cases, m_predictions, m_model, m_fit, m_save;
    bool m_proper = false, m_per = false;
    auroc_mi->add_option("--cases", m_cases, "Cases file")->required()->check(CLI::ExistingFile);
    auroc_mi->add_option("--predictions", m_predictions, "AI predictions file")->required()->check(CLI::ExistingFile);
    auto* model_opt = auroc_mi->add_option("--risk-model", m_model, "Risk model JSON")->check(CLI::ExistingFile);
    auroc_mi->add_option("--fit-cases", m_fit, "Fully verified cohort to fit the risk model on")
        ->check(CLI::ExistingFile)
        ->excludes(model_opt);
    auroc_mi->add_option("--save-model", m_save, "Write the risk model JSON here");
    auroc_mi->add_flag("--proper", m_proper, "Draw model coefficients per imputation (proper MI)");
    auroc_mi->add_flag("--per-imputation", m_per, "Include per-imputation estimates");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Binary metrics, Krippendorff's alpha and benefit-to-harm ratios");
    std::string x_cases, x_predictions;
    OperatingArgs x_op;
    metrics->add_option("--cases", x_cases, "Cases file")->required()->check(CLI::ExistingFile);
    metrics->add_option("--predictions", x_predictions, "AI predictions file")->required()->check(CLI::ExistingFile);
    add_operating_options(metrics, x_op);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Simulation harnesses");
    simulate->require_subcommand(1);
    auto* sim_table = simulate->add_subcommand("table3", "Operating-point comparison for simulated AI systems");
    dxi::Table3Options t3;
    sim_table->add_option("--targets", t3.targets, "Target AUROCs")->capture_default_str();
    sim_table->add_option("--prevalence", t3.prevalence)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sim_table->add_option("--n", t3.n_cases, "Cases")->capture_default_str();
    sim_table->add_option("--spec-target", t3.specificity_target, "Matched specificity target")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    auto* sim_plan = simulate->add_subcommand("plan", "Simulate the interchangeability test");
    dxi::PlanOptions plan;
    plan.replications = 1'000'000;
    sim_plan->add_option("--benchmark", plan.benchmark)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sim_plan->add_option("--true-agreement", plan.true_agreement)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sim_plan->add_option("--n", plan.n_cases)->capture_default_str();
    sim_plan->add_option("--prevalence", plan.prevalence)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sim_plan->add_option("--context", plan.context_inter_reader, "Inter-reader agreement shown for context")
        ->check(CLI::Range(0.0, 1.0));
    auto* sim_panel = simulate->add_subcommand("panel", "Synthetic multi-reader panel (writes cases.csv, readings.csv)");
    dxi::ReaderPanelSpec panel;
    std::optional<double> panel_target;
    std::string panel_dir;
    sim_panel->add_option("--cases", panel.n_cases)->capture_default_str();
    sim_panel->add_option("--readers", panel.n_readers)->capture_default_str();
    sim_panel->add_option("--prevalence", panel.prevalence)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sim_panel->add_option("--separation", panel.separation)->capture_default_str();
    sim_panel->add_option("--difficulty-sd", panel.difficulty_sd)->capture_default_str();
    sim_panel->add_option("--threshold-sd", panel.threshold_sd)->capture_default_str();
    sim_panel->add_option("--noise-sd", panel.read_noise_sd)->capture_default_str();
    sim_panel->add_option("--target-agreement", panel_target, "Solve the read noise for this expected agreement");
    sim_panel->add_option("--dir", panel_dir, "Directory for cases.csv and readings.csv (default: output dir or .)");

    // power
    auto* power = app.add_subcommand("power", "Expected 95% CI half-width table");
    std::vector<double> p_values{0.70, 0.75, 0.80};
    std::vector<std::size_t> n_values{476, 1143, 391};
    std::vector<std::string> labels;
    power->add_option("--p", p_values, "Expected proportions")->capture_default_str();
    power->add_option("--n", n_values, "Sample sizes")->capture_default_str();
    power->add_option("--labels", labels, "Row labels, one per sample size");

    // run
    auto* run = app.add_subcommand("run", "Full prespecified analysis from a config file");
    std::string config_path;
    run->add_option("--config", config_path, "Config JSON (one cohort or {\"cohorts\": [...]})")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (validate->parsed()) {
            const auto cases = dxi::load_cases_file(v_cases);
            const auto readings = v_readings.empty() ? std::vector<dxi::ReaderScore>{} : dxi::load_readings_file(v_readings);
            const auto predictions =
                v_predictions.empty() ? std::vector<dxi::AiPrediction>{} : dxi::load_predictions_file(v_predictions);
            const auto r = dxi::validate_cohort(cases, readings, predictions);
            Output out;
            out.json = dxi::to_json(r);
            out.markdown = fmt::format(
                "# Validation\n\n| Item | Value |\n|---|---|\n| Cases | {} |\n| Patients | {} |\n| Unverified | {} ({}) "
                "|\n| Readings | {} |\n| Readers | {} |\n",
                r.n_cases, r.n_patients, r.n_unverified, pct(r.unverified_fraction), r.n_readings, r.n_readers);
            if (r.readers_per_case)
                out.markdown += fmt::format("| Readers per case (min / median / max) | {} / {} / {} |\n",
                                            r.readers_per_case->min, r.readers_per_case->median, r.readers_per_case->max);
            for (const auto& w : r.warnings) out.markdown += "\nWarning: " + w + "\n";
            std::string csv = "field,value\n";
            for (const auto& [k, v] : out.json.items()) {
                if (v.is_primitive()) csv += k + "," + v.dump() + "\n";
            }
            out.csv = csv;
            emit(g, "validate", out);
        } else if (agreement->parsed()) {
            const auto cutoff = dxi::parse_cutoff(a_cutoff);
            const auto cases = dxi::load_cases_file(a_cases);
            const auto readings = dxi::load_readings_file(a_readings);
            auto bo = bootstrap_options(g);
            bo.seed = dxi::derive_seed(g.seed, 10);
            const auto ir = dxi::inter_reader_agreement(readings, cases, cutoff, bo);
            bo.seed = dxi::derive_seed(g.seed, 11);
            const auto soc = dxi::soc_agreement(readings, cases, cutoff, bo);
            Output out;
            out.json["inter_reader"] = dxi::to_json(ir);
            out.json["soc"] = dxi::to_json(soc);
            std::optional<dxi::PrevalenceAdjusted> p_adj, q_adj;
            if (ir.positive && ir.negative) p_adj = dxi::prevalence_adjust(a_prevalence, ir.positive->mean, ir.negative->mean);
            if (soc.positive && soc.negative) q_adj = dxi::prevalence_adjust(a_prevalence, soc.positive->mean, soc.negative->mean);
            out.json["p_adj"] = p_adj ? dxi::to_json(*p_adj) : ojson();
            out.json["q_adj"] = q_adj ? dxi::to_json(*q_adj) : ojson();
            out.markdown = fmt::format(
                "# Agreement at PI-RADS {}\n\n| Estimate | All cases | Negative cases | Positive cases |\n|---|---|---|---|\n"
                "| Inter-reader | {} | {} | {} |\n| Reader vs standard of care | {} | {} | {} |\n\n",
                cutoff == dxi::CutoffRule::PiradsGE3 ? ">= 3" : ">= 4", estimate_cell(ir.all), estimate_cell(ir.negative),
                estimate_cell(ir.positive), estimate_cell(soc.all), estimate_cell(soc.negative), estimate_cell(soc.positive));
            if (p_adj) out.markdown += fmt::format("Inter-reader agreement adjusted to p = {:.2f}: {}\n\n", a_prevalence, pct(p_adj->adjusted));
            if (q_adj) out.markdown += fmt::format("Standard-of-care agreement adjusted to p = {:.2f}: {}\n", a_prevalence, pct(q_adj->adjusted));
            out.csv = "estimate,cutoff,subset,mean,ci_low,ci_high,n_cases\n" + agreement_csv_rows("inter_reader", ir) +
                      agreement_csv_rows("soc", soc);
            emit(g, "agreement", out);
        } else if (interchange->parsed()) {
            const auto cases = dxi::load_cases_file(i_cases);
            const auto scores = dxi::align_predictions(cases, dxi::load_predictions_file(i_predictions));
            const auto op = resolve_operating_point(i_op, cases, scores);
            std::vector<std::uint8_t> ref, ai;
            std::vector<std::string> patients;
            std::size_t excluded = 0;
            for (std::size_t k = 0; k < cases.size(); ++k) {
                auto y = cases[k].label();
                if (!y && cases[k].historical_pirads <= 2) y = 0;
                if (!y) {
                    ++excluded;
                    continue;
                }
                ref.push_back(*y);
                ai.push_back(scores[k] >= op.threshold ? 1 : 0);
                patients.push_back(cases[k].patient_id);
            }
            const auto bs = dxi::bootstrap_wald_ci(ref, ai, patients, bootstrap_options(g));
            const auto r = dxi::interchange_test(bs, i_benchmark, g.margin.value_or(0.05), i_context, i_name);
            Output out;
            out.json = dxi::to_json(r);
            out.json["operating_point"] = dxi::to_json(op);
            out.json["excluded_cases"] = excluded;
            out.markdown = dxi::interchange_markdown(r);
            out.csv = dxi::interchange_figure_csv(r);
            emit(g, "interchange", out);
        } else if (auroc_mi->parsed()) {
            const auto cases = dxi::load_cases_file(m_cases);
            const auto scores = dxi::align_predictions(cases, dxi::load_predictions_file(m_predictions));
            dxi::RiskModel model = dxi::RiskModel::base_only();
            if (!m_model.empty()) {
                std::ifstream in(m_model);
                model = dxi::risk_model_from_json(nlohmann::json::parse(in));
            } else if (!m_fit.empty()) {
                model = dxi::fit_risk_model(dxi::load_cases_file(m_fit));
            }
            if (!m_save.empty()) std::ofstream(m_save) << dxi::to_json(model).dump(2) << "\n";
            auto io = imputation_options(g);
            io.mode = m_proper ? dxi::ImputationMode::Proper : dxi::ImputationMode::Improper;
            const auto pooled = dxi::pooled_auroc_mi(cases, scores, model, io);
            Output out;
            out.json["risk_model"] = dxi::to_json(model);
            out.json["pooled"] = dxi::to_json(pooled, m_per);
            out.markdown = fmt::format(
                "# AUROC adjusted for verification bias\n\n| Quantity | Value |\n|---|---|\n| Q (pooled AUROC) | {:.4f} |\n"
                "| U (within) | {:.3g} |\n| B (between) | {:.3g} |\n| T (total) | {:.3g} |\n| m | {} |\n"
                "| 95% CI | {:.4f}, {:.4f} |\n",
                pooled.q_pooled, pooled.within_var, pooled.between_var, pooled.total_var, pooled.m, pooled.ci_low,
                pooled.ci_high);
            std::string csv = "imputation,auroc,variance\n";
            for (std::size_t j = 0; j < pooled.estimates.size(); ++j)
                csv += fmt::format("{},{},{}\n", j, pooled.estimates[j], pooled.variances[j]);
            out.csv = csv;
            emit(g, "auroc-mi", out);
        } else if (metrics->parsed()) {
            const auto cases = dxi::load_cases_file(x_cases);
            const auto scores = dxi::align_predictions(cases, dxi::load_predictions_file(x_predictions));
            const auto op = resolve_operating_point(x_op, cases, scores);
            std::vector<std::uint8_t> ref, pred;
            std::vector<dxi::ReferenceOutcome> outcomes;
            for (std::size_t k = 0; k < cases.size(); ++k) {
                if (const auto y = cases[k].label()) {
                    ref.push_back(*y);
                    pred.push_back(scores[k] >= op.threshold ? 1 : 0);
                    outcomes.push_back(dxi::reference_outcome(cases[k]));
                }
            }
            const auto m = dxi::binary_metrics(ref, pred);
            const auto bh = dxi::benefit_harm_ratios(outcomes, pred);
            Output out;
            out.json["operating_point"] = dxi::to_json(op);
            out.json["binary"] = dxi::to_json(m);
            try {
                out.json["krippendorff_alpha"] = dxi::krippendorff_alpha(pred, ref);
            } catch (const std::exception&) {
                out.json["krippendorff_alpha"] = nullptr;
            }
            out.json["benefit_harm"] = dxi::to_json(bh);
            auto cell = [](const std::optional<double>& v) { return v ? pct(*v) : std::string("n/a"); };
            out.markdown = fmt::format(
                "# Metrics at threshold {:.4g}\n\n| Metric | Value |\n|---|---|\n| Sensitivity | {} |\n| Specificity | {} "
                "|\n| PPV | {} |\n| NPV | {} |\n| Agreement | {} |\n| TP : GG1 detections | {} |\n"
                "| TP : (GG1 detections + negative predictions) | {} |\n| Biopsies avoided : GG1 detections | {} |\n",
                op.threshold, cell(m.sensitivity), cell(m.specificity), cell(m.ppv), cell(m.npv), pct(m.agreement),
                bh.tp_to_gg1.text(), bh.tp_to_gg1_and_negatives.text(), bh.tn_to_gg1.text());
            std::string csv = "metric,value\n";
            for (const auto& [k, v] : out.json["binary"].items()) {
                if (v.is_primitive()) csv += k + "," + v.dump() + "\n";
            }
            out.csv = csv;
            emit(g, "metrics", out);
        } else if (sim_table->parsed()) {
            t3.seed = g.seed;
            t3.threads = g.threads;
            const auto rows = dxi::simulate_table3(t3);
            Output out;
            out.json = dxi::to_json(rows);
            out.csv = dxi::table3_csv(rows);
            std::string md =
                "| AI system | Operating point | AUROC | Sens | Spec | Krippendorff's alpha | Agreement |\n|---|---|---|---|---|---|---|\n";
            for (const auto& r : rows)
                md += fmt::format("| {} | {} | {:.2f} | {:.2f} | {:.2f} | {:.2f} | {} |\n", r.system, r.operating_point,
                                  r.auroc, r.sensitivity, r.specificity, r.alpha, pct(r.agreement));
            out.markdown = md;
            emit(g, "simulate-table3", out);
        } else if (sim_plan->parsed()) {
            plan.seed = g.seed;
            plan.threads = g.threads;
            if (g.margin) plan.margin = *g.margin;
            if (g.bootstrap_reps) plan.replications = *g.bootstrap_reps;
            const auto r = dxi::simulate_plan(plan);
            Output out;
            out.json = dxi::to_json(r);
            out.markdown = dxi::interchange_markdown(r);
            out.csv = dxi::interchange_figure_csv(r);
            emit(g, "simulate-plan", out);
        } else if (sim_panel->parsed()) {
            if (panel_target) panel = dxi::calibrate_panel(panel, *panel_target);
            const auto p = dxi::simulate_reader_panel(panel, g.seed);
            const fs::path dir = !panel_dir.empty() ? fs::path(panel_dir) : !g.out_dir.empty() ? fs::path(g.out_dir) : fs::path(".");
            fs::create_directories(dir);
            std::ofstream cf(dir / "cases.csv"), rf(dir / "readings.csv");
            dxi::write_cases(cf, p.cases);
            dxi::write_readings(rf, p.readings);
            Output out;
            out.json = {{"cases", (dir / "cases.csv").string()},
                        {"readings", (dir / "readings.csv").string()},
                        {"n_cases", p.cases.size()},
                        {"n_readings", p.readings.size()},
                        {"read_noise_sd", panel.read_noise_sd},
                        {"expected_agreement_ge3", dxi::expected_panel_agreement(panel)}};
            out.markdown = fmt::format("Wrote {} cases and {} readings to {} (expected agreement at PI-RADS >= 3: {}).\n",
                                       p.cases.size(), p.readings.size(), dir.string(),
                                       pct(dxi::expected_panel_agreement(panel)));
            std::cout << (g.output == "json" ? out.json.dump(2) + "\n" : out.markdown);
        } else if (power->parsed()) {
            const auto t = dxi::halfwidth_table(p_values, n_values, labels);
            Output out;
            out.json = dxi::to_json(t);
            out.markdown = dxi::to_markdown(t);
            out.csv = dxi::to_csv(t);
            emit(g, "power", out);
        } else if (run->parsed()) {
            auto configs = dxi::load_configs_file(config_path);
            for (auto& c : configs) {
                if (app.get_option("--seed")->count() > 0) c.seed = g.seed;
                if (g.bootstrap_reps) c.bootstrap_reps = *g.bootstrap_reps;
                if (g.imputations) c.imputations = *g.imputations;
                if (g.margin) c.margin = *g.margin;
                c.threads = g.threads;
            }
            const auto report = dxi::run_multi_cohort(configs);
            Output out;
            // A single cohort emits its own report; several add the Holm step.
            if (configs.size() == 1 && !report.partial) {
                out.json = report.json["cohorts"][0];
                out.json["multiplicity"] = report.json["multiplicity"];
            } else {
                out.json = report.json;
            }
            out.markdown = report.markdown;
            std::string csv = "cohort,proportion,ci_low,ci_high,benchmark,decision_line,decision,holm_adjusted_p\n";
            for (std::size_t i = 0; i < report.json["cohorts"].size(); ++i) {
                const auto& pe = report.json["cohorts"][i]["primary_endpoint"];
                csv += fmt::format("{},{},{},{},{},{},{},{}\n", pe["cohort"].get<std::string>(), pe["proportion"].get<double>(),
                                   pe["ci_low"].get<double>(), pe["ci_high"].get<double>(), pe["benchmark"].get<double>(),
                                   pe["decision_line"].get<double>(), pe["decision"].get<std::string>(),
                                   report.json["multiplicity"]["cohorts"][i]["holm_adjusted_p"].get<double>());
            }
            out.csv = csv;
            emit(g, "run", out);
            if (report.partial) {
                std::cerr << "error: " << report.json["error"]["message"].get<std::string>() << " (partial report)\n";
                return kExitPartial;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAnalysis;
    }
    return 0;
}
