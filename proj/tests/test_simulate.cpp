#include <gtest/gtest.h>

#include <cmath>

#include "dxi/agreement.hpp"
#include "dxi/roc.hpp"
#include "dxi/simulate.hpp"
#include "oracles.hpp"

using namespace dxi;

TEST(Binormal, Separation) {
    EXPECT_NEAR(binormal_mu(0.75), 0.9539, 5e-5);
    EXPECT_NEAR(binormal_mu(0.99), 3.2900, 5e-5);
    EXPECT_EQ(binormal_mu(0.5), 0.0);
    EXPECT_THROW(binormal_mu(1.0), std::invalid_argument);
    EXPECT_THROW(binormal_mu(0.4), std::invalid_argument);
}

TEST(Binormal, EmpiricalAurocConverges) {
    for (const double target : {0.6, 0.75, 0.9, 0.99}) {
        BinormalSpec spec;
        spec.target_auroc = target;
        spec.n_cases = 20000;
        const auto s = simulate_scores(spec, 17);
        const auto e = auroc_delong(s.labels, s.scores);
        EXPECT_NEAR(e.auroc, target, 4.0 * std::sqrt(e.variance)) << target;
    }
}

TEST(Binormal, DeterministicAndScaled) {
    BinormalSpec spec;
    spec.n_cases = 500;
    const auto a = simulate_scores(spec, 5);
    const auto b = simulate_scores(spec, 5);
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.scores, simulate_scores(spec, 6).scores);
    EXPECT_DOUBLE_EQ(*std::min_element(a.scores.begin(), a.scores.end()), 0.0);
    EXPECT_DOUBLE_EQ(*std::max_element(a.scores.begin(), a.scores.end()), 100.0);
}

TEST(Binormal, SingleClassIsAnError) {
    BinormalSpec spec;
    spec.prevalence = 0.0;
    EXPECT_THROW(simulate_scores(spec), std::domain_error);
    spec.prevalence = 1.0;
    EXPECT_THROW(simulate_scores(spec), std::domain_error);
}

TEST(Binormal, MatchedScoresHitTarget) {
    Stream lr(3, 0);
    const auto labels = simulate_labels(1000, 0.3, lr);
    for (const double target : {0.75, 0.85, 0.99}) {
        Stream rng(3, 1);
        const auto scores = simulate_matched_auroc_scores(labels, target, rng);
        const double a = oracle::auroc(labels, scores);
        EXPECT_GE(a, target);
        EXPECT_LT(a - target, 2e-3);
    }
}

TEST(Table3, ShapeAndInternalConsistency) {
    const auto rows = simulate_table3();
    ASSERT_EQ(rows.size(), 12u);
    Stream lr(kDefaultSeed, 0);
    const auto labels = simulate_labels(1000, 0.3, lr);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        EXPECT_EQ(r.system, std::string(1, static_cast<char>('A' + i % 6)));
        EXPECT_EQ(r.operating_point, i < 6 ? "PR3_spec" : "Youden");
        EXPECT_GE(r.auroc, r.target_auroc);
        if (i < 6) {
            EXPECT_GE(r.specificity, 0.57);
        }
        // Agreement is the prevalence-weighted mix of sensitivity and specificity.
        const double p = std::count(labels.begin(), labels.end(), 1) / 1000.0;
        EXPECT_NEAR(r.agreement, p * r.sensitivity + (1 - p) * r.specificity, 1e-12);
    }
    const auto csv = table3_csv(rows);
    EXPECT_EQ(csv.rfind("system,operating_point,auroc,sensitivity,specificity,krippendorff_alpha,agreement\n", 0), 0u);
    EXPECT_EQ(to_json(rows).size(), 12u);
}

TEST(Table3, DeterministicAcrossThreads) {
    Table3Options o;
    o.threads = 1;
    const auto a = simulate_table3(o);
    o.threads = 4;
    const auto b = simulate_table3(o);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].sensitivity, b[i].sensitivity);
        EXPECT_EQ(a[i].alpha, b[i].alpha);
    }
}

TEST(Table3, YoudenAgreementRisesWithAuroc) {
    Table3Options o;
    o.n_cases = 20000;
    const auto rows = simulate_table3(o);
    for (std::size_t i = 7; i < 12; ++i) {
        EXPECT_GT(rows[i].agreement, rows[i - 1].agreement);
        EXPECT_GT(rows[i].alpha, rows[i - 1].alpha);
    }
}

TEST(Table3, MatchedSpecificityCeiling) {
    // At fixed specificity s the agreement cannot exceed p + (1 - p) s.
    Table3Options o;
    o.n_cases = 20000;
    const auto rows = simulate_table3(o);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_LE(rows[i].agreement, 0.3 * 1.0 + 0.7 * rows[i].specificity + 0.01);
    EXPECT_NEAR(rows[5].agreement, 0.699, 0.01);
}

TEST(Plan, DefaultScenarioIsInterchangeable) {
    PlanOptions o;
    o.replications = 4000;
    const auto r = simulate_plan(o);
    EXPECT_NEAR(r.decision_line(), 0.625, 1e-12);
    EXPECT_NEAR(r.proportion, 0.74, 0.06);
    EXPECT_EQ(r.decision, Decision::Interchangeable);
    ASSERT_TRUE(r.bootstrap.has_value());
    EXPECT_EQ(r.bootstrap->n_cases, 476u);
    EXPECT_EQ(r.cohort_name, "simulated");
}

TEST(Plan, PoorAgreementNotDemonstrated) {
    PlanOptions o;
    o.replications = 4000;
    o.true_agreement = 0.55;
    EXPECT_EQ(simulate_plan(o).decision, Decision::NotDemonstrated);
    o.true_agreement = 1.5;
    EXPECT_THROW(simulate_plan(o), std::invalid_argument);
}

namespace {

double panel_agreement(const ReaderPanel& panel) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& g : group_decisions(panel.readings, CutoffRule::PiradsGE3)) {
        sum += *pairwise_case_agreement(g.decisions);
        ++n;
    }
    return sum / static_cast<double>(n);
}

}  // namespace

TEST(Panel, ShapeAndFields) {
    ReaderPanelSpec spec;
    spec.n_cases = 50;
    spec.n_readers = 5;
    const auto p = simulate_reader_panel(spec, 1);
    EXPECT_EQ(p.cases.size(), 50u);
    EXPECT_EQ(p.readings.size(), 250u);
    EXPECT_EQ(p.truth.size(), 50u);
    for (std::size_t k = 0; k < p.cases.size(); ++k) EXPECT_EQ(p.cases[k].label(), p.truth[k]);
    for (const auto& r : p.readings) {
        EXPECT_GE(r.pirads, 1);
        EXPECT_LE(r.pirads, 5);
    }
    spec.n_readers = 1;
    EXPECT_THROW(simulate_reader_panel(spec), std::invalid_argument);
}

TEST(Panel, NoDispersionMeansFullAgreement) {
    ReaderPanelSpec spec;
    spec.threshold_sd = 0.0;
    spec.read_noise_sd = 0.0;
    EXPECT_DOUBLE_EQ(expected_panel_agreement(spec), 1.0);
    EXPECT_DOUBLE_EQ(panel_agreement(simulate_reader_panel(spec, 2)), 1.0);
}

TEST(Panel, PureNoiseIsACoinFlip) {
    ReaderPanelSpec spec;
    spec.separation = 0.0;
    spec.difficulty_sd = 0.0;
    spec.threshold_sd = 0.0;
    spec.read_noise_sd = 1.0;
    EXPECT_NEAR(expected_panel_agreement(spec), 0.5, 1e-12);
    spec.n_cases = 2000;
    EXPECT_NEAR(panel_agreement(simulate_reader_panel(spec, 3)), 0.5, 0.02);
}

TEST(Panel, CalibratedAgreementIsRealized) {
    ReaderPanelSpec spec;
    spec.n_cases = 3000;
    const auto calibrated = calibrate_panel(spec, 0.734);
    EXPECT_NEAR(expected_panel_agreement(calibrated), 0.734, 1e-6);
    const auto panel = simulate_reader_panel(calibrated, 4);
    BootstrapOptions bo;
    bo.replications = 2000;
    bo.threads = 1;
    std::vector<double> per_case;
    for (const auto& g : group_decisions(panel.readings, CutoffRule::PiradsGE3))
        per_case.push_back(*pairwise_case_agreement(g.decisions));
    const auto est = mean_agreement_bootstrap(per_case, bo);
    // Widened for the finite reader sample, whose thresholds the case
    // bootstrap does not resample.
    const double half = est.ci_high - est.ci_low;
    EXPECT_NEAR(est.sample_mean, 0.734, half);
    EXPECT_THROW(calibrate_panel(spec, 0.999999), std::invalid_argument);
    EXPECT_THROW(calibrate_panel(spec, 0.4), std::invalid_argument);
}
