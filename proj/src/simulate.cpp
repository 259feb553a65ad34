#include "dxi/simulate.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dxi/parallel.hpp"
#include "dxi/roc.hpp"
#include "dxi/stats.hpp"

namespace dxi {

namespace {

void scale_to_percent(std::vector<double>& v) {
    if (v.empty()) return;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double min = *lo, range = *hi - *lo;
    for (auto& x : v) x = range > 0.0 ? 100.0 * (x - min) / range : 50.0;
}

}  // namespace

double binormal_mu(double target_auroc) {
    if (!(target_auroc >= 0.5 && target_auroc < 1.0))
        throw std::invalid_argument(fmt::format("target AUROC {} outside [0.5, 1)", target_auroc));
    if (target_auroc == 0.5) return 0.0;
    return std::sqrt(2.0) * stats::normal_quantile(target_auroc);
}

double BinormalSpec::mu_separation() const {
    return binormal_mu(target_auroc);
}

std::vector<std::uint8_t> simulate_labels(std::size_t n, double prevalence, Stream& rng) {
    if (!(prevalence >= 0.0 && prevalence <= 1.0)) throw std::invalid_argument("prevalence must lie in [0, 1]");
    std::vector<std::uint8_t> labels(n);
    for (auto& y : labels) y = rng.bernoulli(prevalence) ? 1 : 0;
    return labels;
}

std::vector<double> simulate_binormal_scores(std::span<const std::uint8_t> labels, double mu, Stream& rng) {
    std::vector<double> raw(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) raw[i] = (labels[i] ? mu : 0.0) + standard_normal(rng);
    scale_to_percent(raw);
    return raw;
}

std::vector<double> simulate_matched_auroc_scores(std::span<const std::uint8_t> labels, double target_auroc,
                                                  Stream& rng) {
    const double mu0 = binormal_mu(target_auroc);
    std::vector<double> noise(labels.size());
    for (auto& z : noise) z = standard_normal(rng);
    std::vector<double> raw(labels.size());
    auto shifted = [&](double mu) {
        for (std::size_t i = 0; i < labels.size(); ++i) raw[i] = (labels[i] ? mu : 0.0) + noise[i];
        // Match on the rescaled scores; rounding there can merge near-ties.
        scale_to_percent(raw);
        return auroc(labels, raw);
    };
    // The empirical AUROC is non-decreasing in mu.
    double lo = mu0, hi = mu0;
    while (lo > -50.0 && shifted(lo) >= target_auroc) lo -= 1.0;
    while (hi < 50.0 && shifted(hi) < target_auroc) hi += 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (shifted(mid) >= target_auroc ? hi : lo) = mid;
    }
    shifted(hi);
    return raw;
}

SimulatedScores simulate_scores(const BinormalSpec& spec, std::uint64_t seed) {
    if (spec.n_cases < 2) throw std::invalid_argument("simulate_scores: n_cases must be >= 2");
    const double mu = spec.mu_separation();
    Stream label_rng(seed, 0), score_rng(seed, 1);
    SimulatedScores out;
    out.labels = simulate_labels(spec.n_cases, spec.prevalence, label_rng);
    const auto positives = static_cast<std::size_t>(std::count(out.labels.begin(), out.labels.end(), 1));
    if (positives == 0 || positives == out.labels.size()) throw std::domain_error("single class");
    out.scores = simulate_binormal_scores(out.labels, mu, score_rng);
    return out;
}

std::vector<Table3Row> simulate_table3(const Table3Options& options) {
    if (options.targets.empty()) throw std::invalid_argument("simulate_table3: no target AUROCs");
    if (options.targets.size() > 26) throw std::invalid_argument("simulate_table3: at most 26 systems");
    for (const double t : options.targets) binormal_mu(t);
    Stream label_rng(options.seed, 0);
    const auto labels = simulate_labels(options.n_cases, options.prevalence, label_rng);
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0 || positives == labels.size()) throw std::domain_error("single class");

    const std::size_t k = options.targets.size();
    std::vector<Table3Row> rows(2 * k);
    parallel_blocks(k, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Stream rng(options.seed, i + 1);
            const auto scores = options.match_empirical_auroc
                                     ? simulate_matched_auroc_scores(labels, options.targets[i], rng)
                                     : simulate_binormal_scores(labels, binormal_mu(options.targets[i]), rng);
            const auto curve = roc_curve(labels, scores);
            const double area = auroc(labels, scores);
            const OperatingPoint points[2] = {matched_point(curve, options.specificity_target, MatchAxis::Specificity),
                                              youden_point(curve)};
            for (int r = 0; r < 2; ++r) {
                const auto predictions = apply_threshold(scores, points[r].threshold);
                const auto metrics = binary_metrics(labels, predictions);
                Table3Row& row = rows[static_cast<std::size_t>(r) * k + i];
                row.system = std::string(1, static_cast<char>('A' + i));
                row.operating_point = r == 0 ? "PR3_spec" : "Youden";
                row.target_auroc = options.targets[i];
                row.auroc = area;
                row.threshold = points[r].threshold;
                row.sensitivity = points[r].sensitivity;
                row.specificity = points[r].specificity;
                row.alpha = krippendorff_alpha(predictions, labels);
                row.agreement = metrics.agreement;
            }
        }
    });
    return rows;
}

std::string table3_csv(std::span<const Table3Row> rows) {
    std::string out = "system,operating_point,auroc,sensitivity,specificity,krippendorff_alpha,agreement\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f}\n", r.system, r.operating_point, r.auroc,
                           r.sensitivity, r.specificity, r.alpha, r.agreement);
    }
    return out;
}

nlohmann::ordered_json to_json(std::span<const Table3Row> rows) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["system"] = r.system;
        j["operating_point"] = r.operating_point;
        j["target_auroc"] = r.target_auroc;
        j["auroc"] = r.auroc;
        if (std::isinf(r.threshold))
            j["threshold"] = "inf";
        else
            j["threshold"] = r.threshold;
        j["sensitivity"] = r.sensitivity;
        j["specificity"] = r.specificity;
        j["krippendorff_alpha"] = r.alpha;
        j["agreement"] = r.agreement;
        out.push_back(std::move(j));
    }
    return out;
}

InterchangeResult simulate_plan(const PlanOptions& options) {
    auto proportion = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!proportion(options.true_agreement) || !proportion(options.prevalence) || !proportion(options.benchmark) ||
        !proportion(options.margin))
        throw std::invalid_argument("simulate_plan: proportions must lie in [0, 1]");
    if (options.n_cases == 0) throw std::invalid_argument("simulate_plan: n_cases must be >= 1");

    Stream rng(options.seed, 0);
    std::vector<std::uint8_t> soc(options.n_cases), ai(options.n_cases);
    std::vector<std::string> patients(options.n_cases);
    for (std::size_t i = 0; i < options.n_cases; ++i) {
        soc[i] = rng.bernoulli(options.prevalence) ? 1 : 0;
        const bool agree = rng.bernoulli(options.true_agreement);
        ai[i] = agree ? soc[i] : static_cast<std::uint8_t>(1 - soc[i]);
        patients[i] = std::to_string(i);
    }
    BootstrapOptions bo;
    bo.replications = options.replications;
    bo.seed = derive_seed(options.seed, 1);
    bo.threads = options.threads;
    const auto bootstrap = bootstrap_wald_ci(soc, ai, patients, bo);
    return interchange_test(bootstrap, options.benchmark, options.margin, options.context_inter_reader,
                            "simulated");
}

namespace {

void check_panel(const ReaderPanelSpec& spec) {
    if (spec.n_readers < 2) throw std::invalid_argument("reader panel needs at least 2 readers");
    if (spec.difficulty_sd < 0.0 || spec.threshold_sd < 0.0 || spec.read_noise_sd < 0.0)
        throw std::invalid_argument("reader panel dispersions must be >= 0");
    if (!(spec.prevalence >= 0.0 && spec.prevalence <= 1.0))
        throw std::invalid_argument("reader panel prevalence must lie in [0, 1]");
}

}  // namespace

ReaderPanel simulate_reader_panel(const ReaderPanelSpec& spec, std::uint64_t seed) {
    check_panel(spec);
    if (spec.n_cases == 0) throw std::invalid_argument("reader panel needs at least 1 case");
    Stream case_rng(seed, 0), reader_rng(seed, 1), read_rng(seed, 2);

    ReaderPanel panel;
    panel.cases.reserve(spec.n_cases);
    panel.truth.reserve(spec.n_cases);
    std::vector<double> signal(spec.n_cases);
    const int case_width = static_cast<int>(std::to_string(spec.n_cases).size());
    for (std::size_t c = 0; c < spec.n_cases; ++c) {
        const std::uint8_t y = case_rng.bernoulli(spec.prevalence) ? 1 : 0;
        signal[c] = (y ? 0.5 : -0.5) * spec.separation + spec.difficulty_sd * standard_normal(case_rng);
        CaseRecord rec;
        rec.case_id = fmt::format("C{:0{}}", c + 1, case_width);
        rec.patient_id = fmt::format("P{:0{}}", c + 1, case_width);
        rec.age = 50 + static_cast<int>(case_rng.bounded(30));
        rec.psa = std::exp(std::log(6.0) + 0.5 * standard_normal(case_rng));
        rec.historical_pirads = y ? 4 : 2;
        if (y) {
            rec.verification = {VerificationKind::HistologyVerified, 2};
        } else {
            rec.verification = {VerificationKind::ConsensusNegative, std::nullopt};
        }
        panel.cases.push_back(std::move(rec));
        panel.truth.push_back(y);
    }

    std::vector<double> threshold(spec.n_readers);
    for (auto& t : threshold) t = spec.threshold_mean + spec.threshold_sd * standard_normal(reader_rng);
    const int reader_width = static_cast<int>(std::to_string(spec.n_readers).size());

    panel.readings.reserve(spec.n_cases * spec.n_readers);
    for (std::size_t c = 0; c < spec.n_cases; ++c) {
        for (std::size_t r = 0; r < spec.n_readers; ++r) {
            const double y = signal[c] - threshold[r] + spec.read_noise_sd * standard_normal(read_rng);
            int pirads = 1;
            for (const double cut : {-1.0, 0.0, 1.0, 2.0}) pirads += y >= cut ? 1 : 0;
            panel.readings.push_back({panel.cases[c].case_id, fmt::format("R{:0{}}", r + 1, reader_width), pirads});
        }
    }
    return panel;
}

double expected_panel_agreement(const ReaderPanelSpec& spec) {
    check_panel(spec);
    const double sigma = std::hypot(spec.threshold_sd, spec.read_noise_sd);
    // Two readers are independent given the case signal s; each calls it
    // positive with probability Phi((s - threshold_mean) / sigma).
    auto pair_agreement = [&](double s) {
        const double x = s - spec.threshold_mean;
        if (sigma == 0.0) return 1.0;
        const double p = stats::normal_cdf(x / sigma);
        return p * p + (1.0 - p) * (1.0 - p);
    };
    auto class_mean = [&](double centre) {
        if (spec.difficulty_sd == 0.0) return pair_agreement(centre);
        auto integrand = [&](double z) {
            return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) * pair_agreement(centre + spec.difficulty_sd * z);
        };
        using Quadrature = boost::math::quadrature::gauss_kronrod<double, 61>;
        const double inf = std::numeric_limits<double>::infinity();
        return Quadrature::integrate(integrand, -inf, inf, 15, 1e-12);
    };
    return spec.prevalence * class_mean(0.5 * spec.separation) +
           (1.0 - spec.prevalence) * class_mean(-0.5 * spec.separation);
}

ReaderPanelSpec calibrate_panel(ReaderPanelSpec spec, double target) {
    check_panel(spec);
    spec.read_noise_sd = 0.0;
    const double best = expected_panel_agreement(spec);
    if (!(target > 0.5 && target <= best))
        throw std::invalid_argument(
            fmt::format("target agreement {} not reachable (range (0.5, {:.4f}])", target, best));
    double lo = 0.0, hi = 1.0;
    for (;;) {
        spec.read_noise_sd = hi;
        if (expected_panel_agreement(spec) < target) break;
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw std::invalid_argument("target agreement not reachable");
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        spec.read_noise_sd = mid;
        (expected_panel_agreement(spec) > target ? lo : hi) = mid;
    }
    spec.read_noise_sd = 0.5 * (lo + hi);
    return spec;
}

}  // namespace dxi
