#include "dxi/mi.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "dxi/kernels.hpp"
#include "dxi/parallel.hpp"
#include "dxi/roc.hpp"
#include "dxi/stats.hpp"

namespace dxi {

namespace {

double logistic(double eta) {
    return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

double logit(double p) {
    return std::log(p / (1.0 - p));
}

// Mean computed around the first element, so identical inputs return that
// element exactly.
double shifted_mean(std::span<const double> v) {
    double acc = 0.0;
    for (const double x : v) acc += x - v.front();
    return v.front() + acc / static_cast<double>(v.size());
}

// Offset delta with mean(logistic(eta_i + delta)) == target.
double calibration_offset(const std::vector<double>& eta, double target) {
    auto mean_risk = [&](double delta) {
        double total = 0.0;
        for (const double e : eta) total += logistic(e + delta);
        return total / static_cast<double>(eta.size());
    };
    double lo = -60.0, hi = 60.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (mean_risk(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

RiskModel RiskModel::base_only(double base) {
    if (!(base > 0.0 && base < 1.0)) throw std::invalid_argument("base probability must lie in (0, 1)");
    RiskModel m;
    m.base_probability = base;
    m.intercept = logit(base);
    m.calibration_offset = 0.0;
    return m;
}

std::array<double, 3> RiskModel::standard_errors() const {
    if (!covariance) return {0.0, 0.0, 0.0};
    const auto& c = *covariance;
    return {std::sqrt(c[0]), std::sqrt(c[4]), std::sqrt(c[8])};
}

RiskModel fit_risk_model(std::span<const CaseRecord> verified_cases, const FitOptions& options) {
    std::vector<const CaseRecord*> fit;
    for (const auto& c : verified_cases) {
        if (c.needs_imputation()) throw ModelError("risk model requires a fully verified cohort");
        if (!options.mri_negative_only || c.historical_pirads <= 2) fit.push_back(&c);
    }
    std::size_t positives = 0;
    for (const auto* c : fit) positives += *c->label();
    if (positives == 0) throw ModelError("no positive outcomes");
    if (positives == fit.size()) throw ModelError("no negative outcomes");

    const auto n = static_cast<Eigen::Index>(fit.size());
    Eigen::VectorXd y(n), age(n), logpsa(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto* c = fit[static_cast<std::size_t>(i)];
        y(i) = *c->label();
        age(i) = c->age;
        logpsa(i) = std::log(c->psa);
    }

    // Standardize covariates; a constant covariate is dropped (coefficient 0).
    std::vector<Eigen::VectorXd> raw{age, logpsa};
    std::vector<double> mean(2), sd(2);
    std::vector<int> active;
    for (int j = 0; j < 2; ++j) {
        mean[j] = raw[j].mean();
        sd[j] = std::sqrt((raw[j].array() - mean[j]).square().sum() / static_cast<double>(n));
        if (sd[j] > 1e-12 * std::max(1.0, std::abs(mean[j]))) active.push_back(j);
    }
    const auto p = static_cast<Eigen::Index>(active.size() + 1);
    Eigen::MatrixXd x(n, p);
    x.col(0).setOnes();
    for (Eigen::Index a = 0; a + 1 < p; ++a) {
        const int j = active[static_cast<std::size_t>(a)];
        x.col(a + 1) = (raw[j].array() - mean[j]) / sd[j];
    }

    RiskModel model;
    model.base_probability = options.base_probability;
    model.n_fit = fit.size();

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double prevalence = static_cast<double>(positives) / static_cast<double>(fit.size());
    beta(0) = logit(prevalence);
    bool converged = false;
    Eigen::MatrixXd info(p, p);
    for (int it = 0; it < options.max_iterations; ++it) {
        const Eigen::VectorXd eta = x * beta;
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = logistic(eta(i));
            w(i) = mu(i) * (1.0 - mu(i));
        }
        info = x.transpose() * w.asDiagonal() * x;
        const Eigen::VectorXd score = x.transpose() * (y - mu);
        const Eigen::VectorXd step = info.ldlt().solve(score);
        if (!step.allFinite()) break;
        beta += step;
        if (beta.tail(p - 1).cwiseAbs().maxCoeff() > 20.0 && p > 1) break;  // diverging: separation
        if (step.cwiseAbs().maxCoeff() < 1e-10) {
            converged = true;
            break;
        }
    }
    if (!converged || !beta.allFinite()) {
        auto fallback = RiskModel::base_only(options.base_probability);
        fallback.separation_fallback = true;
        fallback.n_fit = fit.size();
        return fallback;
    }

    // Back to raw covariate scale: beta_raw = A beta_std.
    Eigen::MatrixXd to_raw = Eigen::MatrixXd::Zero(3, p);
    to_raw(0, 0) = 1.0;
    for (Eigen::Index a = 0; a + 1 < p; ++a) {
        const int j = active[static_cast<std::size_t>(a)];
        to_raw(0, a + 1) = -mean[j] / sd[j];
        to_raw(1 + j, a + 1) = 1.0 / sd[j];
    }
    const Eigen::Vector3d raw_beta = to_raw * beta;
    const Eigen::Matrix3d raw_cov = to_raw * info.inverse() * to_raw.transpose();

    std::vector<double> eta(fit.size());
    for (std::size_t i = 0; i < fit.size(); ++i)
        eta[i] = raw_beta(0) + raw_beta(1) * fit[i]->age + raw_beta(2) * std::log(fit[i]->psa);
    const bool no_signal = raw_beta(1) == 0.0 && raw_beta(2) == 0.0;
    model.calibration_offset = no_signal ? logit(options.base_probability) - raw_beta(0)
                                         : calibration_offset(eta, options.base_probability);
    model.intercept = no_signal ? logit(options.base_probability) : raw_beta(0) + model.calibration_offset;
    model.coef_age = raw_beta(1);
    model.coef_logpsa = raw_beta(2);
    std::array<double, 9> cov{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov[static_cast<std::size_t>(3 * r + c)] = raw_cov(r, c);
    model.covariance = cov;
    return model;
}

double case_probability(const RiskModel& model, double age, double psa) {
    if (!(psa > 0.0)) throw std::invalid_argument("case_probability: PSA must be positive");
    if (!(age > 0.0)) throw std::invalid_argument("case_probability: age must be positive");
    return logistic(model.intercept + model.coef_age * age + model.coef_logpsa * std::log(psa));
}

std::vector<std::vector<std::uint8_t>> impute_statuses(std::span<const CaseRecord> cases, const RiskModel& model,
                                                       const ImputationOptions& options) {
    if (options.imputations < 2) throw std::invalid_argument("impute_statuses: need m >= 2");

    std::vector<std::uint8_t> base(cases.size(), 0);
    // Patients with unverified cases, in first-appearance order.
    struct PendingPatient {
        const CaseRecord* first;
        std::vector<std::size_t> cases;
    };
    std::vector<PendingPatient> pending;
    std::unordered_map<std::string_view, std::size_t> slot;
    for (std::size_t k = 0; k < cases.size(); ++k) {
        if (const auto label = cases[k].label()) {
            base[k] = *label;
            continue;
        }
        const auto [it, inserted] = slot.emplace(cases[k].patient_id, pending.size());
        if (inserted) pending.push_back({&cases[k], {}});
        pending[it->second].cases.push_back(k);
    }

    std::optional<Eigen::LLT<Eigen::Matrix3d>> chol;
    if (options.mode == ImputationMode::Proper) {
        if (!model.covariance) throw std::invalid_argument("proper imputation needs a model covariance");
        Eigen::Matrix3d cov;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov(r, c) = (*model.covariance)[static_cast<std::size_t>(3 * r + c)];
        chol.emplace(cov);
        if (chol->info() != Eigen::Success) throw std::invalid_argument("model covariance is not positive definite");
    }

    std::vector<std::vector<std::uint8_t>> out(options.imputations, base);
    parallel_blocks(options.imputations, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            Stream rng(options.seed, j);
            RiskModel draw = model;
            if (chol) {
                const double z0 = standard_normal(rng);
                const double z1 = standard_normal(rng);
                const double z2 = standard_normal(rng);
                const Eigen::Vector3d z(z0, z1, z2);
                const Eigen::Vector3d centre(model.intercept - model.calibration_offset, model.coef_age,
                                             model.coef_logpsa);
                const Eigen::Vector3d beta = centre + chol->matrixL() * z;
                draw.intercept = beta(0) + model.calibration_offset;
                draw.coef_age = beta(1);
                draw.coef_logpsa = beta(2);
            }
            auto& labels = out[j];
            for (const auto& patient : pending) {
                const double risk = case_probability(draw, patient.first->age, patient.first->psa);
                const std::uint8_t status = rng.bernoulli(risk) ? 1 : 0;
                for (const std::size_t k : patient.cases) labels[k] = status;
            }
        }
    });
    return out;
}

MiPooledAuroc rubin_pool(std::span<const double> estimates, std::span<const double> variances) {
    if (estimates.size() != variances.size()) throw std::invalid_argument("rubin_pool: length mismatch");
    if (estimates.size() < 2) throw std::invalid_argument("rubin_pool: need at least 2 imputations");
    for (const double v : variances) {
        if (!(v >= 0.0)) throw std::invalid_argument("rubin_pool: variances must be non-negative");
    }
    MiPooledAuroc r;
    r.m = estimates.size();
    const auto m = static_cast<double>(r.m);
    r.q_pooled = shifted_mean(estimates);
    r.within_var = shifted_mean(variances);
    double ss = 0.0;
    for (const double e : estimates) ss += (e - r.q_pooled) * (e - r.q_pooled);
    r.between_var = ss / (m - 1.0);
    r.total_var = r.between_var * (1.0 + 1.0 / m) + r.within_var;
    r.t_critical = stats::student_t_critical(m - 1.0);
    const double half = r.t_critical * std::sqrt(r.total_var);
    r.ci_low = r.q_pooled - half;
    r.ci_high = r.q_pooled + half;
    r.estimates.assign(estimates.begin(), estimates.end());
    r.variances.assign(variances.begin(), variances.end());
    return r;
}

MiPooledAuroc pooled_auroc_mi(std::span<const CaseRecord> cases, std::span<const double> scores,
                              const RiskModel& model, const ImputationOptions& options) {
    if (cases.size() != scores.size()) throw std::invalid_argument("pooled_auroc_mi: length mismatch");
    const auto imputed = impute_statuses(cases, model, options);
    std::vector<std::optional<AurocEstimate>> per(imputed.size());
    parallel_blocks(imputed.size(), options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const std::size_t positives = kernels::active().count_nonzero_u8(imputed[j]);
            if (positives == 0 || positives == imputed[j].size()) continue;
            per[j] = auroc_delong(imputed[j], scores);
        }
    });
    std::vector<double> estimates, variances;
    std::size_t excluded = 0;
    for (const auto& e : per) {
        if (!e) {
            ++excluded;
            continue;
        }
        estimates.push_back(e->auroc);
        variances.push_back(e->variance);
    }
    if (estimates.size() < 2)
        throw std::invalid_argument("pooled_auroc_mi: fewer than 2 imputations with both classes present");
    auto pooled = rubin_pool(estimates, variances);
    pooled.excluded = excluded;
    return pooled;
}

nlohmann::ordered_json to_json(const RiskModel& m) {
    nlohmann::ordered_json j;
    j["intercept"] = m.intercept;
    j["coef_age"] = m.coef_age;
    j["coef_logpsa"] = m.coef_logpsa;
    j["base_probability"] = m.base_probability;
    j["calibration_offset"] = m.calibration_offset;
    j["psa_transform"] = m.psa_transform;
    j["separation_fallback"] = m.separation_fallback;
    j["n_fit"] = m.n_fit;
    j["covariance"] = m.covariance ? nlohmann::ordered_json(*m.covariance) : nlohmann::ordered_json();
    return j;
}

RiskModel risk_model_from_json(const nlohmann::json& j) {
    RiskModel m;
    try {
        m.intercept = j.at("intercept").get<double>();
        m.coef_age = j.value("coef_age", 0.0);
        m.coef_logpsa = j.value("coef_logpsa", 0.0);
        m.base_probability = j.value("base_probability", kBaseProbability);
        m.calibration_offset = j.value("calibration_offset", 0.0);
        m.psa_transform = j.value("psa_transform", std::string("log"));
        m.separation_fallback = j.value("separation_fallback", false);
        m.n_fit = j.value("n_fit", std::size_t{0});
        if (j.contains("covariance") && !j.at("covariance").is_null())
            m.covariance = j.at("covariance").get<std::array<double, 9>>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed risk model JSON: ") + e.what());
    }
    if (m.psa_transform != "log") throw ModelError("unsupported psa_transform '" + m.psa_transform + "'");
    return m;
}

nlohmann::ordered_json to_json(const MiPooledAuroc& r, bool include_per_imputation) {
    nlohmann::ordered_json j;
    j["q_pooled"] = r.q_pooled;
    j["within_var"] = r.within_var;
    j["between_var"] = r.between_var;
    j["total_var"] = r.total_var;
    j["m"] = r.m;
    j["excluded_imputations"] = r.excluded;
    j["t_critical"] = r.t_critical;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    if (include_per_imputation) {
        j["estimates"] = r.estimates;
        j["variances"] = r.variances;
    }
    return j;
}

Stratifier parse_stratifier(std::string_view text) {
    if (text == "age_band" || text == "age") return Stratifier::AgeBand;
    if (text == "pi_qual") return Stratifier::PiQual;
    if (text == "ethnicity") return Stratifier::Ethnicity;
    throw std::invalid_argument("unknown stratifier '" + std::string(text) + "'");
}

std::string to_string(Stratifier stratifier) {
    switch (stratifier) {
        case Stratifier::AgeBand: return "age_band";
        case Stratifier::PiQual: return "pi_qual";
        case Stratifier::Ethnicity: return "ethnicity";
    }
    return "unknown";
}

StratifiedAuroc stratified_auroc(std::span<const CaseRecord> cases, std::span<const double> scores,
                                 Stratifier stratifier, const RiskModel& model, const ImputationOptions& options) {
    if (cases.size() != scores.size()) throw std::invalid_argument("stratified_auroc: length mismatch");
    auto key = [&](const CaseRecord& c) -> std::optional<std::string> {
        switch (stratifier) {
            case Stratifier::AgeBand:
                if (c.strata.age_band) return *c.strata.age_band;
                return c.age > 0 ? std::optional(age_band_for(c.age)) : std::nullopt;
            case Stratifier::PiQual:
                if (c.strata.pi_qual) return std::to_string(*c.strata.pi_qual);
                return std::nullopt;
            case Stratifier::Ethnicity:
                return c.strata.ethnicity;
        }
        return std::nullopt;
    };
    auto rank = [&](const std::string& s) {
        static const std::vector<std::string> bands{"<50", "50-59", "60-69", ">=70"};
        if (stratifier != Stratifier::AgeBand) return std::size_t{0};
        const auto it = std::find(bands.begin(), bands.end(), s);
        return static_cast<std::size_t>(it - bands.begin());
    };

    StratifiedAuroc report;
    report.stratifier = stratifier;
    std::vector<std::string> levels;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const auto level = key(cases[k]);
        if (!level) {
            ++report.unknown_excluded;
            continue;
        }
        const auto it = std::find(levels.begin(), levels.end(), *level);
        if (it == levels.end()) {
            levels.push_back(*level);
            members.push_back({k});
        } else {
            members[static_cast<std::size_t>(it - levels.begin())].push_back(k);
        }
    }
    std::vector<std::size_t> order(levels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ra = rank(levels[a]), rb = rank(levels[b]);
        return ra != rb ? ra < rb : levels[a] < levels[b];
    });

    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto& idx = members[order[pos]];
        StratumAuroc s;
        s.stratum = levels[order[pos]];
        s.n_cases = idx.size();
        std::vector<CaseRecord> sub_cases;
        std::vector<double> sub_scores;
        std::vector<std::uint8_t> labels;
        for (const std::size_t k : idx) {
            sub_cases.push_back(cases[k]);
            sub_scores.push_back(scores[k]);
            if (const auto y = cases[k].label()) {
                labels.push_back(*y);
                ++(*y ? s.n_positive : s.n_negative);
            } else {
                ++s.n_unverified;
            }
        }
        if (s.n_unverified == 0) {
            if (s.n_positive == 0 || s.n_negative == 0) {
                s.skipped = "single-class labels";
            } else {
                const auto e = auroc_delong(labels, sub_scores);
                s.auroc = e.auroc;
                s.variance = e.variance;
            }
        } else {
            ImputationOptions o = options;
            o.seed = derive_seed(options.seed, pos);
            try {
                const auto pooled = pooled_auroc_mi(sub_cases, sub_scores, model, o);
                s.auroc = pooled.q_pooled;
                s.variance = pooled.total_var;
                s.imputed = true;
            } catch (const std::invalid_argument&) {
                s.skipped = "single-class labels in imputed data";
            }
        }
        report.strata.push_back(std::move(s));
    }
    return report;
}

nlohmann::ordered_json to_json(const StratifiedAuroc& r) {
    nlohmann::ordered_json strata = nlohmann::ordered_json::array();
    for (const auto& s : r.strata) {
        nlohmann::ordered_json j;
        j["stratum"] = s.stratum;
        j["n_cases"] = s.n_cases;
        j["n_unverified"] = s.n_unverified;
        j["n_positive"] = s.n_positive;
        j["n_negative"] = s.n_negative;
        j["auroc"] = s.auroc ? nlohmann::ordered_json(*s.auroc) : nlohmann::ordered_json();
        j["variance"] = s.variance ? nlohmann::ordered_json(*s.variance) : nlohmann::ordered_json();
        j["imputed"] = s.imputed;
        j["skipped"] = s.skipped ? nlohmann::ordered_json(*s.skipped) : nlohmann::ordered_json();
        strata.push_back(std::move(j));
    }
    return {{"stratifier", to_string(r.stratifier)}, {"unknown_excluded", r.unknown_excluded}, {"strata", strata}};
}

}  // namespace dxi
