#pragma once

// Simulation harnesses: binormal AI scores at a target AUROC, the
// operating-point comparison table, the interchange-plan simulation and a
// synthetic multi-reader panel with known agreement.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dxi/cohort.hpp"
#include "dxi/interchange.hpp"
#include "dxi/rng.hpp"
#include "json.hpp"

namespace dxi {

// Equal-variance binormal model: negatives ~ N(0, 1), positives ~ N(mu, 1)
// with mu = sqrt(2) * Phi^-1(target), whose AUROC is exactly `target`.
struct BinormalSpec {
    double target_auroc = 0.75;
    double prevalence = 0.30;
    std::size_t n_cases = 1000;

    double mu_separation() const;
};

// Accepts target in [0.5, 1); 0.5 gives 0.
double binormal_mu(double target_auroc);

struct SimulatedScores {
    std::vector<std::uint8_t> labels;
    std::vector<double> scores;  // min-max mapped onto [0, 100]
};

// Labels from stream (seed, 0), scores from stream (seed, 1). Throws
// std::domain_error("single class") when the labels come out one class.
SimulatedScores simulate_scores(const BinormalSpec& spec, std::uint64_t seed = kDefaultSeed);

// Building blocks for cohorts sharing one label set.
std::vector<std::uint8_t> simulate_labels(std::size_t n, double prevalence, Stream& rng);
std::vector<double> simulate_binormal_scores(std::span<const std::uint8_t> labels, double mu, Stream& rng);

// Binormal scores whose AUROC on `labels` equals the target: the unit-normal
// noise is drawn once and the separation is the smallest value (found by
// bisection) at which the empirical AUROC reaches the target.
std::vector<double> simulate_matched_auroc_scores(std::span<const std::uint8_t> labels, double target_auroc,
                                                  Stream& rng);

struct Table3Options {
    std::vector<double> targets{0.75, 0.80, 0.85, 0.90, 0.95, 0.99};
    double prevalence = 0.30;
    std::size_t n_cases = 1000;
    double specificity_target = 0.57;
    // Each system scores exactly its target AUROC on the shared labels
    // (otherwise the plain binormal draw, which meets it only on average).
    bool match_empirical_auroc = true;
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 0;
};

struct Table3Row {
    std::string system;          // "A", "B", ...
    std::string operating_point;  // "PR3_spec" or "Youden"
    double target_auroc = 0.0;
    double auroc = 0.0;  // empirical, on the simulated cohort
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double alpha = 0.0;      // Krippendorff, AI vs reference
    double agreement = 0.0;  // proportion of agreement with the reference
};

// One label set (stream (seed, 0)) shared by all systems; system i draws its
// scores from stream (seed, i + 1). Rows: every system at matched
// specificity, then every system at Youden's index.
std::vector<Table3Row> simulate_table3(const Table3Options& options = {});

// system,operating_point,auroc,sensitivity,specificity,krippendorff_alpha,agreement
std::string table3_csv(std::span<const Table3Row> rows);
nlohmann::ordered_json to_json(std::span<const Table3Row> rows);

struct PlanOptions {
    double benchmark = 0.675;
    double margin = 0.05;
    double true_agreement = 0.74;
    std::size_t n_cases = 476;
    double prevalence = 0.30;  // of the simulated reference labels
    std::size_t replications = 10'000;
    std::uint64_t seed = kDefaultSeed;
    std::optional<double> context_inter_reader;
    unsigned threads = 0;
};

// One case per patient. Reference labels and per-case agreement come from
// stream (seed, 0); the bootstrap runs with derive_seed(seed, 1).
InterchangeResult simulate_plan(const PlanOptions& options);

struct ReaderPanelSpec {
    std::size_t n_cases = 400;
    std::size_t n_readers = 18;
    double prevalence = 1.0 / 3.0;
    double separation = 2.0;       // latent mean gap between positive and negative cases
    double difficulty_sd = 1.0;    // per-case spread around the class mean
    double threshold_mean = 0.0;   // reader threshold for PI-RADS >= 3
    double threshold_sd = 0.3;     // spread of reader thresholds
    double read_noise_sd = 1.0;    // per-reading noise
};

struct ReaderPanel {
    std::vector<CaseRecord> cases;
    std::vector<ReaderScore> readings;
    std::vector<std::uint8_t> truth;  // aligned with cases
};

// Case c has latent signal s_c = +-separation/2 + difficulty_sd * z_c.
// Reader r with threshold t_r reads y = s_c - t_r + read_noise_sd * e and
// scores PI-RADS 1 + #{k in {-1, 0, 1, 2} : y >= k}, so PI-RADS >= 3 iff
// y >= 0. Positives are histology grade group 2, negatives consensus
// negative. Throws std::invalid_argument for fewer than two readers or a
// negative dispersion.
ReaderPanel simulate_reader_panel(const ReaderPanelSpec& spec, std::uint64_t seed = kDefaultSeed);

// Expected pairwise agreement at PI-RADS >= 3 under the panel model, by
// numerical integration over the latent signal.
double expected_panel_agreement(const ReaderPanelSpec& spec);

// Returns `spec` with read_noise_sd solved so that the expected agreement
// equals `target`. Throws std::invalid_argument when the target is not
// reachable by varying the noise.
ReaderPanelSpec calibrate_panel(ReaderPanelSpec spec, double target);

}  // namespace dxi
