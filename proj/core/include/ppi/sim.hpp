#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppi/estimands.hpp"
#include "ppi/rectifier.hpp"
#include "ppi/shift.hpp"

namespace ppi {

struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic per-replication stream: the same (seed, rep) pair always
// yields the same generator, independent of execution order.
std::mt19937_64 replication_rng(std::uint64_t seed, std::uint64_t rep);

struct MvnSpec {
    std::vector<double> mean;
    std::vector<std::vector<double>> cov;
};

// rows x dim draw; throws NotPositiveDefinite when cov has no Cholesky factor.
std::vector<std::vector<double>> gen_mvn(std::mt19937_64& rng, const MvnSpec& spec,
                                         std::size_t rows);

enum class Dgp { Main, Alt };

// One synthetic cohort: covariate rows, the classifier score (a coordinate
// of x), the true conditional label probability, and drawn hard labels.
struct Population {
    std::vector<std::vector<double>> x;
    std::vector<double> scores;
    std::vector<double> prob;
    std::vector<double> labels;

    std::size_t size() const { return scores.size(); }
};

Population draw_population(Dgp dgp, std::mt19937_64& rng, std::size_t rows);

// Conditional label probabilities given covariates.
double main_prob(const std::vector<double>& x);
double alt_prob(const std::vector<double>& x);

// Score-dependent labeling probability used by the shifted designs; bounded
// inside (0.2, 0.8).
double labeling_pi_main(const std::vector<double>& x);

// Alternative mechanism that is exactly logistic in (r, x1, x2*x3).
double labeling_pi_logistic(const std::vector<double>& x);

// Feature triple (r, x1, x2*x3) handed to the fitted labeling model.
std::vector<double> labeling_features(const std::vector<double>& x);

enum class LabelingMechanism { MainMechanism, TrueLogistic };

enum class PredictorKind { Ideal, FittedLogistic, UniformNoise, ExternalColumn };

struct PredictorSpec {
    PredictorKind kind = PredictorKind::Ideal;
    std::vector<int> features;       // covariate indices for FittedLogistic
    std::vector<double> external;    // supplied values for ExternalColumn
};

// Frozen prediction rule. FittedLogistic is trained once, on an independent
// cohort, when the predictor is built.
struct Predictor {
    PredictorSpec spec;
    std::vector<double> coef;

    std::vector<double> predict(const Population& pop, std::mt19937_64& rng) const;
};

Predictor make_predictor(const PredictorSpec& spec, Dgp dgp, std::uint64_t seed);

enum class StudyDesign { FixedSubset, ShiftKnownPi, ShiftEstimatedPi };

struct SimConfig {
    Dgp dgp = Dgp::Main;
    StudyDesign design = StudyDesign::FixedSubset;
    LabelingMechanism mechanism = LabelingMechanism::MainMechanism;
    PredictorSpec predictor;
    std::vector<Estimand> estimands;
    std::size_t n = 500;
    double lambda = 0.1;
    std::size_t reps = 500;
    std::uint64_t seed = 1;
    RectifierMode mode = RectifierMode::AllNplusN;
    ShiftTarget target = ShiftTarget::Full;
    std::size_t truth_rows = 2000000;
    int threads = 1;
};

struct RepOutcome {
    double point = 0.0;
    double se = 0.0;
    double baseline_point = 0.0;
    double baseline_se = 0.0;
    bool ok = false;
    std::string error;
};

struct EstimandSummary {
    Estimand estimand{Metric::Mean, 0.0};
    double truth = 0.0;
    std::size_t reps_ok = 0;
    double mean_point = 0.0;
    double sd_point = 0.0;
    double mean_se = 0.0;
    double coverage95 = 0.0;
    double coverage80 = 0.0;
    double baseline_mean_point = 0.0;
    double baseline_sd_point = 0.0;
    double baseline_mean_se = 0.0;
    double baseline_coverage95 = 0.0;
    double baseline_coverage80 = 0.0;
    double mc_se_coverage95 = 0.0;
    double mc_se_coverage80 = 0.0;
    std::size_t se_violations = 0;
    std::size_t failures = 0;
    std::vector<std::size_t> failed_reps;
};

struct SimSummary {
    SimConfig config;
    std::vector<EstimandSummary> per_estimand;
    std::vector<std::vector<RepOutcome>> outcomes;  // [estimand][rep]
};

// Population values of the estimands under the design's target, computed
// from one large reweighted draw.
std::vector<double> truth_values(const std::vector<Estimand>& estimands, Dgp dgp,
                                 ShiftTarget target, LabelingMechanism mechanism,
                                 std::uint64_t seed, std::size_t rows);

SimSummary run_replications(const SimConfig& config);

}  // namespace ppi
