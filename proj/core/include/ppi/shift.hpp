#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppi/estimands.hpp"
#include "ppi/rectifier.hpp"

namespace ppi {

struct OverlapViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct UnsupportedTarget : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotConverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Separation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pooled sample of n+N observations. labels is read only where c = 1. pi
// holds the labeling probabilities for the known-mechanism entry points;
// features (one row per observation) feeds the estimated mechanism.
struct ShiftSample {
    std::vector<double> scores;
    std::vector<double> predictions;
    std::vector<double> labels;
    std::vector<int> c;
    std::vector<double> pi;
    std::vector<std::vector<double>> features;

    static constexpr double overlap_epsilon = 1e-3;

    std::size_t size() const { return scores.size(); }
};

// Population the estimand refers to: everyone, the unlabeled stratum, or
// the labeled stratum.
enum class ShiftTarget { Full, Unlabeled, Labeled };

// Plug-ins and scaled influence values for the three building blocks:
// labels on the labeled set, predictions on the labeled set, predictions on
// the pool. varphi_* have (numerically) mean zero over all n+N positions.
struct ShiftComponents {
    double theta_lab = 0.0;
    double theta_labf = 0.0;
    double theta_f = 0.0;
    std::vector<double> phi_lab;
    std::vector<double> phi_labf;
    std::vector<double> phi_f;
    std::vector<double> varphi_lab;
    std::vector<double> varphi_labf;
    std::vector<double> varphi_f;
};

ShiftComponents component_estimates(const Estimand& e, const ShiftSample& sample,
                                    ShiftTarget target);

// cov(vy, vlabf - vf) / var(vlabf - vf) with centered moments over the pool.
// Returns 0 when the difference carries (numerically) no variance.
double generic_omega(const std::vector<double>& vy, const std::vector<double>& vlabf,
                     const std::vector<double>& vf);

// theta_lab + omega_hat * (theta_f - theta_labf) under a known labeling
// mechanism, with a Wald interval at the given level.
PpiResult ppi_shift(const Estimand& e, const ShiftSample& sample, ShiftTarget target,
                    double level);

struct LogisticConfig {
    int max_iter = 100;
    double tol = 1e-8;
    double ridge = 0.0;
};

// Maximum-likelihood logistic fit of c on [1, features]. score_influence
// row i holds (n+N) * I_sum^{-1} x_i (c_i - pi_hat_i); info_matrix is the
// raw Fisher information sum Sigma x x' pi_hat (1 - pi_hat).
struct LogisticPiModel {
    std::vector<double> coef;
    std::vector<double> pi_hat;
    std::vector<std::vector<double>> score_influence;
    std::vector<std::vector<double>> info_matrix;
    int iterations = 0;
    double score_norm = 0.0;
};

LogisticPiModel fit_logistic_pi(const std::vector<std::vector<double>>& features,
                                const std::vector<int>& c,
                                const LogisticConfig& config = {});

// Full-population version with the labeling mechanism fitted from sample
// features; the labeled-column influence values carry the correction for
// the estimated mechanism. Other targets throw UnsupportedTarget.
PpiResult ppi_shift_estimated_pi(const Estimand& e, const ShiftSample& sample,
                                 ShiftTarget target, double level,
                                 const LogisticConfig& config = {});

}  // namespace ppi
