#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppi {

// Thrown when a kind-specific positivity requirement fails, e.g. TPR with no
// positive response mass. Callers decide the fallback; no NaN is returned.
struct DegenerateDenominator : std::runtime_error {
    explicit DegenerateDenominator(const std::string& msg) : std::runtime_error(msg) {}
};

struct LengthMismatch : std::invalid_argument {
    explicit LengthMismatch(const std::string& msg) : std::invalid_argument(msg) {}
};

enum class Metric { Mean, TPR, FPR, AUC, MSE };

const char* metric_name(Metric m);

// Tagged estimand descriptor. alpha is meaningful for TPR/FPR only and is the
// threshold on the score scale.
struct Estimand {
    Metric kind = Metric::Mean;
    double alpha = 0.0;

    static Estimand mean() { return {Metric::Mean, 0.0}; }
    static Estimand tpr(double alpha) { return {Metric::TPR, alpha}; }
    static Estimand fpr(double alpha) { return {Metric::FPR, alpha}; }
    static Estimand auc() { return {Metric::AUC, 0.0}; }
    static Estimand mse() { return {Metric::MSE, 0.0}; }
};

std::string estimand_label(const Estimand& e);

// One column sample: scores (the biomarker), responses (labels in [0,1] or
// predictions in [0,1]), and nonnegative weights. All functionals below are
// self-normalized in the weights.
struct WeightedColumns {
    std::vector<double> scores;
    std::vector<double> responses;
    std::vector<double> weights;
};

struct InfluenceVector {
    std::vector<double> values;
};

// Plug-in value of the estimand on the weighted empirical CDF.
// AUC uses strict score comparison: tied pairs contribute zero.
double plugin_estimate(const Estimand& e, const WeightedColumns& cols);

// Per-observation influence values with all population moments replaced by
// their weights-normalized empirical counterparts. Weighted sum is zero.
InfluenceVector influence_values(const Estimand& e, const WeightedColumns& cols);

// Numerical Gateaux derivative [Phi((1-eps)F + eps*delta_i) - Phi(F)] / eps,
// realized by exact weight inflation of observation i. eps in (0, 0.1].
double gateaux_oracle(const Estimand& e, const WeightedColumns& cols,
                      std::size_t i, double eps);

// Central difference variant over +/- eps.
double gateaux_oracle_central(const Estimand& e, const WeightedColumns& cols,
                              std::size_t i, double eps);

}  // namespace ppi
