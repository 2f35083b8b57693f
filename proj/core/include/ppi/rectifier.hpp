#pragma once

#include <cstddef>
#include <vector>

#include "ppi/estimands.hpp"

namespace ppi {

struct InvalidLevel : std::invalid_argument {
    explicit InvalidLevel(const std::string& msg) : std::invalid_argument(msg) {}
};
struct AllLabeled : std::invalid_argument {
    explicit AllLabeled(const std::string& msg) : std::invalid_argument(msg) {}
};
struct NoneLabeled : std::invalid_argument {
    explicit NoneLabeled(const std::string& msg) : std::invalid_argument(msg) {}
};

// Labeled triples (scores, predictions, labels) of length n and unlabeled
// pairs (scores, predictions) of length N.
struct LabeledUnlabeledData {
    std::vector<double> labeled_scores;
    std::vector<double> labeled_predictions;
    std::vector<double> labels;
    std::vector<double> unlabeled_scores;
    std::vector<double> unlabeled_predictions;

    std::size_t n() const { return labeled_scores.size(); }
    std::size_t N() const { return unlabeled_scores.size(); }
    double lambda() const { return static_cast<double>(n()) / static_cast<double>(N()); }
};

// Which observations feed the prediction-side plug-in of the rectifier.
enum class RectifierMode { AllNplusN, OnlyN };

struct PpiResult {
    double point = 0.0;
    double omega_hat = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double baseline_point = 0.0;
    double baseline_se = 0.0;
    double se_ratio = 1.0;
    std::size_t n_effective = 0;
    // omega_hat was forced to zero because the prediction-side influence
    // values carried (numerically) no variance; the result equals the baseline.
    bool degenerate_rectifier = false;
};

// Plug-in weight sum(phi_y*phi_f)/sum(phi_f^2) on the labeled set.
// Returns 0 when sum(phi_f^2) < 1e-12 * n.
double estimate_omega(const InfluenceVector& phi_y, const InfluenceVector& phi_f);

// theta_hat_n + omega_hat * (theta_f_pool - theta_f_n), with the analytic
// asymptotic variance and a Wald interval at the given level.
PpiResult ppi_no_shift(const Estimand& e, const LabeledUnlabeledData& data,
                       double level, RectifierMode mode = RectifierMode::AllNplusN);

// Pooled view of the same data: labels are meaningful where c = 1.
struct MdSample {
    std::vector<double> scores;
    std::vector<double> predictions;
    std::vector<double> labels;
    std::vector<int> c;
};

// Missing-data form of the estimator, scaled by sqrt(n+N). Distributionally
// equivalent to ppi_no_shift, not pointwise equal.
PpiResult ppi_md_form(const Estimand& e, const MdSample& pooled, double level);

// Standard normal quantile, shared by the Wald intervals.
double normal_quantile(double p);

}  // namespace ppi
