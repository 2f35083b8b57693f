#include "ppi/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ppi {

namespace {

void check_shape(const WeightedColumns& c) {
    if (c.scores.size() != c.responses.size() || c.scores.size() != c.weights.size())
        throw LengthMismatch("scores, responses and weights must have equal length");
    if (c.scores.empty())
        throw LengthMismatch("empty sample");
}

struct MassSums {
    double w = 0.0;    // total weight
    double pos = 0.0;  // sum w*resp
    double neg = 0.0;  // sum w*(1-resp)
};

MassSums mass_sums(const WeightedColumns& c) {
    MassSums s;
    for (std::size_t i = 0; i < c.weights.size(); ++i) {
        const double wi = c.weights[i];
        s.w += wi;
        s.pos += wi * c.responses[i];
        s.neg += wi * (1.0 - c.responses[i]);
    }
    return s;
}

void require(bool ok, const char* what) {
    if (!ok) throw DegenerateDenominator(what);
}

std::vector<std::size_t> order_by_score(const WeightedColumns& c) {
    std::vector<std::size_t> idx(c.scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return c.scores[a] < c.scores[b]; });
    return idx;
}

// Strict-win pair mass: sum over pairs of w_i resp_i * w_j (1-resp_j) * I(r_i > r_j).
double auc_win_mass(const WeightedColumns& c, const std::vector<std::size_t>& idx) {
    double below_neg = 0.0;
    double wins = 0.0;
    std::size_t i = 0;
    const std::size_t m = idx.size();
    while (i < m) {
        std::size_t j = i;
        double grp_pos = 0.0, grp_neg = 0.0;
        const double r = c.scores[idx[i]];
        while (j < m && c.scores[idx[j]] == r) {
            const std::size_t k = idx[j];
            grp_pos += c.weights[k] * c.responses[k];
            grp_neg += c.weights[k] * (1.0 - c.responses[k]);
            ++j;
        }
        wins += grp_pos * below_neg;
        below_neg += grp_neg;
        i = j;
    }
    return wins;
}

double mean_value(const WeightedColumns& c, const MassSums& s) {
    double num = 0.0;
    for (std::size_t i = 0; i < c.weights.size(); ++i) num += c.weights[i] * c.responses[i];
    return num / s.w;
}

double tpr_value(const WeightedColumns& c, double alpha, const MassSums& s) {
    require(s.pos > 0.0, "TPR undefined: no positive response mass");
    double num = 0.0;
    for (std::size_t i = 0; i < c.weights.size(); ++i)
        if (c.scores[i] > alpha) num += c.weights[i] * c.responses[i];
    return num / s.pos;
}

double fpr_value(const WeightedColumns& c, double alpha, const MassSums& s) {
    require(s.neg > 0.0, "FPR undefined: no negative response mass");
    double num = 0.0;
    for (std::size_t i = 0; i < c.weights.size(); ++i)
        if (c.scores[i] > alpha) num += c.weights[i] * (1.0 - c.responses[i]);
    return num / s.neg;
}

double mse_value(const WeightedColumns& c, const MassSums& s) {
    double num = 0.0;
    for (std::size_t i = 0; i < c.weights.size(); ++i) {
        const double d = c.responses[i] - c.scores[i];
        num += c.weights[i] * d * d;
    }
    return num / s.w;
}

void check_alpha(const Estimand& e) {
    if ((e.kind == Metric::TPR || e.kind == Metric::FPR) && !std::isfinite(e.alpha))
        throw std::invalid_argument("threshold must be finite for TPR/FPR");
}

}  // namespace

const char* metric_name(Metric m) {
    switch (m) {
        case Metric::Mean: return "mean";
        case Metric::TPR: return "tpr";
        case Metric::FPR: return "fpr";
        case Metric::AUC: return "auc";
        case Metric::MSE: return "mse";
    }
    return "?";
}

std::string estimand_label(const Estimand& e) {
    if (e.kind == Metric::TPR || e.kind == Metric::FPR)
        return std::string(metric_name(e.kind)) + "(" + std::to_string(e.alpha) + ")";
    return metric_name(e.kind);
}

double plugin_estimate(const Estimand& e, const WeightedColumns& cols) {
    check_shape(cols);
    check_alpha(e);
    const MassSums s = mass_sums(cols);
    require(s.w > 0.0, "total weight must be positive");
    switch (e.kind) {
        case Metric::Mean: return mean_value(cols, s);
        case Metric::TPR: return tpr_value(cols, e.alpha, s);
        case Metric::FPR: return fpr_value(cols, e.alpha, s);
        case Metric::MSE: return mse_value(cols, s);
        case Metric::AUC: {
            require(s.pos > 0.0, "AUC undefined: no positive response mass");
            require(s.neg > 0.0, "AUC undefined: no negative response mass");
            return auc_win_mass(cols, order_by_score(cols)) / (s.pos * s.neg);
        }
    }
    throw std::logic_error("unreachable");
}

InfluenceVector influence_values(const Estimand& e, const WeightedColumns& cols) {
    check_shape(cols);
    check_alpha(e);
    const MassSums s = mass_sums(cols);
    require(s.w > 0.0, "total weight must be positive");
    const std::size_t m = cols.scores.size();
    InfluenceVector out;
    out.values.resize(m);

    switch (e.kind) {
        case Metric::Mean: {
            const double mu = mean_value(cols, s);
            for (std::size_t i = 0; i < m; ++i) out.values[i] = cols.responses[i] - mu;
            return out;
        }
        case Metric::MSE: {
            const double mu = mse_value(cols, s);
            for (std::size_t i = 0; i < m; ++i) {
                const double d = cols.responses[i] - cols.scores[i];
                out.values[i] = d * d - mu;
            }
            return out;
        }
        case Metric::TPR: {
            const double t = tpr_value(cols, e.alpha, s);
            const double mu_pos = s.pos / s.w;
            for (std::size_t i = 0; i < m; ++i) {
                const double ind = cols.scores[i] > e.alpha ? 1.0 : 0.0;
                out.values[i] = (ind - t) * cols.responses[i] / mu_pos;
            }
            return out;
        }
        case Metric::FPR: {
            const double f = fpr_value(cols, e.alpha, s);
            const double mu_neg = s.neg / s.w;
            for (std::size_t i = 0; i < m; ++i) {
                const double ind = cols.scores[i] > e.alpha ? 1.0 : 0.0;
                out.values[i] = (ind - f) * (1.0 - cols.responses[i]) / mu_neg;
            }
            return out;
        }
        case Metric::AUC: {
            require(s.pos > 0.0, "AUC undefined: no positive response mass");
            require(s.neg > 0.0, "AUC undefined: no negative response mass");
            const auto idx = order_by_score(cols);
            const double auc = auc_win_mass(cols, idx) / (s.pos * s.neg);
            const double p1 = s.pos / s.w;
            const double p0 = s.neg / s.w;

            // Per observation, negative mass strictly below and positive mass
            // strictly above its score. Tied groups share both quantities.
            std::vector<double> neg_below(m), pos_above(m);
            {
                double below = 0.0;
                std::size_t i = 0;
                while (i < m) {
                    std::size_t j = i;
                    double grp_neg = 0.0;
                    const double r = cols.scores[idx[i]];
                    while (j < m && cols.scores[idx[j]] == r) {
                        grp_neg += cols.weights[idx[j]] * (1.0 - cols.responses[idx[j]]);
                        ++j;
                    }
                    for (std::size_t k = i; k < j; ++k) neg_below[idx[k]] = below;
                    below += grp_neg;
                    i = j;
                }
                double above = 0.0;
                std::size_t jj = m;
                while (jj > 0) {
                    std::size_t ii = jj;
                    double grp_pos = 0.0;
                    const double r = cols.scores[idx[jj - 1]];
                    while (ii > 0 && cols.scores[idx[ii - 1]] == r) {
                        grp_pos += cols.weights[idx[ii - 1]] * cols.responses[idx[ii - 1]];
                        --ii;
                    }
                    for (std::size_t k = ii; k < jj; ++k) pos_above[idx[k]] = above;
                    above += grp_pos;
                    jj = ii;
                }
            }
            for (std::size_t i = 0; i < m; ++i) {
                const double yi = cols.responses[i];
                const double g0 = neg_below[i] / s.neg;  // Pr(R < r_i | neg)
                const double s1 = pos_above[i] / s.pos;  // Pr(R > r_i | pos)
                out.values[i] = yi * (g0 - auc) / p1 + (1.0 - yi) * (s1 - auc) / p0;
            }
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

namespace {

// Weights realizing (1-eps)F_w + eps*delta_i exactly after self-normalization.
WeightedColumns tilt(const WeightedColumns& cols, std::size_t i, double eps) {
    double total = 0.0;
    for (double w : cols.weights) total += w;
    WeightedColumns out = cols;
    for (double& w : out.weights) w *= (1.0 - eps);
    out.weights[i] += eps * total;
    return out;
}

void check_oracle_args(const WeightedColumns& cols, std::size_t i, double eps) {
    if (i >= cols.scores.size()) throw std::invalid_argument("observation index out of range");
    if (!(eps > 0.0) || eps > 0.1) throw std::invalid_argument("eps must lie in (0, 0.1]");
}

}  // namespace

double gateaux_oracle(const Estimand& e, const WeightedColumns& cols,
                      std::size_t i, double eps) {
    check_shape(cols);
    check_oracle_args(cols, i, eps);
    const double base = plugin_estimate(e, cols);
    const double bumped = plugin_estimate(e, tilt(cols, i, eps));
    return (bumped - base) / eps;
}

double gateaux_oracle_central(const Estimand& e, const WeightedColumns& cols,
                              std::size_t i, double eps) {
    check_shape(cols);
    check_oracle_args(cols, i, eps);
    const double up = plugin_estimate(e, tilt(cols, i, eps));
    const double down = plugin_estimate(e, tilt(cols, i, -eps));
    return (up - down) / (2.0 * eps);
}

}  // namespace ppi
