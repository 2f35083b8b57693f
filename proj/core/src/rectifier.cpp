#include "ppi/rectifier.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

namespace ppi {

namespace {

constexpr double kDegenerate = 1e-12;

double sum_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double sum_prod(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void check_level(double level) {
    if (!(level > 0.0) || !(level < 1.0))
        throw InvalidLevel("confidence level must lie in (0, 1)");
}

void check_unit_range(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!(x >= 0.0) || !(x <= 1.0))
            throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

void finish(PpiResult& r, double level) {
    const double z = normal_quantile(0.5 + level / 2.0);
    r.ci_low = r.point - z * r.se;
    r.ci_high = r.point + z * r.se;
    r.se_ratio = r.baseline_se > 0.0 ? r.se / r.baseline_se : 1.0;
}

}  // namespace

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> norm;
    return boost::math::quantile(norm, p);
}

double estimate_omega(const InfluenceVector& phi_y, const InfluenceVector& phi_f) {
    if (phi_y.values.size() != phi_f.values.size())
        throw LengthMismatch("influence vectors must have equal length");
    const double n = static_cast<double>(phi_y.values.size());
    const double ff = sum_sq(phi_f.values);
    if (ff < kDegenerate * n) return 0.0;
    return sum_prod(phi_y.values, phi_f.values) / ff;
}

PpiResult ppi_no_shift(const Estimand& e, const LabeledUnlabeledData& data,
                       double level, RectifierMode mode) {
    check_level(level);
    const std::size_t n = data.n();
    const std::size_t N = data.N();
    if (n < 2) throw std::invalid_argument("need at least 2 labeled observations");
    if (N < 1) throw std::invalid_argument("need at least 1 unlabeled observation");
    if (data.labeled_predictions.size() != n || data.labels.size() != n ||
        data.unlabeled_predictions.size() != N)
        throw LengthMismatch("labeled/unlabeled columns have inconsistent lengths");
    check_unit_range(data.labels, "labels");
    check_unit_range(data.labeled_predictions, "predictions");
    check_unit_range(data.unlabeled_predictions, "predictions");

    const std::vector<double> ones(n, 1.0);
    const WeightedColumns lab_y{data.labeled_scores, data.labels, ones};
    const WeightedColumns lab_f{data.labeled_scores, data.labeled_predictions, ones};

    const double theta_n = plugin_estimate(e, lab_y);
    const double theta_f_n = plugin_estimate(e, lab_f);
    const InfluenceVector phi_y = influence_values(e, lab_y);
    const InfluenceVector phi_f = influence_values(e, lab_f);

    double theta_f_pool;
    if (mode == RectifierMode::AllNplusN) {
        WeightedColumns pool;
        pool.scores = data.labeled_scores;
        pool.scores.insert(pool.scores.end(), data.unlabeled_scores.begin(),
                           data.unlabeled_scores.end());
        pool.responses = data.labeled_predictions;
        pool.responses.insert(pool.responses.end(), data.unlabeled_predictions.begin(),
                              data.unlabeled_predictions.end());
        pool.weights.assign(n + N, 1.0);
        theta_f_pool = plugin_estimate(e, pool);
    } else {
        const std::vector<double> onesN(N, 1.0);
        theta_f_pool = plugin_estimate(
            e, WeightedColumns{data.unlabeled_scores, data.unlabeled_predictions, onesN});
    }

    const double lambda = data.lambda();
    const double nd = static_cast<double>(n);
    const double var_y = sum_sq(phi_y.values) / nd;
    const double var_f = sum_sq(phi_f.values) / nd;
    const double cov = sum_prod(phi_y.values, phi_f.values) / nd;

    PpiResult r;
    r.n_effective = n;
    r.baseline_point = theta_n;
    r.baseline_se = std::sqrt(var_y / nd);

    if (sum_sq(phi_f.values) < kDegenerate * nd) {
        r.degenerate_rectifier = true;
        r.omega_hat = 0.0;
        r.point = theta_n;
        r.se = r.baseline_se;
    } else {
        const double omega = estimate_omega(phi_y, phi_f);
        r.omega_hat = omega;
        const double omega_used =
            mode == RectifierMode::OnlyN ? omega / (1.0 + lambda) : omega;
        r.point = theta_n + omega_used * (theta_f_pool - theta_f_n);
        const double var_ppi = var_y - cov * cov / ((1.0 + lambda) * var_f);
        r.se = std::sqrt(var_ppi / nd);
    }
    finish(r, level);
    return r;
}

PpiResult ppi_md_form(const Estimand& e, const MdSample& pooled, double level) {
    check_level(level);
    const std::size_t m = pooled.scores.size();
    if (pooled.predictions.size() != m || pooled.labels.size() != m || pooled.c.size() != m)
        throw LengthMismatch("pooled columns must have equal length");
    if (m == 0) throw LengthMismatch("empty sample");

    std::size_t nlab = 0;
    for (int ci : pooled.c) {
        if (ci != 0 && ci != 1) throw std::invalid_argument("c must be 0/1");
        nlab += static_cast<std::size_t>(ci);
    }
    if (nlab == m) throw AllLabeled("every observation is labeled: pi_hat = 1");
    if (nlab == 0) throw NoneLabeled("no observation is labeled: pi_hat = 0");
    if (nlab < 2) throw std::invalid_argument("need at least 2 labeled observations");

    const double md = static_cast<double>(m);
    const double pi_hat = static_cast<double>(nlab) / md;

    WeightedColumns lab;
    lab.weights.assign(nlab, 1.0);
    lab.scores.reserve(nlab);
    lab.responses.reserve(nlab);
    for (std::size_t i = 0; i < m; ++i) {
        if (pooled.c[i]) {
            lab.scores.push_back(pooled.scores[i]);
            lab.responses.push_back(pooled.labels[i]);
        }
    }
    const double theta_base = plugin_estimate(e, lab);
    const InfluenceVector phi_y_lab = influence_values(e, lab);

    const std::vector<double> ones(m, 1.0);
    const InfluenceVector phi_f =
        influence_values(e, WeightedColumns{pooled.scores, pooled.predictions, ones});

    // psi0_i = (c_i/pi_hat) phi_y_i, u_i = (1 - c_i/pi_hat) phi_f_i.
    std::vector<double> psi0(m, 0.0), u(m);
    {
        std::size_t k = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (pooled.c[i]) psi0[i] = phi_y_lab.values[k++] / pi_hat;
            u[i] = (1.0 - pooled.c[i] / pi_hat) * phi_f.values[i];
        }
    }
    const double mu_u = mean_of(u);
    const double m0 = mean_of(psi0);
    double cov0u = 0.0, var_u = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        cov0u += (psi0[i] - m0) * (u[i] - mu_u);
        var_u += (u[i] - mu_u) * (u[i] - mu_u);
    }
    cov0u /= md;
    var_u /= md;

    double var0 = 0.0;
    for (double x : psi0) var0 += (x - m0) * (x - m0);
    var0 /= md;

    PpiResult r;
    r.n_effective = m;
    r.baseline_point = theta_base + m0;
    r.baseline_se = std::sqrt(var0 / md);

    if (var_u * md < kDegenerate * md) {
        r.degenerate_rectifier = true;
        r.omega_hat = 0.0;
        r.point = r.baseline_point;
        r.se = r.baseline_se;
    } else {
        const double omega = -cov0u / var_u;
        r.omega_hat = omega;
        r.point = theta_base + m0 + omega * mu_u;
        // Var(psi0 + omega u) at the minimizing omega; subtracting the
        // nonnegative term keeps se <= baseline_se exact in floating point.
        const double var_psi = var0 - cov0u * cov0u / var_u;
        r.se = std::sqrt(var_psi / md);
    }
    finish(r, level);
    return r;
}

}  // namespace ppi
