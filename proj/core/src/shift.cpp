#include "ppi/shift.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace ppi {

namespace {

constexpr double kDegenerate = 1e-12;

struct TargetWeights {
    std::vector<double> w_lab;
    std::vector<double> w_f;
    double normalizer = 1.0;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void validate_pool(const ShiftSample& s, bool need_pi, bool need_unlabeled) {
    const std::size_t m = s.size();
    if (m == 0) throw LengthMismatch("empty sample");
    if (s.predictions.size() != m || s.labels.size() != m || s.c.size() != m)
        throw LengthMismatch("pooled columns must have equal length");
    if (need_pi && s.pi.size() != m)
        throw LengthMismatch("pi column must cover every observation");

    std::size_t nlab = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const int ci = s.c[i];
        if (ci != 0 && ci != 1) throw std::invalid_argument("c must be 0/1");
        nlab += static_cast<std::size_t>(ci);
        const double f = s.predictions[i];
        if (!(f >= 0.0) || !(f <= 1.0))
            throw std::invalid_argument("predictions must lie in [0, 1]");
        if (ci == 1) {
            const double y = s.labels[i];
            if (!(y >= 0.0) || !(y <= 1.0))
                throw std::invalid_argument("labels must lie in [0, 1]");
        }
        if (need_pi) {
            const double p = s.pi[i];
            if (!(p >= ShiftSample::overlap_epsilon) ||
                !(p <= 1.0 - ShiftSample::overlap_epsilon))
                throw OverlapViolation("labeling probability outside [eps, 1-eps]");
        }
    }
    if (nlab < 2) throw std::invalid_argument("need at least 2 labeled observations");
    if (need_unlabeled && nlab == m)
        throw std::invalid_argument("need at least 1 unlabeled observation");
}

TargetWeights target_weights(const ShiftSample& s, ShiftTarget target) {
    const std::size_t m = s.size();
    TargetWeights tw;
    tw.w_lab.resize(m);
    tw.w_f.resize(m);
    double csum = 0.0;
    for (std::size_t i = 0; i < m; ++i) csum += s.c[i];
    switch (target) {
        case ShiftTarget::Full:
            for (std::size_t i = 0; i < m; ++i) {
                tw.w_lab[i] = s.c[i] / s.pi[i];
                tw.w_f[i] = 1.0;
            }
            tw.normalizer = 1.0;
            break;
        case ShiftTarget::Unlabeled:
            for (std::size_t i = 0; i < m; ++i) {
                tw.w_lab[i] = s.c[i] * (1.0 - s.pi[i]) / s.pi[i];
                tw.w_f[i] = 1.0 - s.pi[i];
            }
            tw.normalizer = 1.0 - csum / static_cast<double>(m);
            break;
        case ShiftTarget::Labeled:
            for (std::size_t i = 0; i < m; ++i) {
                tw.w_lab[i] = static_cast<double>(s.c[i]);
                tw.w_f[i] = s.pi[i];
            }
            tw.normalizer = csum / static_cast<double>(m);
            break;
    }
    return tw;
}

struct CenteredStats {
    double var_y = 0.0;
    double var_d = 0.0;
    double cov = 0.0;
};

CenteredStats centered_stats(const std::vector<double>& vy,
                             const std::vector<double>& vlabf,
                             const std::vector<double>& vf) {
    const std::size_t m = vy.size();
    if (vlabf.size() != m || vf.size() != m)
        throw LengthMismatch("influence vectors must have equal length");
    if (m == 0) throw LengthMismatch("empty influence vectors");
    const double md = static_cast<double>(m);
    double mu_y = 0.0, mu_d = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mu_y += vy[i];
        mu_d += vlabf[i] - vf[i];
    }
    mu_y /= md;
    mu_d /= md;
    CenteredStats st;
    for (std::size_t i = 0; i < m; ++i) {
        const double ey = vy[i] - mu_y;
        const double ed = vlabf[i] - vf[i] - mu_d;
        st.var_y += ey * ey;
        st.var_d += ed * ed;
        st.cov += ey * ed;
    }
    st.var_y /= md;
    st.var_d /= md;
    st.cov /= md;
    return st;
}

void check_level(double level) {
    if (!(level > 0.0) || !(level < 1.0))
        throw InvalidLevel("confidence level must lie in (0, 1)");
}

PpiResult assemble(double theta_lab, double theta_labf, double theta_f,
                   const std::vector<double>& vy, const std::vector<double>& vlabf,
                   const std::vector<double>& vf, double level) {
    const CenteredStats st = centered_stats(vy, vlabf, vf);
    const double md = static_cast<double>(vy.size());

    PpiResult r;
    r.n_effective = vy.size();
    r.baseline_point = theta_lab;
    r.baseline_se = std::sqrt(st.var_y / md);

    if (st.var_d < kDegenerate) {
        r.degenerate_rectifier = true;
        r.omega_hat = 0.0;
        r.point = theta_lab;
        r.se = r.baseline_se;
    } else {
        const double omega = st.cov / st.var_d;
        r.omega_hat = omega;
        r.point = theta_lab + omega * (theta_f - theta_labf);
        // Subtracting the nonnegative term keeps se <= baseline_se exact in
        // floating point.
        const double var_ppi = st.var_y - st.cov * st.cov / st.var_d;
        r.se = std::sqrt(var_ppi / md);
    }
    const double z = normal_quantile(0.5 + level / 2.0);
    r.ci_low = r.point - z * r.se;
    r.ci_high = r.point + z * r.se;
    r.se_ratio = r.baseline_se > 0.0 ? r.se / r.baseline_se : 1.0;
    return r;
}

ShiftComponents build_components(const Estimand& e, const ShiftSample& s,
                                 const TargetWeights& tw) {
    const std::size_t m = s.size();
    ShiftComponents out;

    const WeightedColumns lab{s.scores, s.labels, tw.w_lab};
    const WeightedColumns labf{s.scores, s.predictions, tw.w_lab};
    const WeightedColumns pool_f{s.scores, s.predictions, tw.w_f};

    out.theta_lab = plugin_estimate(e, lab);
    out.theta_labf = plugin_estimate(e, labf);
    out.theta_f = plugin_estimate(e, pool_f);

    out.phi_lab = influence_values(e, lab).values;
    out.phi_labf = influence_values(e, labf).values;
    out.phi_f = influence_values(e, pool_f).values;

    // Rows with c = 0 carry placeholder labels; their label influence values
    // are meaningless and always enter with weight zero.
    for (std::size_t i = 0; i < m; ++i)
        if (s.c[i] == 0) out.phi_lab[i] = 0.0;

    out.varphi_lab.resize(m);
    out.varphi_labf.resize(m);
    out.varphi_f.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.varphi_lab[i] = tw.w_lab[i] * out.phi_lab[i] / tw.normalizer;
        out.varphi_labf[i] = tw.w_lab[i] * out.phi_labf[i] / tw.normalizer;
        out.varphi_f[i] = tw.w_f[i] * out.phi_f[i] / tw.normalizer;
    }
    return out;
}

}  // namespace

ShiftComponents component_estimates(const Estimand& e, const ShiftSample& sample,
                                    ShiftTarget target) {
    validate_pool(sample, true, false);
    return build_components(e, sample, target_weights(sample, target));
}

double generic_omega(const std::vector<double>& vy, const std::vector<double>& vlabf,
                     const std::vector<double>& vf) {
    const CenteredStats st = centered_stats(vy, vlabf, vf);
    if (st.var_d < kDegenerate) return 0.0;
    return st.cov / st.var_d;
}

PpiResult ppi_shift(const Estimand& e, const ShiftSample& sample, ShiftTarget target,
                    double level) {
    check_level(level);
    validate_pool(sample, true, true);
    const ShiftComponents comp = build_components(e, sample, target_weights(sample, target));
    return assemble(comp.theta_lab, comp.theta_labf, comp.theta_f, comp.varphi_lab,
                    comp.varphi_labf, comp.varphi_f, level);
}

LogisticPiModel fit_logistic_pi(const std::vector<std::vector<double>>& features,
                                const std::vector<int>& c,
                                const LogisticConfig& config) {
    const std::size_t m = c.size();
    if (m < 2) throw std::invalid_argument("need at least 2 observations");
    if (features.size() != m)
        throw LengthMismatch("features must have one row per observation");
    const std::size_t k = features.empty() ? 0 : features[0].size();
    for (const auto& row : features)
        if (row.size() != k) throw LengthMismatch("ragged feature rows");
    for (int ci : c)
        if (ci != 0 && ci != 1) throw std::invalid_argument("c must be 0/1");
    if (config.max_iter < 0 || !(config.tol > 0.0) || config.ridge < 0.0)
        throw std::invalid_argument("bad logistic configuration");

    const std::size_t d = k + 1;
    Eigen::MatrixXd X(m, d);
    Eigen::VectorXd cv(m);
    for (std::size_t i = 0; i < m; ++i) {
        X(i, 0) = 1.0;
        for (std::size_t j = 0; j < k; ++j) X(i, j + 1) = features[i][j];
        cv(i) = c[i];
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd p(m);
    LogisticPiModel model;
    constexpr double kSeparationNorm = 30.0;

    for (int it = 0;; ++it) {
        p = (1.0 + (-(X * beta).array()).exp()).inverse().matrix();
        Eigen::VectorXd score = X.transpose() * (cv - p) - config.ridge * beta;
        model.score_norm = score.cwiseAbs().maxCoeff();
        model.iterations = it;
        if (model.score_norm <= config.tol) break;
        if (it >= config.max_iter)
            throw NotConverged("logistic fit did not reach the score tolerance");

        Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
        Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
        H.diagonal().array() += config.ridge;
        beta += H.ldlt().solve(score);
        if (beta.cwiseAbs().maxCoeff() > kSeparationNorm)
            throw Separation("logistic coefficients diverged; classes may be separable");
    }

    Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    const Eigen::MatrixXd ainv =
        info.ldlt().solve(Eigen::MatrixXd::Identity(d, d) * static_cast<double>(m));

    model.coef.assign(beta.data(), beta.data() + d);
    model.pi_hat.assign(p.data(), p.data() + m);
    model.info_matrix.assign(d, std::vector<double>(d));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) model.info_matrix[a][b] = info(a, b);
    model.score_influence.assign(m, std::vector<double>(d));
    for (std::size_t i = 0; i < m; ++i) {
        const Eigen::VectorXd si = ainv * X.row(i).transpose() * (cv(i) - p(i));
        for (std::size_t a = 0; a < d; ++a) model.score_influence[i][a] = si(a);
    }
    return model;
}

PpiResult ppi_shift_estimated_pi(const Estimand& e, const ShiftSample& sample,
                                 ShiftTarget target, double level,
                                 const LogisticConfig& config) {
    check_level(level);
    if (target != ShiftTarget::Full)
        throw UnsupportedTarget(
            "estimated labeling mechanism only supports the full-population target");
    validate_pool(sample, false, true);
    const std::size_t m = sample.size();
    if (sample.features.size() != m)
        throw LengthMismatch("features must have one row per observation");

    const LogisticPiModel model = fit_logistic_pi(sample.features, sample.c, config);

    ShiftSample with_pi = sample;
    with_pi.pi.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        with_pi.pi[i] = std::clamp(model.pi_hat[i], ShiftSample::overlap_epsilon,
                                   1.0 - ShiftSample::overlap_epsilon);

    const TargetWeights tw = target_weights(with_pi, ShiftTarget::Full);
    ShiftComponents comp = build_components(e, with_pi, tw);

    // The labeled columns pay for the fitted mechanism: subtract the
    // projection of each column onto the logistic score influence.
    const std::size_t d = model.coef.size();
    auto apply_correction = [&](const std::vector<double>& phi,
                                std::vector<double>& varphi) {
        std::vector<double> v(d, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            if (sample.c[j] == 0) continue;
            const double pj = model.pi_hat[j];
            const double a = phi[j] / (with_pi.pi[j] * with_pi.pi[j]) * pj * (1.0 - pj);
            v[0] += a;
            for (std::size_t t = 1; t < d; ++t) v[t] += a * sample.features[j][t - 1];
        }
        for (double& x : v) x /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            double corr = 0.0;
            for (std::size_t t = 0; t < d; ++t) corr += v[t] * model.score_influence[i][t];
            varphi[i] -= corr;
        }
    };
    apply_correction(comp.phi_lab, comp.varphi_lab);
    apply_correction(comp.phi_labf, comp.varphi_labf);

    return assemble(comp.theta_lab, comp.theta_labf, comp.theta_f, comp.varphi_lab,
                    comp.varphi_labf, comp.varphi_f, level);
}

}  // namespace ppi
