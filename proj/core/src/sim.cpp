#include "ppi/sim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <thread>

namespace ppi {

namespace {

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Stream indices far outside any replication range, reserved for the truth
// draw and the predictor training cohort.
constexpr std::uint64_t kTruthStream = 0xFFFFFFFFFFFFFFF0ull;
constexpr std::uint64_t kTrainStream = 0xFFFFFFFFFFFFFFF1ull;

std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

MvnSpec main_spec() {
    MvnSpec s;
    s.mean.assign(6, 0.0);
    s.cov = {{1.0, 0.5, 0.3, 0.2, 0.0, 0.0}, {0.5, 1.0, 0.4, 0.3, 0.0, 0.0},
             {0.3, 0.4, 1.0, 0.2, 0.0, 0.0}, {0.2, 0.3, 0.2, 1.0, 0.0, 0.0},
             {0.0, 0.0, 0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 0.0, 0.0, 2.0}};
    return s;
}

MvnSpec alt_spec() {
    MvnSpec s;
    s.mean = {0.0, 2.0, 0.0};
    s.cov = {{1.0, 0.9, 0.82}, {0.9, 1.0, 0.49}, {0.82, 0.49, 1.0}};
    return s;
}

double mechanism_pi(LabelingMechanism mech, const std::vector<double>& x) {
    return mech == LabelingMechanism::MainMechanism ? labeling_pi_main(x)
                                                    : labeling_pi_logistic(x);
}

}  // namespace

std::mt19937_64 replication_rng(std::uint64_t seed, std::uint64_t rep) {
    std::uint64_t s = seed ^ (0xD1342543DE82EF95ull * (rep + 1));
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

std::vector<std::vector<double>> gen_mvn(std::mt19937_64& rng, const MvnSpec& spec,
                                         std::size_t rows) {
    const std::size_t d = spec.mean.size();
    if (d == 0 || spec.cov.size() != d)
        throw LengthMismatch("covariance must be square and match the mean");
    Eigen::MatrixXd C(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (spec.cov[i].size() != d)
            throw LengthMismatch("covariance must be square and match the mean");
        for (std::size_t j = 0; j < d; ++j) C(i, j) = spec.cov[i][j];
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("covariance has no Cholesky factor");
    const Eigen::MatrixXd L = llt.matrixL();

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> out(rows, std::vector<double>(d));
    std::vector<double> z(d);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) z[j] = gauss(rng);
        for (std::size_t i = 0; i < d; ++i) {
            double v = spec.mean[i];
            for (std::size_t j = 0; j <= i; ++j) v += L(i, j) * z[j];
            out[r][i] = v;
        }
    }
    return out;
}

double main_prob(const std::vector<double>& x) {
    const double r = x[0];
    return expit(-0.5 + r - 0.9 * x[1] * x[1] + 0.6 * std::abs(x[2]) +
                 0.5 * x[3] * x[3] * x[3] + 1.5 * r * x[3] - 0.7 * x[1] * x[2]);
}

double alt_prob(const std::vector<double>& x) { return expit(x[0]); }

double labeling_pi_main(const std::vector<double>& x) {
    return 0.2 + 0.6 * expit(x[0] - 0.9 * x[1] + 0.7 * x[2] * x[3] - 0.5);
}

double labeling_pi_logistic(const std::vector<double>& x) {
    return expit(0.2 + 0.5 * x[0] - 0.3 * x[1] + 0.2 * x[2] * x[3]);
}

std::vector<double> labeling_features(const std::vector<double>& x) {
    return {x[0], x[1], x[2] * x[3]};
}

Population draw_population(Dgp dgp, std::mt19937_64& rng, std::size_t rows) {
    const MvnSpec spec = dgp == Dgp::Main ? main_spec() : alt_spec();
    Population pop;
    pop.x = gen_mvn(rng, spec, rows);
    pop.scores.resize(rows);
    pop.prob.resize(rows);
    pop.labels.resize(rows);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < rows; ++i) {
        pop.scores[i] = pop.x[i][0];
        pop.prob[i] = dgp == Dgp::Main ? main_prob(pop.x[i]) : alt_prob(pop.x[i]);
        pop.labels[i] = unif(rng) < pop.prob[i] ? 1.0 : 0.0;
    }
    return pop;
}

std::vector<double> Predictor::predict(const Population& pop,
                                       std::mt19937_64& rng) const {
    const std::size_t m = pop.size();
    std::vector<double> f(m);
    switch (spec.kind) {
        case PredictorKind::Ideal:
            f = pop.prob;
            break;
        case PredictorKind::FittedLogistic:
            for (std::size_t i = 0; i < m; ++i) {
                double eta = coef[0];
                for (std::size_t k = 0; k < spec.features.size(); ++k)
                    eta += coef[k + 1] * pop.x[i][spec.features[k]];
                f[i] = expit(eta);
            }
            break;
        case PredictorKind::UniformNoise: {
            std::uniform_real_distribution<double> unif(0.01, 0.99);
            for (std::size_t i = 0; i < m; ++i) f[i] = unif(rng);
            break;
        }
        case PredictorKind::ExternalColumn:
            if (spec.external.size() != m)
                throw LengthMismatch("external predictions must cover the cohort");
            f = spec.external;
            break;
    }
    return f;
}

Predictor make_predictor(const PredictorSpec& spec, Dgp dgp, std::uint64_t seed) {
    Predictor p;
    p.spec = spec;
    if (spec.kind == PredictorKind::FittedLogistic) {
        const int dim = dgp == Dgp::Main ? 6 : 3;
        if (spec.features.empty())
            throw std::invalid_argument("fitted predictor needs feature indices");
        for (int k : spec.features)
            if (k < 0 || k >= dim)
                throw std::invalid_argument("predictor feature index out of range");
        std::mt19937_64 rng = replication_rng(seed, kTrainStream);
        const Population train = draw_population(dgp, rng, 100000);
        std::vector<std::vector<double>> feats(train.size());
        std::vector<int> lab(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            feats[i].reserve(spec.features.size());
            for (int k : spec.features) feats[i].push_back(train.x[i][k]);
            lab[i] = train.labels[i] > 0.5 ? 1 : 0;
        }
        p.coef = fit_logistic_pi(feats, lab).coef;
    }
    return p;
}

std::vector<double> truth_values(const std::vector<Estimand>& estimands, Dgp dgp,
                                 ShiftTarget target, LabelingMechanism mechanism,
                                 std::uint64_t seed, std::size_t rows) {
    if (rows < 2) throw std::invalid_argument("truth draw needs at least 2 rows");
    std::mt19937_64 rng = replication_rng(seed, kTruthStream);
    const Population pop = draw_population(dgp, rng, rows);
    WeightedColumns cols;
    cols.scores = pop.scores;
    cols.responses = pop.labels;
    cols.weights.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double pi = std::clamp(mechanism_pi(mechanism, pop.x[i]),
                                     ShiftSample::overlap_epsilon,
                                     1.0 - ShiftSample::overlap_epsilon);
        switch (target) {
            case ShiftTarget::Full:
                cols.weights[i] = 1.0;
                break;
            case ShiftTarget::Labeled:
                cols.weights[i] = pi;
                break;
            case ShiftTarget::Unlabeled:
                cols.weights[i] = 1.0 - pi;
                break;
        }
    }
    std::vector<double> out;
    out.reserve(estimands.size());
    for (const Estimand& e : estimands) out.push_back(plugin_estimate(e, cols));
    return out;
}

SimSummary run_replications(const SimConfig& config) {
    if (config.estimands.empty())
        throw std::invalid_argument("no estimands requested");
    if (config.n < 2) throw std::invalid_argument("need at least 2 labeled observations");
    if (!(config.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (config.reps < 1) throw std::invalid_argument("need at least 1 replication");
    if (config.threads < 1) throw std::invalid_argument("threads must be positive");
    if (config.design != StudyDesign::FixedSubset && config.dgp != Dgp::Main)
        throw std::invalid_argument("shifted designs are defined for the main cohort");
    if (config.design == StudyDesign::ShiftEstimatedPi &&
        config.target != ShiftTarget::Full)
        throw std::invalid_argument(
            "the estimated labeling mechanism only targets the full population");

    const std::size_t N = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(config.n) / config.lambda)));
    const std::size_t m = config.n + N;
    const std::size_t ne = config.estimands.size();

    const Predictor predictor = make_predictor(config.predictor, config.dgp, config.seed);
    const ShiftTarget truth_target =
        config.design == StudyDesign::FixedSubset ? ShiftTarget::Full : config.target;
    const std::vector<double> truths =
        truth_values(config.estimands, config.dgp, truth_target, config.mechanism,
                     config.seed, config.truth_rows);

    SimSummary out;
    out.config = config;
    out.outcomes.assign(ne, std::vector<RepOutcome>(config.reps));

    auto run_rep = [&](std::size_t rep) {
        std::mt19937_64 rng = replication_rng(config.seed, rep);
        const Population pop = draw_population(config.dgp, rng, m);
        const std::vector<double> f = predictor.predict(pop, rng);

        if (config.design == StudyDesign::FixedSubset) {
            std::vector<std::size_t> idx(m);
            for (std::size_t i = 0; i < m; ++i) idx[i] = i;
            std::shuffle(idx.begin(), idx.end(), rng);
            LabeledUnlabeledData d;
            d.labeled_scores.resize(config.n);
            d.labeled_predictions.resize(config.n);
            d.labels.resize(config.n);
            d.unlabeled_scores.resize(N);
            d.unlabeled_predictions.resize(N);
            for (std::size_t i = 0; i < config.n; ++i) {
                d.labeled_scores[i] = pop.scores[idx[i]];
                d.labeled_predictions[i] = f[idx[i]];
                d.labels[i] = pop.labels[idx[i]];
            }
            for (std::size_t i = 0; i < N; ++i) {
                d.unlabeled_scores[i] = pop.scores[idx[config.n + i]];
                d.unlabeled_predictions[i] = f[idx[config.n + i]];
            }
            for (std::size_t j = 0; j < ne; ++j) {
                RepOutcome& o = out.outcomes[j][rep];
                try {
                    const PpiResult r =
                        ppi_no_shift(config.estimands[j], d, 0.95, config.mode);
                    o = RepOutcome{r.point, r.se, r.baseline_point, r.baseline_se,
                                   true, {}};
                } catch (const std::exception& ex) {
                    o.error = ex.what();
                }
            }
            return;
        }

        ShiftSample s;
        s.scores = pop.scores;
        s.predictions = f;
        s.labels = pop.labels;
        s.c.resize(m);
        s.pi.resize(m);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t i = 0; i < m; ++i) {
            // The logistic mechanism has unbounded tails; pin astronomically
            // rare draws to the overlap bound so they stay admissible.
            s.pi[i] = std::clamp(mechanism_pi(config.mechanism, pop.x[i]),
                                 ShiftSample::overlap_epsilon,
                                 1.0 - ShiftSample::overlap_epsilon);
            s.c[i] = unif(rng) < s.pi[i] ? 1 : 0;
        }
        if (config.design == StudyDesign::ShiftEstimatedPi) {
            s.features.resize(m);
            for (std::size_t i = 0; i < m; ++i)
                s.features[i] = labeling_features(pop.x[i]);
        }
        for (std::size_t j = 0; j < ne; ++j) {
            RepOutcome& o = out.outcomes[j][rep];
            try {
                const PpiResult r =
                    config.design == StudyDesign::ShiftKnownPi
                        ? ppi_shift(config.estimands[j], s, config.target, 0.95)
                        : ppi_shift_estimated_pi(config.estimands[j], s,
                                                 config.target, 0.95);
                o = RepOutcome{r.point, r.se, r.baseline_point, r.baseline_se, true, {}};
            } catch (const std::exception& ex) {
                o.error = ex.what();
            }
        }
    };

    if (config.threads == 1) {
        for (std::size_t rep = 0; rep < config.reps; ++rep) run_rep(rep);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(config.threads));
        for (int t = 0; t < config.threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t rep = static_cast<std::size_t>(t); rep < config.reps;
                     rep += static_cast<std::size_t>(config.threads))
                    run_rep(rep);
            });
        }
        for (std::thread& th : pool) th.join();
    }

    const double z95 = normal_quantile(0.975);
    const double z80 = normal_quantile(0.9);
    out.per_estimand.resize(ne);
    for (std::size_t j = 0; j < ne; ++j) {
        EstimandSummary& es = out.per_estimand[j];
        es.estimand = config.estimands[j];
        es.truth = truths[j];
        double sp = 0.0, sse = 0.0, bp = 0.0, bse = 0.0;
        std::size_t cov95 = 0, cov80 = 0, bcov95 = 0, bcov80 = 0;
        for (std::size_t rep = 0; rep < config.reps; ++rep) {
            const RepOutcome& o = out.outcomes[j][rep];
            if (!o.ok) {
                ++es.failures;
                if (es.failed_reps.size() < 32) es.failed_reps.push_back(rep);
                continue;
            }
            ++es.reps_ok;
            sp += o.point;
            sse += o.se;
            bp += o.baseline_point;
            bse += o.baseline_se;
            if (o.se > o.baseline_se) ++es.se_violations;
            if (std::abs(o.point - es.truth) <= z95 * o.se) ++cov95;
            if (std::abs(o.point - es.truth) <= z80 * o.se) ++cov80;
            if (std::abs(o.baseline_point - es.truth) <= z95 * o.baseline_se) ++bcov95;
            if (std::abs(o.baseline_point - es.truth) <= z80 * o.baseline_se) ++bcov80;
        }
        if (es.reps_ok == 0) continue;
        const double k = static_cast<double>(es.reps_ok);
        es.mean_point = sp / k;
        es.mean_se = sse / k;
        es.baseline_mean_point = bp / k;
        es.baseline_mean_se = bse / k;
        double vp = 0.0, vb = 0.0;
        for (std::size_t rep = 0; rep < config.reps; ++rep) {
            const RepOutcome& o = out.outcomes[j][rep];
            if (!o.ok) continue;
            vp += (o.point - es.mean_point) * (o.point - es.mean_point);
            vb += (o.baseline_point - es.baseline_mean_point) *
                  (o.baseline_point - es.baseline_mean_point);
        }
        es.sd_point = es.reps_ok > 1 ? std::sqrt(vp / (k - 1.0)) : 0.0;
        es.baseline_sd_point = es.reps_ok > 1 ? std::sqrt(vb / (k - 1.0)) : 0.0;
        es.coverage95 = cov95 / k;
        es.coverage80 = cov80 / k;
        es.baseline_coverage95 = bcov95 / k;
        es.baseline_coverage80 = bcov80 / k;
        es.mc_se_coverage95 = std::sqrt(es.coverage95 * (1.0 - es.coverage95) / k);
        es.mc_se_coverage80 = std::sqrt(es.coverage80 * (1.0 - es.coverage80) / k);
    }
    return out;
}

}  // namespace ppi
