#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <ppi/estimands.hpp>
#include <ppi/rectifier.hpp>
#include <ppi/shift.hpp>
#include <ppi/sim.hpp>
#include <ppi/wine.hpp>

#include "dataset.hpp"

namespace ppi::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string display_label(const Estimand& e) {
    std::string label = metric_name(e.kind);
    if (e.kind == Metric::TPR || e.kind == Metric::FPR) label += "@" + fmt6(e.alpha);
    return label;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

Estimand resolve_estimand(const std::string& metric, double alpha, bool alpha_set) {
    if (metric == "tpr" || metric == "fpr") {
        if (!alpha_set)
            throw std::invalid_argument("--metric " + metric + " needs --alpha");
        return metric == "tpr" ? Estimand::tpr(alpha) : Estimand::fpr(alpha);
    }
    if (alpha_set) throw std::invalid_argument("--alpha only applies to tpr and fpr");
    if (metric == "mean") return Estimand::mean();
    if (metric == "auc") return Estimand::auc();
    if (metric == "mse") return Estimand::mse();
    throw std::invalid_argument("unknown metric '" + metric + "'");
}

void put_row(std::ostream& out, const std::string& key, const std::string& val) {
    out << std::left << std::setw(16) << key << val << "\n";
}

struct EstimateOpts {
    std::string input;
    std::string metric;
    double alpha = 0.0;
    bool alpha_set = false;
    std::string target = "none";
    std::string pi_mode = "none";
    std::string rectifier = "all";
    bool rectifier_set = false;
    double level = 0.95;
    std::string format = "table";
};

const std::vector<double>& resolve_feature(const Dataset& ds, const std::string& tok) {
    if (tok == "r") return ds.r;
    if (tok == "f") return ds.f;
    if (tok.size() > 1 && tok[0] == 'x' &&
        tok.find_first_not_of("0123456789", 1) == std::string::npos) {
        const std::size_t idx = std::stoul(tok.substr(1));
        if (idx >= 1 && idx <= ds.x.size()) return ds.x[idx - 1];
    }
    throw std::invalid_argument("unknown feature '" + tok +
                                "' in --pi fit: (use r, f, or x1..x" +
                                std::to_string(ds.x.size()) + ")");
}

void emit_estimate(const EstimateOpts& o, const Estimand& e, const PpiResult& res,
                   std::size_t labeled, std::size_t unlabeled, std::ostream& out) {
    if (o.format == "json") {
        ordered_json j;
        j["estimand"] = display_label(e);
        j["metric"] = o.metric;
        if (o.alpha_set) j["alpha"] = o.alpha;
        j["target"] = o.target;
        j["pi"] = o.pi_mode;
        if (o.target == "none") j["rectifier"] = o.rectifier;
        j["level"] = o.level;
        j["point"] = res.point;
        j["se"] = res.se;
        j["ci"] = {res.ci_low, res.ci_high};
        j["omega"] = res.omega_hat;
        j["se_ratio"] = res.se_ratio;
        j["degenerate"] = res.degenerate_rectifier;
        j["baseline"] = {{"point", res.baseline_point}, {"se", res.baseline_se}};
        j["rows"] = {{"labeled", labeled}, {"unlabeled", unlabeled}};
        out << j.dump(2) << "\n";
        return;
    }
    put_row(out, "estimand", display_label(e));
    put_row(out, "target", o.target);
    put_row(out, "point", fmt6(res.point));
    put_row(out, "se", fmt6(res.se));
    put_row(out, "ci", "[" + fmt6(res.ci_low) + ", " + fmt6(res.ci_high) + "]");
    put_row(out, "level", fmt6(o.level));
    put_row(out, "omega", fmt6(res.omega_hat));
    put_row(out, "baseline point", fmt6(res.baseline_point));
    put_row(out, "baseline se", fmt6(res.baseline_se));
    put_row(out, "se ratio", fmt6(res.se_ratio));
    put_row(out, "labeled rows", std::to_string(labeled));
    put_row(out, "unlabeled rows", std::to_string(unlabeled));
    put_row(out, "degenerate", res.degenerate_rectifier ? "yes" : "no");
}

int cmd_estimate(const EstimateOpts& o, std::ostream& out, std::ostream& err) {
    Dataset ds = load_dataset(o.input);
    for (const std::string& w : ds.warnings) err << "warning: " << w << "\n";
    if (!ds.has_y || !ds.has_c)
        throw std::invalid_argument("dataset has no labels; add a y column");

    const Estimand e = resolve_estimand(o.metric, o.alpha, o.alpha_set);
    const std::size_t m = ds.rows();
    const std::size_t labeled =
        static_cast<std::size_t>(std::count(ds.c.begin(), ds.c.end(), 1));
    const std::size_t unlabeled = m - labeled;

    PpiResult res;
    if (o.target == "none") {
        if (o.pi_mode != "none")
            throw std::invalid_argument(
                "--pi requires a shift target (--target full|unlabeled|labeled)");
        if (ds.has_pi) err << "warning: pi column ignored without a shift target\n";
        LabeledUnlabeledData d;
        for (std::size_t i = 0; i < m; ++i) {
            if (ds.c[i] == 1) {
                d.labeled_scores.push_back(ds.r[i]);
                d.labeled_predictions.push_back(ds.f[i]);
                d.labels.push_back(ds.y[i]);
            } else {
                d.unlabeled_scores.push_back(ds.r[i]);
                d.unlabeled_predictions.push_back(ds.f[i]);
            }
        }
        const RectifierMode mode =
            o.rectifier == "only-n" ? RectifierMode::OnlyN : RectifierMode::AllNplusN;
        res = ppi_no_shift(e, d, o.level, mode);
    } else {
        if (o.rectifier_set)
            throw std::invalid_argument("--rectifier applies only to --target none");
        ShiftTarget tgt = ShiftTarget::Full;
        if (o.target == "unlabeled") tgt = ShiftTarget::Unlabeled;
        if (o.target == "labeled") tgt = ShiftTarget::Labeled;
        ShiftSample s;
        s.scores = ds.r;
        s.predictions = ds.f;
        s.c = ds.c;
        s.labels.resize(m);
        for (std::size_t i = 0; i < m; ++i) s.labels[i] = ds.c[i] == 1 ? ds.y[i] : 0.0;
        if (o.pi_mode == "known") {
            if (!ds.has_pi)
                throw std::invalid_argument("--pi known needs a pi column in the dataset");
            s.pi = ds.pi;
            res = ppi_shift(e, s, tgt, o.level);
        } else if (o.pi_mode.rfind("fit:", 0) == 0) {
            const std::string spec = o.pi_mode.substr(4);
            if (spec.empty())
                throw std::invalid_argument("--pi fit: needs a feature list, e.g. fit:x1,x2");
            std::vector<const std::vector<double>*> cols;
            for (const std::string& tok : split_csv(spec))
                cols.push_back(&resolve_feature(ds, tok));
            s.features.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                s.features[i].reserve(cols.size());
                for (const auto* col : cols) s.features[i].push_back((*col)[i]);
            }
            res = ppi_shift_estimated_pi(e, s, tgt, o.level);
        } else if (o.pi_mode == "none") {
            throw std::invalid_argument(
                "shift targets need --pi known or --pi fit:<features>");
        } else {
            throw std::invalid_argument("unknown --pi mode '" + o.pi_mode + "'");
        }
    }
    if (res.degenerate_rectifier)
        err << "warning: rectifier denominator is degenerate; reporting the baseline\n";
    emit_estimate(o, e, res, labeled, unlabeled, out);
    return 0;
}

struct SimulateOpts {
    std::string dgp = "main";
    std::string design = "fixed";
    std::string mechanism = "main";
    std::string predictor = "ideal";
    std::string predictor_features;
    std::string metrics = "mean,tpr,fpr,auc,mse";
    double alpha = 0.6;
    std::size_t n = 500;
    double lambda = 0.1;
    std::size_t reps = 500;
    std::uint64_t seed = 1;
    std::string mode = "all";
    std::string target = "full";
    std::size_t truth_rows = 2000000;
    int threads = 0;
    bool threads_set = false;
    std::string out_path;
    std::string format = "table";
};

int env_threads() {
    const char* raw = std::getenv("PPI_THREADS");
    if (raw == nullptr) return 1;
    const int v = std::atoi(raw);
    return v >= 1 ? v : 1;
}

ordered_json simulate_json(const SimulateOpts& o, const SimSummary& s) {
    ordered_json cfg;
    cfg["dgp"] = o.dgp;
    cfg["design"] = o.design;
    cfg["mechanism"] = o.mechanism;
    cfg["predictor"] = o.predictor;
    cfg["n"] = s.config.n;
    cfg["lambda"] = s.config.lambda;
    cfg["reps"] = s.config.reps;
    cfg["seed"] = s.config.seed;
    cfg["mode"] = o.mode;
    cfg["target"] = o.target;
    cfg["truth_rows"] = s.config.truth_rows;
    cfg["threads"] = s.config.threads;

    ordered_json ests = ordered_json::array();
    for (const EstimandSummary& es : s.per_estimand) {
        ordered_json j;
        j["estimand"] = display_label(es.estimand);
        j["truth"] = es.truth;
        j["reps_ok"] = es.reps_ok;
        j["mean_point"] = es.mean_point;
        j["sd_point"] = es.sd_point;
        j["mean_se"] = es.mean_se;
        j["coverage95"] = es.coverage95;
        j["coverage80"] = es.coverage80;
        j["mc_se_coverage95"] = es.mc_se_coverage95;
        j["mc_se_coverage80"] = es.mc_se_coverage80;
        j["baseline"] = {{"mean_point", es.baseline_mean_point},
                         {"sd_point", es.baseline_sd_point},
                         {"mean_se", es.baseline_mean_se},
                         {"coverage95", es.baseline_coverage95},
                         {"coverage80", es.baseline_coverage80}};
        j["se_violations"] = es.se_violations;
        j["failures"] = es.failures;
        j["failed_reps"] = es.failed_reps;
        ests.push_back(j);
    }
    ordered_json root;
    root["config"] = cfg;
    root["estimands"] = ests;
    return root;
}

void simulate_table(const SimSummary& s, std::ostream& out) {
    const int w = 11;
    out << std::left << std::setw(10) << "estimand" << std::right;
    for (const char* h : {"truth", "mean", "sd", "mean se", "cov95", "cov80",
                          "base sd", "base se", "base c95", "viol", "fail"})
        out << std::setw(w) << h;
    out << "\n";
    for (const EstimandSummary& es : s.per_estimand) {
        out << std::left << std::setw(10) << display_label(es.estimand) << std::right
            << std::setw(w) << fmt6(es.truth) << std::setw(w) << fmt6(es.mean_point)
            << std::setw(w) << fmt6(es.sd_point) << std::setw(w) << fmt6(es.mean_se)
            << std::setw(w) << fmt6(es.coverage95) << std::setw(w) << fmt6(es.coverage80)
            << std::setw(w) << fmt6(es.baseline_sd_point) << std::setw(w)
            << fmt6(es.baseline_mean_se) << std::setw(w) << fmt6(es.baseline_coverage95)
            << std::setw(w) << es.se_violations << std::setw(w) << es.failures << "\n";
    }
}

int cmd_simulate(const SimulateOpts& o, std::ostream& out, std::ostream& err) {
    SimConfig cfg;
    cfg.dgp = o.dgp == "alt" ? Dgp::Alt : Dgp::Main;
    if (o.design == "shift-known") {
        cfg.design = StudyDesign::ShiftKnownPi;
    } else if (o.design == "shift-estimated") {
        cfg.design = StudyDesign::ShiftEstimatedPi;
    } else {
        cfg.design = StudyDesign::FixedSubset;
    }
    cfg.mechanism = o.mechanism == "logistic" ? LabelingMechanism::TrueLogistic
                                              : LabelingMechanism::MainMechanism;
    if (o.predictor == "fitted") {
        cfg.predictor.kind = PredictorKind::FittedLogistic;
        if (o.predictor_features.empty()) {
            const int dim = cfg.dgp == Dgp::Main ? 6 : 3;
            for (int t = 0; t < dim; ++t) cfg.predictor.features.push_back(t);
        } else {
            for (const std::string& tok : split_csv(o.predictor_features))
                cfg.predictor.features.push_back(std::stoi(tok));
        }
    } else if (o.predictor == "noise") {
        cfg.predictor.kind = PredictorKind::UniformNoise;
    } else {
        cfg.predictor.kind = PredictorKind::Ideal;
    }
    for (const std::string& tok : split_csv(o.metrics))
        cfg.estimands.push_back(
            resolve_estimand(tok, o.alpha, tok == "tpr" || tok == "fpr"));
    cfg.n = o.n;
    cfg.lambda = o.lambda;
    cfg.reps = o.reps;
    cfg.seed = o.seed;
    cfg.mode = o.mode == "only-n" ? RectifierMode::OnlyN : RectifierMode::AllNplusN;
    cfg.target = o.target == "unlabeled"  ? ShiftTarget::Unlabeled
                 : o.target == "labeled" ? ShiftTarget::Labeled
                                         : ShiftTarget::Full;
    cfg.truth_rows = o.truth_rows;
    cfg.threads = o.threads_set ? o.threads : env_threads();

    const SimSummary s = run_replications(cfg);

    std::size_t failures = 0;
    for (const EstimandSummary& es : s.per_estimand) failures += es.failures;
    if (failures > 0) err << "warning: " << failures << " replication failures\n";

    if (!o.out_path.empty()) {
        std::ofstream f(o.out_path);
        if (!f) throw std::invalid_argument("cannot write " + o.out_path);
        f << simulate_json(o, s).dump(2) << "\n";
    }
    if (o.format == "json") {
        out << simulate_json(o, s).dump(2) << "\n";
    } else {
        simulate_table(s, out);
    }
    return 0;
}

struct WineOpts {
    std::string red = "data/winequality-red.csv";
    std::string white = "data/winequality-white.csv";
    std::uint64_t seed = 1;
    std::size_t train = 2000;
    std::string format = "table";
};

std::string cell(const WineEstimate& e) {
    return fmt6(e.point) + " (" + fmt6(e.se) + ")";
}

int cmd_wine(const WineOpts& o, std::ostream& out, std::ostream&) {
    for (const std::string& path : {o.red, o.white}) {
        std::ifstream probe(path);
        if (!probe) throw std::invalid_argument("cannot open " + path);
    }
    const WineTable table = load_wine(o.red, o.white);
    const WineAnalysis a = analyze_wine(table, o.seed, o.train);

    if (o.format == "json") {
        ordered_json j;
        j["train_rows"] = a.train_rows;
        j["eval_rows"] = a.eval_rows;
        j["labeled_rows"] = a.labeled_rows;
        ordered_json metrics = ordered_json::array();
        for (const WineMetricResult& m : a.metrics) {
            ordered_json row;
            row["estimand"] = m.metric;
            row["classical"] = {{"point", m.classical.point}, {"se", m.classical.se}};
            row["known_pi"] = {{"point", m.known_pi.point}, {"se", m.known_pi.se}};
            row["fitted_pi"] = {{"point", m.fitted_pi.point}, {"se", m.fitted_pi.se}};
            row["se_ratio_known"] = m.ratio_known;
            row["se_ratio_fitted"] = m.ratio_fitted;
            metrics.push_back(row);
        }
        j["metrics"] = metrics;
        out << j.dump(2) << "\n";
        return 0;
    }
    put_row(out, "train rows", std::to_string(a.train_rows));
    put_row(out, "eval rows", std::to_string(a.eval_rows));
    put_row(out, "labeled rows", std::to_string(a.labeled_rows));
    out << "\n"
        << std::left << std::setw(11) << "estimand" << std::setw(22) << "classical"
        << std::setw(22) << "known pi" << std::setw(22) << "fitted pi" << std::setw(10)
        << "ratio" << "ratio(fit)" << "\n";
    for (const WineMetricResult& m : a.metrics) {
        out << std::left << std::setw(11) << m.metric << std::setw(22)
            << cell(m.classical) << std::setw(22) << cell(m.known_pi) << std::setw(22)
            << cell(m.fitted_pi) << std::setw(10) << fmt6(m.ratio_known)
            << fmt6(m.ratio_fitted) << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"prediction-powered estimates for binary classifier metrics"};
    app.name("ppi");
    app.require_subcommand(1);

    EstimateOpts eo;
    CLI::App* est = app.add_subcommand("estimate", "estimate one metric from a dataset");
    est->add_option("-i,--input", eo.input,
                    "delimited file with columns r, f, y and optionally c, pi, x1..xk")
        ->required();
    est->add_option("-m,--metric", eo.metric, "metric to estimate")
        ->required()
        ->check(CLI::IsMember({"mean", "tpr", "fpr", "auc", "mse"}));
    CLI::Option* alpha_opt =
        est->add_option("-a,--alpha", eo.alpha, "score threshold for tpr/fpr");
    est->add_option("-t,--target", eo.target, "target population under labeling shift")
        ->check(CLI::IsMember({"none", "full", "unlabeled", "labeled"}))
        ->capture_default_str();
    est->add_option("-p,--pi", eo.pi_mode,
                    "labeling probabilities: none, known, or fit:<features>")
        ->capture_default_str();
    CLI::Option* rect_opt =
        est->add_option("--rectifier", eo.rectifier,
                        "rectifier sample: all (pooled) or only-n (unlabeled only)")
            ->check(CLI::IsMember({"all", "only-n"}));
    est->add_option("-l,--level", eo.level, "confidence level")->capture_default_str();
    est->add_option("--format", eo.format, "output format")
        ->check(CLI::IsMember({"table", "json"}))
        ->capture_default_str();

    SimulateOpts so;
    CLI::App* sim = app.add_subcommand("simulate", "run a replication study");
    sim->add_option("--dgp", so.dgp, "data generating process")
        ->check(CLI::IsMember({"main", "alt"}))
        ->capture_default_str();
    sim->add_option("--design", so.design, "study design")
        ->check(CLI::IsMember({"fixed", "shift-known", "shift-estimated"}))
        ->capture_default_str();
    sim->add_option("--mechanism", so.mechanism, "labeling mechanism for shifted designs")
        ->check(CLI::IsMember({"main", "logistic"}))
        ->capture_default_str();
    sim->add_option("--predictor", so.predictor, "prediction rule")
        ->check(CLI::IsMember({"ideal", "fitted", "noise"}))
        ->capture_default_str();
    sim->add_option("--predictor-features", so.predictor_features,
                    "covariate indices for the fitted predictor, e.g. 0,1,2");
    sim->add_option("--metrics", so.metrics, "comma separated metric list")
        ->capture_default_str();
    sim->add_option("-a,--alpha", so.alpha, "score threshold for tpr/fpr")
        ->capture_default_str();
    sim->add_option("-n,--n", so.n, "labeled sample size")->capture_default_str();
    sim->add_option("--lambda", so.lambda, "ratio n/N")->capture_default_str();
    sim->add_option("--reps", so.reps, "number of replications")->capture_default_str();
    sim->add_option("--seed", so.seed, "master seed")->capture_default_str();
    sim->add_option("--mode", so.mode, "rectifier sample")
        ->check(CLI::IsMember({"all", "only-n"}))
        ->capture_default_str();
    sim->add_option("--target", so.target, "target population for shifted designs")
        ->check(CLI::IsMember({"full", "unlabeled", "labeled"}))
        ->capture_default_str();
    sim->add_option("--truth-rows", so.truth_rows, "rows in the truth draw")
        ->capture_default_str();
    CLI::Option* threads_opt = sim->add_option(
        "--threads", so.threads, "worker threads (default: PPI_THREADS or 1)");
    sim->add_option("-o,--out", so.out_path, "write the JSON summary to a file");
    sim->add_option("--format", so.format, "stdout format")
        ->check(CLI::IsMember({"table", "json"}))
        ->capture_default_str();

    WineOpts wo;
    CLI::App* wine = app.add_subcommand("wine", "screening study on the wine tables");
    wine->add_option("--red", wo.red, "red wine csv")->capture_default_str();
    wine->add_option("--white", wo.white, "white wine csv")->capture_default_str();
    wine->add_option("--seed", wo.seed, "split and labeling seed")->capture_default_str();
    wine->add_option("--train", wo.train, "rows held out to train the predictor")
        ->capture_default_str();
    wine->add_option("--format", wo.format, "output format")
        ->check(CLI::IsMember({"table", "json"}))
        ->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? 0 : 2;
    }
    eo.alpha_set = alpha_opt->count() > 0;
    eo.rectifier_set = rect_opt->count() > 0;
    so.threads_set = threads_opt->count() > 0;

    try {
        if (est->parsed()) return cmd_estimate(eo, out, err);
        if (sim->parsed()) return cmd_simulate(so, out, err);
        if (wine->parsed()) return cmd_wine(wo, out, err);
        return 2;
    } catch (const SchemaMismatch& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    } catch (const MissingColumn& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::runtime_error& ex) {
        err << "error: " << ex.what() << "\n";
        return 3;
    }
}

}  // namespace ppi::cli
