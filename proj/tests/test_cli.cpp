#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <ppi/estimands.hpp>
#include <ppi/rectifier.hpp>
#include <ppi/shift.hpp>
#include <ppi/sim.hpp>

#include <cli.hpp>
#include <dataset.hpp>

using nlohmann::json;
using ppi::Estimand;
using ppi::LabeledUnlabeledData;
using ppi::PpiResult;
using ppi::ShiftSample;
using ppi::ShiftTarget;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliRun r;
    r.code = ppi::cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Pool {
    std::vector<double> r, f, y, pi, x1, x2;
    std::vector<int> c;

    std::size_t size() const { return r.size(); }
};

Pool make_pool(std::uint64_t seed, std::size_t m) {
    auto rng = ppi::replication_rng(seed, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Pool p;
    for (std::size_t i = 0; i < m; ++i) {
        const double x1 = gauss(rng);
        const double x2 = gauss(rng);
        const double r = expit(0.8 * x1 - 0.3 * x2 + 0.2 * gauss(rng));
        const double f = std::clamp(r + 0.1 * gauss(rng), 0.02, 0.98);
        const double y = unif(rng) < 0.25 + 0.5 * r ? 1.0 : 0.0;
        const double pi = std::clamp(0.2 + 0.6 * expit(x1), 0.05, 0.95);
        const int c = unif(rng) < pi ? 1 : 0;
        p.r.push_back(r);
        p.f.push_back(f);
        p.y.push_back(y);
        p.pi.push_back(pi);
        p.x1.push_back(x1);
        p.x2.push_back(x2);
        p.c.push_back(c);
    }
    return p;
}

struct CsvSpec {
    bool with_c = true;
    bool with_pi = true;
    bool with_x = true;
    bool blank_unlabeled_y = true;
    char delim = ',';
};

void write_pool_csv(const std::string& path, const Pool& p, const CsvSpec& spec = {}) {
    std::ofstream out(path);
    const char d = spec.delim;
    out << "r" << d << "f" << d << "y";
    if (spec.with_c) out << d << "c";
    if (spec.with_pi) out << d << "pi";
    if (spec.with_x) out << d << "x1" << d << "x2";
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < p.size(); ++i) {
        out << p.r[i] << d << p.f[i] << d;
        if (p.c[i] == 1 || !spec.blank_unlabeled_y) out << p.y[i];
        if (spec.with_c) out << d << p.c[i];
        if (spec.with_pi) out << d << p.pi[i];
        if (spec.with_x) out << d << p.x1[i] << d << p.x2[i];
        out << "\n";
    }
}

LabeledUnlabeledData split_pool(const Pool& p) {
    LabeledUnlabeledData d;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.c[i] == 1) {
            d.labeled_scores.push_back(p.r[i]);
            d.labeled_predictions.push_back(p.f[i]);
            d.labels.push_back(p.y[i]);
        } else {
            d.unlabeled_scores.push_back(p.r[i]);
            d.unlabeled_predictions.push_back(p.f[i]);
        }
    }
    return d;
}

ShiftSample shift_sample(const Pool& p, bool with_features) {
    ShiftSample s;
    s.scores = p.r;
    s.predictions = p.f;
    s.c = p.c;
    s.pi = p.pi;
    s.labels.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) s.labels[i] = p.c[i] == 1 ? p.y[i] : 0.0;
    if (with_features) {
        s.features.resize(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) s.features[i] = {p.x1[i], p.x2[i]};
    }
    return s;
}

std::map<std::string, std::string> parse_table(const std::string& out) {
    std::map<std::string, std::string> kv;
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() <= 16) continue;
        std::string key = line.substr(0, 16);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        kv[key] = line.substr(16);
    }
    return kv;
}

// Same schema and class separation as the genuine files, small enough to run fast.
const char* kWineHeader =
    "\"fixed acidity\";\"volatile acidity\";\"citric acid\";\"residual sugar\";"
    "\"chlorides\";\"free sulfur dioxide\";\"total sulfur dioxide\";\"density\";"
    "\"pH\";\"sulphates\";\"alcohol\";\"quality\"";

void write_wine(const std::string& path, int red, std::size_t rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> quality(4, 8);
    std::ofstream out(path);
    out << kWineHeader << "\n";
    for (std::size_t i = 0; i < rows; ++i) {
        const double density = (red ? 0.9967 : 0.9940) + 0.0030 * gauss(rng);
        out << (red ? 8.3 : 6.9) + 1.2 * gauss(rng) << ";" << 0.4 + 0.1 * gauss(rng)
            << ";" << 0.3 + 0.1 * gauss(rng) << ";" << 4.0 + 2.0 * gauss(rng) << ";"
            << 0.06 + 0.01 * gauss(rng) << ";" << 30.0 + 10.0 * gauss(rng) << ";"
            << 110.0 + 40.0 * gauss(rng) << ";" << density << ";"
            << 3.2 + 0.15 * gauss(rng) << ";" << 0.5 + 0.1 * gauss(rng) << ";"
            << 10.5 + 1.2 * gauss(rng) << ";" << quality(rng) << "\n";
    }
}

}  // namespace

TEST_CASE("no-shift estimate prints the library numbers") {
    const Pool p = make_pool(42, 600);
    write_pool_csv("cli_pool.csv", p);
    const LabeledUnlabeledData d = split_pool(p);

    struct Probe {
        std::vector<std::string> extra;
        Estimand e;
        ppi::RectifierMode mode;
    };
    const std::vector<Probe> probes = {
        {{"--metric", "mean"}, Estimand::mean(), ppi::RectifierMode::AllNplusN},
        {{"--metric", "auc"}, Estimand::auc(), ppi::RectifierMode::AllNplusN},
        {{"--metric", "tpr", "--alpha", "0.5"}, Estimand::tpr(0.5),
         ppi::RectifierMode::AllNplusN},
        {{"--metric", "mean", "--rectifier", "only-n"}, Estimand::mean(),
         ppi::RectifierMode::OnlyN},
    };
    for (const Probe& pr : probes) {
        CAPTURE(pr.extra[1]);
        std::vector<std::string> args = {"estimate", "--input", "cli_pool.csv"};
        args.insert(args.end(), pr.extra.begin(), pr.extra.end());
        const CliRun r = run(args);
        REQUIRE(r.code == 0);
        const PpiResult api = ppi::ppi_no_shift(pr.e, d, 0.95, pr.mode);
        auto kv = parse_table(r.out);
        CHECK(kv["point"] == fmt6(api.point));
        CHECK(kv["se"] == fmt6(api.se));
        CHECK(kv["omega"] == fmt6(api.omega_hat));
        CHECK(kv["ci"] == "[" + fmt6(api.ci_low) + ", " + fmt6(api.ci_high) + "]");
        CHECK(kv["baseline point"] == fmt6(api.baseline_point));
        CHECK(kv["baseline se"] == fmt6(api.baseline_se));
        CHECK(kv["se ratio"] == fmt6(api.se_ratio));
        CHECK(kv["labeled rows"] == std::to_string(d.n()));
        CHECK(kv["unlabeled rows"] == std::to_string(d.N()));
        CHECK(kv["degenerate"] == "no");
    }
}

TEST_CASE("json output round-trips the library doubles exactly") {
    const Pool p = make_pool(43, 500);
    write_pool_csv("cli_rt.csv", p);
    const LabeledUnlabeledData d = split_pool(p);

    for (const Estimand& e : {Estimand::mean(), Estimand::tpr(0.35)}) {
        CAPTURE(ppi::estimand_label(e));
        std::vector<std::string> args = {"estimate", "-i", "cli_rt.csv",
                                         "-m",       ppi::metric_name(e.kind),
                                         "--format", "json"};
        if (e.kind == ppi::Metric::TPR) {
            args.push_back("-a");
            args.push_back("0.35");
        }
        const CliRun r = run(args);
        REQUIRE(r.code == 0);
        const json j = json::parse(r.out);
        const PpiResult api = ppi::ppi_no_shift(e, d, 0.95);
        CHECK(j["point"].get<double>() == api.point);
        CHECK(j["se"].get<double>() == api.se);
        CHECK(j["ci"][0].get<double>() == api.ci_low);
        CHECK(j["ci"][1].get<double>() == api.ci_high);
        CHECK(j["omega"].get<double>() == api.omega_hat);
        CHECK(j["se_ratio"].get<double>() == api.se_ratio);
        CHECK(j["baseline"]["point"].get<double>() == api.baseline_point);
        CHECK(j["baseline"]["se"].get<double>() == api.baseline_se);
        CHECK(j["degenerate"].get<bool>() == false);
        CHECK(j["rows"]["labeled"].get<std::size_t>() == d.n());
        CHECK(j["rows"]["unlabeled"].get<std::size_t>() == d.N());
    }
}

TEST_CASE("shift targets match the pooled estimator bitwise") {
    const Pool p = make_pool(44, 700);
    write_pool_csv("cli_shift.csv", p);
    const ShiftSample s = shift_sample(p, false);

    const std::vector<std::pair<std::string, ShiftTarget>> targets = {
        {"full", ShiftTarget::Full},
        {"unlabeled", ShiftTarget::Unlabeled},
        {"labeled", ShiftTarget::Labeled},
    };
    for (const auto& [name, tgt] : targets) {
        CAPTURE(name);
        const CliRun r = run({"estimate", "-i", "cli_shift.csv", "-m", "auc", "--target",
                              name, "--pi", "known", "--level", "0.9", "--format",
                              "json"});
        REQUIRE(r.code == 0);
        const json j = json::parse(r.out);
        const PpiResult api = ppi::ppi_shift(Estimand::auc(), s, tgt, 0.9);
        CHECK(j["point"].get<double>() == api.point);
        CHECK(j["se"].get<double>() == api.se);
        CHECK(j["ci"][0].get<double>() == api.ci_low);
        CHECK(j["ci"][1].get<double>() == api.ci_high);
        CHECK(j["omega"].get<double>() == api.omega_hat);
        CHECK(j["target"] == name);
    }
}

TEST_CASE("fitted mechanism features flow through fit:") {
    const Pool p = make_pool(45, 700);
    write_pool_csv("cli_fit.csv", p);

    const CliRun r = run({"estimate", "-i", "cli_fit.csv", "-m", "mean", "--target",
                          "full", "--pi", "fit:x1,x2", "--format", "json"});
    REQUIRE(r.code == 0);
    const ShiftSample s = shift_sample(p, true);
    const PpiResult api =
        ppi::ppi_shift_estimated_pi(Estimand::mean(), s, ShiftTarget::Full, 0.95);
    const json j = json::parse(r.out);
    CHECK(j["point"].get<double>() == api.point);
    CHECK(j["se"].get<double>() == api.se);
    CHECK(j["omega"].get<double>() == api.omega_hat);

    ShiftSample sr = shift_sample(p, false);
    sr.features.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) sr.features[i] = {p.r[i], p.x1[i]};
    const CliRun r2 = run({"estimate", "-i", "cli_fit.csv", "-m", "mean", "--target",
                           "full", "--pi", "fit:r,x1", "--format", "json"});
    REQUIRE(r2.code == 0);
    const PpiResult api2 =
        ppi::ppi_shift_estimated_pi(Estimand::mean(), sr, ShiftTarget::Full, 0.95);
    CHECK(json::parse(r2.out)["point"].get<double>() == api2.point);
    CHECK(json::parse(r2.out)["se"].get<double>() == api2.se);
}

TEST_CASE("rows with labels count as labeled when c is absent") {
    const Pool p = make_pool(46, 400);
    CsvSpec spec;
    spec.with_c = false;
    spec.with_pi = false;
    spec.with_x = false;
    write_pool_csv("cli_noc.csv", p, spec);

    const CliRun r =
        run({"estimate", "-i", "cli_noc.csv", "-m", "mean", "--format", "json"});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("no c column") != std::string::npos);
    const PpiResult api = ppi::ppi_no_shift(Estimand::mean(), split_pool(p), 0.95);
    CHECK(json::parse(r.out)["point"].get<double>() == api.point);
    CHECK(json::parse(r.out)["se"].get<double>() == api.se);
}

TEST_CASE("delimiter detection gives identical answers") {
    const Pool p = make_pool(47, 300);
    write_pool_csv("cli_comma.csv", p);
    CsvSpec semi;
    semi.delim = ';';
    write_pool_csv("cli_semi.csv", p, semi);
    CsvSpec tab;
    tab.delim = '\t';
    write_pool_csv("cli_tab.csv", p, tab);

    std::vector<std::string> outs;
    for (const char* path : {"cli_comma.csv", "cli_semi.csv", "cli_tab.csv"}) {
        const CliRun r = run({"estimate", "-i", path, "-m", "auc", "--format", "json"});
        REQUIRE(r.code == 0);
        outs.push_back(r.out);
    }
    CHECK(outs[0] == outs[1]);
    CHECK(outs[0] == outs[2]);
}

TEST_CASE("degenerate rectifier reports the baseline and exits cleanly") {
    Pool p = make_pool(48, 400);
    p.f = p.r;
    write_pool_csv("cli_degen.csv", p);

    const CliRun r =
        run({"estimate", "-i", "cli_degen.csv", "-m", "mse", "--format", "json"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["degenerate"].get<bool>() == true);
    CHECK(j["point"].get<double>() == j["baseline"]["point"].get<double>());
    CHECK(j["se"].get<double>() == j["baseline"]["se"].get<double>());
    CHECK(r.err.find("degenerate") != std::string::npos);
}

TEST_CASE("exit codes separate usage errors from data degeneracy") {
    const Pool p = make_pool(49, 200);
    write_pool_csv("cli_codes.csv", p);
    CsvSpec nopi;
    nopi.with_pi = false;
    write_pool_csv("cli_codes_nopi.csv", p, nopi);

    {
        std::ofstream f("cli_nopos.csv");
        f << "r,f,y,c\n";
        for (int i = 0; i < 6; ++i)
            f << 0.1 * (i + 1) << "," << 0.1 * (i + 1) + 0.05 << ","
              << (i < 4 ? "0" : "") << "," << (i < 4 ? 1 : 0) << "\n";
    }
    const CliRun degen =
        run({"estimate", "-i", "cli_nopos.csv", "-m", "tpr", "-a", "0.5"});
    CHECK(degen.code == 3);
    CHECK(degen.err.find("error:") != std::string::npos);

    const std::vector<std::vector<std::string>> usage = {
        {"estimate", "-i", "cli_missing_file.csv", "-m", "mean"},
        {"estimate", "-i", "cli_codes.csv", "-m", "tpr"},
        {"estimate", "-i", "cli_codes.csv", "-m", "mean", "-a", "0.5"},
        {"estimate", "-i", "cli_codes.csv", "-m", "quantile"},
        {"estimate", "-i", "cli_codes_nopi.csv", "-m", "mean", "--target", "full",
         "--pi", "known"},
        {"estimate", "-i", "cli_codes.csv", "-m", "mean", "--target", "labeled",
         "--pi", "fit:x1"},
        {"estimate", "-i", "cli_codes.csv", "-m", "mean", "--target", "full"},
        {"estimate", "-i", "cli_codes.csv", "-m", "mean", "--target", "full", "--pi",
         "guess"},
        {"estimate", "-i", "cli_codes.csv", "-m", "mean", "--target", "full", "--pi",
         "known", "--rectifier", "only-n"},
        {"estimate", "-i", "cli_codes.csv", "-m", "mean", "--level", "1.5"},
        {"estimate", "-i", "cli_codes.csv", "-m", "mean", "--pi", "known"},
        {"simulate", "--dgp", "alt", "--design", "shift-known"},
        {},
    };
    for (const auto& args : usage) {
        CAPTURE(args.empty() ? std::string("<none>") : args.back());
        CHECK(run(args).code == 2);
    }

    const CliRun help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("estimate") != std::string::npos);
    CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("malformed files are rejected with the offending row") {
    {
        std::ofstream f("cli_badnum.csv");
        f << "r,f,y\n0.1,0.2,1\noops,0.3,0\n0.4,0.5,1\n0.6,0.6,\n";
    }
    const CliRun bad = run({"estimate", "-i", "cli_badnum.csv", "-m", "mean"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("row 3") != std::string::npos);

    {
        std::ofstream f("cli_blanky.csv");
        f << "r,f,y,c\n0.1,0.2,1,1\n0.3,0.4,,1\n0.5,0.6,0,0\n";
    }
    const CliRun blank = run({"estimate", "-i", "cli_blanky.csv", "-m", "mean"});
    CHECK(blank.code == 2);
    CHECK(blank.err.find("row 3") != std::string::npos);

    {
        std::ofstream f("cli_dup.csv");
        f << "r,f,y,r\n0.1,0.2,1,0.3\n";
    }
    CHECK(run({"estimate", "-i", "cli_dup.csv", "-m", "mean"}).code == 2);

    {
        std::ofstream f("cli_gap.csv");
        f << "r,f,y,x1,x3\n0.1,0.2,1,0.3,0.4\n";
    }
    CHECK(run({"estimate", "-i", "cli_gap.csv", "-m", "mean"}).code == 2);

    {
        std::ofstream f("cli_conly.csv");
        f << "r,f,c\n0.1,0.2,1\n0.3,0.4,0\n";
    }
    CHECK(run({"estimate", "-i", "cli_conly.csv", "-m", "mean"}).code == 2);

    {
        std::ofstream f("cli_extra.csv");
        f << "r,f,y,note\n0.1,0.2,1,7\n0.3,0.4,0,8\n0.5,0.6,,9\n0.7,0.8,,9\n";
    }
    const CliRun extra = run({"estimate", "-i", "cli_extra.csv", "-m", "mean"});
    CHECK(extra.code == 0);
    CHECK(extra.err.find("ignoring unrecognized columns") != std::string::npos);
}

TEST_CASE("simulate is deterministic and honors PPI_THREADS") {
    const std::vector<std::string> base = {
        "simulate", "--metrics", "mean,auc", "-n",           "120",   "--lambda",
        "0.5",      "--reps",    "6",        "--seed",       "7",     "--truth-rows",
        "20000",    "--format",  "json"};
    const CliRun r1 = run(base);
    REQUIRE(r1.code == 0);
    const CliRun r2 = run(base);
    CHECK(r1.out == r2.out);

    const json j = json::parse(r1.out);
    REQUIRE(j["estimands"].size() == 2);
    for (const auto& es : j["estimands"]) {
        CHECK(es["failures"].get<int>() == 0);
        CHECK(es["reps_ok"].get<int>() == 6);
        CHECK(es["se_violations"].get<int>() == 0);
    }
    CHECK(j["config"]["threads"].get<int>() == 1);

    setenv("PPI_THREADS", "3", 1);
    const CliRun r3 = run(base);
    unsetenv("PPI_THREADS");
    REQUIRE(r3.code == 0);
    const json j3 = json::parse(r3.out);
    CHECK(j3["config"]["threads"].get<int>() == 3);
    CHECK(j3["estimands"].dump() == j["estimands"].dump());

    std::vector<std::string> with_flag = base;
    with_flag.push_back("--threads");
    with_flag.push_back("2");
    setenv("PPI_THREADS", "5", 1);
    const CliRun r4 = run(with_flag);
    unsetenv("PPI_THREADS");
    REQUIRE(r4.code == 0);
    CHECK(json::parse(r4.out)["config"]["threads"].get<int>() == 2);
    CHECK(json::parse(r4.out)["estimands"].dump() == j["estimands"].dump());
}

TEST_CASE("simulate writes the summary file and a table") {
    std::remove("cli_sim.json");
    const CliRun r = run({"simulate", "--metrics", "mean", "-n", "100", "--lambda",
                          "0.5", "--reps", "4", "--seed", "3", "--truth-rows", "20000",
                          "--out", "cli_sim.json"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("estimand") != std::string::npos);
    CHECK(r.out.find("cov95") != std::string::npos);
    CHECK(r.out.find("mean") != std::string::npos);

    std::ifstream f("cli_sim.json");
    REQUIRE(f.good());
    const json j = json::parse(f);
    CHECK(j["config"]["reps"].get<int>() == 4);
    CHECK(j["estimands"].size() == 1);
    CHECK(j["estimands"][0]["failures"].get<int>() == 0);
}

TEST_CASE("alt cohort with an ideal predictor tightens the interval") {
    const CliRun r = run({"simulate", "--dgp", "alt", "--metrics", "mean", "-n", "200",
                          "--lambda", "0.1", "--reps", "30", "--seed", "11",
                          "--truth-rows", "50000", "--format", "json"});
    REQUIRE(r.code == 0);
    const json es = json::parse(r.out)["estimands"][0];
    CHECK(es["failures"].get<int>() == 0);
    CHECK(es["se_violations"].get<int>() == 0);
    CHECK(es["mean_se"].get<double>() < es["baseline"]["mean_se"].get<double>());
    CHECK(es["coverage95"].get<double>() >= 0.8);
}

TEST_CASE("wine subcommand reproduces the analysis on synthetic tables") {
    write_wine("cli_wine_red.csv", 1, 500, 21);
    write_wine("cli_wine_white.csv", 0, 900, 22);
    const std::vector<std::string> base = {
        "wine",   "--red",   "cli_wine_red.csv", "--white", "cli_wine_white.csv",
        "--seed", "3",       "--train",          "300",     "--format",
        "json"};
    const CliRun r = run(base);
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j["metrics"].size() == 3);
    CHECK(j["metrics"][0]["estimand"] == "tpr");
    CHECK(j["metrics"][1]["estimand"] == "fpr");
    CHECK(j["metrics"][2]["estimand"] == "auc");
    CHECK(j["labeled_rows"].get<int>() > 0);
    for (const auto& m : j["metrics"]) {
        CHECK(m["se_ratio_known"].get<double>() <= 1.0 + 1e-12);
        CHECK(m["classical"]["se"].get<double>() > 0.0);
    }
    CHECK(run(base).out == r.out);

    const CliRun table =
        run({"wine", "--red", "cli_wine_red.csv", "--white", "cli_wine_white.csv",
             "--seed", "3", "--train", "300"});
    REQUIRE(table.code == 0);
    CHECK(table.out.find("ratio") != std::string::npos);
    CHECK(table.out.find("auc") != std::string::npos);

    CHECK(run({"wine", "--red", "cli_wine_missing.csv", "--white",
               "cli_wine_white.csv"})
              .code == 2);
}
