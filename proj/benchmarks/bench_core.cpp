#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include <ppi/estimands.hpp>
#include <ppi/rectifier.hpp>
#include <ppi/shift.hpp>
#include <ppi/sim.hpp>

namespace {

ppi::WeightedColumns random_columns(std::size_t m) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ppi::WeightedColumns cols;
    cols.scores.resize(m);
    cols.responses.resize(m);
    cols.weights.assign(m, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        cols.scores[i] = unif(rng);
        cols.responses[i] = unif(rng) < 0.4 ? 1.0 : 0.0;
    }
    return cols;
}

ppi::LabeledUnlabeledData random_data(std::size_t n, std::size_t N) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ppi::LabeledUnlabeledData d;
    for (std::size_t i = 0; i < n + N; ++i) {
        const double r = unif(rng);
        const double f = std::clamp(0.2 + 0.6 * r + 0.1 * gauss(rng), 0.02, 0.98);
        if (i < n) {
            d.labeled_scores.push_back(r);
            d.labeled_predictions.push_back(f);
            d.labels.push_back(unif(rng) < 0.3 + 0.4 * r ? 1.0 : 0.0);
        } else {
            d.unlabeled_scores.push_back(r);
            d.unlabeled_predictions.push_back(f);
        }
    }
    return d;
}

void bench_auc_plugin(benchmark::State& state) {
    const auto cols = random_columns(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(ppi::plugin_estimate(ppi::Estimand::auc(), cols));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(bench_auc_plugin)->Range(256, 65536)->Complexity();

void bench_auc_influence(benchmark::State& state) {
    const auto cols = random_columns(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(ppi::influence_values(ppi::Estimand::auc(), cols));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(bench_auc_influence)->Range(256, 65536)->Complexity();

void bench_ppi_no_shift(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const auto d = random_data(n, 10 * n);
    for (auto _ : state)
        benchmark::DoNotOptimize(ppi::ppi_no_shift(ppi::Estimand::auc(), d, 0.95));
}
BENCHMARK(bench_ppi_no_shift)->Range(256, 8192);

void bench_logistic_fit(benchmark::State& state) {
    const std::size_t m = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(14);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<double>> x(m, std::vector<double>(3));
    std::vector<int> c(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (double& v : x[i]) v = gauss(rng);
        c[i] = unif(rng) < 1.0 / (1.0 + std::exp(-0.4 * x[i][0])) ? 1 : 0;
    }
    for (auto _ : state) benchmark::DoNotOptimize(ppi::fit_logistic_pi(x, c));
}
BENCHMARK(bench_logistic_fit)->Range(1024, 65536);

void bench_draw_population(benchmark::State& state) {
    for (auto _ : state) {
        std::mt19937_64 rng(15);
        benchmark::DoNotOptimize(
            ppi::draw_population(ppi::Dgp::Main, rng,
                                 static_cast<std::size_t>(state.range(0))));
    }
}
BENCHMARK(bench_draw_population)->Range(1024, 65536);

}  // namespace

BENCHMARK_MAIN();
