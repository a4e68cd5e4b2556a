#include <benchmark/benchmark.h>

#include "fcomb/fcomb.hpp"

using namespace fcomb;

namespace {

std::vector<double> series(std::size_t n) {
    return simulate_ar2(unit_variance_dgp(0.4, -0.4), n, kDefaultBurnIn, 1).values;
}

void BM_Simulate(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(simulate_ar2({0.4, -0.4, 1.0}, n, kDefaultBurnIn, 7));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Arg(100000);

void BM_Hac(benchmark::State& state) {
    const auto d = series(static_cast<std::size_t>(state.range(0)));
    const double bw = std::sqrt(static_cast<double>(d.size()));
    for (auto _ : state) benchmark::DoNotOptimize(hac_lrv(d, bw));
}
BENCHMARK(BM_Hac)->Arg(500)->Arg(5000)->Arg(50000);

void BM_FitTwoStep(benchmark::State& state) {
    const auto y = series(1000);
    const Loss loss = state.range(0) ? Loss::LogScore : Loss::Msfe;
    for (auto _ : state) benchmark::DoNotOptimize(fit_two_step(loss, SampleWindow::whole(y)));
}
BENCHMARK(BM_FitTwoStep)->Arg(0)->Arg(1);

void BM_FitOneStep(benchmark::State& state) {
    const auto y = series(1000);
    const Loss loss = state.range(0) ? Loss::LogScore : Loss::Msfe;
    for (auto _ : state) benchmark::DoNotOptimize(fit_one_step(loss, SampleWindow::whole(y)));
}
BENCHMARK(BM_FitOneStep)->Arg(0)->Arg(1);

void BM_SimulatedCv(benchmark::State& state) {
    const auto y = series(1000);
    const SplitScheme split{500, 500};
    const auto gamma = fit_constituents(Loss::Msfe, SampleWindow::in_sample(y, split));
    const SimulatedCvModel m =
        estimate_cv_model(Loss::Msfe, make_fixed({0.5}, gamma), y, split,
                          static_cast<std::size_t>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(simulated_critical_value(m, 0.05));
}
BENCHMARK(BM_SimulatedCv)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
