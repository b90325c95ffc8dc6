#include <benchmark/benchmark.h>

#include "agecurves/baselines.hpp"
#include "agecurves/config.hpp"
#include "agecurves/sampler.hpp"
#include "agecurves/spline.hpp"
#include "agecurves/synthetic.hpp"

using namespace agecurves;

namespace {

SyntheticTruth make_data(int N, int A)
{
    return generate_baseline(42, N, A, 1.0, nullptr, 3);
}

void bench_basis_build(benchmark::State& state)
{
    const auto A = static_cast<int>(state.range(0));
    Eigen::VectorXd ages = Eigen::VectorXd::LinSpaced(A, 0.0, 89.0);
    for (auto _ : state) {
        SplineBasis basis = build_uniform_basis(ages, 23);
        benchmark::DoNotOptimize(basis.B.data());
    }
}
BENCHMARK(bench_basis_build)->Arg(90)->Arg(360);

void bench_gibbs_sweep(benchmark::State& state)
{
    const auto N = static_cast<int>(state.range(0));
    SyntheticTruth t = make_data(N, 60);
    ModelConfig cfg = ModelConfig::desk_defaults();
    cfg.Q = 3;
    std::vector<double> knots;
    for (int k = 1; k <= 7; ++k) knots.push_back(59.0 * k / 8.0);
    SplineBasis basis = build_basis(t.panel.ages, knots, 0.0, 59.0);
    CovariateMatrix W = restandardize(t.W, true);
    SamplerWorkspace ws = make_workspace(t.panel, W, basis, cfg);
    Rng rng(1);
    ModelState st = init_state(ws, cfg.Q);
    for (auto _ : state) {
        gibbs_sweep(st, ws, rng);
        benchmark::DoNotOptimize(st.sigma2);
    }
}
BENCHMARK(bench_gibbs_sweep)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void bench_svd_reconstruct(benchmark::State& state)
{
    SyntheticTruth t = make_data(static_cast<int>(state.range(0)), 60);
    for (auto _ : state) {
        Eigen::MatrixXd rec = svd_reconstruct(t.panel, 5);
        benchmark::DoNotOptimize(rec.data());
    }
}
BENCHMARK(bench_svd_reconstruct)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void bench_pspline_gcv(benchmark::State& state)
{
    SyntheticTruth t = make_data(8, static_cast<int>(state.range(0)));
    SplineBasis basis = build_uniform_basis(t.panel.ages, 23);
    Eigen::VectorXd y = t.signal.row(0).transpose();
    for (auto _ : state) {
        PsplineFit fit = pspline_smooth_gcv(y, basis);
        benchmark::DoNotOptimize(fit.fitted.data());
    }
}
BENCHMARK(bench_pspline_gcv)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
