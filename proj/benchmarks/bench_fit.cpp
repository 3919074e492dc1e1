#include <map>

#include <benchmark/benchmark.h>

#include "transfit/em.hpp"
#include "transfit/inference.hpp"
#include "transfit/nested.hpp"
#include "transfit/simulation.hpp"

using namespace transfit;

namespace {

const Dataset& c1_data(int n) {
  static std::map<int, Dataset> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, simulate_dataset(SimConfig::make(SimScenario::C1, 0.0, n, 17))).first;
  }
  return it->second;
}

void BM_BasisEval(benchmark::State& state) {
  const Dataset& ds = c1_data(1000);
  const SplineBasis basis = make_knots(ds.finite_endpoints(), ds.size());
  const double lo = basis.boundary_low(), hi = basis.boundary_high();
  double t = lo;
  for (auto _ : state) {
    benchmark::DoNotOptimize(basis_eval(basis, t));
    t += (hi - lo) / 1021.0;
    if (t > hi) t = lo;
  }
}
BENCHMARK(BM_BasisEval);

void BM_EStep(benchmark::State& state) {
  const Dataset& ds = c1_data(static_cast<int>(state.range(0)));
  const SplineModel m(ds, make_knots(ds.finite_endpoints(), ds.size()), LinkSpec{0.0});
  const ParamState s = initial_state(m.d(), m.q(), m.link());
  for (auto _ : state) benchmark::DoNotOptimize(e_step(m, s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EStep)->RangeMultiplier(4)->Range(100, 6400)->Complexity();

void BM_MStep(benchmark::State& state) {
  const Dataset& ds = c1_data(static_cast<int>(state.range(0)));
  const SplineModel m(ds, make_knots(ds.finite_endpoints(), ds.size()), LinkSpec{0.0});
  const ParamState s = initial_state(m.d(), m.q(), m.link());
  const LatentExpectations ex = e_step(m, s);
  for (auto _ : state) benchmark::DoNotOptimize(m_step(m, ex, s, 1.0));
}
BENCHMARK(BM_MStep)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_Fit(benchmark::State& state) {
  const Dataset& ds = c1_data(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit(ds, LinkSpec{0.0}));
}
BENCHMARK(BM_Fit)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_FitCosmesis(benchmark::State& state) {
  const Dataset ds = load_dataset(TRANSFIT_DATA_DIR "/breast_cosmesis.csv");
  const LinkSpec link{static_cast<double>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(fit(ds, link));
}
BENCHMARK(BM_FitCosmesis)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EstimateInfo(benchmark::State& state) {
  const Dataset& ds = c1_data(400);
  const FitResult f = fit(ds, LinkSpec{0.0});
  const SplineModel m(ds, f.basis, f.link);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_info(m, f.theta));
}
BENCHMARK(BM_EstimateInfo)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
