#include <benchmark/benchmark.h>

#include <array>
#include <vector>

#include "brownent/estimators.hpp"
#include "brownent/langevin.hpp"
#include "brownent/phase_space.hpp"

using namespace brownent;

namespace {

void BM_ExactPairStep(benchmark::State& state) {
  const ExactPairStepper stepper({1.0, 0.5, 1.0}, 1e-3);
  std::array<double, 2> x{0.3, -0.2};
  const std::array<double, 2> noise{0.1, -0.4};
  for (auto _ : state) {
    stepper.step(x, noise);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_ExactPairStep);

void BM_ExactLinearStep(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  OverdampedModel m;
  m.stiffness = Eigen::MatrixXd::Identity(n, n) * 2.0;
  for (int i = 0; i + 1 < n; ++i) m.stiffness(i, i + 1) = m.stiffness(i + 1, i) = -0.5;
  m.temps.assign(n, 1.0);
  const ExactLinearStepper stepper(m, 1e-3);
  std::vector<double> x(n, 0.1), noise(n, 0.3), scratch(n);
  for (auto _ : state) {
    stepper.step(x, noise, scratch);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_ExactLinearStep)->Arg(2)->Arg(8);

void BM_KramersExactStep(benchmark::State& state) {
  const KramersExactStepper stepper({0.01, 1.0, 1.0, 1.0}, 2e-4);
  double x = 0.1, p = -0.1;
  const std::array<double, 2> noise{0.2, -0.7};
  for (auto _ : state) {
    stepper.step(x, p, noise);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_KramersExactStep);

void BM_PairEnsemble(benchmark::State& state) {
  EnsembleConfig cfg;
  cfg.model = OverdampedModel::harmonic_pair({1.0, 0.5, 1.0});
  cfg.initial = InitialPoints(static_cast<std::size_t>(state.range(0)), std::vector<double>(2, 0.0));
  cfg.t_grid = {0.1};
  cfg.dt = 1e-3;
  cfg.n_traj = static_cast<std::size_t>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) {
    PairMomentSink sink;
    simulate_ensemble(cfg, sink);
    benchmark::DoNotOptimize(sink.estimates());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 100);
}
BENCHMARK(BM_PairEnsemble)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Binning(benchmark::State& state) {
  EnsembleConfig cfg;
  cfg.model = OverdampedModel::harmonic_pair({1.0, 0.5, 1.0});
  Eigen::MatrixXd cov(2, 2);
  cov << 4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0;
  cfg.initial = GaussianInitial{Eigen::VectorXd::Zero(2), cov};
  cfg.dt = 1e-3;
  cfg.n_traj = static_cast<std::size_t>(state.range(0));
  cfg.seed = 3;
  const auto slices = probe_slices(cfg, 0.02, 0.01, 0);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_cg_velocities(slices));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Binning)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
