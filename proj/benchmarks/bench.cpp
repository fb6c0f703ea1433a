#include <benchmark/benchmark.h>

#include "gpsmem/dynfit.hpp"
#include "gpsmem/gps.hpp"
#include "gpsmem/memory.hpp"
#include "gpsmem/trajopt.hpp"

namespace {

using namespace gpsmem;

LinearDynamics random_stable_dynamics(int T, int d_x, int d_u, Rng& rng) {
  LinearDynamics dyn;
  for (int t = 0; t < T - 1; ++t) {
    MatrixXd fx(d_x, d_x), fu(d_x, d_u);
    for (int i = 0; i < d_x; ++i)
      for (int j = 0; j < d_x; ++j) fx(i, j) = 0.3 * rng.normal() / d_x;
    fx += MatrixXd::Identity(d_x, d_x) * 0.9;
    for (int i = 0; i < d_x; ++i)
      for (int j = 0; j < d_u; ++j) fu(i, j) = rng.normal() / d_u;
    dyn.fx.push_back(fx);
    dyn.fu.push_back(fu);
    dyn.fc.push_back(0.01 * rng.normal_vector(d_x));
    dyn.F.push_back(1e-4 * MatrixXd::Identity(d_x, d_x));
  }
  return dyn;
}

QuadCostExpansion quadratic_cost(int T, int d_x, int d_u) {
  QuadStage s = QuadStage::zero(d_x, d_u);
  s.lxx = MatrixXd::Identity(d_x, d_x);
  s.luu = 0.1 * MatrixXd::Identity(d_u, d_u);
  return QuadCostExpansion(T, s);
}

void BM_MaxentLqrBackwardPass(benchmark::State& state) {
  const int T = 40, d_x = static_cast<int>(state.range(0)), d_u = d_x / 2;
  Rng rng(7);
  const LinearDynamics dyn = random_stable_dynamics(T, d_x, d_u, rng);
  const QuadCostExpansion exp = quadratic_cost(T, d_x, d_u);
  for (auto _ : state) {
    benchmark::DoNotOptimize(maxent_lqr(dyn, exp));
  }
}
BENCHMARK(BM_MaxentLqrBackwardPass)->Arg(6)->Arg(12)->Arg(24);

void BM_DynamicsFit(benchmark::State& state) {
  const int T = 40, d_x = 6, d_u = 3, N = static_cast<int>(state.range(0));
  Rng rng(11);
  std::vector<TrajectorySample> samples(N);
  for (auto& s : samples) {
    for (int t = 0; t < T; ++t) {
      s.states.push_back(rng.normal_vector(d_x));
      s.actions.push_back(rng.normal_vector(d_u));
      s.observations.push_back(VectorXd());
      s.costs.push_back(0.0);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_dynamics(samples, d_x, d_u));
  }
}
BENCHMARK(BM_DynamicsFit)->Arg(5)->Arg(20);

void BM_PolicyTrainingStep(benchmark::State& state) {
  Rng rng(3);
  MemoryPolicy policy({6, 10, 6}, 0.1, rng);
  std::vector<TrainDatum> data;
  for (int i = 0; i < 200; ++i) {
    TrainDatum d;
    d.obs = rng.normal_vector(6);
    d.target = rng.normal_vector(6);
    d.prec = MatrixXd::Identity(6, 6);
    d.nu = 1.0;
    d.lambda = VectorXd::Zero(6);
    data.push_back(std::move(d));
  }
  TrainOptions opt;
  opt.steps = 50;
  for (auto _ : state) {
    MemoryPolicy p = policy;
    Rng r(5);
    train_supervised(p, data, opt, r);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_PolicyTrainingStep);

}  // namespace
