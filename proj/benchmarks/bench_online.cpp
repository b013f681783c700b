// Microbenchmarks for the online reconstruction paths: the monolithic
// saddle solve, its two-step decomposition, and the operator-predicted
// update (background stage + network forward).

#include "pbdw/assimilation.hpp"
#include "pbdw/operator_model.hpp"
#include "pbdw/rng.hpp"

#include <benchmark/benchmark.h>

using namespace pbdw;

namespace {

struct OnlineFixture {
  Matrix A;
  Matrix B;
  Vector y;

  OnlineFixture(int m, int n) {
    Rng rng(7);
    Matrix r(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) r(i, j) = Complex(rng.normal(), rng.normal());
    }
    A = r * r.adjoint() + static_cast<double>(m) * Matrix::Identity(m, m);
    B.resize(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) B(i, j) = Complex(rng.normal(), rng.normal());
    }
    y.resize(m);
    for (int i = 0; i < m; ++i) y[i] = Complex(rng.normal(), rng.normal());
  }
};

struct ForwardFixture {
  MlpParams branch;
  TrunkBasis trunk;
  RealVector input;

  explicit ForwardFixture(int m) {
    std::vector<int> widths;
    widths.push_back(m);
    for (int l = 0; l < 10; ++l) widths.push_back(m);
    widths.push_back(2 * m);
    branch = mlp_init(widths, 3);
    trunk.phi = Matrix::Identity(m, m);
    input = RealVector::Ones(m);
  }
};

}  // namespace

static void BM_SaddleSolve(benchmark::State& state) {
  const OnlineFixture fx(static_cast<int>(state.range(0)),
                         static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_saddle(fx.A, fx.B, fx.y, 0.0));
  }
}
BENCHMARK(BM_SaddleSolve)->Args({50, 2})->Args({50, 15})->Args({100, 4});

static void BM_TwoStepSolve(benchmark::State& state) {
  const OnlineFixture fx(static_cast<int>(state.range(0)),
                         static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_two_step(fx.A, fx.B, fx.y, 0.0));
  }
}
BENCHMARK(BM_TwoStepSolve)->Args({50, 2})->Args({50, 15})->Args({100, 4});

static void BM_BackgroundStage(benchmark::State& state) {
  const OnlineFixture fx(static_cast<int>(state.range(0)),
                         static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_background(fx.A, fx.B, fx.y, 0.0));
  }
}
BENCHMARK(BM_BackgroundStage)->Args({50, 2})->Args({100, 4});

static void BM_OperatorForward(benchmark::State& state) {
  const ForwardFixture fx(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const RealMatrix out = mlp_forward(fx.branch, fx.input);
    Vector beta(fx.trunk.phi.rows());
    beta.real() = out.topRows(fx.trunk.phi.rows()).col(0);
    beta.imag() = out.bottomRows(fx.trunk.phi.rows()).col(0);
    benchmark::DoNotOptimize((fx.trunk.phi * beta).eval());
  }
}
BENCHMARK(BM_OperatorForward)->Arg(50)->Arg(100);

BENCHMARK_MAIN();
