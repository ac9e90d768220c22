// Microbenchmarks for the hot paths: penalized-spline assembly and solve,
// nearest-parameter projection, mixture-weight EM, and the end-to-end fit on
// a small cloud. Run with --benchmark_filter to focus on one group.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "pme/dataset.hpp"
#include "pme/fit.hpp"
#include "pme/hdmde.hpp"
#include "pme/projection.hpp"
#include "pme/spline.hpp"

namespace {

using pme::Matrix;
using pme::Vector;

struct Problem {
  Matrix knots, targets;
  Vector weights;
};

Problem random_problem(int N, int d, int D, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Problem p;
  p.knots.resize(N, d);
  p.targets.resize(N, D);
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < d; ++c) p.knots(r, c) = 2.0 * u(rng);
    for (int c = 0; c < D; ++c) p.targets(r, c) = u(rng);
  }
  p.weights = Vector::Constant(N, 1.0 / N);
  return p;
}

void BM_spline_solve(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  Problem p = random_problem(N, d, d + 1, 5);
  for (auto _ : state) {
    pme::SplineSolution sol =
        pme::solve(pme::assemble(p.knots, p.targets, p.weights, 1e-2));
    benchmark::DoNotOptimize(sol.map.kernel.data());
  }
  state.SetComplexityN(N);
}
BENCHMARK(BM_spline_solve)
    ->Args({50, 1})
    ->Args({100, 1})
    ->Args({200, 1})
    ->Args({50, 2})
    ->Args({100, 2})
    ->Args({200, 2})
    ->Complexity();

void BM_eval_rows(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  Problem p = random_problem(N, 2, 3, 6);
  pme::SplineMap f =
      pme::solve(pme::assemble(p.knots, p.targets, p.weights, 1e-2)).map;
  Matrix query = random_problem(2000, 2, 3, 7).knots;
  for (auto _ : state) {
    Matrix vals = f.eval_rows(query);
    benchmark::DoNotOptimize(vals.data());
  }
  state.SetItemsProcessed(state.iterations() * query.rows());
}
BENCHMARK(BM_eval_rows)->Arg(50)->Arg(200);

void BM_project_batch(benchmark::State& state) {
  const int I = static_cast<int>(state.range(0));
  Problem p = random_problem(60, 2, 3, 8);
  pme::SplineMap f =
      pme::solve(pme::assemble(p.knots, p.targets, p.weights, 1e-2)).map;
  Matrix X = random_problem(I, 3, 3, 9).knots;
  for (auto _ : state) {
    pme::BatchProjection bp = pme::project_batch(f, X);
    benchmark::DoNotOptimize(bp.dist2.data());
  }
  state.SetItemsProcessed(state.iterations() * I);
}
BENCHMARK(BM_project_batch)->Arg(100)->Arg(1000);

void BM_em_theta(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  Matrix X = pme::generate({pme::Setting::Fig3c, 2000, 17}).points;
  pme::KmeansResult km = pme::kmeans(X, N, 3);
  double sigma = pme::estimate_sigma(X, km);
  for (auto _ : state) {
    Vector theta = pme::em_theta(X, km.centers, sigma);
    benchmark::DoNotOptimize(theta.data());
  }
}
BENCHMARK(BM_em_theta)->Arg(10)->Arg(40);

void BM_full_fit(benchmark::State& state) {
  const int I = static_cast<int>(state.range(0));
  Matrix X = pme::generate({pme::Setting::Fig3c, I, 21}).points;
  for (auto _ : state) {
    pme::FitOptions o;
    o.reduction.n0 = 10;
    pme::FitResult r = pme::pme_fit(X, 1, std::exp(-4.0), o);
    benchmark::DoNotOptimize(r.msd);
  }
}
BENCHMARK(BM_full_fit)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
