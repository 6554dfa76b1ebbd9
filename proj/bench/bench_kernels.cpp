// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS to vary the
// thread count of the parallel versions.

#include <benchmark/benchmark.h>

#include <random>

#include "robkmr/kernels.hpp"
#include "robkmr/robust_center.hpp"
#include "robkmr/serial_reference.hpp"

using namespace robkmr;

namespace {

DataView continuous(Eigen::Index n, Eigen::Index p) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  DataView v;
  v.kind = ViewKind::Continuous;
  v.values.resize(n, p);
  for (Eigen::Index i = 0; i < v.values.size(); ++i) v.values.data()[i] = z(rng);
  for (Eigen::Index j = 0; j < p; ++j) v.feature_ids.push_back("f" + std::to_string(j));
  return v;
}

DataView genotypes(Eigen::Index n, Eigen::Index p) {
  std::mt19937_64 rng(2);
  std::binomial_distribution<int> g(2, 0.3);
  DataView v;
  v.kind = ViewKind::Genotype;
  v.values.resize(n, p);
  for (Eigen::Index i = 0; i < v.values.size(); ++i) v.values.data()[i] = g(rng);
  for (Eigen::Index j = 0; j < p; ++j) v.feature_ids.push_back("snp" + std::to_string(j));
  return v;
}

Eigen::VectorXd simplex(Eigen::Index n) {
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  return w / w.sum();
}

void BM_GaussianSerial(benchmark::State& state) {
  const auto v = continuous(state.range(0), 20);
  for (auto _ : state) benchmark::DoNotOptimize(serial::gaussian_gram(v, 2.0));
}

void BM_GaussianParallel(benchmark::State& state) {
  const auto v = continuous(state.range(0), 20);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_gram(v, 2.0));
}

void BM_IbsSerial(benchmark::State& state) {
  const auto v = genotypes(state.range(0), 50);
  for (auto _ : state) benchmark::DoNotOptimize(serial::ibs_gram(v));
}

void BM_IbsParallel(benchmark::State& state) {
  const auto v = genotypes(state.range(0), 50);
  for (auto _ : state) benchmark::DoNotOptimize(ibs_gram(v));
}

void BM_HadamardSerial(benchmark::State& state) {
  const auto k = gaussian_gram(continuous(state.range(0), 5), 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(serial::hadamard(k, k));
}

void BM_HadamardParallel(benchmark::State& state) {
  const auto k = gaussian_gram(continuous(state.range(0), 5), 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(hadamard(k, k));
}

void BM_CenterSerial(benchmark::State& state) {
  const auto k = gaussian_gram(continuous(state.range(0), 5), 2.0);
  const auto w = simplex(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(serial::robust_center(k, w));
}

void BM_CenterParallel(benchmark::State& state) {
  const auto k = gaussian_gram(continuous(state.range(0), 5), 2.0);
  const auto w = simplex(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(robust_center(k, w));
}

}  // namespace

BENCHMARK(BM_GaussianSerial)->Arg(200)->Arg(800);
BENCHMARK(BM_GaussianParallel)->Arg(200)->Arg(800);
BENCHMARK(BM_IbsSerial)->Arg(200)->Arg(800);
BENCHMARK(BM_IbsParallel)->Arg(200)->Arg(800);
BENCHMARK(BM_HadamardSerial)->Arg(200)->Arg(800);
BENCHMARK(BM_HadamardParallel)->Arg(200)->Arg(800);
BENCHMARK(BM_CenterSerial)->Arg(200)->Arg(800);
BENCHMARK(BM_CenterParallel)->Arg(200)->Arg(800);

BENCHMARK_MAIN();
