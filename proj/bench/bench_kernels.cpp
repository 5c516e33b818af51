// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "ctxsynth/fid.hpp"
#include "ctxsynth/scm.hpp"
#include "ctxsynth/util.hpp"

namespace {

Eigen::MatrixXd features(int n, int d, std::uint64_t seed) {
  ctxsynth::Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform();
  return x;
}

std::vector<ctxsynth::FeatureSet> feature_sets(int classes, int n, int d, std::uint64_t seed) {
  std::vector<ctxsynth::FeatureSet> out;
  for (int c = 0; c < classes; ++c) out.push_back({"c" + std::to_string(c), features(n, d, seed + c)});
  return out;
}

void BM_FitGaussian(benchmark::State& state) {
  const auto x = features(1000, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(ctxsynth::fit_gaussian(x));
}

void BM_FitGaussianSerial(benchmark::State& state) {
  const auto x = features(1000, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(ctxsynth::fit_gaussian_serial(x));
}

void BM_PerClassFid(benchmark::State& state) {
  const auto real = feature_sets(static_cast<int>(state.range(0)), 100, 32, 10);
  const auto syn = feature_sets(static_cast<int>(state.range(0)), 100, 32, 1000);
  for (auto _ : state) benchmark::DoNotOptimize(ctxsynth::per_class_fid(real, syn));
}

void BM_PerClassFidSerial(benchmark::State& state) {
  const auto real = feature_sets(static_cast<int>(state.range(0)), 100, 32, 10);
  const auto syn = feature_sets(static_cast<int>(state.range(0)), 100, 32, 1000);
  for (auto _ : state) benchmark::DoNotOptimize(ctxsynth::per_class_fid_serial(real, syn));
}

void BM_MeanSpuriousness(benchmark::State& state) {
  const auto scm = ctxsynth::toy_scm();
  for (auto _ : state)
    benchmark::DoNotOptimize(ctxsynth::mean_spuriousness(scm, static_cast<std::size_t>(state.range(0)), 256, 0));
}

void BM_MeanSpuriousnessSerial(benchmark::State& state) {
  const auto scm = ctxsynth::toy_scm();
  for (auto _ : state)
    benchmark::DoNotOptimize(ctxsynth::mean_spuriousness_serial(scm, static_cast<std::size_t>(state.range(0)), 256, 0));
}

}  // namespace

BENCHMARK(BM_FitGaussian)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(BM_FitGaussianSerial)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(BM_PerClassFid)->Arg(8)->Arg(64);
BENCHMARK(BM_PerClassFidSerial)->Arg(8)->Arg(64);
BENCHMARK(BM_MeanSpuriousness)->Arg(100)->Arg(1000);
BENCHMARK(BM_MeanSpuriousnessSerial)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
