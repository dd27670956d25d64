// benchmarks/embedprobe_bench.cc
//
// Copyright 2026  The Embedprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Microbenchmarks for the hot paths: UBM scoring and stats, i-vector
// extraction, LSTM stepping, EER computation. Sizes mirror the default
// fixture (D=39, C=64, R=100, H=128, ~300-frame utterances).

#include <benchmark/benchmark.h>

#include <vector>

#include "embedprobe/evaluation.h"
#include "embedprobe/gmm.h"
#include "embedprobe/ivector.h"
#include "embedprobe/nnet.h"
#include "embedprobe/rng.h"

namespace {

using namespace embedprobe;

constexpr int kDim = 39;
constexpr int kComponents = 64;
constexpr int kRank = 100;
constexpr int kHidden = 128;
constexpr int kFrames = 300;

Mat RandomMat(int rows, int cols, Rng *rng) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng->Gaussian();
  return m;
}

GmmUbm MakeUbm(Rng *rng) {
  GmmUbm ubm;
  ubm.weights = Vec::Constant(kComponents, 1.0 / kComponents);
  ubm.means = RandomMat(kComponents, kDim, rng);
  ubm.vars = Mat::Constant(kComponents, kDim, 1.0);
  ubm.ComputeDerived();
  return ubm;
}

void BM_UbmLogDensities(benchmark::State &state) {
  Rng rng(1);
  const GmmUbm ubm = MakeUbm(&rng);
  const Mat frames = RandomMat(kFrames, kDim, &rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ubm.LogComponentDensities(frames));
  }
  state.SetItemsProcessed(state.iterations() * kFrames);
}
BENCHMARK(BM_UbmLogDensities);

void BM_AccumulateStats(benchmark::State &state) {
  Rng rng(2);
  const GmmUbm ubm = MakeUbm(&rng);
  FeatureMatrix f;
  f.utt_id = "bench";
  f.frames = RandomMat(kFrames, kDim, &rng).cast<float>();
  for (auto _ : state) {
    benchmark::DoNotOptimize(AccumulateStats(ubm, f));
  }
  state.SetItemsProcessed(state.iterations() * kFrames);
}
BENCHMARK(BM_AccumulateStats);

void BM_IVectorExtract(benchmark::State &state) {
  Rng rng(3);
  const GmmUbm ubm = MakeUbm(&rng);
  TvModel tv;
  tv.components = kComponents;
  tv.dim = kDim;
  tv.t = RandomMat(kComponents * kDim, kRank, &rng) * 0.1;
  const IVectorExtractor extractor(ubm, tv);
  SuffStats stats;
  stats.utt_id = "bench";
  stats.n = Vec::Constant(kComponents, kFrames / double(kComponents));
  stats.f = RandomMat(kComponents, kDim, &rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(extractor.Extract(stats));
  }
}
BENCHMARK(BM_IVectorExtract);

void BM_LstmStep(benchmark::State &state) {
  Rng rng(4);
  LstmCell cell("bench", kDim, kHidden);
  cell.Init(&rng);
  Vec x(kDim), h = Vec::Zero(kHidden), c = Vec::Zero(kHidden);
  for (int i = 0; i < kDim; ++i) x[i] = rng.Gaussian();
  Vec h_t(kHidden), c_t(kHidden);
  for (auto _ : state) {
    cell.Step(x, h, c, &h_t, &c_t);
    benchmark::DoNotOptimize(h_t);
  }
}
BENCHMARK(BM_LstmStep);

void BM_LstmForward(benchmark::State &state) {
  Rng rng(5);
  LstmCell cell("bench", kDim, kHidden);
  cell.Init(&rng);
  const Mat x = RandomMat(kFrames, kDim, &rng);
  LstmCell::Tape tape;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cell.Forward(x, &tape));
  }
  state.SetItemsProcessed(state.iterations() * kFrames);
}
BENCHMARK(BM_LstmForward);

void BM_DenseForward(benchmark::State &state) {
  Rng rng(6);
  DenseLayer layer("bench", kHidden, kHidden, Activation::kRelu);
  layer.Init(&rng);
  const Mat x = RandomMat(256, kHidden, &rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.Forward(x));
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_DenseForward);

void BM_ComputeEer(benchmark::State &state) {
  Rng rng(7);
  const int n = static_cast<int>(state.range(0));
  std::vector<double> tar(n), imp(n);
  for (int i = 0; i < n; ++i) {
    tar[i] = rng.Gaussian() + 1.0;
    imp[i] = rng.Gaussian() - 1.0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeEer(tar, imp));
  }
}
BENCHMARK(BM_ComputeEer)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
