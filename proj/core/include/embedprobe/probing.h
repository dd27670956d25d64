// embedprobe/probing.h
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
// Probing tasks: datasets built from utterance embeddings plus manifest
// labels, a fixed MLP probe trained per (task, embedding) pair, and the
// per-word spoken-term classifiers.

#ifndef EMBEDPROBE_PROBING_H_
#define EMBEDPROBE_PROBING_H_

#include <string>
#include <vector>

#include "embedprobe/corpus.h"
#include "embedprobe/embeddings.h"
#include "embedprobe/nnet.h"
#include "embedprobe/numerics.h"
#include "embedprobe/rng.h"

namespace embedprobe {

enum class ProbeTask {
  kSpeaker,
  kText,
  kTerm,
  kOrder,
  kLength,
  kChannel,
  kGender,
  kRate,
};

const char *ProbeTaskName(ProbeTask t);
// Throws ConfigError naming all eight tasks when `name` is unknown.
ProbeTask ProbeTaskFromName(const std::string &name);
std::vector<ProbeTask> AllProbeTasks();

// Duration bin for the length task: [1,3], [4,6], [7,9], [10,12] seconds
// (inclusive); -1 for durations falling between bins.
int LengthBinOf(double seconds);

struct ProbeConfig {
  int hidden = 256;
  TrainOptions train{.max_epochs = 100,
                     .batch_size = 64,
                     .lr = 1e-3,
                     .optimizer = OptKind::kRmsProp,
                     .patience = 10};
  int order_pairs = 500;     // N; the dataset has 2N samples
  int length_per_bin = 100;  // samples per duration bin
  int length_max_tries = 200;
  int rate_max_utts = 0;  // 0 takes every eval utterance
  bool term_strict = false;  // require absent words predicted absent too
};

// A built task dataset. For the term task `labels` is unused and the
// per-word presence bitmaps are in `present`.
struct ProbeDataset {
  ProbeTask task = ProbeTask::kSpeaker;
  int n_classes = 0;
  Mat inputs;               // n x dim
  std::vector<int> labels;  // n
  std::vector<int> train_idx, dev_idx, test_idx;
  // Term task only.
  int vocab_size = 0;
  std::vector<std::vector<char>> present;     // n x vocab, 0/1
  std::vector<std::vector<int>> utt_words;    // distinct in-utterance words
};

// Builds one task dataset from the eval subset. `base` holds the already
// extracted eval embeddings. Tasks that embed derived features (rate,
// length, order) need `embedder`; the others accept a null pointer.
ProbeDataset BuildTaskDataset(ProbeTask task, FeatureStore *store,
                              const Embedder *embedder,
                              const EmbeddingSet &base,
                              const ProbeConfig &cfg, Rng *rng);

struct ProbeReport {
  std::string task;
  std::string kind;  // embedding kind
  int dim = 0;
  double accuracy = 0.0;
  double baseline = 0.0;
  int n_train = 0;
  int n_test = 0;
  uint64_t seed = 0;
};

// One-hidden-layer ReLU MLP probe trained with dev early stopping.
Mlp TrainProbe(const ProbeDataset &ds, const ProbeConfig &cfg,
               const Rng &rng);

// Accuracy on the test split plus the chance baseline (class reciprocal
// computed from the dataset). kind/dim/seed fields are left for the caller.
ProbeReport EvalProbe(const Mlp &model, const ProbeDataset &ds);

// Per-word presence classifiers (two-class softmax, i.e. logistic
// regression). Words whose training split is single-class are trained the
// same way and converge to constant predictors.
struct TermModel {
  std::vector<SoftmaxHead> words;  // one per vocabulary word, label 1 = present
};

TermModel TrainTermProbes(const ProbeDataset &ds, const ProbeConfig &cfg,
                          const Rng &rng);

// Utterance-level spoken-term accuracy over the test split. An utterance
// counts correct when every word in it is predicted present; with
// `strict`, absent vocabulary words must be predicted absent as well.
ProbeReport EvalTermProbes(const TermModel &model, const ProbeDataset &ds,
                           bool strict);

}  // namespace embedprobe

#endif  // EMBEDPROBE_PROBING_H_
