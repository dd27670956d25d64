// embedprobe/evaluation.h
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

#ifndef EMBEDPROBE_EVALUATION_H_
#define EMBEDPROBE_EVALUATION_H_

#include <map>
#include <string>
#include <vector>

#include "embedprobe/corpus.h"
#include "embedprobe/embeddings.h"
#include "embedprobe/numerics.h"
#include "embedprobe/rng.h"

namespace embedprobe {

// Text-dependent verification trial conditions. Impostor types:
//   I    same speaker, wrong sentence
//   II   wrong speaker, same sentence
//   III  wrong speaker, wrong sentence
enum class TrialCondition { kTarget, kI, kII, kIII };

const char *TrialConditionName(TrialCondition c);
TrialCondition TrialConditionFromName(const std::string &name);

struct Trial {
  std::string enroll_speaker;
  int enroll_sentence = 0;
  std::vector<std::string> enroll_utt_ids;
  std::string test_utt_id;
  TrialCondition condition = TrialCondition::kTarget;
};

struct TrialsConfig {
  // Sessions 0..enroll_sessions-1 of every eval (speaker, sentence) pair
  // enroll the model; the remaining sessions are the test pool.
  int enroll_sessions = 3;
  // Impostor trials drawn per condition (I, II, III). Target trials are
  // not sampled: every held-out session of every model is a target test.
  int n_per_condition = 200;
};

// Deterministic trial list over the eval subset. Models are enumerated in
// (speaker, sentence) order; impostor candidates are shuffled with `rng`
// and the first n_per_condition kept, re-sorted into enumeration order.
std::vector<Trial> GenTrials(const Manifest &manifest, const TrialsConfig &cfg,
                             Rng *rng);

// Mean of the enrollment embeddings scaled to unit length.
Vec Enroll(const std::vector<const Vec *> &embeddings);

// a.b / (|a||b|). Throws NumericError when either norm is below 1e-12.
double CosineScore(const Vec &a, const Vec &b);

// Cosine score of every trial against its enrollment model, in trial order.
std::vector<double> ScoreTrials(const std::vector<Trial> &trials,
                                const EmbeddingSet &embeddings);

struct EerResult {
  TrialCondition condition = TrialCondition::kI;
  double eer = 0.0;        // in [0, 1]
  double threshold = 0.0;  // operating threshold at the crossing
  int n_target = 0;
  int n_impostor = 0;
};

// Equal error rate by threshold sweep over the sorted unique scores with
// linear interpolation at the FAR/FRR crossing. Acceptance is score >= t.
EerResult ComputeEer(std::vector<double> target_scores,
                     std::vector<double> impostor_scores);

// EER of each impostor condition present in `trials` against the pooled
// target scores.
std::map<TrialCondition, EerResult> EvalConditions(
    const std::vector<Trial> &trials, const std::vector<double> &scores);

// Trial file: "condition<TAB>enroll1,enroll2,...<TAB>test_utt" per line.
void WriteTrials(const std::string &path, const std::vector<Trial> &trials);

// When `manifest` is given, enrollment speaker and sentence are recovered
// from it and every trial is checked against its condition predicate.
std::vector<Trial> ReadTrials(const std::string &path,
                              const Manifest *manifest = nullptr);

// Score file: the trial line plus "<TAB>score", 9 significant digits.
void WriteScores(const std::string &path, const std::vector<Trial> &trials,
                 const std::vector<double> &scores);

// Reads back a score file written by WriteScores. Trials carry enrollment
// ids, test id and condition; speaker and sentence fields are unset.
void ReadScores(const std::string &path, std::vector<Trial> *trials,
                std::vector<double> *scores);

}  // namespace embedprobe

#endif  // EMBEDPROBE_EVALUATION_H_
