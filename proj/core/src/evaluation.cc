// embedprobe/evaluation.cc
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

#include "embedprobe/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "embedprobe/common.h"

namespace embedprobe {

const char *TrialConditionName(TrialCondition c) {
  switch (c) {
    case TrialCondition::kTarget: return "target";
    case TrialCondition::kI: return "I";
    case TrialCondition::kII: return "II";
    case TrialCondition::kIII: return "III";
  }
  return "?";
}

TrialCondition TrialConditionFromName(const std::string &name) {
  if (name == "target") return TrialCondition::kTarget;
  if (name == "I") return TrialCondition::kI;
  if (name == "II") return TrialCondition::kII;
  if (name == "III") return TrialCondition::kIII;
  throw ArtifactError("unknown trial condition '" + name + "'");
}

namespace {

struct EnrollModel {
  std::string speaker;
  int sentence = 0;
  std::vector<std::string> enroll_ids;
};

bool ConditionHolds(TrialCondition c, bool same_speaker, bool same_sentence) {
  switch (c) {
    case TrialCondition::kTarget: return same_speaker && same_sentence;
    case TrialCondition::kI: return same_speaker && !same_sentence;
    case TrialCondition::kII: return !same_speaker && same_sentence;
    case TrialCondition::kIII: return !same_speaker && !same_sentence;
  }
  return false;
}

}  // namespace

std::vector<Trial> GenTrials(const Manifest &manifest, const TrialsConfig &cfg,
                             Rng *rng) {
  if (cfg.enroll_sessions < 1) {
    throw ConfigError("trials: enroll_sessions must be >= 1");
  }
  if (cfg.n_per_condition < 1) {
    throw ConfigError("trials: n_per_condition must be >= 1");
  }
  const auto eval_utts = manifest.InSubset(Subset::kEval);
  if (eval_utts.empty()) throw ConfigError("trials: eval subset is empty");

  // Group eval utterances per (speaker, sentence), ordered.
  std::map<std::pair<std::string, int>, std::vector<const UttMeta *>> groups;
  for (const UttMeta *u : eval_utts) {
    groups[{u->speaker_id, u->sentence_id}].push_back(u);
  }
  const int k = cfg.enroll_sessions;
  std::vector<EnrollModel> models;
  std::vector<const UttMeta *> tests;
  std::vector<std::vector<int>> target_tests;  // model -> test indices
  for (auto &[key, utts] : groups) {
    std::sort(utts.begin(), utts.end(),
              [](const UttMeta *a, const UttMeta *b) {
                return a->session < b->session;
              });
    if (static_cast<int>(utts.size()) < k + 1) {
      throw ConfigError("trials: speaker " + key.first + " sentence " +
                        std::to_string(key.second) + " has only " +
                        std::to_string(utts.size()) +
                        " sessions, need enroll_sessions + 1");
    }
    EnrollModel m;
    m.speaker = key.first;
    m.sentence = key.second;
    for (int s = 0; s < k; ++s) m.enroll_ids.push_back(utts[s]->utt_id);
    models.push_back(std::move(m));
    target_tests.emplace_back();
    for (size_t s = k; s < utts.size(); ++s) {
      target_tests.back().push_back(static_cast<int>(tests.size()));
      tests.push_back(utts[s]);
    }
  }

  std::vector<Trial> trials;
  auto emit = [&](int mi, int ti, TrialCondition c) {
    Trial t;
    t.enroll_speaker = models[mi].speaker;
    t.enroll_sentence = models[mi].sentence;
    t.enroll_utt_ids = models[mi].enroll_ids;
    t.test_utt_id = tests[ti]->utt_id;
    t.condition = c;
    trials.push_back(std::move(t));
  };

  for (size_t mi = 0; mi < models.size(); ++mi) {
    for (int ti : target_tests[mi]) {
      emit(static_cast<int>(mi), ti, TrialCondition::kTarget);
    }
  }
  for (TrialCondition c :
       {TrialCondition::kI, TrialCondition::kII, TrialCondition::kIII}) {
    std::vector<std::pair<int, int>> pool;
    for (size_t mi = 0; mi < models.size(); ++mi) {
      for (size_t ti = 0; ti < tests.size(); ++ti) {
        const bool same_spk = tests[ti]->speaker_id == models[mi].speaker;
        const bool same_sent = tests[ti]->sentence_id == models[mi].sentence;
        if (ConditionHolds(c, same_spk, same_sent)) {
          pool.emplace_back(static_cast<int>(mi), static_cast<int>(ti));
        }
      }
    }
    if (static_cast<int>(pool.size()) < cfg.n_per_condition) {
      throw ConfigError(std::string("trials: condition ") +
                        TrialConditionName(c) + " has only " +
                        std::to_string(pool.size()) + " candidates, need " +
                        std::to_string(cfg.n_per_condition));
    }
    rng->Shuffle(&pool);
    pool.resize(cfg.n_per_condition);
    std::sort(pool.begin(), pool.end());
    for (const auto &[mi, ti] : pool) emit(mi, ti, c);
  }
  return trials;
}

Vec Enroll(const std::vector<const Vec *> &embeddings) {
  if (embeddings.empty()) throw ConfigError("enroll: no embeddings");
  Vec mean = *embeddings[0];
  for (size_t i = 1; i < embeddings.size(); ++i) {
    if (embeddings[i]->size() != mean.size()) {
      throw ConfigError("enroll: embedding dims differ");
    }
    mean += *embeddings[i];
  }
  mean /= static_cast<double>(embeddings.size());
  const double norm = mean.norm();
  if (norm < 1e-12) throw NumericError("enroll: zero-norm mean embedding");
  return mean / norm;
}

double CosineScore(const Vec &a, const Vec &b) {
  if (a.size() != b.size()) throw ConfigError("cosine: dims differ");
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) {
    throw NumericError("cosine: near-zero norm");
  }
  return a.dot(b) / (na * nb);
}

std::vector<double> ScoreTrials(const std::vector<Trial> &trials,
                                const EmbeddingSet &embeddings) {
  std::vector<double> scores;
  scores.reserve(trials.size());
  // Enrollment models are tiny; cache them by their id list.
  std::map<std::string, Vec> cache;
  for (const Trial &t : trials) {
    std::string key;
    for (const std::string &id : t.enroll_utt_ids) {
      key += id;
      key += ',';
    }
    auto it = cache.find(key);
    if (it == cache.end()) {
      std::vector<const Vec *> vecs;
      for (const std::string &id : t.enroll_utt_ids) {
        vecs.push_back(&embeddings.Get(id));
      }
      it = cache.emplace(std::move(key), Enroll(vecs)).first;
    }
    scores.push_back(CosineScore(it->second, embeddings.Get(t.test_utt_id)));
  }
  return scores;
}

EerResult ComputeEer(std::vector<double> target_scores,
                     std::vector<double> impostor_scores) {
  if (target_scores.empty() || impostor_scores.empty()) {
    throw ConfigError("eer: need scores on both sides");
  }
  std::sort(target_scores.begin(), target_scores.end());
  std::sort(impostor_scores.begin(), impostor_scores.end());
  const double n_t = static_cast<double>(target_scores.size());
  const double n_i = static_cast<double>(impostor_scores.size());

  std::vector<double> thr;
  thr.reserve(target_scores.size() + impostor_scores.size() + 1);
  std::merge(target_scores.begin(), target_scores.end(),
             impostor_scores.begin(), impostor_scores.end(),
             std::back_inserter(thr));
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  thr.push_back(std::numeric_limits<double>::infinity());

  // FRR(t) = P(target < t), FAR(t) = P(impostor >= t); acceptance is >= t.
  auto frr_at = [&](double t) {
    return (std::lower_bound(target_scores.begin(), target_scores.end(), t) -
            target_scores.begin()) /
           n_t;
  };
  auto far_at = [&](double t) {
    return (impostor_scores.end() -
            std::lower_bound(impostor_scores.begin(), impostor_scores.end(),
                             t)) /
           n_i;
  };

  EerResult out;
  out.n_target = static_cast<int>(target_scores.size());
  out.n_impostor = static_cast<int>(impostor_scores.size());
  double far0 = far_at(thr[0]);
  double frr0 = frr_at(thr[0]);
  for (size_t i = 0; i + 1 < thr.size(); ++i) {
    const double far1 = far_at(thr[i + 1]);
    const double frr1 = frr_at(thr[i + 1]);
    if (far1 - frr1 <= 0.0) {
      // far - frr is non-increasing in t, so this is the crossing segment.
      const double denom = (frr1 - frr0) - (far1 - far0);
      if (denom <= 0.0) {
        out.eer = far0;
        out.threshold = thr[i];
      } else {
        const double alpha = (far0 - frr0) / denom;
        out.eer = far0 + alpha * (far1 - far0);
        out.threshold = std::isinf(thr[i + 1])
                            ? thr[i]
                            : thr[i] + alpha * (thr[i + 1] - thr[i]);
      }
      return out;
    }
    far0 = far1;
    frr0 = frr1;
  }
  throw NumericError("eer: no crossing found");
}

std::map<TrialCondition, EerResult> EvalConditions(
    const std::vector<Trial> &trials, const std::vector<double> &scores) {
  if (trials.size() != scores.size()) {
    throw ConfigError("eer: trial and score counts differ");
  }
  std::vector<double> targets;
  std::map<TrialCondition, std::vector<double>> impostors;
  for (size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].condition == TrialCondition::kTarget) {
      targets.push_back(scores[i]);
    } else {
      impostors[trials[i].condition].push_back(scores[i]);
    }
  }
  std::map<TrialCondition, EerResult> out;
  for (const auto &[cond, imp] : impostors) {
    EerResult r = ComputeEer(targets, imp);
    r.condition = cond;
    out[cond] = r;
  }
  return out;
}

namespace {

std::string TrialLine(const Trial &t) {
  std::string line = TrialConditionName(t.condition);
  line += '\t';
  for (size_t i = 0; i < t.enroll_utt_ids.size(); ++i) {
    if (i) line += ',';
    line += t.enroll_utt_ids[i];
  }
  line += '\t';
  line += t.test_utt_id;
  return line;
}

Trial ParseTrialLine(const std::string &line, const std::string &path) {
  const size_t tab1 = line.find('\t');
  const size_t tab2 = line.find('\t', tab1 + 1);
  if (tab1 == std::string::npos || tab2 == std::string::npos) {
    throw ArtifactError("malformed trial line in " + path + ": " + line);
  }
  Trial t;
  t.condition = TrialConditionFromName(line.substr(0, tab1));
  std::stringstream enr(line.substr(tab1 + 1, tab2 - tab1 - 1));
  std::string id;
  while (std::getline(enr, id, ',')) {
    if (!id.empty()) t.enroll_utt_ids.push_back(id);
  }
  if (t.enroll_utt_ids.empty()) {
    throw ArtifactError("trial without enrollment utts in " + path);
  }
  t.test_utt_id = line.substr(tab2 + 1);
  if (t.test_utt_id.empty()) {
    throw ArtifactError("trial without test utt in " + path);
  }
  // Structural, needs no manifest: scoring an utterance against itself
  // would leak the answer.
  for (const std::string &eid : t.enroll_utt_ids) {
    if (eid == t.test_utt_id) {
      throw ArtifactError("test utt inside its enroll set in " + path);
    }
  }
  return t;
}

}  // namespace

void WriteTrials(const std::string &path, const std::vector<Trial> &trials) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArtifactError("cannot write trials: " + path);
  for (const Trial &t : trials) os << TrialLine(t) << "\n";
  if (!os) throw ArtifactError("trial write failed: " + path);
}

std::vector<Trial> ReadTrials(const std::string &path,
                              const Manifest *manifest) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("cannot open trials: " + path);
  std::vector<Trial> trials;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Trial t = ParseTrialLine(line, path);
    if (manifest != nullptr) {
      const UttMeta &first = manifest->ByUttId(t.enroll_utt_ids[0]);
      t.enroll_speaker = first.speaker_id;
      t.enroll_sentence = first.sentence_id;
      for (const std::string &id : t.enroll_utt_ids) {
        const UttMeta &u = manifest->ByUttId(id);
        if (u.speaker_id != t.enroll_speaker ||
            u.sentence_id != t.enroll_sentence) {
          throw ArtifactError("mixed enrollment group in " + path);
        }
      }
      const UttMeta &test = manifest->ByUttId(t.test_utt_id);
      if (!ConditionHolds(t.condition,
                          test.speaker_id == t.enroll_speaker,
                          test.sentence_id == t.enroll_sentence)) {
        throw ArtifactError("trial violates its condition in " + path + ": " +
                            line);
      }
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void WriteScores(const std::string &path, const std::vector<Trial> &trials,
                 const std::vector<double> &scores) {
  if (trials.size() != scores.size()) {
    throw ConfigError("scores: trial and score counts differ");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArtifactError("cannot write scores: " + path);
  char buf[48];
  for (size_t i = 0; i < trials.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g", scores[i]);
    os << TrialLine(trials[i]) << '\t' << buf << "\n";
  }
  if (!os) throw ArtifactError("score write failed: " + path);
}

void ReadScores(const std::string &path, std::vector<Trial> *trials,
                std::vector<double> *scores) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("cannot open scores: " + path);
  trials->clear();
  scores->clear();
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw ArtifactError("malformed score line in " + path);
    }
    trials->push_back(ParseTrialLine(line.substr(0, tab), path));
    try {
      scores->push_back(std::stod(line.substr(tab + 1)));
    } catch (const std::exception &) {
      throw ArtifactError("bad score value in " + path + ": " + line);
    }
  }
}

}  // namespace embedprobe
