// embedprobe/probing.cc
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

#include "embedprobe/probing.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "embedprobe/common.h"

namespace embedprobe {

const char *ProbeTaskName(ProbeTask t) {
  switch (t) {
    case ProbeTask::kSpeaker: return "speaker";
    case ProbeTask::kText: return "text";
    case ProbeTask::kTerm: return "term";
    case ProbeTask::kOrder: return "order";
    case ProbeTask::kLength: return "length";
    case ProbeTask::kChannel: return "channel";
    case ProbeTask::kGender: return "gender";
    case ProbeTask::kRate: return "rate";
  }
  return "?";
}

ProbeTask ProbeTaskFromName(const std::string &name) {
  for (ProbeTask t : AllProbeTasks()) {
    if (name == ProbeTaskName(t)) return t;
  }
  throw ConfigError(
      "unknown probe task '" + name +
      "'; tasks: speaker, text, term, order, length, channel, gender, rate");
}

std::vector<ProbeTask> AllProbeTasks() {
  return {ProbeTask::kSpeaker, ProbeTask::kText,   ProbeTask::kTerm,
          ProbeTask::kOrder,   ProbeTask::kLength, ProbeTask::kChannel,
          ProbeTask::kGender,  ProbeTask::kRate};
}

namespace {

// Duration bins in seconds, inclusive on both ends. Durations that fall
// between bins are discarded during dataset construction.
constexpr double kLengthBins[4][2] = {
    {1.0, 3.0}, {4.0, 6.0}, {7.0, 9.0}, {10.0, 12.0}};

}  // namespace

int LengthBinOf(double seconds) {
  for (int b = 0; b < 4; ++b) {
    if (seconds >= kLengthBins[b][0] && seconds <= kLengthBins[b][1]) {
      return b;
    }
  }
  return -1;
}

namespace {

struct SplitIdx {
  std::vector<int> train, dev, test;
};

// Stratified 80/10/10: per class, round(n/10) (at least 1) samples go to
// dev and to test each, the rest to train.
SplitIdx StratifiedSplit(const std::vector<int> &keys, Rng *rng) {
  std::map<int, std::vector<int>> by_key;
  for (size_t i = 0; i < keys.size(); ++i) {
    by_key[keys[i]].push_back(static_cast<int>(i));
  }
  SplitIdx out;
  for (auto &[key, idx] : by_key) {
    const int n = static_cast<int>(idx.size());
    if (n < 3) {
      throw ConfigError("probe split: class " + std::to_string(key) +
                        " has only " + std::to_string(n) +
                        " samples, need at least 3");
    }
    rng->Shuffle(&idx);
    const int n_dev = std::max(1, static_cast<int>(std::lround(0.1 * n)));
    const int n_test = n_dev;
    out.dev.insert(out.dev.end(), idx.begin(), idx.begin() + n_dev);
    out.test.insert(out.test.end(), idx.begin() + n_dev,
                    idx.begin() + n_dev + n_test);
    out.train.insert(out.train.end(), idx.begin() + n_dev + n_test,
                     idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.dev.begin(), out.dev.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// Split whole groups (order pairs, rate triplets) so that correlated
// samples never straddle a split boundary.
void GroupedSplit(const std::vector<std::vector<int>> &groups, Rng *rng,
                  ProbeDataset *ds) {
  std::vector<int> keys(groups.size(), 0);
  SplitIdx g = StratifiedSplit(keys, rng);
  auto expand = [&](const std::vector<int> &group_ids,
                    std::vector<int> *out) {
    for (int gi : group_ids) {
      out->insert(out->end(), groups[gi].begin(), groups[gi].end());
    }
    std::sort(out->begin(), out->end());
  };
  expand(g.train, &ds->train_idx);
  expand(g.dev, &ds->dev_idx);
  expand(g.test, &ds->test_idx);
}

// Remaps raw integer labels onto 0..K-1 in sorted raw order.
int RemapLabels(std::vector<int> *labels) {
  std::set<int> distinct(labels->begin(), labels->end());
  std::map<int, int> remap;
  int next = 0;
  for (int v : distinct) remap[v] = next++;
  for (int &v : *labels) v = remap[v];
  return next;
}

void CheckEveryClassEverySplit(const ProbeDataset &ds) {
  for (const auto *idx : {&ds.train_idx, &ds.dev_idx, &ds.test_idx}) {
    std::set<int> seen;
    for (int i : *idx) seen.insert(ds.labels[i]);
    if (static_cast<int>(seen.size()) != ds.n_classes) {
      throw ConfigError(std::string("probe: a class is missing from a split "
                                    "of task ") +
                        ProbeTaskName(ds.task));
    }
  }
}

const Embedder &NeedEmbedder(const Embedder *embedder, ProbeTask task) {
  if (embedder == nullptr) {
    throw ConfigError(std::string("probe: task ") + ProbeTaskName(task) +
                      " embeds derived features and needs the extractor");
  }
  return *embedder;
}

}  // namespace

ProbeDataset BuildTaskDataset(ProbeTask task, FeatureStore *store,
                              const Embedder *embedder,
                              const EmbeddingSet &base,
                              const ProbeConfig &cfg, Rng *rng) {
  const Manifest &manifest = store->manifest();
  const auto eval_utts = manifest.InSubset(Subset::kEval);
  if (eval_utts.empty()) throw ConfigError("probe: eval subset is empty");
  for (const UttMeta *u : eval_utts) {
    if (!base.Has(u->utt_id)) {
      throw ArtifactError("probe: missing embedding for utterance '" +
                          u->utt_id + "'");
    }
  }
  if (embedder != nullptr &&
      (embedder->Dim() != base.dim || embedder->Kind() != base.kind)) {
    throw ConfigError("probe: embedding set does not match the extractor (" +
                      base.kind + "/" + std::to_string(base.dim) + " vs " +
                      embedder->Kind() + "/" + std::to_string(embedder->Dim()) +
                      ")");
  }

  ProbeDataset ds;
  ds.task = task;
  const int d = base.dim;
  const double frame_rate = manifest.tables.frame_rate;

  switch (task) {
    case ProbeTask::kSpeaker:
    case ProbeTask::kText:
    case ProbeTask::kChannel:
    case ProbeTask::kGender: {
      // Label copied straight off the utterance metadata.
      std::vector<std::string> speakers;
      if (task == ProbeTask::kSpeaker) {
        std::set<std::string> spk;
        for (const UttMeta *u : eval_utts) spk.insert(u->speaker_id);
        speakers.assign(spk.begin(), spk.end());
      }
      ds.inputs.resize(static_cast<long>(eval_utts.size()), d);
      for (size_t i = 0; i < eval_utts.size(); ++i) {
        const UttMeta *u = eval_utts[i];
        ds.inputs.row(static_cast<long>(i)) = base.Get(u->utt_id).transpose();
        int label = 0;
        switch (task) {
          case ProbeTask::kSpeaker:
            label = static_cast<int>(
                std::lower_bound(speakers.begin(), speakers.end(),
                                 u->speaker_id) -
                speakers.begin());
            break;
          case ProbeTask::kText: label = u->sentence_id; break;
          case ProbeTask::kChannel: label = u->channel_id; break;
          case ProbeTask::kGender: label = u->gender == 'F' ? 0 : 1; break;
          default: break;
        }
        ds.labels.push_back(label);
      }
      ds.n_classes = RemapLabels(&ds.labels);
      break;
    }

    case ProbeTask::kRate: {
      const Embedder &emb = NeedEmbedder(embedder, task);
      std::vector<int> chosen(eval_utts.size());
      std::iota(chosen.begin(), chosen.end(), 0);
      if (cfg.rate_max_utts > 0 &&
          static_cast<int>(chosen.size()) > cfg.rate_max_utts) {
        rng->Shuffle(&chosen);
        chosen.resize(cfg.rate_max_utts);
        std::sort(chosen.begin(), chosen.end());
      }
      ds.inputs.resize(3 * static_cast<long>(chosen.size()), d);
      std::vector<std::vector<int>> groups;
      long row = 0;
      for (int ui : chosen) {
        const FeatureMatrix &f = store->Get(eval_utts[ui]->utt_id);
        groups.push_back({static_cast<int>(row), static_cast<int>(row + 1),
                          static_cast<int>(row + 2)});
        ds.inputs.row(row) = emb.Embed(PerturbRate(f, 0.5)).transpose();
        ds.labels.push_back(static_cast<int>(RateClass::kSlow));
        ds.inputs.row(row + 1) = base.Get(f.utt_id).transpose();
        ds.labels.push_back(static_cast<int>(RateClass::kNormal));
        ds.inputs.row(row + 2) = emb.Embed(PerturbRate(f, 1.5)).transpose();
        ds.labels.push_back(static_cast<int>(RateClass::kFast));
        row += 3;
      }
      ds.n_classes = 3;
      GroupedSplit(groups, rng, &ds);
      break;
    }

    case ProbeTask::kLength: {
      const Embedder &emb = NeedEmbedder(embedder, task);
      // Same-speaker concatenations aimed at each duration bin; draws
      // that land between bins are discarded and retried.
      std::map<std::string, std::vector<const UttMeta *>> by_spk;
      for (const UttMeta *u : eval_utts) by_spk[u->speaker_id].push_back(u);
      std::vector<const std::vector<const UttMeta *> *> spk_lists;
      for (const auto &[spk, list] : by_spk) spk_lists.push_back(&list);
      const int n_total = 4 * cfg.length_per_bin;
      ds.inputs.resize(n_total, d);
      long row = 0;
      for (int bin = 0; bin < 4; ++bin) {
        const double lo = kLengthBins[bin][0];
        for (int s = 0; s < cfg.length_per_bin; ++s) {
          bool placed = false;
          for (int attempt = 0; attempt < cfg.length_max_tries; ++attempt) {
            const auto &utts = *spk_lists[rng->UniformInt(
                static_cast<uint64_t>(spk_lists.size()))];
            FeatureMatrix cat = store->Get(
                utts[rng->UniformInt(static_cast<uint64_t>(utts.size()))]
                    ->utt_id);
            while (cat.NumFrames() / frame_rate < lo) {
              cat = ConcatUtterances(
                  cat,
                  store->Get(
                      utts[rng->UniformInt(
                               static_cast<uint64_t>(utts.size()))]
                          ->utt_id));
            }
            const double dur = cat.NumFrames() / frame_rate;
            if (LengthBinOf(dur) == bin) {
              ds.inputs.row(row++) = emb.Embed(cat).transpose();
              ds.labels.push_back(bin);
              placed = true;
              break;
            }
          }
          if (!placed) {
            throw ConfigError("probe: could not build a length sample in "
                              "bin " +
                              std::to_string(bin) + " (utterances too long?)");
          }
        }
      }
      ds.n_classes = 4;
      break;
    }

    case ProbeTask::kOrder: {
      const Embedder &emb = NeedEmbedder(embedder, task);
      // Same-speaker pairs with different sentences. Each pair yields the
      // two presentation orders; the question "is u1 first?" keeps the
      // (u1, u2) slots fixed.
      std::map<std::string, std::vector<const UttMeta *>> by_spk;
      for (const UttMeta *u : eval_utts) by_spk[u->speaker_id].push_back(u);
      std::vector<const std::vector<const UttMeta *> *> spk_lists;
      for (const auto &[spk, list] : by_spk) spk_lists.push_back(&list);
      ds.inputs.resize(2 * static_cast<long>(cfg.order_pairs), 3 * d);
      std::vector<std::vector<int>> groups;
      long row = 0;
      for (int p = 0; p < cfg.order_pairs; ++p) {
        const UttMeta *u1 = nullptr, *u2 = nullptr;
        for (int attempt = 0; attempt < 100 && u2 == nullptr; ++attempt) {
          const auto &utts = *spk_lists[rng->UniformInt(
              static_cast<uint64_t>(spk_lists.size()))];
          u1 = utts[rng->UniformInt(static_cast<uint64_t>(utts.size()))];
          const UttMeta *cand =
              utts[rng->UniformInt(static_cast<uint64_t>(utts.size()))];
          if (cand->sentence_id != u1->sentence_id) u2 = cand;
        }
        if (u2 == nullptr) {
          throw ConfigError("probe: could not sample an order pair with "
                            "distinct sentences");
        }
        const FeatureMatrix &f1 = store->Get(u1->utt_id);
        const FeatureMatrix &f2 = store->Get(u2->utt_id);
        const Vec &e1 = base.Get(u1->utt_id);
        const Vec &e2 = base.Get(u2->utt_id);
        Vec s12 = emb.Embed(ConcatUtterances(f1, f2));
        Vec s21 = emb.Embed(ConcatUtterances(f2, f1));
        ds.inputs.row(row) << s12.transpose(), e1.transpose(), e2.transpose();
        ds.labels.push_back(1);
        ds.inputs.row(row + 1) << s21.transpose(), e1.transpose(),
            e2.transpose();
        ds.labels.push_back(0);
        groups.push_back(
            {static_cast<int>(row), static_cast<int>(row + 1)});
        row += 2;
      }
      ds.n_classes = 2;
      GroupedSplit(groups, rng, &ds);
      break;
    }

    case ProbeTask::kTerm: {
      int vocab = 0;
      for (const auto &words : manifest.tables.sentence_words) {
        for (int w : words) vocab = std::max(vocab, w + 1);
      }
      ds.vocab_size = vocab;
      ds.inputs.resize(static_cast<long>(eval_utts.size()), d);
      std::vector<int> sentence_keys;
      for (size_t i = 0; i < eval_utts.size(); ++i) {
        const UttMeta *u = eval_utts[i];
        ds.inputs.row(static_cast<long>(i)) = base.Get(u->utt_id).transpose();
        ds.labels.push_back(0);
        sentence_keys.push_back(u->sentence_id);
        std::set<int> distinct(u->word_ids.begin(), u->word_ids.end());
        ds.utt_words.emplace_back(distinct.begin(), distinct.end());
        std::vector<char> bits(vocab, 0);
        for (int w : distinct) bits[w] = 1;
        ds.present.push_back(std::move(bits));
      }
      // Stratify the utterance split on the sentence so each word's
      // presence pattern is represented everywhere.
      SplitIdx split = StratifiedSplit(sentence_keys, rng);
      ds.train_idx = std::move(split.train);
      ds.dev_idx = std::move(split.dev);
      ds.test_idx = std::move(split.test);
      break;
    }
  }

  if (ds.train_idx.empty()) {
    SplitIdx split = StratifiedSplit(ds.labels, rng);
    ds.train_idx = std::move(split.train);
    ds.dev_idx = std::move(split.dev);
    ds.test_idx = std::move(split.test);
  }
  if (!AllFinite(ds.inputs)) {
    throw NumericError(std::string("probe: non-finite input in task ") +
                       ProbeTaskName(task));
  }
  if (task != ProbeTask::kTerm) {
    if (ds.n_classes < 2) {
      throw ConfigError(std::string("probe: task ") + ProbeTaskName(task) +
                        " has a single class on this corpus");
    }
    CheckEveryClassEverySplit(ds);
  }
  return ds;
}

namespace {

Mat GatherRows(const Mat &inputs, const std::vector<int> &idx,
               const std::vector<int> &batch) {
  Mat x(static_cast<long>(batch.size()), inputs.cols());
  for (size_t i = 0; i < batch.size(); ++i) {
    x.row(static_cast<long>(i)) = inputs.row(idx[batch[i]]);
  }
  return x;
}

double SplitAccuracy(const Mlp &model, const ProbeDataset &ds,
                     const std::vector<int> &idx) {
  constexpr int kBlock = 512;
  long correct = 0;
  for (size_t start = 0; start < idx.size(); start += kBlock) {
    const long b = std::min<size_t>(kBlock, idx.size() - start);
    Mat x(b, ds.inputs.cols());
    for (long i = 0; i < b; ++i) x.row(i) = ds.inputs.row(idx[start + i]);
    Mat logits = model.head.Logits(model.hidden.Forward(x));
    for (long i = 0; i < b; ++i) {
      int arg = 0;
      logits.row(i).maxCoeff(&arg);
      if (arg == ds.labels[idx[start + i]]) ++correct;
    }
  }
  return idx.empty() ? 0.0 : static_cast<double>(correct) / idx.size();
}

}  // namespace

Mlp TrainProbe(const ProbeDataset &ds, const ProbeConfig &cfg,
               const Rng &rng) {
  if (ds.task == ProbeTask::kTerm) {
    throw ConfigError("probe: the term task trains per-word classifiers");
  }
  Mlp model(static_cast<int>(ds.inputs.cols()), cfg.hidden, ds.n_classes);
  Rng init_rng = rng.Substream("init");
  model.Init(&init_rng);
  auto batch_step = [&](const std::vector<int> &batch) {
    Mat x = GatherRows(ds.inputs, ds.train_idx, batch);
    std::vector<int> labels(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      labels[i] = ds.labels[ds.train_idx[batch[i]]];
    }
    return model.BatchLossAndGrad(x, labels);
  };
  auto dev_metric = [&] { return SplitAccuracy(model, ds, ds.dev_idx); };
  Rng train_rng = rng.Substream("train");
  TrainLoop(static_cast<int>(ds.train_idx.size()), cfg.train, &train_rng,
            model.Params(), batch_step, dev_metric);
  return model;
}

ProbeReport EvalProbe(const Mlp &model, const ProbeDataset &ds) {
  if (model.hidden.in_dim() != ds.inputs.cols()) {
    throw ConfigError("probe: model and dataset dims differ");
  }
  ProbeReport report;
  report.task = ProbeTaskName(ds.task);
  report.dim = static_cast<int>(ds.inputs.cols());
  report.accuracy = SplitAccuracy(model, ds, ds.test_idx);
  report.baseline = 1.0 / ds.n_classes;
  report.n_train = static_cast<int>(ds.train_idx.size());
  report.n_test = static_cast<int>(ds.test_idx.size());
  return report;
}

TermModel TrainTermProbes(const ProbeDataset &ds, const ProbeConfig &cfg,
                          const Rng &rng) {
  if (ds.task != ProbeTask::kTerm) {
    throw ConfigError("probe: term training needs a term dataset");
  }
  TermModel model;
  const int dim = static_cast<int>(ds.inputs.cols());
  for (int w = 0; w < ds.vocab_size; ++w) {
    SoftmaxHead head("word" + std::to_string(w), dim, 2);
    Rng word_rng = rng.Substream("word/" + std::to_string(w));
    Rng init_rng = word_rng.Substream("init");
    head.Init(&init_rng);
    auto batch_step = [&](const std::vector<int> &batch) {
      Mat x = GatherRows(ds.inputs, ds.train_idx, batch);
      std::vector<int> labels(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) {
        labels[i] = ds.present[ds.train_idx[batch[i]]][w];
      }
      return head.LossAndGrad(x, labels, nullptr);
    };
    auto dev_metric = [&] {
      long correct = 0;
      for (int i : ds.dev_idx) {
        const int pred = head.Predict(ds.inputs.row(i).transpose());
        if (pred == ds.present[i][w]) ++correct;
      }
      return ds.dev_idx.empty()
                 ? 0.0
                 : static_cast<double>(correct) / ds.dev_idx.size();
    };
    Rng train_rng = word_rng.Substream("train");
    TrainLoop(static_cast<int>(ds.train_idx.size()), cfg.train, &train_rng,
              head.Params(), batch_step, dev_metric);
    model.words.push_back(std::move(head));
  }
  return model;
}

ProbeReport EvalTermProbes(const TermModel &model, const ProbeDataset &ds,
                           bool strict) {
  if (ds.task != ProbeTask::kTerm) {
    throw ConfigError("probe: term evaluation needs a term dataset");
  }
  if (static_cast<int>(model.words.size()) != ds.vocab_size) {
    throw ConfigError("probe: term model covers " +
                      std::to_string(model.words.size()) + " words, corpus " +
                      "has " + std::to_string(ds.vocab_size));
  }
  long correct = 0;
  double baseline = 0.0;
  for (int i : ds.test_idx) {
    const Vec x = ds.inputs.row(i).transpose();
    bool ok = true;
    if (strict) {
      for (int w = 0; w < ds.vocab_size && ok; ++w) {
        ok = model.words[w].Predict(x) == ds.present[i][w];
      }
      baseline += std::pow(0.5, ds.vocab_size);
    } else {
      // The utterance counts when every word in it is predicted present;
      // false alarms on absent words do not penalize it.
      for (size_t k = 0; k < ds.utt_words[i].size() && ok; ++k) {
        ok = model.words[ds.utt_words[i][k]].Predict(x) == 1;
      }
      baseline += std::pow(0.5, static_cast<double>(ds.utt_words[i].size()));
    }
    if (ok) ++correct;
  }
  ProbeReport report;
  report.task = ProbeTaskName(ds.task);
  report.dim = static_cast<int>(ds.inputs.cols());
  report.accuracy = ds.test_idx.empty()
                        ? 0.0
                        : static_cast<double>(correct) / ds.test_idx.size();
  report.baseline = ds.test_idx.empty()
                        ? 0.0
                        : baseline / static_cast<double>(ds.test_idx.size());
  report.n_train = static_cast<int>(ds.train_idx.size());
  report.n_test = static_cast<int>(ds.test_idx.size());
  return report;
}

}  // namespace embedprobe
