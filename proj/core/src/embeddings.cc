// embedprobe/embeddings.cc
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

#include "embedprobe/embeddings.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "embedprobe/common.h"
#include "embedprobe/tensor_io.h"

namespace embedprobe {

bool EmbeddingSet::Has(const std::string &utt_id) const {
  return values_.count(utt_id) > 0;
}

const Vec &EmbeddingSet::Get(const std::string &utt_id) const {
  auto it = values_.find(utt_id);
  if (it == values_.end()) {
    throw ArtifactError("no embedding for utterance '" + utt_id + "'");
  }
  return it->second;
}

void EmbeddingSet::Add(const std::string &utt_id, Vec v) {
  if (dim == 0) dim = static_cast<int>(v.size());
  if (v.size() != dim) {
    throw ArtifactError("embedding dim mismatch for utterance '" + utt_id +
                        "'");
  }
  if (!values_.emplace(utt_id, std::move(v)).second) {
    throw ArtifactError("duplicate embedding for utterance '" + utt_id + "'");
  }
  ids.push_back(utt_id);
}

void WriteEmbeddings(const EmbeddingSet &set, const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArtifactError("cannot write embeddings: " + path);
  os.write("EEMB", 4);
  WriteU32(os, 1);
  WriteU32(os, static_cast<uint32_t>(set.dim));
  WriteU32(os, static_cast<uint32_t>(set.Size()));
  std::vector<float> row(set.dim);
  for (const std::string &id : set.ids) {
    if (id.size() > 0xffff) throw ArtifactError("utt_id too long: " + id);
    WriteU16(os, static_cast<uint16_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    const Vec &v = set.Get(id);
    for (int j = 0; j < set.dim; ++j) row[j] = static_cast<float>(v(j));
    WriteF32(os, row.data(), row.size());
  }
  if (!os) throw ArtifactError("embedding write failed: " + path);
}

EmbeddingSet ReadEmbeddings(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("cannot open embeddings: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "EEMB") {
    throw ArtifactError("bad magic in embeddings file: " + path);
  }
  if (ReadU32(is) != 1) {
    throw ArtifactError("unsupported embeddings version in " + path);
  }
  const uint32_t dim = ReadU32(is);
  const uint32_t count = ReadU32(is);
  EmbeddingSet set;
  set.dim = static_cast<int>(dim);
  std::vector<float> row(dim);
  for (uint32_t k = 0; k < count; ++k) {
    const uint16_t len = ReadU16(is);
    std::string id(len, '\0');
    is.read(id.data(), len);
    if (!is) throw ArtifactError("truncated embeddings file: " + path);
    ReadF32(is, row.data(), row.size());
    Vec v(dim);
    for (uint32_t j = 0; j < dim; ++j) v(j) = row[j];
    set.Add(id, std::move(v));
  }
  return set;
}

Embedding ConcatEmbeddings(const Embedding &a, const Embedding &b) {
  if (a.utt_id != b.utt_id) {
    throw ConfigError("concat: utterance ids differ ('" + a.utt_id + "' vs '" +
                      b.utt_id + "')");
  }
  Embedding out;
  out.utt_id = a.utt_id;
  out.kind = "concat";
  out.model_hash = a.model_hash + "+" + b.model_hash;
  out.values.resize(a.values.size() + b.values.size());
  out.values << a.values, b.values;
  return out;
}

EmbeddingSet EmbedSubset(const Embedder &embedder, FeatureStore *store,
                         Subset subset, int jobs) {
  const auto utts = store->manifest().InSubset(subset);
  EmbeddingSet set;
  set.kind = embedder.Kind();
  set.model_hash = embedder.ModelHash();
  set.dim = embedder.Dim();
  if (jobs <= 1) {
    for (const UttMeta *u : utts) {
      set.Add(u->utt_id, embedder.Embed(store->Get(u->utt_id)));
    }
    return set;
  }
  store->Preload(subset);
  std::vector<Vec> results(utts.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t k = next.fetch_add(1);
      if (k >= utts.size()) return;
      results[k] = embedder.Embed(store->Get(utts[k]->utt_id));
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto &th : pool) th.join();
  for (size_t k = 0; k < utts.size(); ++k) {
    set.Add(utts[k]->utt_id, std::move(results[k]));
  }
  return set;
}

namespace {

// Shared bookkeeping for the bkg-trained extractors: utterance list,
// integer labels, sorted speaker table, utterance-level train/dev split.
struct LabeledUtts {
  std::vector<const UttMeta *> utts;
  std::vector<int> speaker_label;
  std::vector<int> text_label;
  std::vector<std::string> speakers;
  std::vector<int> train_idx;
  std::vector<int> dev_idx;
};

LabeledUtts CollectBkg(const Manifest &manifest, double dev_fraction,
                       Rng split_rng) {
  LabeledUtts out;
  out.utts = manifest.InSubset(Subset::kBkg);
  if (out.utts.empty()) {
    throw ConfigError("extractor training: bkg subset is empty");
  }
  std::set<std::string> spk;
  for (const UttMeta *u : out.utts) spk.insert(u->speaker_id);
  out.speakers.assign(spk.begin(), spk.end());
  for (const UttMeta *u : out.utts) {
    const auto it =
        std::lower_bound(out.speakers.begin(), out.speakers.end(),
                         u->speaker_id);
    out.speaker_label.push_back(
        static_cast<int>(it - out.speakers.begin()));
    out.text_label.push_back(u->sentence_id);
  }
  const int n = static_cast<int>(out.utts.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  split_rng.Shuffle(&order);
  int n_dev = std::max(1, static_cast<int>(std::lround(dev_fraction * n)));
  if (n_dev >= n) {
    throw ConfigError("extractor training: dev split leaves no train data");
  }
  out.dev_idx.assign(order.begin(), order.begin() + n_dev);
  out.train_idx.assign(order.begin() + n_dev, order.end());
  return out;
}

// One stacked-context row (frames t-left..t+right, edges replicated)
// written into row `row` of x.
void FillStackedRow(const MatF &frames, int t, int left, int right, Mat *x,
                    long row) {
  const int d = static_cast<int>(frames.cols());
  const int last = static_cast<int>(frames.rows()) - 1;
  for (int k = -left; k <= right; ++k) {
    const int src = std::clamp(t + k, 0, last);
    x->block(row, (k + left) * d, 1, d) =
        frames.row(src).cast<double>();
  }
}

Vec LstmOutOf(const LstmCell &fwd, const std::optional<LstmCell> &bwd,
              const Mat &x) {
  Vec hf = fwd.Forward(x, nullptr);
  if (!bwd) return hf;
  Vec hb = bwd->Forward(Mat(x.colwise().reverse()), nullptr);
  Vec out(hf.size() + hb.size());
  out << hf, hb;
  return out;
}

void SaveParams(ModelBlob *blob, const std::vector<Param *> &params) {
  for (const Param *p : params) {
    blob->tensors.push_back(NamedTensor::FromMat(p->name, p->value));
  }
}

void LoadParams(const ModelBlob &blob, const std::vector<Param *> &params,
                const std::string &path) {
  for (Param *p : params) {
    Mat m = blob.Find(p->name).ToMat();
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ArtifactError("tensor '" + p->name + "' has unexpected shape in " +
                          path);
    }
    p->value = std::move(m);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// d-vector

DVectorModel::DVectorModel(int left, int right, int input_dim,
                           const std::vector<int> &hidden_dims,
                           Activation act, int n_speakers)
    : context_left(left),
      context_right(right),
      speaker_head("speaker_head",
                   hidden_dims.empty() ? 0 : hidden_dims.back(), n_speakers) {
  if (left < 0 || right < 0) {
    throw ConfigError("dvector: context sizes must be >= 0");
  }
  if (hidden_dims.empty()) {
    throw ConfigError("dvector: need at least one hidden layer");
  }
  int in = input_dim;
  for (size_t i = 0; i < hidden_dims.size(); ++i) {
    hidden.emplace_back("hidden" + std::to_string(i), in, hidden_dims[i],
                        act);
    in = hidden_dims[i];
  }
}

Mat DVectorModel::HiddenForward(const Mat &stacked) const {
  Mat h = stacked;
  for (const DenseLayer &layer : hidden) h = layer.Forward(h);
  return h;
}

std::vector<Param *> DVectorModel::Params() {
  std::vector<Param *> out;
  for (DenseLayer &layer : hidden) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  out.push_back(&speaker_head.w);
  out.push_back(&speaker_head.b);
  return out;
}

namespace {

// Frame-level speaker accuracy over (utterance, frame) samples.
double FrameAccuracy(const DVectorModel &model, FeatureStore *store,
                     const LabeledUtts &data,
                     const std::vector<std::pair<int, int>> &samples) {
  constexpr int kBlock = 512;
  const int input_dim = model.InputDim();
  long correct = 0;
  for (size_t start = 0; start < samples.size(); start += kBlock) {
    const long b =
        std::min<size_t>(kBlock, samples.size() - start);
    Mat x(b, input_dim);
    for (long i = 0; i < b; ++i) {
      const auto &[utt, frame] = samples[start + i];
      FillStackedRow(store->Get(data.utts[utt]->utt_id).frames, frame,
                     model.context_left, model.context_right, &x, i);
    }
    Mat logits = model.speaker_head.Logits(model.HiddenForward(x));
    for (long i = 0; i < b; ++i) {
      int arg = 0;
      logits.row(i).maxCoeff(&arg);
      if (arg == data.speaker_label[samples[start + i].first]) ++correct;
    }
  }
  return samples.empty() ? 0.0
                         : static_cast<double>(correct) / samples.size();
}

std::vector<std::pair<int, int>> FrameSamples(const LabeledUtts &data,
                                              FeatureStore *store,
                                              const std::vector<int> &utt_idx,
                                              int frame_step) {
  std::vector<std::pair<int, int>> samples;
  for (int idx : utt_idx) {
    const int t = store->Get(data.utts[idx]->utt_id).NumFrames();
    for (int frame = 0; frame < t; frame += frame_step) {
      samples.emplace_back(idx, frame);
    }
  }
  return samples;
}

}  // namespace

DVectorModel TrainDVector(FeatureStore *store, const DVectorConfig &cfg,
                          const Rng &rng) {
  if (cfg.frame_step < 1) throw ConfigError("dvector: frame_step must be >= 1");
  LabeledUtts data = CollectBkg(store->manifest(), cfg.dev_fraction,
                                rng.Substream("split"));
  const int d = store->manifest().tables.feature_dim;
  const int input_dim = d * (cfg.context_left + 1 + cfg.context_right);
  DVectorModel model(cfg.context_left, cfg.context_right, input_dim,
                     cfg.hidden_dims, cfg.activation,
                     static_cast<int>(data.speakers.size()));
  model.speakers = data.speakers;
  Rng init_rng = rng.Substream("init");
  for (DenseLayer &layer : model.hidden) layer.Init(&init_rng);
  model.speaker_head.Init(&init_rng);

  const auto train_samples =
      FrameSamples(data, store, data.train_idx, cfg.frame_step);
  const auto dev_samples =
      FrameSamples(data, store, data.dev_idx, cfg.frame_step);

  auto batch_step = [&](const std::vector<int> &batch) {
    const long b = static_cast<long>(batch.size());
    Mat x(b, input_dim);
    std::vector<int> labels(batch.size());
    for (long i = 0; i < b; ++i) {
      const auto &[utt, frame] = train_samples[batch[i]];
      FillStackedRow(store->Get(data.utts[utt]->utt_id).frames, frame,
                     cfg.context_left, cfg.context_right, &x, i);
      labels[i] = data.speaker_label[utt];
    }
    // Forward keeping every layer's activations for the backward sweep.
    std::vector<Mat> acts;
    acts.reserve(model.hidden.size() + 1);
    acts.push_back(std::move(x));
    for (DenseLayer &layer : model.hidden) {
      acts.push_back(layer.Forward(acts.back()));
    }
    Mat dh = Mat::Zero(b, model.EmbeddingDim());
    const double loss =
        model.speaker_head.LossAndGrad(acts.back(), labels, &dh);
    for (size_t li = model.hidden.size(); li-- > 0;) {
      dh = model.hidden[li].Backward(acts[li], acts[li + 1], dh);
    }
    return loss;
  };
  auto dev_metric = [&] {
    return FrameAccuracy(model, store, data, dev_samples);
  };

  Rng train_rng = rng.Substream("train");
  TrainLoop(static_cast<int>(train_samples.size()), cfg.train, &train_rng,
            model.Params(), batch_step, dev_metric);
  return model;
}

Vec ExtractDVector(const DVectorModel &model, const FeatureMatrix &f) {
  const MatF stacked = StackContext(f, model.context_left,
                                    model.context_right);
  if (stacked.cols() != model.InputDim()) {
    throw ConfigError("dvector: feature dim does not match the model");
  }
  Mat h = model.HiddenForward(stacked.cast<double>());
  return h.colwise().sum().transpose() / static_cast<double>(h.rows());
}

void SaveDVector(const DVectorModel &model, const std::string &path) {
  ModelBlob blob;
  nlohmann::json meta;
  meta["model"] = "dvector";
  meta["kind"] = "d";
  meta["context_left"] = model.context_left;
  meta["context_right"] = model.context_right;
  meta["input_dim"] = model.InputDim();
  std::vector<int> dims;
  for (const DenseLayer &layer : model.hidden) dims.push_back(layer.out_dim());
  meta["hidden"] = dims;
  meta["activation"] = ActivationName(model.hidden.front().activation);
  meta["speakers"] = model.speakers;
  meta["dim"] = model.EmbeddingDim();
  blob.meta_json = meta.dump();
  SaveParams(&blob, const_cast<DVectorModel &>(model).Params());
  WriteModelBlob(path, blob);
}

DVectorModel LoadDVector(const std::string &path) {
  ModelBlob blob = ReadModelBlob(path);
  auto meta = blob.Meta();
  if (meta.value("model", "") != "dvector") {
    throw ArtifactError("not a d-vector model file: " + path);
  }
  const auto speakers = meta.at("speakers").get<std::vector<std::string>>();
  DVectorModel model(meta.at("context_left").get<int>(),
                     meta.at("context_right").get<int>(),
                     meta.at("input_dim").get<int>(),
                     meta.at("hidden").get<std::vector<int>>(),
                     ActivationFromName(meta.at("activation").get<std::string>()),
                     static_cast<int>(speakers.size()));
  model.speakers = speakers;
  LoadParams(blob, model.Params(), path);
  return model;
}

// ---------------------------------------------------------------------------
// s-vector

SVectorModel::SVectorModel(int input_dim, int hidden_dim, bool bi,
                           int n_speakers, int n_sentences_in)
    : bidirectional(bi),
      fwd("lstm_fwd", input_dim, hidden_dim),
      speaker_head("speaker_head", bi ? 2 * hidden_dim : hidden_dim,
                   n_speakers),
      text_head("text_head", bi ? 2 * hidden_dim : hidden_dim,
                n_sentences_in),
      n_sentences(n_sentences_in) {
  if (bi) bwd.emplace("lstm_bwd", input_dim, hidden_dim);
}

int SVectorModel::EmbeddingDim() const {
  return bidirectional ? 2 * fwd.hidden_dim() : fwd.hidden_dim();
}

Vec SVectorModel::LstmOut(const FeatureMatrix &f) const {
  return LstmOutOf(fwd, bwd, f.frames.cast<double>());
}

std::vector<Param *> SVectorModel::Params() {
  std::vector<Param *> out = {&fwd.wx, &fwd.wh, &fwd.b};
  if (bwd) {
    out.push_back(&bwd->wx);
    out.push_back(&bwd->wh);
    out.push_back(&bwd->b);
  }
  for (Param *p : speaker_head.Params()) out.push_back(p);
  for (Param *p : text_head.Params()) out.push_back(p);
  return out;
}

namespace {

// Multi-task accuracy (mean of speaker and text head accuracies) over
// utterance-level LSTM outputs.
template <typename ModelT>
double SequenceDevAccuracy(const ModelT &model, FeatureStore *store,
                           const LabeledUtts &data,
                           const std::function<Vec(const FeatureMatrix &)>
                               &lstm_out,
                           const std::function<int(const Vec &)> &spk_predict) {
  long spk_correct = 0, txt_correct = 0;
  for (int idx : data.dev_idx) {
    const FeatureMatrix &f = store->Get(data.utts[idx]->utt_id);
    Vec h = lstm_out(f);
    if (spk_predict(h) == data.speaker_label[idx]) ++spk_correct;
    if (model.text_head.Predict(h) == data.text_label[idx]) ++txt_correct;
  }
  const double n = static_cast<double>(data.dev_idx.size());
  return 0.5 * (spk_correct / n + txt_correct / n);
}

}  // namespace

SVectorModel TrainSVector(FeatureStore *store, const SVectorConfig &cfg,
                          const Rng &rng) {
  LabeledUtts data = CollectBkg(store->manifest(), cfg.dev_fraction,
                                rng.Substream("split"));
  const int n_sentences =
      static_cast<int>(store->manifest().tables.sentence_words.size());
  SVectorModel model(store->manifest().tables.feature_dim, cfg.hidden_dim,
                     cfg.bidirectional,
                     static_cast<int>(data.speakers.size()), n_sentences);
  model.speakers = data.speakers;
  Rng init_rng = rng.Substream("init");
  model.fwd.Init(&init_rng);
  if (model.bwd) model.bwd->Init(&init_rng);
  model.speaker_head.Init(&init_rng);
  model.text_head.Init(&init_rng);

  const int h_dim = cfg.hidden_dim;
  auto batch_step = [&](const std::vector<int> &batch) {
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    for (int bi : batch) {
      const int idx = data.train_idx[bi];
      const Mat x = store->Get(data.utts[idx]->utt_id).frames.cast<double>();
      LstmCell::Tape tape_f, tape_b;
      Vec h = model.fwd.Forward(x, &tape_f);
      if (model.bwd) {
        Vec hb = model.bwd->Forward(Mat(x.colwise().reverse()), &tape_b);
        Vec cat(h.size() + hb.size());
        cat << h, hb;
        h = std::move(cat);
      }
      Mat h_row = h.transpose();
      Mat dh = Mat::Zero(1, model.EmbeddingDim());
      loss += model.speaker_head.LossAndGrad(
          h_row, {data.speaker_label[idx]}, &dh,
          cfg.speaker_loss_weight * inv_b);
      loss += model.text_head.LossAndGrad(h_row, {data.text_label[idx]}, &dh,
                                          cfg.text_loss_weight * inv_b);
      model.fwd.Backward(tape_f, dh.row(0).segment(0, h_dim).transpose());
      if (model.bwd) {
        model.bwd->Backward(tape_b,
                            dh.row(0).segment(h_dim, h_dim).transpose());
      }
    }
    return loss;
  };
  auto dev_metric = [&] {
    return SequenceDevAccuracy(
        model, store, data,
        [&](const FeatureMatrix &f) { return model.LstmOut(f); },
        [&](const Vec &h) { return model.speaker_head.Predict(h); });
  };

  Rng train_rng = rng.Substream("train");
  TrainLoop(static_cast<int>(data.train_idx.size()), cfg.train, &train_rng,
            model.Params(), batch_step, dev_metric);
  return model;
}

Vec ExtractSVector(const SVectorModel &model, const FeatureMatrix &f) {
  return model.LstmOut(f);
}

void SaveSVector(const SVectorModel &model, const std::string &path) {
  ModelBlob blob;
  nlohmann::json meta;
  meta["model"] = "svector";
  meta["kind"] = "s";
  meta["input_dim"] = model.fwd.input_dim();
  meta["hidden"] = model.fwd.hidden_dim();
  meta["bidirectional"] = model.bidirectional;
  meta["speakers"] = model.speakers;
  meta["n_sentences"] = model.n_sentences;
  meta["dim"] = model.EmbeddingDim();
  blob.meta_json = meta.dump();
  SaveParams(&blob, const_cast<SVectorModel &>(model).Params());
  WriteModelBlob(path, blob);
}

SVectorModel LoadSVector(const std::string &path) {
  ModelBlob blob = ReadModelBlob(path);
  auto meta = blob.Meta();
  if (meta.value("model", "") != "svector") {
    throw ArtifactError("not an s-vector model file: " + path);
  }
  const auto speakers = meta.at("speakers").get<std::vector<std::string>>();
  SVectorModel model(meta.at("input_dim").get<int>(),
                     meta.at("hidden").get<int>(),
                     meta.at("bidirectional").get<bool>(),
                     static_cast<int>(speakers.size()),
                     meta.at("n_sentences").get<int>());
  model.speakers = speakers;
  LoadParams(blob, model.Params(), path);
  return model;
}

// ---------------------------------------------------------------------------
// i-s-vector

IsVectorModel::IsVectorModel(int input_dim, int hidden_dim, bool bi,
                             int ivec_dim_in, int n_speakers,
                             int n_sentences_in)
    : bidirectional(bi),
      fwd("lstm_fwd", input_dim, hidden_dim),
      speaker_head("speaker_head",
                   (bi ? 2 * hidden_dim : hidden_dim) + ivec_dim_in,
                   n_speakers),
      text_head("text_head", bi ? 2 * hidden_dim : hidden_dim,
                n_sentences_in),
      ivec_dim(ivec_dim_in),
      n_sentences(n_sentences_in) {
  if (ivec_dim_in < 1) throw ConfigError("isvector: ivec_dim must be >= 1");
  if (bi) bwd.emplace("lstm_bwd", input_dim, hidden_dim);
}

int IsVectorModel::LstmOutDim() const {
  return bidirectional ? 2 * fwd.hidden_dim() : fwd.hidden_dim();
}

Vec IsVectorModel::LstmOut(const FeatureMatrix &f) const {
  return LstmOutOf(fwd, bwd, f.frames.cast<double>());
}

std::vector<Param *> IsVectorModel::Params() {
  std::vector<Param *> out = {&fwd.wx, &fwd.wh, &fwd.b};
  if (bwd) {
    out.push_back(&bwd->wx);
    out.push_back(&bwd->wh);
    out.push_back(&bwd->b);
  }
  for (Param *p : speaker_head.Params()) out.push_back(p);
  for (Param *p : text_head.Params()) out.push_back(p);
  return out;
}

IsVectorModel TrainIsVector(FeatureStore *store, const EmbeddingSet &ivectors,
                            const IsVectorConfig &cfg, const Rng &rng) {
  LabeledUtts data = CollectBkg(store->manifest(), cfg.dev_fraction,
                                rng.Substream("split"));
  for (const UttMeta *u : data.utts) {
    if (!ivectors.Has(u->utt_id)) {
      throw ArtifactError("isvector: missing i-vector for utterance '" +
                          u->utt_id + "'");
    }
  }
  const int n_sentences =
      static_cast<int>(store->manifest().tables.sentence_words.size());
  IsVectorModel model(store->manifest().tables.feature_dim, cfg.hidden_dim,
                      cfg.bidirectional, ivectors.dim,
                      static_cast<int>(data.speakers.size()), n_sentences);
  model.speakers = data.speakers;
  Rng init_rng = rng.Substream("init");
  model.fwd.Init(&init_rng);
  if (model.bwd) model.bwd->Init(&init_rng);
  model.speaker_head.Init(&init_rng);
  model.text_head.Init(&init_rng);

  const int h_dim = cfg.hidden_dim;
  const int out_dim = model.LstmOutDim();
  auto batch_step = [&](const std::vector<int> &batch) {
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    for (int bi : batch) {
      const int idx = data.train_idx[bi];
      const std::string &utt_id = data.utts[idx]->utt_id;
      const Mat x = store->Get(utt_id).frames.cast<double>();
      LstmCell::Tape tape_f, tape_b;
      Vec h = model.fwd.Forward(x, &tape_f);
      if (model.bwd) {
        Vec hb = model.bwd->Forward(Mat(x.colwise().reverse()), &tape_b);
        Vec cat(h.size() + hb.size());
        cat << h, hb;
        h = std::move(cat);
      }
      // The speaker head sees [lstm_out ; i-vector]; the i-vector is a
      // fixed input, its gradient slice is dropped.
      const Vec &ivec = ivectors.Get(utt_id);
      Mat concat_row(1, out_dim + model.ivec_dim);
      concat_row << h.transpose(), ivec.transpose();
      Mat d_concat = Mat::Zero(1, out_dim + model.ivec_dim);
      loss += model.speaker_head.LossAndGrad(
          concat_row, {data.speaker_label[idx]}, &d_concat,
          cfg.speaker_loss_weight * inv_b);
      Mat h_row = h.transpose();
      Mat dh = Mat::Zero(1, out_dim);
      loss += model.text_head.LossAndGrad(h_row, {data.text_label[idx]}, &dh,
                                          cfg.text_loss_weight * inv_b);
      dh += d_concat.leftCols(out_dim);
      model.fwd.Backward(tape_f, dh.row(0).segment(0, h_dim).transpose());
      if (model.bwd) {
        model.bwd->Backward(tape_b,
                            dh.row(0).segment(h_dim, h_dim).transpose());
      }
    }
    return loss;
  };
  // The speaker head needs the i-vector appended, so the dev metric builds
  // its input explicitly rather than reusing the s-vector helper.
  auto dev_metric = [&] {
    long spk_correct = 0, txt_correct = 0;
    for (int idx : data.dev_idx) {
      const std::string &utt_id = data.utts[idx]->utt_id;
      Vec h = model.LstmOut(store->Get(utt_id));
      Vec full(h.size() + model.ivec_dim);
      full << h, ivectors.Get(utt_id);
      if (model.speaker_head.Predict(full) == data.speaker_label[idx]) {
        ++spk_correct;
      }
      if (model.text_head.Predict(h) == data.text_label[idx]) ++txt_correct;
    }
    const double n = static_cast<double>(data.dev_idx.size());
    return 0.5 * (spk_correct / n + txt_correct / n);
  };

  Rng train_rng = rng.Substream("train");
  TrainLoop(static_cast<int>(data.train_idx.size()), cfg.train, &train_rng,
            model.Params(), batch_step, dev_metric);
  return model;
}

Vec ExtractIsVector(const IsVectorModel &model, const FeatureMatrix &f,
                    const Vec &ivec) {
  if (ivec.size() != model.ivec_dim) {
    throw ConfigError("isvector: i-vector dim does not match the model");
  }
  Vec h = model.LstmOut(f);
  Vec out(h.size() + ivec.size());
  out << h, ivec;
  return out;
}

void SaveIsVector(const IsVectorModel &model, const std::string &path) {
  ModelBlob blob;
  nlohmann::json meta;
  meta["model"] = "isvector";
  meta["kind"] = "is";
  meta["input_dim"] = model.fwd.input_dim();
  meta["hidden"] = model.fwd.hidden_dim();
  meta["bidirectional"] = model.bidirectional;
  meta["ivec_dim"] = model.ivec_dim;
  meta["speakers"] = model.speakers;
  meta["n_sentences"] = model.n_sentences;
  meta["dim"] = model.EmbeddingDim();
  blob.meta_json = meta.dump();
  SaveParams(&blob, const_cast<IsVectorModel &>(model).Params());
  WriteModelBlob(path, blob);
}

IsVectorModel LoadIsVector(const std::string &path) {
  ModelBlob blob = ReadModelBlob(path);
  auto meta = blob.Meta();
  if (meta.value("model", "") != "isvector") {
    throw ArtifactError("not an i-s-vector model file: " + path);
  }
  const auto speakers = meta.at("speakers").get<std::vector<std::string>>();
  IsVectorModel model(meta.at("input_dim").get<int>(),
                      meta.at("hidden").get<int>(),
                      meta.at("bidirectional").get<bool>(),
                      meta.at("ivec_dim").get<int>(),
                      static_cast<int>(speakers.size()),
                      meta.at("n_sentences").get<int>());
  model.speakers = speakers;
  LoadParams(blob, model.Params(), path);
  return model;
}

// ---------------------------------------------------------------------------
// Embedders

IVectorEmbedder::IVectorEmbedder(const GmmUbm *ubm, const TvModel *tv,
                                 std::string model_hash)
    : ubm_(ubm), extractor_(*ubm, *tv), model_hash_(std::move(model_hash)) {}

Vec IVectorEmbedder::Embed(const FeatureMatrix &f) const {
  return extractor_.Extract(AccumulateStats(*ubm_, f));
}

Vec DVectorEmbedder::Embed(const FeatureMatrix &f) const {
  return ExtractDVector(*model_, f);
}

Vec SVectorEmbedder::Embed(const FeatureMatrix &f) const {
  return ExtractSVector(*model_, f);
}

IsVectorEmbedder::IsVectorEmbedder(const IsVectorModel *model,
                                   const GmmUbm *ubm, const TvModel *tv,
                                   std::string model_hash)
    : model_(model),
      ubm_(ubm),
      extractor_(*ubm, *tv),
      model_hash_(std::move(model_hash)) {
  if (tv->Rank() != model->ivec_dim) {
    throw ArtifactError("isvector: TV rank does not match the model");
  }
}

Vec IsVectorEmbedder::Embed(const FeatureMatrix &f) const {
  Vec ivec = extractor_.Extract(AccumulateStats(*ubm_, f));
  return ExtractIsVector(*model_, f, ivec);
}

Vec ConcatEmbedder::Embed(const FeatureMatrix &f) const {
  Vec a = ivec_->Embed(f);
  Vec b = svec_->Embed(f);
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

std::string ConcatEmbedder::ModelHash() const {
  return ivec_->ModelHash() + "+" + svec_->ModelHash();
}

}  // namespace embedprobe
