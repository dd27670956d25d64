// embedprobe/embeddings.h
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
// The four utterance embedding extractors and the naive concatenation
// baseline:
//   i      posterior mean of the total-variability factor
//   d      mean over frames of a speaker-DNN's last hidden layer
//   s      last-timestep state of a multi-task (speaker+text) LSTM
//   is     [s-style LSTM output ; i-vector], trained jointly through the
//          speaker head with the i-vector as a frozen input
//   concat [i-vector ; s-vector] glued after the fact

#ifndef EMBEDPROBE_EMBEDDINGS_H_
#define EMBEDPROBE_EMBEDDINGS_H_

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "embedprobe/corpus.h"
#include "embedprobe/ivector.h"
#include "embedprobe/nnet.h"

namespace embedprobe {

struct Embedding {
  std::string utt_id;
  std::string kind;  // "i" | "d" | "s" | "is" | "concat"
  Vec values;
  std::string model_hash;  // of the producing model file

  int Dim() const { return static_cast<int>(values.size()); }
};

/// A keyed collection of equal-dimension embeddings, in insertion order.
struct EmbeddingSet {
  std::string kind;
  std::string model_hash;
  int dim = 0;
  std::vector<std::string> ids;

  bool Has(const std::string &utt_id) const;
  const Vec &Get(const std::string &utt_id) const;
  void Add(const std::string &utt_id, Vec v);
  size_t Size() const { return ids.size(); }

 private:
  std::unordered_map<std::string, Vec> values_;
};

// EEMB embedding file: magic "EEMB", u32 version=1, u32 dim, u32 count,
// then per record u16 id length, id bytes, dim float32.
void WriteEmbeddings(const EmbeddingSet &set, const std::string &path);
EmbeddingSet ReadEmbeddings(const std::string &path);

/// kind=concat, values = a.values followed by b.values. The baseline
/// convention is (a, b) = (i, s). utt_ids must match.
Embedding ConcatEmbeddings(const Embedding &a, const Embedding &b);

/// Uniform extractor interface so probing can re-embed derived
/// utterances (rate-perturbed, concatenated) with any kind.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string Kind() const = 0;
  virtual int Dim() const = 0;
  virtual Vec Embed(const FeatureMatrix &f) const = 0;
  virtual std::string ModelHash() const = 0;
};

/// Embeds every utterance of a subset, ids in manifest order. jobs > 1
/// preloads the features and fans extraction across threads; the output
/// order stays the manifest order either way.
EmbeddingSet EmbedSubset(const Embedder &embedder, FeatureStore *store,
                         Subset subset, int jobs = 1);

// ---------------------------------------------------------------------------
// d-vector: frame-level speaker DNN over stacked frames, mean-pooled.

struct DVectorConfig {
  int context_left = 5;
  int context_right = 5;
  std::vector<int> hidden_dims = {256, 128};  // last entry = embedding dim
  Activation activation = Activation::kSigmoid;
  int frame_step = 3;         // train on every k-th frame
  double dev_fraction = 0.1;  // held-out bkg utterances for early stopping
  TrainOptions train{.max_epochs = 20,
                     .batch_size = 128,
                     .lr = 0.05,
                     .optimizer = OptKind::kSgd,
                     .patience = 5};
};

struct DVectorModel {
  int context_left;
  int context_right;
  std::vector<DenseLayer> hidden;
  SoftmaxHead speaker_head;
  std::vector<std::string> speakers;  // head index -> speaker id

  DVectorModel(int left, int right, int input_dim,
               const std::vector<int> &hidden_dims, Activation act,
               int n_speakers);

  int InputDim() const { return hidden.front().in_dim(); }
  int EmbeddingDim() const { return hidden.back().out_dim(); }
  /// Activations of the last hidden (extraction) layer, batched.
  Mat HiddenForward(const Mat &stacked) const;
  std::vector<Param *> Params();
};

DVectorModel TrainDVector(FeatureStore *store, const DVectorConfig &cfg,
                          const Rng &rng);
/// Mean over frames of the extraction-layer activations, fixed frame
/// order.
Vec ExtractDVector(const DVectorModel &model, const FeatureMatrix &f);
void SaveDVector(const DVectorModel &model, const std::string &path);
DVectorModel LoadDVector(const std::string &path);

// ---------------------------------------------------------------------------
// s-vector: multi-task LSTM, last-timestep state.

struct SVectorConfig {
  int hidden_dim = 128;
  bool bidirectional = false;
  double speaker_loss_weight = 1.0;
  double text_loss_weight = 1.0;
  double dev_fraction = 0.1;
  TrainOptions train{.max_epochs = 30,
                     .batch_size = 32,
                     .lr = 1e-3,
                     .optimizer = OptKind::kRmsProp,
                     .patience = 5};
};

struct SVectorModel {
  bool bidirectional;
  LstmCell fwd;
  std::optional<LstmCell> bwd;  // engaged iff bidirectional
  SoftmaxHead speaker_head;     // reads the LSTM output only
  SoftmaxHead text_head;        // reads the LSTM output only
  std::vector<std::string> speakers;
  int n_sentences;

  SVectorModel(int input_dim, int hidden_dim, bool bi, int n_speakers,
               int n_sentences_in);

  int EmbeddingDim() const;
  /// h_T of the forward cell; bidirectional adds the backward cell run on
  /// the reversed sequence (its final state is the state at frame 1).
  Vec LstmOut(const FeatureMatrix &f) const;
  std::vector<Param *> Params();
};

SVectorModel TrainSVector(FeatureStore *store, const SVectorConfig &cfg,
                          const Rng &rng);
Vec ExtractSVector(const SVectorModel &model, const FeatureMatrix &f);
void SaveSVector(const SVectorModel &model, const std::string &path);
SVectorModel LoadSVector(const std::string &path);

// ---------------------------------------------------------------------------
// i-s-vector: the s-vector LSTM with the utterance i-vector concatenated
// as a frozen input to the speaker head; the embedding is exactly the
// vector the speaker head consumes.

struct IsVectorConfig {
  int hidden_dim = 128;
  bool bidirectional = false;
  double speaker_loss_weight = 1.0;
  double text_loss_weight = 1.0;
  double dev_fraction = 0.1;
  TrainOptions train{.max_epochs = 30,
                     .batch_size = 32,
                     .lr = 1e-3,
                     .optimizer = OptKind::kRmsProp,
                     .patience = 5};
};

struct IsVectorModel {
  bool bidirectional;
  LstmCell fwd;
  std::optional<LstmCell> bwd;
  SoftmaxHead speaker_head;  // reads [lstm_out ; i-vector]
  SoftmaxHead text_head;     // reads lstm_out only
  int ivec_dim;
  std::vector<std::string> speakers;
  int n_sentences;

  IsVectorModel(int input_dim, int hidden_dim, bool bi, int ivec_dim_in,
                int n_speakers, int n_sentences_in);

  int LstmOutDim() const;
  int EmbeddingDim() const { return LstmOutDim() + ivec_dim; }
  Vec LstmOut(const FeatureMatrix &f) const;
  std::vector<Param *> Params();
};

/// Requires an i-vector for every bkg utterance (dim = ivectors.dim).
IsVectorModel TrainIsVector(FeatureStore *store, const EmbeddingSet &ivectors,
                            const IsVectorConfig &cfg, const Rng &rng);
/// [lstm_out(f) ; ivec]; slicing at LstmOutDim() recovers the parts.
Vec ExtractIsVector(const IsVectorModel &model, const FeatureMatrix &f,
                    const Vec &ivec);
void SaveIsVector(const IsVectorModel &model, const std::string &path);
IsVectorModel LoadIsVector(const std::string &path);

// ---------------------------------------------------------------------------
// Embedders over the trained models.

class IVectorEmbedder : public Embedder {
 public:
  IVectorEmbedder(const GmmUbm *ubm, const TvModel *tv,
                  std::string model_hash);
  std::string Kind() const override { return "i"; }
  int Dim() const override { return extractor_.Rank(); }
  Vec Embed(const FeatureMatrix &f) const override;
  std::string ModelHash() const override { return model_hash_; }

 private:
  const GmmUbm *ubm_;
  IVectorExtractor extractor_;
  std::string model_hash_;
};

class DVectorEmbedder : public Embedder {
 public:
  DVectorEmbedder(const DVectorModel *model, std::string model_hash)
      : model_(model), model_hash_(std::move(model_hash)) {}
  std::string Kind() const override { return "d"; }
  int Dim() const override { return model_->EmbeddingDim(); }
  Vec Embed(const FeatureMatrix &f) const override;
  std::string ModelHash() const override { return model_hash_; }

 private:
  const DVectorModel *model_;
  std::string model_hash_;
};

class SVectorEmbedder : public Embedder {
 public:
  SVectorEmbedder(const SVectorModel *model, std::string model_hash)
      : model_(model), model_hash_(std::move(model_hash)) {}
  std::string Kind() const override { return "s"; }
  int Dim() const override { return model_->EmbeddingDim(); }
  Vec Embed(const FeatureMatrix &f) const override;
  std::string ModelHash() const override { return model_hash_; }

 private:
  const SVectorModel *model_;
  std::string model_hash_;
};

class IsVectorEmbedder : public Embedder {
 public:
  IsVectorEmbedder(const IsVectorModel *model, const GmmUbm *ubm,
                   const TvModel *tv, std::string model_hash);
  std::string Kind() const override { return "is"; }
  int Dim() const override { return model_->EmbeddingDim(); }
  Vec Embed(const FeatureMatrix &f) const override;
  std::string ModelHash() const override { return model_hash_; }

 private:
  const IsVectorModel *model_;
  const GmmUbm *ubm_;
  IVectorExtractor extractor_;
  std::string model_hash_;
};

/// [i ; s], the naive baseline.
class ConcatEmbedder : public Embedder {
 public:
  ConcatEmbedder(const IVectorEmbedder *ivec, const SVectorEmbedder *svec)
      : ivec_(ivec), svec_(svec) {}
  std::string Kind() const override { return "concat"; }
  int Dim() const override { return ivec_->Dim() + svec_->Dim(); }
  Vec Embed(const FeatureMatrix &f) const override;
  std::string ModelHash() const override;

 private:
  const IVectorEmbedder *ivec_;
  const SVectorEmbedder *svec_;
};

}  // namespace embedprobe

#endif  // EMBEDPROBE_EMBEDDINGS_H_
