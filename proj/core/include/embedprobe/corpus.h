// embedprobe/corpus.h
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

#ifndef EMBEDPROBE_CORPUS_H_
#define EMBEDPROBE_CORPUS_H_

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "embedprobe/numerics.h"
#include "embedprobe/rng.h"

namespace embedprobe {

enum class Subset { kBkg, kDev, kEval };
enum class RateClass { kSlow, kNormal, kFast };

std::string SubsetName(Subset s);
Subset SubsetFromName(const std::string &name);
std::string RateClassName(RateClass r);
RateClass RateClassFromName(const std::string &name);

/// Controls for the synthetic corpus generator. Every utterance is built as
///   frames = channel_gain (.) (word templates + speaker offset
///            + gender shift on the first 5 dims) + channel_offset
///            + iid Gaussian session noise,
/// with 5 frames of signal-free padding at each end. Word templates are
/// smooth trajectories (natural cubic spline through 4 Gaussian knots per
/// word), fixed per word for a given seed. When channel_scale == 0 the
/// channel transform is the identity, so zeroed scales collapse sessions
/// to pure templates.
struct CorpusConfig {
  int feature_dim = 39;
  int n_bkg_speakers = 8;
  int n_dev_speakers = 0;
  int n_eval_speakers = 4;
  int n_sentences = 6;
  int vocab_size = 20;
  int sessions_per_sentence = 3;
  int n_channels = 6;
  int word_len_min = 12;  // frames
  int word_len_max = 28;
  int words_per_sentence_min = 4;
  int words_per_sentence_max = 6;
  double speaker_scale = 1.0;
  double channel_scale = 0.5;
  double noise_scale = 0.4;
  double gender_shift = 1.0;
  double frame_rate = 100.0;  // frames per second
  uint64_t seed = 0;

  /// Throws ConfigError on violated invariants (counts >= 1 except the
  /// dev/eval speaker counts which may be zero, n_channels >= 2,
  /// word_len_min >= 2, scales >= 0).
  void Validate() const;
};

/// Per-utterance frame matrix, the universal input to every extractor.
/// frames is T x D float32, T >= 1, all values finite.
struct FeatureMatrix {
  std::string utt_id;
  MatF frames;
  double frame_rate = 100.0;

  int NumFrames() const { return static_cast<int>(frames.rows()); }
  int Dim() const { return static_cast<int>(frames.cols()); }
  void Validate() const;
};

struct UttMeta {
  std::string utt_id;
  std::string speaker_id;
  char gender = 'F';  // 'F' or 'M'
  int sentence_id = 0;
  int session = 0;  // recording session index within (speaker, sentence)
  std::vector<int> word_ids;
  int channel_id = 0;
  RateClass rate_class = RateClass::kNormal;
  double duration_s = 0.0;
  Subset subset = Subset::kBkg;
  std::string path;  // relative to the corpus root
};

/// Corpus-level tables carried on the manifest header line.
struct CorpusTables {
  int feature_dim = 0;
  double frame_rate = 0.0;
  std::vector<std::vector<int>> sentence_words;  // sentence id -> word ids
  std::map<std::string, char> speaker_gender;
};

struct Manifest {
  CorpusTables tables;
  std::vector<UttMeta> utts;

  const UttMeta &ByUttId(const std::string &utt_id) const;
  bool HasUtt(const std::string &utt_id) const;
  std::vector<const UttMeta *> InSubset(Subset s) const;
  /// Uniqueness, speaker-disjoint subsets, sentence table coverage.
  /// Duration consistency against file headers is checked by
  /// LoadManifest(path, /*check_files=*/true). Throws ArtifactError.
  void Validate() const;

  void RebuildIndex();

 private:
  std::unordered_map<std::string, size_t> index_;
};

/// Generates the corpus under `out_dir` (features/ + manifest.jsonl) and
/// returns the manifest. Deterministic in config.seed: identical config
/// produces byte-identical feature files and manifest.
Manifest GenerateCorpus(const CorpusConfig &config,
                        const std::string &out_dir);

void SaveManifest(const Manifest &manifest, const std::string &path);
Manifest LoadManifest(const std::string &path, bool check_files = false);

// Feature file ("EFEA"): magic, u32 version=1, u32 D, u32 T, then T*D
// little-endian float32 row-major.
void WriteFeatureFile(const std::string &path, const FeatureMatrix &f);
FeatureMatrix ReadFeatureFile(const std::string &path,
                              const std::string &utt_id);

/// Row t of the result is the concatenation of frames t-left .. t+right,
/// with edge frames replicated. Output has T rows and D*(left+1+right)
/// columns.
MatF StackContext(const FeatureMatrix &f, int left, int right);

/// Feature-domain speaking-rate change. factor 0.5 duplicates every frame,
/// factor 1.5 keeps floor(T/1.5) frames at indices round(1.5*k), factor
/// 1.0 is the identity. Any other factor is rejected. The utterance id
/// gains a "#slow" / "#fast" suffix.
FeatureMatrix PerturbRate(const FeatureMatrix &f, double factor);

/// Rows of a followed by rows of b; id is "a.utt_id+b.utt_id". Requires
/// equal feature dim and frame rate.
FeatureMatrix ConcatUtterances(const FeatureMatrix &a,
                               const FeatureMatrix &b);

/// Reads feature files for a corpus on demand and caches them. Reads are
/// pure; Preload before using one store from several threads.
class FeatureStore {
 public:
  FeatureStore(std::string corpus_dir, const Manifest *manifest)
      : dir_(std::move(corpus_dir)), manifest_(manifest) {}

  const FeatureMatrix &Get(const std::string &utt_id);
  void Preload(Subset s);
  const Manifest &manifest() const { return *manifest_; }
  const std::string &dir() const { return dir_; }

 private:
  std::string dir_;
  const Manifest *manifest_;
  std::unordered_map<std::string, FeatureMatrix> cache_;
};

}  // namespace embedprobe

#endif  // EMBEDPROBE_CORPUS_H_
