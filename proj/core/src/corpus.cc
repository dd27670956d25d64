// embedprobe/corpus.cc
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

#include "embedprobe/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embedprobe/common.h"
#include "embedprobe/tensor_io.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace embedprobe {

std::string SubsetName(Subset s) {
  switch (s) {
    case Subset::kBkg: return "bkg";
    case Subset::kDev: return "dev";
    case Subset::kEval: return "eval";
  }
  throw ConfigError("bad subset enum");
}

Subset SubsetFromName(const std::string &name) {
  if (name == "bkg") return Subset::kBkg;
  if (name == "dev") return Subset::kDev;
  if (name == "eval") return Subset::kEval;
  throw ConfigError("unknown subset '" + name + "' (want bkg|dev|eval)");
}

std::string RateClassName(RateClass r) {
  switch (r) {
    case RateClass::kSlow: return "slow";
    case RateClass::kNormal: return "normal";
    case RateClass::kFast: return "fast";
  }
  throw ConfigError("bad rate class enum");
}

RateClass RateClassFromName(const std::string &name) {
  if (name == "slow") return RateClass::kSlow;
  if (name == "normal") return RateClass::kNormal;
  if (name == "fast") return RateClass::kFast;
  throw ConfigError("unknown rate class '" + name + "'");
}

void CorpusConfig::Validate() const {
  auto need = [](bool ok, const std::string &msg) {
    if (!ok) throw ConfigError("corpus config: " + msg);
  };
  need(feature_dim >= 1, "feature_dim must be >= 1");
  need(n_bkg_speakers >= 1, "n_bkg_speakers must be >= 1");
  need(n_dev_speakers >= 0, "n_dev_speakers must be >= 0");
  need(n_eval_speakers >= 0, "n_eval_speakers must be >= 0");
  need(n_sentences >= 1, "n_sentences must be >= 1");
  need(vocab_size >= 1, "vocab_size must be >= 1");
  need(sessions_per_sentence >= 1, "sessions_per_sentence must be >= 1");
  need(n_channels >= 2, "n_channels must be >= 2");
  need(word_len_min >= 2, "word_len_min must be >= 2");
  need(word_len_max >= word_len_min, "word_len_max < word_len_min");
  need(words_per_sentence_min >= 1, "words_per_sentence_min must be >= 1");
  need(words_per_sentence_max >= words_per_sentence_min,
       "words_per_sentence_max < words_per_sentence_min");
  need(speaker_scale >= 0, "speaker_scale must be >= 0");
  need(channel_scale >= 0, "channel_scale must be >= 0");
  need(noise_scale >= 0, "noise_scale must be >= 0");
  need(gender_shift >= 0, "gender_shift must be >= 0");
  need(frame_rate > 0, "frame_rate must be > 0");
}

void FeatureMatrix::Validate() const {
  if (frames.rows() < 1) {
    throw ArtifactError("feature matrix '" + utt_id + "' has no frames");
  }
  if (!frames.allFinite()) {
    throw NumericError("feature matrix '" + utt_id +
                       "' contains non-finite values");
  }
  if (frame_rate <= 0) {
    throw ArtifactError("feature matrix '" + utt_id +
                        "' has non-positive frame rate");
  }
}

const UttMeta &Manifest::ByUttId(const std::string &utt_id) const {
  auto it = index_.find(utt_id);
  if (it == index_.end()) {
    throw ArtifactError("manifest has no utterance '" + utt_id + "'");
  }
  return utts[it->second];
}

bool Manifest::HasUtt(const std::string &utt_id) const {
  return index_.count(utt_id) > 0;
}

std::vector<const UttMeta *> Manifest::InSubset(Subset s) const {
  std::vector<const UttMeta *> out;
  for (const auto &u : utts)
    if (u.subset == s) out.push_back(&u);
  return out;
}

void Manifest::RebuildIndex() {
  index_.clear();
  for (size_t i = 0; i < utts.size(); ++i) index_[utts[i].utt_id] = i;
}

void Manifest::Validate() const {
  std::set<std::string> ids;
  std::map<std::string, Subset> speaker_subset;
  for (const auto &u : utts) {
    if (!ids.insert(u.utt_id).second) {
      throw ArtifactError("duplicate utt_id in manifest: " + u.utt_id);
    }
    auto it = speaker_subset.find(u.speaker_id);
    if (it == speaker_subset.end()) {
      speaker_subset.emplace(u.speaker_id, u.subset);
    } else if (it->second != u.subset) {
      throw ArtifactError("speaker " + u.speaker_id +
                          " appears in two subsets");
    }
    if (u.word_ids.empty()) {
      throw ArtifactError("utterance " + u.utt_id + " has no word ids");
    }
    if (u.sentence_id < 0 ||
        u.sentence_id >= static_cast<int>(tables.sentence_words.size())) {
      throw ArtifactError("utterance " + u.utt_id + " has unknown sentence");
    }
    if (tables.sentence_words[u.sentence_id] != u.word_ids) {
      throw ArtifactError("utterance " + u.utt_id +
                          " word_ids disagree with the sentence table");
    }
  }
}

namespace {

// Natural cubic spline through `knots` (K x D), sampled at `samples`
// equally spaced parameter values spanning the full knot range.
Mat SplineTrajectory(const Mat &knots, int samples) {
  const int k = static_cast<int>(knots.rows());
  const int d = static_cast<int>(knots.cols());
  Mat out(samples, d);
  if (k == 1) {
    for (int i = 0; i < samples; ++i) out.row(i) = knots.row(0);
    return out;
  }
  // Second derivatives, natural boundary. Thomas algorithm, unit spacing.
  Mat m = Mat::Zero(k, d);
  if (k > 2) {
    const int n = k - 2;
    std::vector<double> diag(n, 4.0), sub(n, 1.0);
    Mat rhs(n, d);
    for (int i = 0; i < n; ++i) {
      rhs.row(i) =
          6.0 * (knots.row(i + 2) - 2.0 * knots.row(i + 1) + knots.row(i));
    }
    for (int i = 1; i < n; ++i) {
      const double w = sub[i] / diag[i - 1];
      diag[i] -= w * 1.0;
      rhs.row(i) -= w * rhs.row(i - 1);
    }
    m.row(n) = rhs.row(n - 1) / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) {
      m.row(i + 1) = (rhs.row(i) - m.row(i + 2)) / diag[i];
    }
  }
  const double span = static_cast<double>(k - 1);
  for (int i = 0; i < samples; ++i) {
    double x = samples == 1 ? 0.0 : span * i / (samples - 1);
    int seg = std::min(static_cast<int>(x), k - 2);
    const double u = x - seg;  // in [0,1]
    const double a = 1.0 - u;
    out.row(i) = m.row(seg) * (a * a * a - a) / 6.0 +
                 m.row(seg + 1) * (u * u * u - u) / 6.0 +
                 knots.row(seg) * a + knots.row(seg + 1) * u;
  }
  return out;
}

constexpr int kPadFrames = 5;
constexpr int kGenderDims = 5;
constexpr int kSplineKnots = 4;

struct GeneratorTables {
  std::vector<Mat> word_templates;       // one T_w x D trajectory per word
  std::vector<std::vector<int>> sentences;
  std::vector<Vec> channel_gain;
  std::vector<Vec> channel_offset;
};

GeneratorTables BuildTables(const CorpusConfig &cfg, const Rng &corpus_rng) {
  GeneratorTables t;
  t.word_templates.reserve(cfg.vocab_size);
  for (int w = 0; w < cfg.vocab_size; ++w) {
    Rng rng = corpus_rng.Substream("word/" + std::to_string(w));
    const int len =
        cfg.word_len_min +
        static_cast<int>(rng.UniformInt(cfg.word_len_max - cfg.word_len_min + 1));
    Mat knots(kSplineKnots, cfg.feature_dim);
    for (int i = 0; i < kSplineKnots; ++i)
      for (int j = 0; j < cfg.feature_dim; ++j) knots(i, j) = rng.Gaussian();
    t.word_templates.push_back(SplineTrajectory(knots, len));
  }
  Rng sent_rng = corpus_rng.Substream("sentences");
  t.sentences.resize(cfg.n_sentences);
  for (auto &words : t.sentences) {
    const int k = cfg.words_per_sentence_min +
                  static_cast<int>(sent_rng.UniformInt(
                      cfg.words_per_sentence_max - cfg.words_per_sentence_min + 1));
    for (int i = 0; i < k; ++i) {
      words.push_back(static_cast<int>(sent_rng.UniformInt(cfg.vocab_size)));
    }
  }
  for (int c = 0; c < cfg.n_channels; ++c) {
    Rng rng = corpus_rng.Substream("channel/" + std::to_string(c));
    Vec gain = Vec::Ones(cfg.feature_dim);
    Vec offset = Vec::Zero(cfg.feature_dim);
    if (cfg.channel_scale > 0) {
      for (int j = 0; j < cfg.feature_dim; ++j) gain(j) = rng.Uniform(0.8, 1.2);
      for (int j = 0; j < cfg.feature_dim; ++j)
        offset(j) = cfg.channel_scale * rng.Gaussian();
    }
    t.channel_gain.push_back(std::move(gain));
    t.channel_offset.push_back(std::move(offset));
  }
  return t;
}

std::string SpeakerId(Subset subset, int ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%04d", SubsetName(subset)[0], ordinal);
  return std::string(buf);
}

std::string UttId(const std::string &speaker_id, int sentence, int session) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s-t%02d-r%02d", speaker_id.c_str(),
                sentence, session);
  return std::string(buf);
}

}  // namespace

Manifest GenerateCorpus(const CorpusConfig &config,
                        const std::string &out_dir) {
  config.Validate();
  const Rng corpus_rng = Rng(config.seed).Substream("corpus");
  const GeneratorTables tables = BuildTables(config, corpus_rng);

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "features", ec);
  if (ec) throw ArtifactError("cannot create output directory: " + out_dir);

  Manifest manifest;
  manifest.tables.feature_dim = config.feature_dim;
  manifest.tables.frame_rate = config.frame_rate;
  manifest.tables.sentence_words = tables.sentences;

  const int d = config.feature_dim;
  const int gdims = std::min(kGenderDims, d);

  struct SubsetPlan {
    Subset subset;
    int n_speakers;
  };
  const SubsetPlan plans[] = {{Subset::kBkg, config.n_bkg_speakers},
                              {Subset::kDev, config.n_dev_speakers},
                              {Subset::kEval, config.n_eval_speakers}};

  int global_speaker_ordinal = 0;
  for (const auto &plan : plans) {
    for (int s = 0; s < plan.n_speakers; ++s, ++global_speaker_ordinal) {
      const std::string speaker_id = SpeakerId(plan.subset, s);
      const char gender = (s % 2 == 0) ? 'F' : 'M';
      manifest.tables.speaker_gender[speaker_id] = gender;

      Rng spk_rng = corpus_rng.Substream("speaker/" + speaker_id);
      Vec spk_offset(d);
      for (int j = 0; j < d; ++j)
        spk_offset(j) = config.speaker_scale * spk_rng.Gaussian();
      Vec clean_base = spk_offset;
      const double gshift =
          (gender == 'F') ? config.gender_shift : -config.gender_shift;
      for (int j = 0; j < gdims; ++j) clean_base(j) += gshift;

      for (int sent = 0; sent < config.n_sentences; ++sent) {
        for (int sess = 0; sess < config.sessions_per_sentence; ++sess) {
          const std::string utt_id = UttId(speaker_id, sent, sess);
          const int channel =
              (global_speaker_ordinal + sess) % config.n_channels;
          const Vec &gain = tables.channel_gain[channel];
          const Vec &offset = tables.channel_offset[channel];

          int t_total = 2 * kPadFrames;
          for (int w : tables.sentences[sent])
            t_total += static_cast<int>(tables.word_templates[w].rows());

          Rng utt_rng = corpus_rng.Substream("utt/" + utt_id);
          MatF frames(t_total, d);
          int row = 0;
          auto emit = [&](const double *clean /* nullptr for padding */) {
            for (int j = 0; j < d; ++j) {
              double v = clean ? gain(j) * clean[j] : 0.0;
              v += offset(j) + config.noise_scale * utt_rng.Gaussian();
              frames(row, j) = static_cast<float>(v);
            }
            ++row;
          };
          Vec clean_row(d);
          for (int p = 0; p < kPadFrames; ++p) emit(nullptr);
          for (int w : tables.sentences[sent]) {
            const Mat &tmpl = tables.word_templates[w];
            for (Eigen::Index tr = 0; tr < tmpl.rows(); ++tr) {
              clean_row = tmpl.row(tr).transpose() + clean_base;
              emit(clean_row.data());
            }
          }
          for (int p = 0; p < kPadFrames; ++p) emit(nullptr);

          FeatureMatrix f;
          f.utt_id = utt_id;
          f.frames = std::move(frames);
          f.frame_rate = config.frame_rate;
          f.Validate();

          const std::string rel_path = "features/" + utt_id + ".efea";
          WriteFeatureFile((fs::path(out_dir) / rel_path).string(), f);

          UttMeta meta;
          meta.utt_id = utt_id;
          meta.speaker_id = speaker_id;
          meta.gender = gender;
          meta.sentence_id = sent;
          meta.session = sess;
          meta.word_ids = tables.sentences[sent];
          meta.channel_id = channel;
          meta.rate_class = RateClass::kNormal;
          meta.duration_s = t_total / config.frame_rate;
          meta.subset = plan.subset;
          meta.path = rel_path;
          manifest.utts.push_back(std::move(meta));
        }
      }
    }
  }
  manifest.RebuildIndex();
  manifest.Validate();
  SaveManifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
  return manifest;
}

void SaveManifest(const Manifest &manifest, const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArtifactError("cannot write manifest: " + path);
  json header;
  header["type"] = "corpus_header";
  header["feature_dim"] = manifest.tables.feature_dim;
  header["frame_rate"] = manifest.tables.frame_rate;
  header["sentence_words"] = manifest.tables.sentence_words;
  json sg = json::object();
  for (const auto &[spk, g] : manifest.tables.speaker_gender)
    sg[spk] = std::string(1, g);
  header["speaker_gender"] = sg;
  os << header.dump() << "\n";
  for (const auto &u : manifest.utts) {
    json row;
    row["utt_id"] = u.utt_id;
    row["speaker_id"] = u.speaker_id;
    row["gender"] = std::string(1, u.gender);
    row["sentence_id"] = u.sentence_id;
    row["session"] = u.session;
    row["word_ids"] = u.word_ids;
    row["channel_id"] = u.channel_id;
    row["rate_class"] = RateClassName(u.rate_class);
    row["duration_s"] = u.duration_s;
    row["subset"] = SubsetName(u.subset);
    row["path"] = u.path;
    os << row.dump() << "\n";
  }
  if (!os) throw ArtifactError("manifest write failed: " + path);
}

Manifest LoadManifest(const std::string &path, bool check_files) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(is, line)) {
    throw ArtifactError("manifest is empty: " + path);
  }
  Manifest manifest;
  try {
    json header = json::parse(line);
    if (header.value("type", "") != "corpus_header") {
      throw ArtifactError("manifest missing corpus_header line: " + path);
    }
    manifest.tables.feature_dim = header.at("feature_dim").get<int>();
    manifest.tables.frame_rate = header.at("frame_rate").get<double>();
    manifest.tables.sentence_words =
        header.at("sentence_words").get<std::vector<std::vector<int>>>();
    for (auto &[k, v] : header.at("speaker_gender").items()) {
      manifest.tables.speaker_gender[k] = v.get<std::string>().at(0);
    }
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      json row = json::parse(line);
      UttMeta u;
      u.utt_id = row.at("utt_id").get<std::string>();
      u.speaker_id = row.at("speaker_id").get<std::string>();
      u.gender = row.at("gender").get<std::string>().at(0);
      u.sentence_id = row.at("sentence_id").get<int>();
      u.session = row.at("session").get<int>();
      u.word_ids = row.at("word_ids").get<std::vector<int>>();
      u.channel_id = row.at("channel_id").get<int>();
      u.rate_class = RateClassFromName(row.at("rate_class").get<std::string>());
      u.duration_s = row.at("duration_s").get<double>();
      u.subset = SubsetFromName(row.at("subset").get<std::string>());
      u.path = row.at("path").get<std::string>();
      manifest.utts.push_back(std::move(u));
    }
  } catch (const json::exception &e) {
    throw ArtifactError("manifest parse error in " + path + ": " + e.what());
  }
  manifest.RebuildIndex();
  manifest.Validate();
  if (check_files) {
    const fs::path root = fs::path(path).parent_path();
    for (const auto &u : manifest.utts) {
      const fs::path fpath = root / u.path;
      std::ifstream fis(fpath, std::ios::binary);
      if (!fis) {
        throw ArtifactError("manifest references missing file: " + u.path);
      }
      char magic[4];
      fis.read(magic, 4);
      if (!fis || std::string(magic, 4) != "EFEA") {
        throw ArtifactError("bad magic in feature file: " + u.path);
      }
      ReadU32(fis);  // version
      const uint32_t d = ReadU32(fis);
      const uint32_t t = ReadU32(fis);
      if (static_cast<int>(d) != manifest.tables.feature_dim) {
        throw ArtifactError("feature dim mismatch in " + u.path);
      }
      const double dur = t / manifest.tables.frame_rate;
      if (std::abs(dur - u.duration_s) >= 1e-6) {
        throw ArtifactError("duration mismatch for utterance " + u.utt_id);
      }
    }
  }
  return manifest;
}

void WriteFeatureFile(const std::string &path, const FeatureMatrix &f) {
  f.Validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArtifactError("cannot write feature file: " + path);
  os.write("EFEA", 4);
  WriteU32(os, 1);
  WriteU32(os, static_cast<uint32_t>(f.Dim()));
  WriteU32(os, static_cast<uint32_t>(f.NumFrames()));
  WriteF32(os, f.frames.data(), static_cast<size_t>(f.frames.size()));
  if (!os) throw ArtifactError("feature write failed: " + path);
}

FeatureMatrix ReadFeatureFile(const std::string &path,
                              const std::string &utt_id) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("cannot open feature file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "EFEA") {
    throw ArtifactError("bad magic in feature file: " + path);
  }
  const uint32_t version = ReadU32(is);
  if (version != 1) {
    throw ArtifactError("unsupported feature file version in " + path);
  }
  const uint32_t d = ReadU32(is);
  const uint32_t t = ReadU32(is);
  FeatureMatrix f;
  f.utt_id = utt_id;
  f.frames.resize(t, d);
  ReadF32(is, f.frames.data(), static_cast<size_t>(t) * d);
  f.Validate();
  return f;
}

MatF StackContext(const FeatureMatrix &f, int left, int right) {
  if (left < 0 || right < 0) {
    throw ConfigError("StackContext: context sizes must be >= 0");
  }
  const int t = f.NumFrames();
  const int d = f.Dim();
  const int width = left + 1 + right;
  MatF out(t, d * width);
  for (int i = 0; i < t; ++i) {
    for (int k = -left; k <= right; ++k) {
      const int src = std::clamp(i + k, 0, t - 1);
      out.block(i, (k + left) * d, 1, d) = f.frames.row(src);
    }
  }
  return out;
}

FeatureMatrix PerturbRate(const FeatureMatrix &f, double factor) {
  f.Validate();
  FeatureMatrix out;
  out.frame_rate = f.frame_rate;
  if (factor == 1.0) {
    out.utt_id = f.utt_id;
    out.frames = f.frames;
    return out;
  }
  const int t = f.NumFrames();
  if (factor == 0.5) {
    out.utt_id = f.utt_id + "#slow";
    out.frames.resize(2 * t, f.Dim());
    for (int i = 0; i < t; ++i) {
      out.frames.row(2 * i) = f.frames.row(i);
      out.frames.row(2 * i + 1) = f.frames.row(i);
    }
    return out;
  }
  if (factor == 1.5) {
    // floor(T/1.5) frames at indices round(1.5*k).
    const int n = (2 * t) / 3;
    if (n < 1) {
      throw ConfigError("PerturbRate: utterance too short for factor 1.5");
    }
    out.utt_id = f.utt_id + "#fast";
    out.frames.resize(n, f.Dim());
    for (int k = 0; k < n; ++k) {
      const int src = std::min(static_cast<int>(std::lround(1.5 * k)), t - 1);
      out.frames.row(k) = f.frames.row(src);
    }
    return out;
  }
  std::ostringstream os;
  os << "PerturbRate: unsupported factor " << factor
     << " (supported: 0.5, 1.0, 1.5)";
  throw ConfigError(os.str());
}

FeatureMatrix ConcatUtterances(const FeatureMatrix &a,
                               const FeatureMatrix &b) {
  a.Validate();
  b.Validate();
  if (a.Dim() != b.Dim()) {
    throw ConfigError("ConcatUtterances: feature dim mismatch");
  }
  if (a.frame_rate != b.frame_rate) {
    throw ConfigError("ConcatUtterances: frame rate mismatch");
  }
  FeatureMatrix out;
  out.utt_id = a.utt_id + "+" + b.utt_id;
  out.frame_rate = a.frame_rate;
  out.frames.resize(a.NumFrames() + b.NumFrames(), a.Dim());
  out.frames.topRows(a.NumFrames()) = a.frames;
  out.frames.bottomRows(b.NumFrames()) = b.frames;
  return out;
}

const FeatureMatrix &FeatureStore::Get(const std::string &utt_id) {
  auto it = cache_.find(utt_id);
  if (it != cache_.end()) return it->second;
  const UttMeta &meta = manifest_->ByUttId(utt_id);
  FeatureMatrix f = ReadFeatureFile(
      (fs::path(dir_) / meta.path).string(), utt_id);
  if (f.Dim() != manifest_->tables.feature_dim) {
    throw ArtifactError("feature dim mismatch for utterance " + utt_id);
  }
  f.frame_rate = manifest_->tables.frame_rate;
  return cache_.emplace(utt_id, std::move(f)).first->second;
}

void FeatureStore::Preload(Subset s) {
  for (const auto *u : manifest_->InSubset(s)) Get(u->utt_id);
}

}  // namespace embedprobe
