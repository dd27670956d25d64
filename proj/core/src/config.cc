// embedprobe/config.cc
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

#include "embedprobe/config.h"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "embedprobe/common.h"
#include "embedprobe/nnet.h"

namespace embedprobe {

namespace {

std::string Trim(const std::string &s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string FmtDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Typed key registry over one RunConfig instance. The same table drives
// parsing and echoing, so the two cannot drift apart.
struct Binder {
  std::map<std::string, std::function<void(const std::string &)>> set;
  std::map<std::string, std::function<std::string()>> get;

  static long long ParseLl(const std::string &key, const std::string &v) {
    try {
      size_t pos = 0;
      long long x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception &) {
      throw ConfigError("config: bad integer for '" + key + "': " + v);
    }
  }

  void BindInt(const std::string &key, int *p) {
    set[key] = [key, p](const std::string &v) {
      long long x = ParseLl(key, v);
      if (x < -2147483648LL || x > 2147483647LL) {
        throw ConfigError("config: integer out of range for '" + key + "'");
      }
      *p = static_cast<int>(x);
    };
    get[key] = [p] { return std::to_string(*p); };
  }

  void BindU64(const std::string &key, uint64_t *p) {
    set[key] = [key, p](const std::string &v) {
      try {
        size_t pos = 0;
        *p = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception &) {
        throw ConfigError("config: bad integer for '" + key + "': " + v);
      }
    };
    get[key] = [p] { return std::to_string(*p); };
  }

  void BindDouble(const std::string &key, double *p) {
    set[key] = [key, p](const std::string &v) {
      try {
        size_t pos = 0;
        *p = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception &) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
      }
    };
    get[key] = [p] { return FmtDouble(*p); };
  }

  void BindBool(const std::string &key, bool *p) {
    set[key] = [key, p](const std::string &v) {
      if (v == "true" || v == "1") {
        *p = true;
      } else if (v == "false" || v == "0") {
        *p = false;
      } else {
        throw ConfigError("config: bad boolean for '" + key + "': " + v);
      }
    };
    get[key] = [p] { return *p ? std::string("true") : std::string("false"); };
  }

  void BindIntList(const std::string &key, std::vector<int> *p) {
    set[key] = [key, p](const std::string &v) {
      std::vector<int> out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = Trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(ParseLl(key, item)));
      }
      if (out.empty()) {
        throw ConfigError("config: empty list for '" + key + "'");
      }
      *p = std::move(out);
    };
    get[key] = [p] {
      std::string s;
      for (size_t i = 0; i < p->size(); ++i) {
        if (i) s += ',';
        s += std::to_string((*p)[i]);
      }
      return s;
    };
  }

  void BindActivation(const std::string &key, Activation *p) {
    set[key] = [key, p](const std::string &v) {
      *p = ActivationFromName(v);
    };
    get[key] = [p] { return ActivationName(*p); };
  }

  void BindTrain(const std::string &prefix, TrainOptions *t) {
    BindInt(prefix + ".epochs", &t->max_epochs);
    BindInt(prefix + ".batch", &t->batch_size);
    BindDouble(prefix + ".lr", &t->lr);
    BindInt(prefix + ".patience", &t->patience);
  }
};

Binder MakeBinder(RunConfig *cfg) {
  Binder b;
  b.BindU64("seed", &cfg->seed);

  b.BindInt("corpus.feature_dim", &cfg->corpus.feature_dim);
  b.BindInt("corpus.n_bkg_speakers", &cfg->corpus.n_bkg_speakers);
  b.BindInt("corpus.n_dev_speakers", &cfg->corpus.n_dev_speakers);
  b.BindInt("corpus.n_eval_speakers", &cfg->corpus.n_eval_speakers);
  b.BindInt("corpus.n_sentences", &cfg->corpus.n_sentences);
  b.BindInt("corpus.vocab_size", &cfg->corpus.vocab_size);
  b.BindInt("corpus.sessions_per_sentence",
            &cfg->corpus.sessions_per_sentence);
  b.BindInt("corpus.n_channels", &cfg->corpus.n_channels);
  b.BindInt("corpus.word_len_min", &cfg->corpus.word_len_min);
  b.BindInt("corpus.word_len_max", &cfg->corpus.word_len_max);
  b.BindInt("corpus.words_per_sentence_min",
            &cfg->corpus.words_per_sentence_min);
  b.BindInt("corpus.words_per_sentence_max",
            &cfg->corpus.words_per_sentence_max);
  b.BindDouble("corpus.speaker_scale", &cfg->corpus.speaker_scale);
  b.BindDouble("corpus.channel_scale", &cfg->corpus.channel_scale);
  b.BindDouble("corpus.noise_scale", &cfg->corpus.noise_scale);
  b.BindDouble("corpus.gender_shift", &cfg->corpus.gender_shift);
  b.BindDouble("corpus.frame_rate", &cfg->corpus.frame_rate);

  b.BindInt("ubm.components", &cfg->ubm.components);
  b.BindInt("ubm.em_iters", &cfg->ubm.em_iters);
  b.BindInt("ubm.kmeans_iters", &cfg->ubm.kmeans_iters);
  b.BindDouble("ubm.variance_floor_frac", &cfg->ubm.variance_floor_frac);
  b.BindDouble("ubm.starvation_frac", &cfg->ubm.starvation_frac);

  b.BindInt("tv.rank", &cfg->tv.rank);
  b.BindInt("tv.iters", &cfg->tv.iters);
  b.BindDouble("tv.init_scale", &cfg->tv.init_scale);

  b.BindInt("dvector.context_left", &cfg->dvector.context_left);
  b.BindInt("dvector.context_right", &cfg->dvector.context_right);
  b.BindIntList("dvector.hidden", &cfg->dvector.hidden_dims);
  b.BindActivation("dvector.activation", &cfg->dvector.activation);
  b.BindInt("dvector.frame_step", &cfg->dvector.frame_step);
  b.BindDouble("dvector.dev_fraction", &cfg->dvector.dev_fraction);
  b.BindTrain("dvector", &cfg->dvector.train);

  b.BindInt("svector.hidden", &cfg->svector.hidden_dim);
  b.BindBool("svector.bidirectional", &cfg->svector.bidirectional);
  b.BindDouble("svector.speaker_loss_weight",
               &cfg->svector.speaker_loss_weight);
  b.BindDouble("svector.text_loss_weight", &cfg->svector.text_loss_weight);
  b.BindDouble("svector.dev_fraction", &cfg->svector.dev_fraction);
  b.BindTrain("svector", &cfg->svector.train);

  b.BindInt("isvector.hidden", &cfg->isvector.hidden_dim);
  b.BindBool("isvector.bidirectional", &cfg->isvector.bidirectional);
  b.BindDouble("isvector.speaker_loss_weight",
               &cfg->isvector.speaker_loss_weight);
  b.BindDouble("isvector.text_loss_weight", &cfg->isvector.text_loss_weight);
  b.BindDouble("isvector.dev_fraction", &cfg->isvector.dev_fraction);
  b.BindTrain("isvector", &cfg->isvector.train);

  b.BindInt("probe.hidden", &cfg->probe.hidden);
  b.BindTrain("probe", &cfg->probe.train);
  b.BindInt("probe.order_pairs", &cfg->probe.order_pairs);
  b.BindInt("probe.length_per_bin", &cfg->probe.length_per_bin);
  b.BindInt("probe.length_max_tries", &cfg->probe.length_max_tries);
  b.BindInt("probe.rate_max_utts", &cfg->probe.rate_max_utts);
  b.BindBool("probe.term_strict", &cfg->probe.term_strict);

  b.BindInt("trials.enroll_sessions", &cfg->trials.enroll_sessions);
  b.BindInt("trials.n_per_condition", &cfg->trials.n_per_condition);
  return b;
}

}  // namespace

void SetConfigKey(RunConfig *cfg, const std::string &key,
                  const std::string &value) {
  Binder b = MakeBinder(cfg);
  auto it = b.set.find(key);
  if (it == b.set.end()) {
    throw ConfigError("config: unknown key '" + key + "'");
  }
  it->second(value);
}

RunConfig LoadRunConfig(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  RunConfig cfg;
  Binder b = MakeBinder(&cfg);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " of " +
                        path + " is not key=value");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    auto it = b.set.find(key);
    if (it == b.set.end()) {
      throw ConfigError("config: unknown key '" + key + "' at line " +
                        std::to_string(lineno) + " of " + path);
    }
    it->second(value);
  }
  return cfg;
}

std::string EffectiveConfig(const RunConfig &cfg) {
  Binder b = MakeBinder(const_cast<RunConfig *>(&cfg));
  std::string out;
  for (const auto &[key, getter] : b.get) {
    out += key;
    out += " = ";
    out += getter();
    out += "\n";
  }
  return out;
}

}  // namespace embedprobe
