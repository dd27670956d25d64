// embedprobe/config.h
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
// Flat key=value run configuration. Every key has a default; unknown keys
// are rejected; the effective (merged) configuration can be echoed back.

#ifndef EMBEDPROBE_CONFIG_H_
#define EMBEDPROBE_CONFIG_H_

#include <cstdint>
#include <string>

#include "embedprobe/corpus.h"
#include "embedprobe/embeddings.h"
#include "embedprobe/evaluation.h"
#include "embedprobe/gmm.h"
#include "embedprobe/ivector.h"
#include "embedprobe/probing.h"

namespace embedprobe {

struct RunConfig {
  uint64_t seed = 42;
  CorpusConfig corpus;
  UbmTrainOptions ubm;
  TvTrainOptions tv;
  DVectorConfig dvector;
  SVectorConfig svector;
  IsVectorConfig isvector;
  ProbeConfig probe;
  TrialsConfig trials;
};

// Applies one "section.key = value" assignment. Unknown keys and
// unparseable values raise ConfigError.
void SetConfigKey(RunConfig *cfg, const std::string &key,
                  const std::string &value);

// Parses a config file (one key=value per line, '#' comments, blank lines
// skipped) over the built-in defaults.
RunConfig LoadRunConfig(const std::string &path);

// Every key with its effective value, one "key = value" line each, in
// sorted key order. Writing this next to the outputs records the run.
std::string EffectiveConfig(const RunConfig &cfg);

}  // namespace embedprobe

#endif  // EMBEDPROBE_CONFIG_H_
