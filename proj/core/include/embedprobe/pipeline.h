// embedprobe/pipeline.h
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
// Pipeline steps behind the command-line front end. Every step loads its
// inputs from disk, validates them against the run log, does its work,
// and appends a run-log record (input/output hashes, wall time, seed).

#ifndef EMBEDPROBE_PIPELINE_H_
#define EMBEDPROBE_PIPELINE_H_

#include <map>
#include <string>
#include <vector>

#include "embedprobe/config.h"
#include "embedprobe/corpus.h"
#include "embedprobe/evaluation.h"
#include "embedprobe/probing.h"

namespace embedprobe {

// Artifact layout under one output directory.
struct RunPaths {
  std::string out;

  explicit RunPaths(std::string out_dir) : out(std::move(out_dir)) {}

  std::string CorpusDir() const { return out + "/corpus"; }
  std::string ManifestPath() const { return CorpusDir() + "/manifest.jsonl"; }
  std::string ModelsDir() const { return out + "/models"; }
  std::string UbmPath() const { return ModelsDir() + "/ubm.emdl"; }
  std::string TvPath(int rank) const {
    return ModelsDir() + "/tv_" + std::to_string(rank) + ".emdl";
  }
  std::string NnetPath(const std::string &kind, int dim) const {
    return ModelsDir() + "/" + kind + "vector_" + std::to_string(dim) +
           ".emdl";
  }
  std::string EmbeddingsDir() const { return out + "/embeddings"; }
  std::string EmbPath(const std::string &kind, int dim, Subset subset) const;
  std::string TrialsDir() const { return out + "/trials"; }
  std::string TrialsPath() const { return TrialsDir() + "/trials.tsv"; }
  std::string ScoresPath(const std::string &kind, int dim) const {
    return TrialsDir() + "/scores_" + kind + "_" + std::to_string(dim) +
           ".tsv";
  }
  std::string EerJsonPath(const std::string &kind, int dim) const {
    return TrialsDir() + "/eer_" + kind + "_" + std::to_string(dim) + ".json";
  }
  std::string ReportDir() const { return out + "/report"; }
  std::string ProbeCsvPath() const { return ReportDir() + "/probing.csv"; }
  std::string SummaryJsonPath() const { return ReportDir() + "/summary.json"; }
  std::string RunLogPath() const { return out + "/runlog.jsonl"; }
  std::string EffectiveConfigPath() const { return out + "/effective.conf"; }
};

struct StepContext {
  RunPaths paths;
  RunConfig cfg;
  uint64_t seed = 0;  // cfg.seed unless overridden (EMBEDPROBE_SEED)
  int jobs = 1;
};

// Embedding dimension each kind has under this configuration.
int KindDim(const RunConfig &cfg, const std::string &kind);
// The five embedding kinds: i, d, s, is, concat.
std::vector<std::string> AllEmbeddingKinds();

// Append-only JSONL run log. Inputs of later steps are checked against
// the hash each artifact had when it was produced.
class RunLog {
 public:
  explicit RunLog(std::string path);

  // Throws ArtifactError when the file is missing or its content no
  // longer matches the hash recorded when a step produced it.
  void CheckInput(const std::string &path) const;

  struct Record {
    std::string step;
    std::map<std::string, std::string> inputs;   // rel path -> hash
    std::map<std::string, std::string> outputs;  // rel path -> hash
    double wall_s = 0.0;
    uint64_t seed = 0;
  };
  void Append(const Record &rec);

  // Path relative to the directory holding the run log.
  std::string Rel(const std::string &path) const;

 private:
  std::string path_;
  std::string root_;
  std::map<std::string, std::string> latest_;  // rel path -> last output hash
};

void StepCorpusGen(const StepContext &ctx);
void StepUbmTrain(const StepContext &ctx);
void StepTvTrain(const StepContext &ctx);
// kind is one of d, s, is; i comes from tv-train and concat embeddings
// are assembled on the fly from the i and s files wherever consumed.
void StepNnetTrain(const StepContext &ctx, const std::string &kind);
void StepExtract(const StepContext &ctx, const std::string &kind,
                 Subset subset);
void StepTrialsGen(const StepContext &ctx);
// dims selects which trained dimensionalities to use; empty means the one
// the configuration produces (KindDim). A requested dim whose artifacts
// are missing is an error, never a silent drop.
void StepTdsvScore(const StepContext &ctx, const std::string &kind,
                   const std::vector<int> &dims = {});
// Runs the listed tasks for one kind and appends CSV rows; returns the
// reports in (dim, task) order.
std::vector<ProbeReport> StepProbeRun(const StepContext &ctx,
                                      const std::vector<ProbeTask> &tasks,
                                      const std::string &kind,
                                      const std::vector<int> &dims = {});
void StepReport(const StepContext &ctx);

}  // namespace embedprobe

#endif  // EMBEDPROBE_PIPELINE_H_
