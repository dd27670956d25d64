// tools/embedprobe_main.cc
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
// Single front end for the whole pipeline. Every subcommand reads its
// inputs from --out, validates them against the run log, and writes its
// artifacts back under --out. Exit codes: 0 ok, 2 bad arguments or
// config, 3 missing or corrupt artifact, 4 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "embedprobe/common.h"
#include "embedprobe/config.h"
#include "embedprobe/corpus.h"
#include "embedprobe/pipeline.h"
#include "embedprobe/probing.h"

namespace {

using namespace embedprobe;

struct CommonArgs {
  std::string out;
  std::string config_path;
  std::vector<std::string> sets;
  int jobs = 1;
};

void AddCommon(CLI::App *cmd, CommonArgs *a) {
  cmd->add_option("--out", a->out, "output directory for all artifacts")
      ->required();
  cmd->add_option("--config", a->config_path, "config file (key = value)");
  cmd->add_option("--set", a->sets, "override one config key, key=value")
      ->take_all();
  cmd->add_option("--jobs", a->jobs, "worker threads for extraction/probing")
      ->check(CLI::PositiveNumber);
}

StepContext MakeContext(const CommonArgs &a) {
  RunConfig cfg;
  if (!a.config_path.empty()) cfg = LoadRunConfig(a.config_path);
  for (const std::string &kv : a.sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    SetConfigKey(&cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  uint64_t seed = cfg.seed;
  if (const char *env = std::getenv("EMBEDPROBE_SEED")) {
    try {
      size_t pos = 0;
      seed = std::stoull(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception &) {
      throw ConfigError(std::string("EMBEDPROBE_SEED is not an integer: ") +
                        env);
    }
  }
  StepContext ctx{RunPaths(a.out), cfg, seed, a.jobs};
  return ctx;
}

std::vector<ProbeTask> ParseTasks(const std::string &arg) {
  if (arg == "all") return AllProbeTasks();
  return {ProbeTaskFromName(arg)};  // throws ConfigError listing the tasks
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"speaker embedding pipeline: synthetic corpus, UBM/TV and "
               "neural embeddings, probing tasks, verification trials"};
  app.require_subcommand(1);

  struct Cmd {
    CommonArgs common;
    std::string subset = "eval";
    std::string kind;
    std::string task = "all";
    std::vector<int> dims;
  };
  std::map<std::string, Cmd> args;
  auto sub = [&](const std::string &name, const std::string &desc) {
    CLI::App *c = app.add_subcommand(name, desc);
    AddCommon(c, &args[name].common);
    return c;
  };

  sub("corpus-gen", "synthesize the corpus and write its manifest");
  sub("ubm-train", "train the diagonal-covariance UBM on bkg");
  sub("tv-train", "train the total-variability subspace on bkg");
  sub("dvector-train", "train the frame-level d-vector network on bkg");
  sub("svector-train", "train the sequence-level s-vector LSTM on bkg");
  sub("isvector-train",
      "train the i-s-vector LSTM on bkg (needs bkg i-vectors)");
  for (const char *k : {"ivector", "dvector", "svector", "isvector"}) {
    const std::string name = std::string(k) + "-extract";
    CLI::App *c = sub(name, std::string("extract ") + k[0] +
                                "-vector embeddings for one subset");
    c->add_option("--subset", args[name].subset, "bkg, dev or eval")
        ->default_val("eval");
  }
  {
    CLI::App *c = sub("trials-gen",
                      "build verification trials over the eval subset");
    (void)c;
  }
  {
    CLI::App *c = sub("tdsv-score",
                      "score trials with one embedding kind and report EER "
                      "per condition");
    c->add_option("--kind", args["tdsv-score"].kind,
                  "embedding kind: i, d, s, is, concat")
        ->required();
    c->add_option("--dims", args["tdsv-score"].dims,
                  "embedding dims to score (default: the configured one)");
  }
  {
    CLI::App *c = sub("probe-run", "train and evaluate probing classifiers");
    c->add_option("--task", args["probe-run"].task,
                  "probe task name or 'all'")
        ->default_val("all");
    c->add_option("--kind", args["probe-run"].kind,
                  "embedding kind: i, d, s, is, concat")
        ->required();
    c->add_option("--dims", args["probe-run"].dims,
                  "embedding dims to probe (default: the configured one)");
  }
  sub("report", "collate probing CSV and EER JSON into one summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Cmd &cmd = args[name];
  try {
    // Argument-level validation happens before any artifact is touched.
    if (name == "probe-run") ParseTasks(cmd.task);

    StepContext ctx = MakeContext(cmd.common);
    if (name == "corpus-gen") {
      StepCorpusGen(ctx);
    } else if (name == "ubm-train") {
      StepUbmTrain(ctx);
    } else if (name == "tv-train") {
      StepTvTrain(ctx);
    } else if (name == "dvector-train") {
      StepNnetTrain(ctx, "d");
    } else if (name == "svector-train") {
      StepNnetTrain(ctx, "s");
    } else if (name == "isvector-train") {
      StepNnetTrain(ctx, "is");
    } else if (name == "ivector-extract") {
      StepExtract(ctx, "i", SubsetFromName(cmd.subset));
    } else if (name == "dvector-extract") {
      StepExtract(ctx, "d", SubsetFromName(cmd.subset));
    } else if (name == "svector-extract") {
      StepExtract(ctx, "s", SubsetFromName(cmd.subset));
    } else if (name == "isvector-extract") {
      StepExtract(ctx, "is", SubsetFromName(cmd.subset));
    } else if (name == "trials-gen") {
      StepTrialsGen(ctx);
    } else if (name == "tdsv-score") {
      StepTdsvScore(ctx, cmd.kind, cmd.dims);
    } else if (name == "probe-run") {
      const auto reports =
          StepProbeRun(ctx, ParseTasks(cmd.task), cmd.kind, cmd.dims);
      for (const ProbeReport &r : reports) {
        std::fprintf(stdout, "%s %s dim=%d accuracy=%.9g baseline=%.9g\n",
                     r.task.c_str(), r.kind.c_str(), r.dim, r.accuracy,
                     r.baseline);
      }
    } else if (name == "report") {
      StepReport(ctx);
    }
  } catch (const ConfigError &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ArtifactError &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
