// tests/test_cli.cc
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
// Shells out to the installed binary (path injected as EMBEDPROBE_BIN)
// and checks exit codes, error channels and artifact effects. The full
// pipeline walk lives in the acceptance runner; this file covers the
// command surface.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

struct RunResult {
  int exit_code = -1;
  std::string out;  // stdout + stderr
};

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return "";
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

// Runs `bin args` under sh with stdout+stderr captured.
RunResult Run(const std::string &args, const std::string &env = "") {
  static int counter = 0;
  const std::string log =
      (fs::temp_directory_path() /
       ("embedprobe_cli_log_" + std::to_string(counter++)))
          .string();
  const std::string cmd =
      env + (env.empty() ? "" : " ") + EMBEDPROBE_BIN + " " + args + " > " +
      log + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = Slurp(log);
  fs::remove(log);
  return r;
}

std::string WriteTinyConfig(const TempDir &dir, uint64_t seed) {
  const std::string path = dir.str() + "/tiny.conf";
  std::ofstream os(path);
  os << "seed = " << seed << "\n"
     << "corpus.feature_dim = 6\n"
     << "corpus.n_bkg_speakers = 2\n"
     << "corpus.n_dev_speakers = 0\n"
     << "corpus.n_eval_speakers = 2\n"
     << "corpus.n_sentences = 2\n"
     << "corpus.vocab_size = 8\n"
     << "corpus.sessions_per_sentence = 2\n"
     << "corpus.n_channels = 2\n"
     << "corpus.word_len_min = 4\n"
     << "corpus.word_len_max = 6\n"
     << "corpus.words_per_sentence_min = 2\n"
     << "corpus.words_per_sentence_max = 2\n";
  return path;
}

}  // namespace

TEST_CASE("help exits 0 and lists the commands") {
  const RunResult r = Run("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("corpus-gen") != std::string::npos);
  CHECK(r.out.find("tdsv-score") != std::string::npos);
  CHECK(r.out.find("probe-run") != std::string::npos);
}

TEST_CASE("a missing or unknown command is a usage error") {
  CHECK(Run("").exit_code == 2);
  CHECK(Run("frobnicate").exit_code == 2);
  CHECK(Run("corpus-gen").exit_code == 2);  // --out is required
}

TEST_CASE("corpus-gen writes the manifest, run log and effective config") {
  TempDir dir("embedprobe_cli_gen");
  const std::string conf = WriteTinyConfig(dir, 5);
  const RunResult r =
      Run("corpus-gen --out " + dir.str() + "/run --config " + conf);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir.str() + "/run/corpus/manifest.jsonl"));
  CHECK(fs::exists(dir.str() + "/run/runlog.jsonl"));
  CHECK(fs::exists(dir.str() + "/run/effective.conf"));
  const std::string log = Slurp(dir.str() + "/run/runlog.jsonl");
  CHECK(log.find("\"step\":\"corpus-gen\"") != std::string::npos);
  const std::string eff = Slurp(dir.str() + "/run/effective.conf");
  CHECK(eff.find("corpus.n_bkg_speakers = 2") != std::string::npos);
  // Defaults are echoed too.
  CHECK(eff.find("tv.rank") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical manifests") {
  TempDir dir("embedprobe_cli_det");
  const std::string conf = WriteTinyConfig(dir, 5);
  CHECK(Run("corpus-gen --out " + dir.str() + "/a --config " + conf)
            .exit_code == 0);
  CHECK(Run("corpus-gen --out " + dir.str() + "/b --config " + conf)
            .exit_code == 0);
  const std::string ma = Slurp(dir.str() + "/a/corpus/manifest.jsonl");
  const std::string mb = Slurp(dir.str() + "/b/corpus/manifest.jsonl");
  REQUIRE(!ma.empty());
  CHECK(ma == mb);
}

TEST_CASE("EMBEDPROBE_SEED overrides the config seed and is validated") {
  TempDir dir("embedprobe_cli_seed");
  const std::string conf = WriteTinyConfig(dir, 5);
  CHECK(Run("corpus-gen --out " + dir.str() + "/a --config " + conf)
            .exit_code == 0);
  CHECK(Run("corpus-gen --out " + dir.str() + "/b --config " + conf,
            "EMBEDPROBE_SEED=99").exit_code == 0);
  const std::string ma = Slurp(dir.str() + "/a/corpus/manifest.jsonl");
  const std::string mb = Slurp(dir.str() + "/b/corpus/manifest.jsonl");
  REQUIRE(!ma.empty());
  REQUIRE(!mb.empty());
  CHECK(ma != mb);

  const RunResult bad =
      Run("corpus-gen --out " + dir.str() + "/c --config " + conf,
          "EMBEDPROBE_SEED=banana");
  CHECK(bad.exit_code == 2);
  CHECK(bad.out.find("EMBEDPROBE_SEED") != std::string::npos);
}

TEST_CASE("--set rejects unknown keys and malformed overrides") {
  TempDir dir("embedprobe_cli_set");
  const RunResult unknown = Run("corpus-gen --out " + dir.str() +
                                "/run --set corpus.bogus_knob=1");
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.out.find("bogus_knob") != std::string::npos);

  const RunResult malformed =
      Run("corpus-gen --out " + dir.str() + "/run2 --set corpus.vocab_size");
  CHECK(malformed.exit_code == 2);

  const RunResult bad_value = Run("corpus-gen --out " + dir.str() +
                                  "/run3 --set corpus.vocab_size=many");
  CHECK(bad_value.exit_code == 2);
}

TEST_CASE("training against a missing corpus is an artifact error") {
  TempDir dir("embedprobe_cli_missing");
  const RunResult r = Run("ubm-train --out " + dir.str() + "/run");
  CHECK(r.exit_code == 3);
  CHECK(r.out.find("missing input artifact") != std::string::npos);
}

TEST_CASE("a stale input hash is an artifact error") {
  TempDir dir("embedprobe_cli_stale");
  const std::string conf = WriteTinyConfig(dir, 5);
  const std::string out = dir.str() + "/run";
  REQUIRE(Run("corpus-gen --out " + out + " --config " + conf).exit_code ==
          0);
  // Tamper with the manifest after its hash was logged.
  {
    std::ofstream os(out + "/corpus/manifest.jsonl", std::ios::app);
    os << "\n";
  }
  const RunResult r = Run("ubm-train --out " + out + " --config " + conf +
                          " --set ubm.components=4 --set ubm.em_iters=1");
  CHECK(r.exit_code == 3);
  CHECK(r.out.find("artifact changed since the step that produced it") !=
        std::string::npos);
}

TEST_CASE("probe-run validates the task list before touching artifacts") {
  TempDir dir("embedprobe_cli_task");
  const RunResult r = Run("probe-run --out " + dir.str() +
                          "/run --kind i --task warble");
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("unknown probe task 'warble'") != std::string::npos);
  CHECK(r.out.find("speaker, text, term, order, length, channel, gender, "
                   "rate") != std::string::npos);
}

TEST_CASE("report with no results to report is a config error") {
  TempDir dir("embedprobe_cli_report");
  const RunResult r = Run("report --out " + dir.str() + "/run");
  CHECK(r.exit_code == 2);
}
