// embedprobe/pipeline.cc
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

#include "embedprobe/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "embedprobe/common.h"
#include "embedprobe/gmm.h"
#include "embedprobe/ivector.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace embedprobe {

std::string RunPaths::EmbPath(const std::string &kind, int dim,
                              Subset subset) const {
  return EmbeddingsDir() + "/" + kind + "_" + std::to_string(dim) + "." +
         SubsetName(subset) + ".eemb";
}

int KindDim(const RunConfig &cfg, const std::string &kind) {
  if (kind == "i") return cfg.tv.rank;
  if (kind == "d") return cfg.dvector.hidden_dims.back();
  if (kind == "s") {
    return cfg.svector.hidden_dim * (cfg.svector.bidirectional ? 2 : 1);
  }
  if (kind == "is") {
    return cfg.isvector.hidden_dim * (cfg.isvector.bidirectional ? 2 : 1) +
           cfg.tv.rank;
  }
  if (kind == "concat") return KindDim(cfg, "i") + KindDim(cfg, "s");
  throw ConfigError("unknown embedding kind '" + kind +
                    "'; kinds: i, d, s, is, concat");
}

std::vector<std::string> AllEmbeddingKinds() {
  return {"i", "d", "s", "is", "concat"};
}

namespace {

std::string HashHex(const std::string &path) {
  return HashToHex(HashFile(path));
}

}  // namespace

RunLog::RunLog(std::string path) : path_(std::move(path)) {
  root_ = fs::path(path_).parent_path().string();
  std::ifstream is(path_);
  if (!is) return;  // fresh run
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      for (const auto &[p, h] : rec.at("outputs").items()) {
        latest_[p] = h.get<std::string>();
      }
    } catch (const json::exception &e) {
      throw ArtifactError("run log " + path_ + " is corrupt at line " +
                          std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string RunLog::Rel(const std::string &path) const {
  const fs::path p = fs::absolute(path).lexically_normal();
  const fs::path base = fs::absolute(root_).lexically_normal();
  const fs::path rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return p.generic_string();
  return rel.generic_string();
}

void RunLog::CheckInput(const std::string &path) const {
  if (!fs::exists(path)) {
    throw ArtifactError("missing input artifact: " + path);
  }
  auto it = latest_.find(Rel(path));
  if (it != latest_.end() && it->second != HashHex(path)) {
    throw ArtifactError("artifact changed since the step that produced it: " +
                        path);
  }
}

void RunLog::Append(const Record &rec) {
  fs::create_directories(root_);
  json row;
  row["step"] = rec.step;
  row["seed"] = rec.seed;
  row["wall_s"] = rec.wall_s;
  row["inputs"] = rec.inputs;
  row["outputs"] = rec.outputs;
  std::ofstream os(path_, std::ios::binary | std::ios::app);
  if (!os) throw ArtifactError("cannot append to run log: " + path_);
  os << row.dump() << "\n";
  if (!os) throw ArtifactError("run log write failed: " + path_);
  for (const auto &[p, h] : rec.outputs) latest_[p] = h;
}

namespace {

// Per-step bookkeeping: validates and hashes inputs, hashes outputs,
// appends the run-log record on Commit.
class StepGuard {
 public:
  StepGuard(const StepContext &ctx, std::string step)
      : ctx_(ctx), log_(ctx.paths.RunLogPath()), step_(std::move(step)) {
    fs::create_directories(ctx.paths.out);
    std::ofstream os(ctx.paths.EffectiveConfigPath(),
                     std::ios::binary | std::ios::trunc);
    os << EffectiveConfig(ctx.cfg);
    t0_ = WallSeconds();
  }

  void Input(const std::string &path) {
    log_.CheckInput(path);
    rec_.inputs[log_.Rel(path)] = HashHex(path);
  }
  void Output(const std::string &path) {
    rec_.outputs[log_.Rel(path)] = HashHex(path);
  }
  void Commit() {
    rec_.step = step_;
    rec_.seed = ctx_.seed;
    rec_.wall_s = WallSeconds() - t0_;
    log_.Append(rec_);
  }

 private:
  const StepContext &ctx_;
  RunLog log_;
  std::string step_;
  double t0_ = 0;
  RunLog::Record rec_;
};

Manifest LoadManifestFor(const StepContext &ctx) {
  return LoadManifest(ctx.paths.ManifestPath(), /*check_files=*/false);
}

std::vector<const FeatureMatrix *> BkgFeatures(FeatureStore *store) {
  std::vector<const FeatureMatrix *> out;
  for (const UttMeta *u : store->manifest().InSubset(Subset::kBkg)) {
    out.push_back(&store->Get(u->utt_id));
  }
  if (out.empty()) throw ConfigError("bkg subset is empty");
  return out;
}

// Everything an Embedder needs kept alive, heap-held so the bundle can
// move without invalidating the pointers baked into the embedder.
struct EmbedderBundle {
  std::unique_ptr<GmmUbm> ubm;
  std::unique_ptr<TvModel> tv;
  std::unique_ptr<DVectorModel> dv;
  std::unique_ptr<SVectorModel> sv;
  std::unique_ptr<IsVectorModel> isv;
  std::unique_ptr<IVectorEmbedder> part_i;
  std::unique_ptr<SVectorEmbedder> part_s;
  std::unique_ptr<Embedder> embedder;
};

using InputFn = std::function<void(const std::string &)>;

EmbedderBundle MakeEmbedder(const StepContext &ctx, const std::string &kind,
                            int dim, const InputFn &add_input) {
  EmbedderBundle b;
  auto load_iv = [&](int rank) {
    const std::string up = ctx.paths.UbmPath();
    const std::string tp = ctx.paths.TvPath(rank);
    add_input(up);
    add_input(tp);
    b.ubm = std::make_unique<GmmUbm>(LoadUbm(up));
    b.tv = std::make_unique<TvModel>(LoadTv(tp));
    return HashHex(up) + ":" + HashHex(tp);
  };
  if (kind == "i") {
    const std::string hash = load_iv(dim);
    b.embedder =
        std::make_unique<IVectorEmbedder>(b.ubm.get(), b.tv.get(), hash);
  } else if (kind == "d") {
    const std::string path = ctx.paths.NnetPath("d", dim);
    add_input(path);
    b.dv = std::make_unique<DVectorModel>(LoadDVector(path));
    if (b.dv->EmbeddingDim() != dim) {
      throw ArtifactError("d-vector model in " + path + " has dim " +
                          std::to_string(b.dv->EmbeddingDim()));
    }
    b.embedder = std::make_unique<DVectorEmbedder>(b.dv.get(), HashHex(path));
  } else if (kind == "s") {
    const std::string path = ctx.paths.NnetPath("s", dim);
    add_input(path);
    b.sv = std::make_unique<SVectorModel>(LoadSVector(path));
    if (b.sv->EmbeddingDim() != dim) {
      throw ArtifactError("s-vector model in " + path + " has dim " +
                          std::to_string(b.sv->EmbeddingDim()));
    }
    b.embedder = std::make_unique<SVectorEmbedder>(b.sv.get(), HashHex(path));
  } else if (kind == "is") {
    const std::string path = ctx.paths.NnetPath("is", dim);
    add_input(path);
    b.isv = std::make_unique<IsVectorModel>(LoadIsVector(path));
    if (b.isv->EmbeddingDim() != dim) {
      throw ArtifactError("i-s-vector model in " + path + " has dim " +
                          std::to_string(b.isv->EmbeddingDim()));
    }
    const std::string iv_hash = load_iv(b.isv->ivec_dim);
    b.embedder = std::make_unique<IsVectorEmbedder>(
        b.isv.get(), b.ubm.get(), b.tv.get(), HashHex(path) + ":" + iv_hash);
  } else if (kind == "concat") {
    const int ri = KindDim(ctx.cfg, "i");
    const int hs = KindDim(ctx.cfg, "s");
    if (ri + hs != dim) {
      throw ConfigError("concat dim " + std::to_string(dim) +
                        " does not split into i (" + std::to_string(ri) +
                        ") + s (" + std::to_string(hs) +
                        ") under this config");
    }
    const std::string iv_hash = load_iv(ri);
    b.part_i =
        std::make_unique<IVectorEmbedder>(b.ubm.get(), b.tv.get(), iv_hash);
    const std::string sp = ctx.paths.NnetPath("s", hs);
    add_input(sp);
    b.sv = std::make_unique<SVectorModel>(LoadSVector(sp));
    b.part_s = std::make_unique<SVectorEmbedder>(b.sv.get(), HashHex(sp));
    b.embedder =
        std::make_unique<ConcatEmbedder>(b.part_i.get(), b.part_s.get());
  } else {
    throw ConfigError("unknown embedding kind '" + kind +
                      "'; kinds: i, d, s, is, concat");
  }
  return b;
}

EmbeddingSet LoadBaseEmbeddings(const StepContext &ctx,
                                const std::string &kind, int dim,
                                Subset subset, const InputFn &add_input) {
  if (kind == "concat") {
    const int ri = KindDim(ctx.cfg, "i");
    const int hs = KindDim(ctx.cfg, "s");
    if (ri + hs != dim) {
      throw ConfigError("concat dim " + std::to_string(dim) +
                        " does not split into i + s under this config");
    }
    const std::string pi = ctx.paths.EmbPath("i", ri, subset);
    const std::string ps = ctx.paths.EmbPath("s", hs, subset);
    add_input(pi);
    add_input(ps);
    EmbeddingSet si = ReadEmbeddings(pi);
    EmbeddingSet ss = ReadEmbeddings(ps);
    EmbeddingSet out;
    out.kind = "concat";
    out.model_hash = HashHex(pi) + "+" + HashHex(ps);
    out.dim = si.dim + ss.dim;
    for (const std::string &id : si.ids) {
      Vec v(si.dim + ss.dim);
      v << si.Get(id), ss.Get(id);
      out.Add(id, std::move(v));
    }
    return out;
  }
  const std::string path = ctx.paths.EmbPath(kind, dim, subset);
  add_input(path);
  EmbeddingSet set = ReadEmbeddings(path);
  if (set.dim != dim) {
    throw ArtifactError("embeddings in " + path + " have dim " +
                        std::to_string(set.dim) + ", expected " +
                        std::to_string(dim));
  }
  set.kind = kind;
  set.model_hash = HashHex(path);
  return set;
}

std::vector<int> DimsOrDefault(const StepContext &ctx,
                               const std::string &kind,
                               const std::vector<int> &dims) {
  if (!dims.empty()) return dims;
  return {KindDim(ctx.cfg, kind)};
}

void AppendProbeCsv(const std::string &path,
                    const std::vector<ProbeReport> &rows) {
  fs::create_directories(fs::path(path).parent_path());
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream os(path, std::ios::binary | std::ios::app);
  if (!os) throw ArtifactError("cannot append to " + path);
  if (fresh) os << "task,kind,dim,accuracy,baseline,n_train,n_test,seed\n";
  char num[48];
  for (const ProbeReport &r : rows) {
    os << r.task << ',' << r.kind << ',' << r.dim << ',';
    std::snprintf(num, sizeof(num), "%.9g", r.accuracy);
    os << num << ',';
    std::snprintf(num, sizeof(num), "%.9g", r.baseline);
    os << num << ',' << r.n_train << ',' << r.n_test << ',' << r.seed
       << "\n";
  }
  if (!os) throw ArtifactError("write failed: " + path);
}

}  // namespace

void StepCorpusGen(const StepContext &ctx) {
  StepGuard g(ctx, "corpus-gen");
  CorpusConfig cc = ctx.cfg.corpus;
  cc.seed = ctx.seed;
  GenerateCorpus(cc, ctx.paths.CorpusDir());
  g.Output(ctx.paths.ManifestPath());
  g.Commit();
}

void StepUbmTrain(const StepContext &ctx) {
  StepGuard g(ctx, "ubm-train");
  g.Input(ctx.paths.ManifestPath());
  const Manifest manifest = LoadManifestFor(ctx);
  FeatureStore store(ctx.paths.CorpusDir(), &manifest);
  const auto features = BkgFeatures(&store);
  Rng rng = Rng(ctx.seed).Substream("ubm");
  GmmUbm ubm = TrainUbm(features, ctx.cfg.ubm, &rng);
  fs::create_directories(ctx.paths.ModelsDir());
  SaveUbm(ubm, ctx.paths.UbmPath());
  g.Output(ctx.paths.UbmPath());
  g.Commit();
}

void StepTvTrain(const StepContext &ctx) {
  StepGuard g(ctx, "tv-train");
  g.Input(ctx.paths.ManifestPath());
  g.Input(ctx.paths.UbmPath());
  const Manifest manifest = LoadManifestFor(ctx);
  FeatureStore store(ctx.paths.CorpusDir(), &manifest);
  const GmmUbm ubm = LoadUbm(ctx.paths.UbmPath());
  std::vector<SuffStats> stats;
  for (const UttMeta *u : manifest.InSubset(Subset::kBkg)) {
    stats.push_back(AccumulateStats(ubm, store.Get(u->utt_id)));
  }
  Rng rng = Rng(ctx.seed).Substream("tv");
  TvModel tv = TrainTv(ubm, stats, ctx.cfg.tv, &rng);
  fs::create_directories(ctx.paths.ModelsDir());
  const std::string path = ctx.paths.TvPath(ctx.cfg.tv.rank);
  SaveTv(tv, path);
  g.Output(path);
  g.Commit();
}

void StepNnetTrain(const StepContext &ctx, const std::string &kind) {
  StepGuard g(ctx, kind + "vector-train");
  g.Input(ctx.paths.ManifestPath());
  const Manifest manifest = LoadManifestFor(ctx);
  FeatureStore store(ctx.paths.CorpusDir(), &manifest);
  fs::create_directories(ctx.paths.ModelsDir());
  if (kind == "d") {
    DVectorModel model = TrainDVector(
        &store, ctx.cfg.dvector, Rng(ctx.seed).Substream("nnet/dvector"));
    const std::string path = ctx.paths.NnetPath("d", model.EmbeddingDim());
    SaveDVector(model, path);
    g.Output(path);
  } else if (kind == "s") {
    SVectorModel model = TrainSVector(
        &store, ctx.cfg.svector, Rng(ctx.seed).Substream("nnet/svector"));
    const std::string path = ctx.paths.NnetPath("s", model.EmbeddingDim());
    SaveSVector(model, path);
    g.Output(path);
  } else if (kind == "is") {
    const std::string iv_path =
        ctx.paths.EmbPath("i", ctx.cfg.tv.rank, Subset::kBkg);
    g.Input(iv_path);
    EmbeddingSet ivecs = ReadEmbeddings(iv_path);
    IsVectorModel model =
        TrainIsVector(&store, ivecs, ctx.cfg.isvector,
                      Rng(ctx.seed).Substream("nnet/isvector"));
    const std::string path = ctx.paths.NnetPath("is", model.EmbeddingDim());
    SaveIsVector(model, path);
    g.Output(path);
  } else {
    throw ConfigError("unknown trainable kind '" + kind +
                      "'; kinds: d, s, is");
  }
  g.Commit();
}

void StepExtract(const StepContext &ctx, const std::string &kind,
                 Subset subset) {
  if (kind == "concat") {
    throw ConfigError(
        "concat embeddings are assembled from the i and s files; extract "
        "those instead");
  }
  StepGuard g(ctx, kind + "vector-extract");
  g.Input(ctx.paths.ManifestPath());
  const Manifest manifest = LoadManifestFor(ctx);
  FeatureStore store(ctx.paths.CorpusDir(), &manifest);
  const int dim = KindDim(ctx.cfg, kind);
  EmbedderBundle bundle = MakeEmbedder(
      ctx, kind, dim, [&](const std::string &p) { g.Input(p); });
  EmbeddingSet set = EmbedSubset(*bundle.embedder, &store, subset, ctx.jobs);
  fs::create_directories(ctx.paths.EmbeddingsDir());
  const std::string path = ctx.paths.EmbPath(kind, set.dim, subset);
  WriteEmbeddings(set, path);
  g.Output(path);
  g.Commit();
}

void StepTrialsGen(const StepContext &ctx) {
  StepGuard g(ctx, "trials-gen");
  g.Input(ctx.paths.ManifestPath());
  const Manifest manifest = LoadManifestFor(ctx);
  Rng rng = Rng(ctx.seed).Substream("trials");
  const std::vector<Trial> trials = GenTrials(manifest, ctx.cfg.trials, &rng);
  fs::create_directories(ctx.paths.TrialsDir());
  WriteTrials(ctx.paths.TrialsPath(), trials);
  g.Output(ctx.paths.TrialsPath());
  g.Commit();
}

void StepTdsvScore(const StepContext &ctx, const std::string &kind,
                   const std::vector<int> &dims) {
  StepGuard g(ctx, "tdsv-score");
  g.Input(ctx.paths.ManifestPath());
  g.Input(ctx.paths.TrialsPath());
  const Manifest manifest = LoadManifestFor(ctx);
  const std::vector<Trial> trials =
      ReadTrials(ctx.paths.TrialsPath(), &manifest);
  for (int dim : DimsOrDefault(ctx, kind, dims)) {
    EmbeddingSet base = LoadBaseEmbeddings(
        ctx, kind, dim, Subset::kEval,
        [&](const std::string &p) { g.Input(p); });
    const std::vector<double> scores = ScoreTrials(trials, base);
    const std::string score_path = ctx.paths.ScoresPath(kind, dim);
    WriteScores(score_path, trials, scores);
    g.Output(score_path);

    const auto eers = EvalConditions(trials, scores);
    json out;
    out["kind"] = kind;
    out["dim"] = dim;
    json conds = json::object();
    for (const auto &[cond, r] : eers) {
      json row;
      row["eer"] = r.eer;
      row["threshold"] = r.threshold;
      row["n_target"] = r.n_target;
      row["n_impostor"] = r.n_impostor;
      conds[TrialConditionName(cond)] = row;
    }
    out["conditions"] = conds;
    const std::string eer_path = ctx.paths.EerJsonPath(kind, dim);
    {
      std::ofstream os(eer_path, std::ios::binary | std::ios::trunc);
      if (!os) throw ArtifactError("cannot write " + eer_path);
      os << out.dump(2) << "\n";
    }
    g.Output(eer_path);
  }
  g.Commit();
}

std::vector<ProbeReport> StepProbeRun(const StepContext &ctx,
                                      const std::vector<ProbeTask> &tasks,
                                      const std::string &kind,
                                      const std::vector<int> &dims) {
  StepGuard g(ctx, "probe-run");
  g.Input(ctx.paths.ManifestPath());
  const Manifest manifest = LoadManifestFor(ctx);
  FeatureStore store(ctx.paths.CorpusDir(), &manifest);
  store.Preload(Subset::kEval);

  std::vector<ProbeReport> reports;
  for (int dim : DimsOrDefault(ctx, kind, dims)) {
    EmbedderBundle bundle = MakeEmbedder(
        ctx, kind, dim, [&](const std::string &p) { g.Input(p); });
    const EmbeddingSet base = LoadBaseEmbeddings(
        ctx, kind, dim, Subset::kEval,
        [&](const std::string &p) { g.Input(p); });

    std::vector<ProbeReport> slot(tasks.size());
    auto run_task = [&](size_t ti) {
      const ProbeTask task = tasks[ti];
      Rng task_rng =
          Rng(ctx.seed).Substream(std::string("probe/") + ProbeTaskName(task));
      Rng build_rng = task_rng.Substream("build");
      ProbeDataset ds = BuildTaskDataset(task, &store, bundle.embedder.get(),
                                         base, ctx.cfg.probe, &build_rng);
      ProbeReport rep;
      if (task == ProbeTask::kTerm) {
        TermModel tm =
            TrainTermProbes(ds, ctx.cfg.probe, task_rng.Substream("train"));
        rep = EvalTermProbes(tm, ds, ctx.cfg.probe.term_strict);
      } else {
        Mlp probe = TrainProbe(ds, ctx.cfg.probe, task_rng.Substream("train"));
        rep = EvalProbe(probe, ds);
      }
      rep.kind = kind;
      rep.dim = dim;  // embedding dim, not the probe input width
      rep.seed = ctx.seed;
      slot[ti] = rep;
    };
    if (ctx.jobs > 1 && tasks.size() > 1) {
      std::atomic<size_t> next{0};
      std::mutex err_mu;
      std::exception_ptr err;
      auto worker = [&] {
        for (;;) {
          const size_t ti = next.fetch_add(1);
          if (ti >= tasks.size()) return;
          try {
            run_task(ti);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!err) err = std::current_exception();
          }
        }
      };
      std::vector<std::thread> pool;
      const int n =
          std::min<int>(ctx.jobs, static_cast<int>(tasks.size()));
      for (int j = 0; j < n; ++j) pool.emplace_back(worker);
      for (auto &th : pool) th.join();
      if (err) std::rethrow_exception(err);
    } else {
      for (size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
    }
    reports.insert(reports.end(), slot.begin(), slot.end());
  }
  AppendProbeCsv(ctx.paths.ProbeCsvPath(), reports);
  g.Output(ctx.paths.ProbeCsvPath());
  g.Commit();
  return reports;
}

namespace {

std::vector<std::string> SplitCsvLine(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void StepReport(const StepContext &ctx) {
  StepGuard g(ctx, "report");
  json summary;

  // Probing rows: last run of each (task, kind, dim) wins.
  std::map<std::tuple<std::string, std::string, int>, json> probe_rows;
  const std::string csv_path = ctx.paths.ProbeCsvPath();
  if (fs::exists(csv_path)) {
    g.Input(csv_path);
    std::ifstream is(csv_path);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      const auto f = SplitCsvLine(line);
      if (f.size() != 8) {
        throw ArtifactError("malformed row in " + csv_path + ": " + line);
      }
      json row;
      row["task"] = f[0];
      row["kind"] = f[1];
      row["dim"] = std::stoi(f[2]);
      row["accuracy"] = std::stod(f[3]);
      row["baseline"] = std::stod(f[4]);
      row["n_train"] = std::stoi(f[5]);
      row["n_test"] = std::stoi(f[6]);
      row["seed"] = std::stoull(f[7]);
      probe_rows[{f[0], f[1], std::stoi(f[2])}] = row;
    }
  }
  summary["probing"] = json::array();
  for (const auto &[key, row] : probe_rows) summary["probing"].push_back(row);

  // TDSV results: every eer_*.json under trials/.
  summary["tdsv"] = json::array();
  std::vector<std::string> eer_files;
  if (fs::exists(ctx.paths.TrialsDir())) {
    for (const auto &entry :
         fs::directory_iterator(ctx.paths.TrialsDir())) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("eer_", 0) == 0 &&
          entry.path().extension() == ".json") {
        eer_files.push_back(entry.path().string());
      }
    }
  }
  std::sort(eer_files.begin(), eer_files.end());
  for (const std::string &path : eer_files) {
    g.Input(path);
    std::ifstream is(path);
    try {
      summary["tdsv"].push_back(json::parse(is));
    } catch (const json::exception &e) {
      throw ArtifactError("bad EER file " + path + ": " + e.what());
    }
  }
  if (summary["probing"].empty() && summary["tdsv"].empty()) {
    throw ConfigError("report: no probing CSV and no EER results under " +
                      ctx.paths.out);
  }

  // Published cosine-scoring numbers on rsr2015 part 1, for orientation
  // only; the synthetic fixture is not comparable in absolute terms.
  summary["reference"] = {
      {"dataset", "rsr2015 part 1"},
      {"metric", "eer_percent"},
      {"note",
       "published cosine-similarity results for context; fixture numbers "
       "are not comparable in absolute terms"},
      {"rows",
       json::array(
           {{{"kind", "i"}, {"I", 0.35}, {"II", 1.13}, {"III", 0.06}},
            {{"kind", "concat"}, {"I", 0.28}, {"II", 1.13}, {"III", 0.03}},
            {{"kind", "is"}, {"I", 0.17}, {"II", 1.98}, {"III", 0.03}},
            {{"kind", "is_blstm"},
             {"I", 0.11},
             {"II", 1.72},
             {"III", 0.02}}})}};

  fs::create_directories(ctx.paths.ReportDir());
  std::ofstream os(ctx.paths.SummaryJsonPath(),
                   std::ios::binary | std::ios::trunc);
  if (!os) throw ArtifactError("cannot write " + ctx.paths.SummaryJsonPath());
  os << summary.dump(2) << "\n";
  os.close();
  g.Output(ctx.paths.SummaryJsonPath());
  g.Commit();
}

}  // namespace embedprobe
