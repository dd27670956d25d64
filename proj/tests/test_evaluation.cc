// tests/test_evaluation.cc
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "embedprobe/common.h"
#include "embedprobe/corpus.h"
#include "embedprobe/embeddings.h"
#include "embedprobe/evaluation.h"
#include "embedprobe/rng.h"

using namespace embedprobe;
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

// Brute-force EER oracle: rates by direct counting at every pooled
// threshold (acceptance is score >= t), linear interpolation across the
// first segment where FAR falls to or below FRR.
double BruteForceEer(const std::vector<double> &tar,
                     const std::vector<double> &imp) {
  std::vector<double> thr;
  thr.insert(thr.end(), tar.begin(), tar.end());
  thr.insert(thr.end(), imp.begin(), imp.end());
  std::sort(thr.begin(), thr.end());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  thr.push_back(std::numeric_limits<double>::infinity());
  auto rates = [&](double t, double *far, double *frr) {
    long fa = 0, fr = 0;
    for (double s : imp) {
      if (s >= t) ++fa;
    }
    for (double s : tar) {
      if (s < t) ++fr;
    }
    *far = double(fa) / double(imp.size());
    *frr = double(fr) / double(tar.size());
  };
  double far0, frr0;
  rates(thr[0], &far0, &frr0);
  for (size_t i = 0; i + 1 < thr.size(); ++i) {
    double far1, frr1;
    rates(thr[i + 1], &far1, &frr1);
    if (far1 <= frr1) {
      const double denom = (frr1 - frr0) - (far1 - far0);
      if (denom <= 0.0) return far0;
      const double alpha = (far0 - frr0) / denom;
      return far0 + alpha * (far1 - far0);
    }
    far0 = far1;
    frr0 = frr1;
  }
  return -1.0;  // unreachable for nonempty inputs
}

struct TrialsFixture {
  TempDir dir{"embedprobe_eval_fixture"};
  Manifest manifest;
  EmbeddingSet embeddings;

  TrialsFixture() {
    CorpusConfig cc;
    cc.feature_dim = 5;
    cc.n_bkg_speakers = 2;
    cc.n_dev_speakers = 0;
    cc.n_eval_speakers = 4;
    cc.n_sentences = 3;
    cc.vocab_size = 8;
    cc.sessions_per_sentence = 4;
    cc.n_channels = 2;
    cc.word_len_min = 4;
    cc.word_len_max = 6;
    cc.words_per_sentence_min = 2;
    cc.words_per_sentence_max = 2;
    cc.seed = 17;
    manifest = GenerateCorpus(cc, dir.str());

    embeddings.kind = "test";
    embeddings.model_hash = "h";
    embeddings.dim = 3;
    Rng rng(4);
    for (const UttMeta *u : manifest.InSubset(Subset::kEval)) {
      Vec v(3);
      for (int k = 0; k < 3; ++k) v(k) = rng.Gaussian() + 0.5;
      embeddings.Add(u->utt_id, v);
    }
  }
};

TrialsFixture &Fix() {
  static TrialsFixture f;
  return f;
}

std::string TrialKey(const Trial &t) {
  std::string k = std::string(TrialConditionName(t.condition)) + "|";
  for (const std::string &e : t.enroll_utt_ids) k += e + ",";
  return k + "|" + t.test_utt_id;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cosine scoring and enrollment.

TEST_CASE("cosine score basics: identical, orthogonal, opposite") {
  Vec a(3), b(3);
  a << 1.0, 2.0, -1.0;
  CHECK(CosineScore(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  b << 2.0, -1.0, 0.0;  // orthogonal to a
  CHECK(CosineScore(a, b) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(CosineScore(a, Vec(-a)) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("cosine score is scale invariant and rejects degenerate input") {
  Rng rng(3);
  Vec a(6), b(6);
  for (int i = 0; i < 6; ++i) {
    a(i) = rng.Gaussian();
    b(i) = rng.Gaussian();
  }
  const double base = CosineScore(a, b);
  CHECK(std::abs(CosineScore(Vec(3.7 * a), Vec(0.002 * b)) - base) < 1e-12);
  CHECK(std::abs(CosineScore(Vec(1e6 * a), b) - base) < 1e-12);

  Vec short_v(3);
  short_v << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS((void)CosineScore(a, short_v), ConfigError);
  CHECK_THROWS_AS((void)CosineScore(a, Vec(Vec::Zero(6))), NumericError);
}

TEST_CASE("enrollment is the normalized mean of the embeddings") {
  Vec a(3), b(3);
  a << 3.0, 0.0, 4.0;
  b << 0.0, 6.0, 0.0;

  const Vec single = Enroll({&a});
  CHECK(single.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((single - a / 5.0).lpNorm<Eigen::Infinity>() < 1e-15);

  // Repeating one embedding changes nothing.
  const Vec repeated = Enroll({&a, &a, &a});
  CHECK((repeated - single).lpNorm<Eigen::Infinity>() < 1e-15);

  // Two embeddings: the normalized midpoint, written out by hand.
  const Vec pair = Enroll({&a, &b});
  Vec mid = (a + b) / 2.0;
  mid /= mid.norm();
  CHECK((pair - mid).lpNorm<Eigen::Infinity>() < 1e-15);

  CHECK_THROWS_AS((void)Enroll(std::vector<const Vec *>{}), ConfigError);
  Vec wrong(2);
  wrong << 1.0, 1.0;
  CHECK_THROWS_AS((void)Enroll({&a, &wrong}), ConfigError);
  const Vec neg = -a;
  CHECK_THROWS_AS((void)Enroll({&a, &neg}), NumericError);
}

// ---------------------------------------------------------------------------
// EER.

TEST_CASE("EER endpoints: perfect separation and total overlap") {
  const EerResult perfect = ComputeEer({1.0, 0.9}, {0.1, 0.2});
  CHECK(perfect.eer == 0.0);
  CHECK(perfect.threshold == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(perfect.n_target == 2);
  CHECK(perfect.n_impostor == 2);

  const EerResult flat = ComputeEer({0.5, 0.5}, {0.5, 0.5});
  CHECK(flat.eer == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS((void)ComputeEer({}, {0.1}), ConfigError);
  CHECK_THROWS_AS((void)ComputeEer({0.1}, {}), ConfigError);
}

TEST_CASE("EER equals the brute-force sweep on 1000+1000 random scores") {
  Rng rng(71);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> tar(1000), imp(1000);
    // Overlapping distributions so the crossing is interior.
    for (double &s : tar) s = rng.Gaussian() + 1.0;
    for (double &s : imp) s = rng.Gaussian();
    const EerResult r = ComputeEer(tar, imp);
    const double oracle = BruteForceEer(tar, imp);
    CHECK(std::abs(r.eer - oracle) < 1e-12);
    CHECK(r.eer > 0.0);
    CHECK(r.eer < 1.0);
  }
}

TEST_CASE("EER is invariant under monotone transforms and side swap "
          "with negation") {
  Rng rng(72);
  std::vector<double> tar(300), imp(300);
  for (double &s : tar) s = 0.8 * rng.Gaussian() + 0.7;
  for (double &s : imp) s = rng.Gaussian();
  const double base = ComputeEer(tar, imp).eer;

  auto mapped = [&](auto f) {
    std::vector<double> t2 = tar, i2 = imp;
    for (double &s : t2) s = f(s);
    for (double &s : i2) s = f(s);
    return ComputeEer(t2, i2).eer;
  };
  CHECK(std::abs(mapped([](double s) { return std::exp(s); }) - base) <
        1e-12);
  CHECK(std::abs(mapped([](double s) { return 2.5 * s + 3.0; }) - base) <
        1e-12);

  // Swapping the roles and negating every score mirrors the ROC.
  std::vector<double> neg_t = imp, neg_i = tar;
  for (double &s : neg_t) s = -s;
  for (double &s : neg_i) s = -s;
  CHECK(std::abs(ComputeEer(neg_t, neg_i).eer - base) < 1e-12);
}

// ---------------------------------------------------------------------------
// Trial generation.

TEST_CASE("trials: counts, predicates and enrollment hygiene") {
  const TrialsFixture &fx = Fix();
  TrialsConfig cfg;
  cfg.enroll_sessions = 3;
  cfg.n_per_condition = 10;
  Rng rng(81);
  const std::vector<Trial> trials = GenTrials(fx.manifest, cfg, &rng);

  std::map<TrialCondition, int> counts;
  for (const Trial &t : trials) counts[t.condition]++;
  // 4 speakers x 3 sentences, sessions 3..3 held out: one target test
  // per model.
  CHECK(counts[TrialCondition::kTarget] == 12);
  CHECK(counts[TrialCondition::kI] == 10);
  CHECK(counts[TrialCondition::kII] == 10);
  CHECK(counts[TrialCondition::kIII] == 10);

  for (const Trial &t : trials) {
    REQUIRE(t.enroll_utt_ids.size() == 3);
    const UttMeta &test = fx.manifest.ByUttId(t.test_utt_id);
    // Held-out sessions only ever serve as tests.
    CHECK(test.session >= 3);
    for (const std::string &e : t.enroll_utt_ids) {
      CHECK(e != t.test_utt_id);
      const UttMeta &em = fx.manifest.ByUttId(e);
      CHECK(em.speaker_id == t.enroll_speaker);
      CHECK(em.sentence_id == t.enroll_sentence);
      CHECK(em.session < 3);
    }
    const bool same_spk = test.speaker_id == t.enroll_speaker;
    const bool same_sent = test.sentence_id == t.enroll_sentence;
    switch (t.condition) {
      case TrialCondition::kTarget:
        CHECK(same_spk);
        CHECK(same_sent);
        break;
      case TrialCondition::kI:
        CHECK(same_spk);
        CHECK(!same_sent);
        break;
      case TrialCondition::kII:
        CHECK(!same_spk);
        CHECK(same_sent);
        break;
      case TrialCondition::kIII:
        CHECK(!same_spk);
        CHECK(!same_sent);
        break;
    }
  }
}

TEST_CASE("trials are deterministic in the rng and fail on dry pools") {
  const TrialsFixture &fx = Fix();
  TrialsConfig cfg;
  cfg.n_per_condition = 10;
  Rng r1(82), r2(82), r3(83);
  const auto a = GenTrials(fx.manifest, cfg, &r1);
  const auto b = GenTrials(fx.manifest, cfg, &r2);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(TrialKey(a[i]) == TrialKey(b[i]));
  }
  // A different seed moves at least one impostor pick.
  const auto c = GenTrials(fx.manifest, cfg, &r3);
  bool any_diff = false;
  for (size_t i = 0; i < a.size(); ++i) {
    any_diff = any_diff || TrialKey(a[i]) != TrialKey(c[i]);
  }
  CHECK(any_diff);

  TrialsConfig greedy;
  greedy.n_per_condition = 100000;
  Rng r4(84);
  CHECK_THROWS_AS((void)GenTrials(fx.manifest, greedy, &r4), ConfigError);

  // Enrollment eating every session leaves no test pool.
  TrialsConfig all_enroll;
  all_enroll.enroll_sessions = 4;
  all_enroll.n_per_condition = 5;
  Rng r5(85);
  CHECK_THROWS_AS((void)GenTrials(fx.manifest, all_enroll, &r5), ConfigError);
}

TEST_CASE("trial scoring matches enroll-then-cosine done by hand") {
  const TrialsFixture &fx = Fix();
  TrialsConfig cfg;
  cfg.n_per_condition = 8;
  Rng rng(86);
  const std::vector<Trial> trials = GenTrials(fx.manifest, cfg, &rng);
  const std::vector<double> scores = ScoreTrials(trials, fx.embeddings);
  REQUIRE(scores.size() == trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    std::vector<const Vec *> enroll;
    for (const std::string &e : trials[i].enroll_utt_ids) {
      enroll.push_back(&fx.embeddings.Get(e));
    }
    const Vec model = Enroll(enroll);
    const double expect =
        CosineScore(model, fx.embeddings.Get(trials[i].test_utt_id));
    CHECK(scores[i] == expect);
  }
}

TEST_CASE("per-condition EERs pool the target scores") {
  const TrialsFixture &fx = Fix();
  TrialsConfig cfg;
  cfg.n_per_condition = 8;
  Rng rng(87);
  const std::vector<Trial> trials = GenTrials(fx.manifest, cfg, &rng);
  const std::vector<double> scores = ScoreTrials(trials, fx.embeddings);
  const auto by_cond = EvalConditions(trials, scores);
  REQUIRE(by_cond.size() == 3);

  std::vector<double> targets;
  std::map<TrialCondition, std::vector<double>> impostors;
  for (size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].condition == TrialCondition::kTarget) {
      targets.push_back(scores[i]);
    } else {
      impostors[trials[i].condition].push_back(scores[i]);
    }
  }
  for (const auto &[cond, result] : by_cond) {
    CHECK(result.n_target == 12);
    CHECK(result.n_impostor == 8);
    const EerResult direct = ComputeEer(targets, impostors.at(cond));
    CHECK(result.eer == direct.eer);
    CHECK(result.condition == cond);
  }

  CHECK_THROWS_AS((void)EvalConditions(trials, std::vector<double>(3, 0.5)),
                  ConfigError);
}

// ---------------------------------------------------------------------------
// Trial and score files.

TEST_CASE("trial files roundtrip and are validated against the manifest") {
  const TrialsFixture &fx = Fix();
  TempDir dir("embedprobe_trials_io");
  TrialsConfig cfg;
  cfg.n_per_condition = 6;
  Rng rng(88);
  const std::vector<Trial> trials = GenTrials(fx.manifest, cfg, &rng);
  const std::string path = dir.str() + "/trials.tsv";
  WriteTrials(path, trials);

  const std::vector<Trial> plain = ReadTrials(path);
  REQUIRE(plain.size() == trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    CHECK(plain[i].condition == trials[i].condition);
    CHECK(plain[i].enroll_utt_ids == trials[i].enroll_utt_ids);
    CHECK(plain[i].test_utt_id == trials[i].test_utt_id);
  }

  // With the manifest the speaker and sentence come back and every
  // condition predicate is rechecked.
  const std::vector<Trial> checked = ReadTrials(path, &fx.manifest);
  for (size_t i = 0; i < trials.size(); ++i) {
    CHECK(checked[i].enroll_speaker == trials[i].enroll_speaker);
    CHECK(checked[i].enroll_sentence == trials[i].enroll_sentence);
  }

  CHECK_THROWS_AS((void)ReadTrials(dir.str() + "/missing.tsv"),
                  ArtifactError);

  const std::string bad = dir.str() + "/bad.tsv";
  {
    std::ofstream os(bad);
    os << "not a trial line\n";
  }
  CHECK_THROWS_AS((void)ReadTrials(bad), ArtifactError);

  // A trial whose label contradicts the manifest is rejected there.
  std::vector<Trial> lied = trials;
  for (Trial &t : lied) {
    if (t.condition == TrialCondition::kTarget) {
      t.condition = TrialCondition::kII;
    }
  }
  const std::string lied_path = dir.str() + "/lied.tsv";
  WriteTrials(lied_path, lied);
  CHECK_NOTHROW((void)ReadTrials(lied_path));  // no manifest, no check
  CHECK_THROWS_AS((void)ReadTrials(lied_path, &fx.manifest), ArtifactError);

  // A test utterance hiding in its own enroll set is always rejected.
  const std::string selfie = dir.str() + "/selfie.tsv";
  {
    std::ofstream os(selfie);
    os << "target\tu1,u2\tu1\n";
  }
  CHECK_THROWS_AS((void)ReadTrials(selfie), ArtifactError);
}

TEST_CASE("score files carry 9 significant digits") {
  const TrialsFixture &fx = Fix();
  TempDir dir("embedprobe_scores_io");
  TrialsConfig cfg;
  cfg.n_per_condition = 6;
  Rng rng(89);
  const std::vector<Trial> trials = GenTrials(fx.manifest, cfg, &rng);
  const std::vector<double> scores = ScoreTrials(trials, fx.embeddings);
  const std::string path = dir.str() + "/scores.tsv";
  WriteScores(path, trials, scores);

  std::vector<Trial> back_trials;
  std::vector<double> back_scores;
  ReadScores(path, &back_trials, &back_scores);
  REQUIRE(back_trials.size() == trials.size());
  REQUIRE(back_scores.size() == scores.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    CHECK(back_trials[i].condition == trials[i].condition);
    CHECK(back_trials[i].test_utt_id == trials[i].test_utt_id);
    CHECK(back_trials[i].enroll_utt_ids == trials[i].enroll_utt_ids);
    // %.9g keeps nine significant digits.
    CHECK(back_scores[i] ==
          doctest::Approx(scores[i]).epsilon(1e-8));
  }

  CHECK_THROWS_AS(
      WriteScores(dir.str() + "/bad.tsv", trials, std::vector<double>(2)),
      ConfigError);
  CHECK_THROWS_AS(ReadScores(dir.str() + "/missing.tsv", &back_trials,
                             &back_scores),
                  ArtifactError);

  const std::string mangled = dir.str() + "/mangled.tsv";
  {
    std::ofstream os(mangled);
    os << "target\tu1,u2\tu3\tnot_a_number\n";
  }
  CHECK_THROWS_AS(ReadScores(mangled, &back_trials, &back_scores),
                  ArtifactError);
}

TEST_CASE("condition names roundtrip") {
  for (TrialCondition c : {TrialCondition::kTarget, TrialCondition::kI,
                           TrialCondition::kII, TrialCondition::kIII}) {
    CHECK(TrialConditionFromName(TrialConditionName(c)) == c);
  }
  CHECK_THROWS_AS((void)TrialConditionFromName("IV"), ArtifactError);
}
