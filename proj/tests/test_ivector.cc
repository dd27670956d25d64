// tests/test_ivector.cc
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
// The closed-form extraction is validated against a brute-force
// grid-plus-refinement maximization of the exact posterior log-density,
// and subspace training against principal angles from an SVD oracle.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "embedprobe/common.h"
#include "embedprobe/gmm.h"
#include "embedprobe/ivector.h"
#include "embedprobe/rng.h"

using namespace embedprobe;

namespace {

GmmUbm MakeUbm(int c, int d, Rng *rng) {
  GmmUbm ubm;
  ubm.weights = Vec::Constant(c, 1.0 / c);
  ubm.means = Mat(c, d);
  ubm.vars = Mat(c, d);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < d; ++j) {
      ubm.means(i, j) = rng->Gaussian();
      ubm.vars(i, j) = 0.5 + rng->Uniform();
    }
  ubm.ComputeDerived();
  return ubm;
}

SuffStats RandomStats(const std::string &id, int c, int d, Rng *rng,
                      double count_scale = 10.0) {
  SuffStats s;
  s.utt_id = id;
  s.n = Vec(c);
  s.f = Mat(c, d);
  for (int i = 0; i < c; ++i) {
    s.n[i] = count_scale * (0.2 + rng->Uniform());
    for (int j = 0; j < d; ++j) s.f(i, j) = rng->Gaussian();
  }
  return s;
}

// Exact posterior log-density of w (up to constants):
//   -0.5 w'w + w' T' Sigma^-1 f - 0.5 w' (sum_c n_c T_c' Sigma_c^-1 T_c) w
double PosteriorLogDensity(const GmmUbm &ubm, const TvModel &tv,
                           const SuffStats &s, const Vec &w) {
  const int c = ubm.NumComponents(), d = ubm.Dim();
  double val = -0.5 * w.squaredNorm();
  for (int i = 0; i < c; ++i) {
    const Mat tc = tv.t.block(i * d, 0, d, tv.Rank());
    const Vec inv_var = ubm.vars.row(i).transpose().cwiseInverse();
    const Vec proj = tc * w;  // D
    val += proj.dot(inv_var.cwiseProduct(s.f.row(i).transpose()));
    val -= 0.5 * s.n[i] * proj.dot(inv_var.cwiseProduct(proj));
  }
  return val;
}

// Coordinate-wise grid search with successive refinement. Knows nothing
// about the closed form; only evaluates the density.
Vec GridMaximize(const GmmUbm &ubm, const TvModel &tv, const SuffStats &s,
                 int rank) {
  Vec best = Vec::Zero(rank);
  double step = 1.0;
  double best_val = PosteriorLogDensity(ubm, tv, s, best);
  for (int round = 0; round < 60; ++round) {
    bool improved = false;
    for (int r = 0; r < rank; ++r) {
      for (double delta : {-step, step}) {
        Vec cand = best;
        cand[r] += delta;
        const double v = PosteriorLogDensity(ubm, tv, s, cand);
        if (v > best_val) {
          best_val = v;
          best = cand;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
    if (step < 1e-9) break;
  }
  return best;
}

// Largest principal angle (degrees) between the column spans of a and b,
// via orthonormal bases and the singular values of their product.
double MaxPrincipalAngleDeg(const Mat &a, const Mat &b) {
  using EMat = Eigen::MatrixXd;
  Eigen::HouseholderQR<EMat> qa(a), qb(b);
  const EMat qa_thin =
      qa.householderQ() * EMat::Identity(a.rows(), a.cols());
  const EMat qb_thin =
      qb.householderQ() * EMat::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<EMat> svd(qa_thin.transpose() * qb_thin);
  const double smin =
      std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(smin) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("zero stats give the prior mean") {
  Rng rng(41);
  const GmmUbm ubm = MakeUbm(2, 3, &rng);
  TvModel tv;
  tv.components = 2;
  tv.dim = 3;
  tv.t = Mat::Zero(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) tv.t(i, j) = rng.Gaussian();

  SuffStats s;
  s.utt_id = "u";
  s.n = Vec::Constant(2, 5.0);
  s.f = Mat::Zero(2, 3);

  const IVectorExtractor ex(ubm, tv);
  CHECK(ex.Extract(s).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("zero subspace gives zero i-vector") {
  Rng rng(42);
  const GmmUbm ubm = MakeUbm(2, 3, &rng);
  TvModel tv;
  tv.components = 2;
  tv.dim = 3;
  tv.t = Mat::Zero(6, 2);
  const SuffStats s = RandomStats("u", 2, 3, &rng);
  const IVectorExtractor ex(ubm, tv);
  CHECK(ex.Extract(s).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("extraction matches the brute-force posterior maximizer") {
  Rng rng(43);
  const int C = 2, D = 3, R = 2;
  const GmmUbm ubm = MakeUbm(C, D, &rng);
  TvModel tv;
  tv.components = C;
  tv.dim = D;
  tv.t = Mat(C * D, R);
  for (int i = 0; i < C * D; ++i)
    for (int j = 0; j < R; ++j) tv.t(i, j) = rng.Gaussian() * 0.7;

  const IVectorExtractor ex(ubm, tv);
  for (int rep = 0; rep < 5; ++rep) {
    const SuffStats s = RandomStats("u" + std::to_string(rep), C, D, &rng);
    const Vec w = ex.Extract(s);
    const Vec w_oracle = GridMaximize(ubm, tv, s, R);
    CHECK((w - w_oracle).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("posterior covariance is the inverse precision") {
  Rng rng(44);
  const int C = 3, D = 2, R = 2;
  const GmmUbm ubm = MakeUbm(C, D, &rng);
  TvModel tv;
  tv.components = C;
  tv.dim = D;
  tv.t = Mat(C * D, R);
  for (int i = 0; i < C * D; ++i)
    for (int j = 0; j < R; ++j) tv.t(i, j) = rng.Gaussian() * 0.5;
  const IVectorExtractor ex(ubm, tv);
  const SuffStats s = RandomStats("u", C, D, &rng);

  Vec mean;
  Mat cov;
  ex.Posterior(s, &mean, &cov);
  CHECK((mean - ex.Extract(s)).lpNorm<Eigen::Infinity>() < 1e-12);

  // oracle: L from first principles, per component block
  Mat l = Mat::Identity(R, R);
  for (int c = 0; c < C; ++c) {
    const Mat tc = tv.t.block(c * D, 0, D, R);
    const Vec inv_var = ubm.vars.row(c).transpose().cwiseInverse();
    l += s.n[c] * tc.transpose() * inv_var.asDiagonal() * tc;
  }
  CHECK((cov * l - Mat::Identity(R, R)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("shrinkage: scaling stats toward zero shrinks the i-vector") {
  Rng rng(45);
  const GmmUbm ubm = MakeUbm(3, 3, &rng);
  TvModel tv;
  tv.components = 3;
  tv.dim = 3;
  tv.t = Mat(9, 2);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 2; ++j) tv.t(i, j) = rng.Gaussian();
  const IVectorExtractor ex(ubm, tv);

  const SuffStats s = RandomStats("u", 3, 3, &rng);
  const double full = ex.Extract(s).norm();
  REQUIRE(full > 1e-8);
  for (double alpha : {0.5, 0.1}) {
    SuffStats scaled = s;
    scaled.n *= alpha;
    scaled.f *= alpha;
    CHECK(ex.Extract(scaled).norm() < full);
  }
}

TEST_CASE("extraction is linear in the first-order stats at fixed counts") {
  Rng rng(46);
  const GmmUbm ubm = MakeUbm(2, 3, &rng);
  TvModel tv;
  tv.components = 2;
  tv.dim = 3;
  tv.t = Mat(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) tv.t(i, j) = rng.Gaussian();
  const IVectorExtractor ex(ubm, tv);

  SuffStats s1 = RandomStats("u1", 2, 3, &rng);
  SuffStats s2 = s1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) s2.f(i, j) = rng.Gaussian();

  const double a = 0.7, b = -1.3;
  SuffStats mix = s1;
  mix.f = a * s1.f + b * s2.f;
  const Vec lhs = ex.Extract(mix);
  const Vec rhs = a * ex.Extract(s1) + b * ex.Extract(s2);
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("tv training recovers a planted rank-2 subspace") {
  Rng rng(47);
  const int C = 4, D = 5, R = 2;
  const GmmUbm ubm = MakeUbm(C, D, &rng);

  Mat t_true(C * D, R);
  for (int i = 0; i < C * D; ++i)
    for (int j = 0; j < R; ++j) t_true(i, j) = rng.Gaussian();

  // synthesize stats from the model: w ~ N(0,I),
  // F_c = n_c * (T w)_c + small noise
  std::vector<SuffStats> stats;
  for (int u = 0; u < 200; ++u) {
    Vec w(R);
    for (int j = 0; j < R; ++j) w[j] = rng.Gaussian();
    const Vec shift = t_true * w;  // C*D
    SuffStats s;
    s.utt_id = "u" + std::to_string(u);
    s.n = Vec::Constant(C, 50.0);
    s.f = Mat(C, D);
    for (int c = 0; c < C; ++c)
      for (int d = 0; d < D; ++d)
        s.f(c, d) = 50.0 * shift[c * D + d] + 0.05 * rng.Gaussian();
    stats.push_back(std::move(s));
  }

  TvTrainOptions opts;
  opts.rank = R;
  opts.iters = 10;
  Rng train_rng(5);
  const TvModel tv = TrainTv(ubm, stats, opts, &train_rng);
  CHECK(MaxPrincipalAngleDeg(tv.t, t_true) < 5.0);
}

TEST_CASE("tv auxiliary objective is non-decreasing") {
  Rng rng(48);
  const GmmUbm ubm = MakeUbm(3, 3, &rng);
  std::vector<SuffStats> stats;
  for (int u = 0; u < 30; ++u)
    stats.push_back(RandomStats("u" + std::to_string(u), 3, 3, &rng));
  TvTrainOptions opts;
  opts.rank = 2;
  opts.iters = 8;
  Rng train_rng(6);
  std::vector<double> aux;
  TrainTv(ubm, stats, opts, &train_rng, &aux);
  REQUIRE(aux.size() == 8);
  for (size_t i = 1; i < aux.size(); ++i) {
    CHECK(aux[i] - aux[i - 1] >= -1e-6 * std::abs(aux[i - 1]));
  }
}

TEST_CASE("tv training rejects fewer utterances than the rank") {
  Rng rng(49);
  const GmmUbm ubm = MakeUbm(2, 2, &rng);
  std::vector<SuffStats> stats;
  stats.push_back(RandomStats("u0", 2, 2, &rng));
  TvTrainOptions opts;
  opts.rank = 3;
  Rng train_rng(7);
  CHECK_THROWS_AS(TrainTv(ubm, stats, opts, &train_rng), ConfigError);
}

TEST_CASE("tv training is deterministic") {
  Rng rng(50);
  const GmmUbm ubm = MakeUbm(2, 3, &rng);
  std::vector<SuffStats> stats;
  for (int u = 0; u < 10; ++u)
    stats.push_back(RandomStats("u" + std::to_string(u), 2, 3, &rng));
  TvTrainOptions opts;
  opts.rank = 2;
  opts.iters = 3;
  Rng r1(8), r2(8);
  const TvModel t1 = TrainTv(ubm, stats, opts, &r1);
  const TvModel t2 = TrainTv(ubm, stats, opts, &r2);
  CHECK((t1.t - t2.t).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("tv save/load roundtrip") {
  Rng rng(51);
  TvModel tv;
  tv.components = 2;
  tv.dim = 3;
  tv.t = Mat(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) tv.t(i, j) = rng.Gaussian();
  const std::string path =
      (std::filesystem::temp_directory_path() / "test_tv.emdl").string();
  SaveTv(tv, path);
  const TvModel back = LoadTv(path);
  CHECK(back.components == 2);
  CHECK(back.dim == 3);
  CHECK(back.Rank() == 2);
  CHECK((back.t.cast<float>() - tv.t.cast<float>()).norm() == 0.0f);
  std::filesystem::remove(path);
}
