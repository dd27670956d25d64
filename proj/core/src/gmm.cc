// embedprobe/gmm.cc
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

#include "embedprobe/gmm.h"

#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "embedprobe/common.h"
#include "embedprobe/tensor_io.h"

namespace embedprobe {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr int kScoreBlock = 512;  // frames per scoring block
}  // namespace

void GmmUbm::Validate() const {
  const int c = NumComponents();
  if (c < 1 || means.rows() != c || vars.rows() != c ||
      means.cols() != vars.cols()) {
    throw NumericError("gmm: inconsistent parameter shapes");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-10) {
    throw NumericError("gmm: weights do not sum to 1");
  }
  if ((vars.array() <= 0.0).any()) {
    throw NumericError("gmm: non-positive variance");
  }
  if (!AllFinite(means) || !AllFinite(vars) || !AllFinite(weights)) {
    throw NumericError("gmm: non-finite parameters");
  }
}

void GmmUbm::ComputeDerived() {
  Validate();
  const int c = NumComponents();
  inv_vars_ = vars.cwiseInverse();
  mean_inv_vars_ = means.cwiseProduct(inv_vars_);
  mean_sq_inv_ = (means.cwiseProduct(mean_inv_vars_)).rowwise().sum();
  log_const_.resize(c);
  for (int i = 0; i < c; ++i) {
    log_const_(i) = std::log(weights(i)) -
                    0.5 * (Dim() * kLog2Pi +
                           vars.row(i).array().log().sum());
  }
  derived_ready_ = true;
}

Vec GmmUbm::LogComponentDensities(const Vec &frame) const {
  if (!derived_ready_) throw NumericError("gmm: ComputeDerived not called");
  if (frame.size() != Dim()) throw NumericError("gmm: frame dim mismatch");
  // log w_c + log N = const_c - 0.5 (x^2 . iv_c - 2 x . (mu iv)_c + musq_c)
  Vec x2 = frame.cwiseProduct(frame);
  return log_const_ -
         0.5 * (inv_vars_ * x2 - 2.0 * (mean_inv_vars_ * frame) +
                mean_sq_inv_);
}

Mat GmmUbm::LogComponentDensities(const Mat &frames) const {
  if (!derived_ready_) throw NumericError("gmm: ComputeDerived not called");
  if (frames.cols() != Dim()) throw NumericError("gmm: frame dim mismatch");
  Mat x2 = frames.cwiseProduct(frames);
  Mat ll = x2 * inv_vars_.transpose() -
           2.0 * (frames * mean_inv_vars_.transpose());
  ll.rowwise() += mean_sq_inv_.transpose();
  ll *= -0.5;
  ll.rowwise() += log_const_.transpose();
  return ll;
}

double GmmUbm::FrameLogLike(const Vec &frame) const {
  return LogSumExp(LogComponentDensities(frame));
}

Vec GmmUbm::Responsibilities(const Vec &frame) const {
  Vec ll = LogComponentDensities(frame);
  const double lse = LogSumExp(ll);
  return (ll.array() - lse).exp().matrix();
}

Vec GmmUbm::SuperMean() const {
  const int c = NumComponents(), d = Dim();
  Vec out(c * d);
  for (int i = 0; i < c; ++i) out.segment(i * d, d) = means.row(i);
  return out;
}

Vec GmmUbm::SuperInvVar() const {
  const int c = NumComponents(), d = Dim();
  Vec out(c * d);
  for (int i = 0; i < c; ++i)
    out.segment(i * d, d) = vars.row(i).cwiseInverse();
  return out;
}

Vec SuffStats::StackedF() const {
  const int c = NumComponents(), d = Dim();
  Vec out(c * d);
  for (int i = 0; i < c; ++i) out.segment(i * d, d) = f.row(i);
  return out;
}

void SuffStats::Add(const SuffStats &other) {
  if (other.NumComponents() != NumComponents() || other.Dim() != Dim()) {
    throw NumericError("stats: shape mismatch in Add");
  }
  n += other.n;
  f += other.f;
}

SuffStats AccumulateStats(const GmmUbm &ubm, const FeatureMatrix &feat) {
  feat.Validate();
  if (feat.Dim() != ubm.Dim()) {
    throw NumericError("stats: feature dim does not match the UBM");
  }
  const int c = ubm.NumComponents(), d = ubm.Dim();
  SuffStats s;
  s.utt_id = feat.utt_id;
  s.n = Vec::Zero(c);
  s.f = Mat::Zero(c, d);
  const int t = feat.NumFrames();
  for (int start = 0; start < t; start += kScoreBlock) {
    const int b = std::min(kScoreBlock, t - start);
    Mat x = feat.frames.middleRows(start, b).cast<double>();
    Mat ll = ubm.LogComponentDensities(x);  // b x c
    for (int i = 0; i < b; ++i) {
      const double lse = LogSumExp(ll.row(i).transpose());
      ll.row(i) = (ll.row(i).array() - lse).exp().matrix();
    }
    s.n += ll.colwise().sum().transpose();
    s.f += ll.transpose() * x;  // sum_t gamma_tc x_t for now
  }
  // Center the first-order sums: f_c -= n_c mu_c.
  s.f -= s.n.asDiagonal() * ubm.means;
  return s;
}

namespace {

// Pools all frames (as doubles) into one T x D matrix.
Mat PoolFrames(const std::vector<const FeatureMatrix *> &features) {
  if (features.empty()) throw ConfigError("ubm: no training features");
  const int d = features[0]->Dim();
  long total = 0;
  for (const auto *f : features) {
    if (f->Dim() != d) throw ConfigError("ubm: inconsistent feature dims");
    total += f->NumFrames();
  }
  Mat x(total, d);
  long row = 0;
  for (const auto *f : features) {
    x.middleRows(row, f->NumFrames()) = f->frames.cast<double>();
    row += f->NumFrames();
  }
  return x;
}

// Squared distances from every row of x to one center.
Vec SqDistTo(const Mat &x, const Vec &center) {
  return (x.rowwise() - center.transpose()).rowwise().squaredNorm();
}

// k-means++ seeding followed by Lloyd iterations. Returns C x D centers.
Mat KmeansInit(const Mat &x, int c, int lloyd_iters, Rng *rng) {
  const long t = x.rows();
  const int d = static_cast<int>(x.cols());
  Mat centers(c, d);
  centers.row(0) = x.row(static_cast<long>(rng->UniformInt(t)));
  Vec best_sq = SqDistTo(x, centers.row(0).transpose());
  for (int k = 1; k < c; ++k) {
    const double total = best_sq.sum();
    long pick = 0;
    if (total > 0) {
      // Sample proportional to squared distance to the nearest center.
      double u = rng->Uniform() * total, cum = 0;
      for (long i = 0; i < t; ++i) {
        cum += best_sq(i);
        if (u < cum) { pick = i; break; }
        pick = i;
      }
    } else {
      pick = rng->UniformInt(t);
    }
    centers.row(k) = x.row(pick);
    best_sq = best_sq.cwiseMin(SqDistTo(x, centers.row(k).transpose()));
  }

  std::vector<long> assign(t);
  for (int iter = 0; iter < lloyd_iters; ++iter) {
    // Assignment by blocks: argmin_c ||x - center_c||^2.
    Mat csq = centers.rowwise().squaredNorm();
    for (long start = 0; start < t; start += kScoreBlock) {
      const long b = std::min<long>(kScoreBlock, t - start);
      Mat dist = -2.0 * (x.middleRows(start, b) * centers.transpose());
      dist.rowwise() += csq.transpose().row(0);
      for (long i = 0; i < b; ++i) {
        int arg = 0;
        dist.row(i).minCoeff(&arg);
        assign[start + i] = arg;
      }
    }
    Mat sums = Mat::Zero(c, d);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(c);
    for (long i = 0; i < t; ++i) {
      sums.row(assign[i]) += x.row(i);
      counts(assign[i]) += 1;
    }
    for (int k = 0; k < c; ++k) {
      if (counts(k) > 0) {
        centers.row(k) = sums.row(k) / counts(k);
      } else {
        // Deterministic rescue: move to the frame farthest from its center.
        long worst = 0;
        double worst_d = -1;
        for (long i = 0; i < t; ++i) {
          const double dd =
              (x.row(i) - centers.row(assign[i])).squaredNorm();
          if (dd > worst_d) { worst_d = dd; worst = i; }
        }
        centers.row(k) = x.row(worst);
        assign[worst] = k;
      }
    }
  }
  return centers;
}

}  // namespace

GmmUbm TrainUbm(const std::vector<const FeatureMatrix *> &features,
                const UbmTrainOptions &opts, Rng *rng,
                std::vector<double> *ll_history) {
  if (opts.components < 1) throw ConfigError("ubm: components must be >= 1");
  Mat x = PoolFrames(features);
  const long t = x.rows();
  const int d = static_cast<int>(x.cols());
  const int c = opts.components;
  if (t < 10L * c) {
    throw ConfigError("ubm: need at least 10 frames per component (" +
                      std::to_string(t) + " frames for " + std::to_string(c) +
                      " components)");
  }

  const Vec global_mean = x.colwise().mean().transpose();
  Vec global_var = (x.rowwise() - global_mean.transpose())
                       .array()
                       .square()
                       .colwise()
                       .mean()
                       .matrix()
                       .transpose();
  Vec floor =
      (opts.variance_floor_frac * global_var.array()).max(1e-10).matrix();
  const double global_sigma = std::sqrt(global_var.maxCoeff());

  GmmUbm ubm;
  ubm.weights = Vec::Constant(c, 1.0 / c);
  ubm.means = KmeansInit(x, c, opts.kmeans_iters, rng);
  // floored from the start, or a globally constant dim breaks the first
  // density evaluation
  ubm.vars = global_var.cwiseMax(floor).transpose().replicate(c, 1);
  ubm.ComputeDerived();

  const double starve_limit = opts.starvation_frac * t / c;
  for (int iter = 0; iter < opts.em_iters; ++iter) {
    Vec acc_n = Vec::Zero(c);
    Mat acc_x = Mat::Zero(c, d);
    Mat acc_x2 = Mat::Zero(c, d);
    double total_ll = 0;
    for (long start = 0; start < t; start += kScoreBlock) {
      const long b = std::min<long>(kScoreBlock, t - start);
      Mat xb = x.middleRows(start, b);
      Mat gamma = ubm.LogComponentDensities(xb);  // b x c, log-domain
      for (long i = 0; i < b; ++i) {
        const double lse = LogSumExp(gamma.row(i).transpose());
        total_ll += lse;
        gamma.row(i) = (gamma.row(i).array() - lse).exp().matrix();
      }
      acc_n += gamma.colwise().sum().transpose();
      acc_x += gamma.transpose() * xb;
      acc_x2 += gamma.transpose() * xb.cwiseProduct(xb);
    }
    if (ll_history) ll_history->push_back(total_ll);

    for (int k = 0; k < c; ++k) {
      if (acc_n(k) < starve_limit) {
        std::fprintf(stderr,
                     "ubm: component %d starved (n=%.3g) at iteration %d, "
                     "resetting to perturbed global mean\n",
                     k, acc_n(k), iter);
        for (int j = 0; j < d; ++j) {
          ubm.means(k, j) =
              global_mean(j) + 0.1 * global_sigma * rng->Gaussian();
        }
        ubm.vars.row(k) = global_var.transpose();
        acc_n(k) = starve_limit;  // keeps the weight update sane
        continue;
      }
      ubm.means.row(k) = acc_x.row(k) / acc_n(k);
      ubm.vars.row(k) = acc_x2.row(k) / acc_n(k) -
                        ubm.means.row(k).cwiseProduct(ubm.means.row(k));
    }
    ubm.vars = ubm.vars.cwiseMax(floor.transpose().replicate(c, 1));
    ubm.weights = acc_n / acc_n.sum();
    ubm.ComputeDerived();
  }
  return ubm;
}

void SaveUbm(const GmmUbm &ubm, const std::string &path) {
  ubm.Validate();
  ModelBlob blob;
  nlohmann::json meta;
  meta["model"] = "ubm";
  meta["components"] = ubm.NumComponents();
  meta["dim"] = ubm.Dim();
  blob.meta_json = meta.dump();
  blob.tensors.push_back(NamedTensor::FromVec("weights", ubm.weights));
  blob.tensors.push_back(NamedTensor::FromMat("means", ubm.means));
  blob.tensors.push_back(NamedTensor::FromMat("vars", ubm.vars));
  WriteModelBlob(path, blob);
}

GmmUbm LoadUbm(const std::string &path) {
  ModelBlob blob = ReadModelBlob(path);
  if (blob.Meta().value("model", "") != "ubm") {
    throw ArtifactError("not a UBM model file: " + path);
  }
  GmmUbm ubm;
  ubm.weights = blob.Find("weights").ToVec();
  ubm.means = blob.Find("means").ToMat();
  ubm.vars = blob.Find("vars").ToMat();
  // Serialized float32; renormalize so the weight-sum invariant holds in
  // double precision.
  ubm.weights /= ubm.weights.sum();
  ubm.ComputeDerived();
  return ubm;
}

}  // namespace embedprobe
