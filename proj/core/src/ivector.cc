// embedprobe/ivector.cc
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

#include "embedprobe/ivector.h"

#include <cmath>

#include <nlohmann/json.hpp>

#include "embedprobe/common.h"
#include "embedprobe/tensor_io.h"

namespace embedprobe {

void TvModel::Validate() const {
  if (Rank() < 1) throw NumericError("tv: rank must be >= 1");
  if (t.rows() != static_cast<long>(components) * dim) {
    throw NumericError("tv: row count does not match components * dim");
  }
  if (Rank() > t.rows()) throw NumericError("tv: rank exceeds C*D");
  if (!AllFinite(t)) throw NumericError("tv: non-finite entries");
}

IVectorExtractor::IVectorExtractor(const GmmUbm &ubm, const TvModel &tv)
    : ubm_(&ubm), tv_(&tv) {
  tv.Validate();
  if (tv.components != ubm.NumComponents() || tv.dim != ubm.Dim()) {
    throw NumericError("ivector: TV model does not match the UBM");
  }
  const int c = tv.components, d = tv.dim, r = tv.Rank();
  t_scaled_.resize(c * d, r);
  grams_.reserve(c);
  for (int k = 0; k < c; ++k) {
    Vec inv_var = ubm.vars.row(k).cwiseInverse().transpose();
    t_scaled_.middleRows(k * d, d) =
        inv_var.asDiagonal() * tv.t.middleRows(k * d, d);
    grams_.push_back(tv.t.middleRows(k * d, d).transpose() *
                     t_scaled_.middleRows(k * d, d));
  }
}

void IVectorExtractor::BuildSystem(const SuffStats &stats, Mat *l,
                                   Vec *a) const {
  if (stats.NumComponents() != tv_->components || stats.Dim() != tv_->dim) {
    throw NumericError("ivector: statistics do not match the model");
  }
  const int r = Rank();
  *l = Mat::Identity(r, r);
  for (int k = 0; k < tv_->components; ++k) {
    if (stats.n(k) != 0.0) *l += stats.n(k) * grams_[k];
  }
  *a = t_scaled_.transpose() * stats.StackedF();
}

Vec IVectorExtractor::Extract(const SuffStats &stats) const {
  Mat l;
  Vec a;
  BuildSystem(stats, &l, &a);
  return SpdCholesky(l).Solve(a);
}

void IVectorExtractor::Posterior(const SuffStats &stats, Vec *mean, Mat *cov,
                                 double *aux) const {
  Mat l;
  Vec a;
  BuildSystem(stats, &l, &a);
  SpdCholesky chol(l);
  *mean = chol.Solve(a);
  *cov = chol.Inverse();
  if (aux) *aux = 0.5 * (mean->dot(a) - chol.LogDet());
}

TvModel TrainTv(const GmmUbm &ubm, const std::vector<SuffStats> &stats,
                const TvTrainOptions &opts, Rng *rng,
                std::vector<double> *aux_history) {
  const int c = ubm.NumComponents(), d = ubm.Dim(), r = opts.rank;
  if (r < 1) throw ConfigError("tv: rank must be >= 1");
  if (r > c * d) throw ConfigError("tv: rank exceeds supervector size");
  if (static_cast<int>(stats.size()) < r) {
    throw ConfigError("tv: need at least rank(" + std::to_string(r) +
                      ") utterances, got " + std::to_string(stats.size()));
  }

  TvModel tv;
  tv.components = c;
  tv.dim = d;
  const double avg_sigma = ubm.vars.array().sqrt().mean();
  tv.t.resize(c * d, r);
  for (long i = 0; i < tv.t.rows(); ++i) {
    for (int j = 0; j < r; ++j) {
      tv.t(i, j) = opts.init_scale * avg_sigma * rng->Gaussian();
    }
  }

  for (int iter = 0; iter < opts.iters; ++iter) {
    IVectorExtractor extractor(ubm, tv);
    std::vector<Mat> acc_a(c, Mat::Zero(r, r));
    Mat acc_b = Mat::Zero(c * d, r);
    double aux_total = 0;
    for (const SuffStats &s : stats) {
      Vec w;
      Mat cov;
      double aux = 0;
      extractor.Posterior(s, &w, &cov, &aux);
      aux_total += aux;
      Mat second_moment = cov + w * w.transpose();
      for (int k = 0; k < c; ++k) {
        if (s.n(k) != 0.0) acc_a[k] += s.n(k) * second_moment;
        acc_b.middleRows(k * d, d) += s.f.row(k).transpose() * w.transpose();
      }
    }
    if (aux_history) aux_history->push_back(aux_total);

    for (int k = 0; k < c; ++k) {
      try {
        // T_k = B_k inv(A_k), via A_k X = B_k' for SPD A_k.
        Mat x = SpdCholesky(acc_a[k]).Solve(
            Mat(acc_b.middleRows(k * d, d).transpose()));
        tv.t.middleRows(k * d, d) = x.transpose();
      } catch (const NumericError &e) {
        throw NumericError(
            "tv: singular accumulator for component " + std::to_string(k) +
            " (too few effective utterances for rank " + std::to_string(r) +
            "): " + e.what());
      }
    }
    if (!AllFinite(tv.t)) {
      throw NumericError("tv: non-finite update at iteration " +
                         std::to_string(iter));
    }
  }
  return tv;
}

void SaveTv(const TvModel &tv, const std::string &path) {
  tv.Validate();
  ModelBlob blob;
  nlohmann::json meta;
  meta["model"] = "tv";
  meta["rank"] = tv.Rank();
  meta["components"] = tv.components;
  meta["dim"] = tv.dim;
  blob.meta_json = meta.dump();
  blob.tensors.push_back(NamedTensor::FromMat("T", tv.t));
  WriteModelBlob(path, blob);
}

TvModel LoadTv(const std::string &path) {
  ModelBlob blob = ReadModelBlob(path);
  auto meta = blob.Meta();
  if (meta.value("model", "") != "tv") {
    throw ArtifactError("not a TV model file: " + path);
  }
  TvModel tv;
  tv.components = meta.at("components").get<int>();
  tv.dim = meta.at("dim").get<int>();
  tv.t = blob.Find("T").ToMat();
  tv.Validate();
  if (tv.Rank() != meta.at("rank").get<int>()) {
    throw ArtifactError("tv: rank in metadata disagrees with tensor: " + path);
  }
  return tv;
}

}  // namespace embedprobe
