// embedprobe/gmm.h
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

#ifndef EMBEDPROBE_GMM_H_
#define EMBEDPROBE_GMM_H_

#include <string>
#include <vector>

#include "embedprobe/corpus.h"
#include "embedprobe/numerics.h"
#include "embedprobe/rng.h"

namespace embedprobe {

/// Diagonal-covariance universal background model. Mutate the public
/// fields freely during training, then call ComputeDerived() before any
/// likelihood evaluation.
struct GmmUbm {
  Vec weights;  // C, sums to 1
  Mat means;    // C x D
  Mat vars;     // C x D, diagonal covariances, all >= the variance floor

  int NumComponents() const { return static_cast<int>(weights.size()); }
  int Dim() const { return static_cast<int>(means.cols()); }

  /// Weight normalization within 1e-10, strictly positive variances,
  /// finite parameters. Throws NumericError.
  void Validate() const;

  /// Caches per-component scoring constants. Call after every mutation.
  void ComputeDerived();

  /// log(w_c) + log N(frame; mu_c, sigma2_c) per component.
  Vec LogComponentDensities(const Vec &frame) const;
  /// Same, for a block of frames (rows). Returns T x C.
  Mat LogComponentDensities(const Mat &frames) const;
  /// log p(frame) via logsumexp over components.
  double FrameLogLike(const Vec &frame) const;
  /// Posterior component probabilities gamma for one frame; sums to 1.
  Vec Responsibilities(const Vec &frame) const;

  /// Stacked component means (C*D supervector) and inverse variances.
  Vec SuperMean() const;
  Vec SuperInvVar() const;

 private:
  // Derived scoring cache: per-component constant
  //   log w_c - 0.5 * sum_j log(2 pi sigma2_cj),
  // precision matrix and precision-scaled means.
  Vec log_const_;
  Mat inv_vars_;       // C x D
  Mat mean_inv_vars_;  // C x D, means (.) inv_vars
  Vec mean_sq_inv_;    // C, sum_j mu_cj^2 / sigma2_cj
  bool derived_ready_ = false;
};

/// Per-utterance Baum-Welch statistics against a UBM: soft frame counts
/// n_c and centered first-order sums f_c = sum_t gamma_tc (x_t - mu_c).
struct SuffStats {
  std::string utt_id;
  Vec n;  // C
  Mat f;  // C x D

  int NumComponents() const { return static_cast<int>(n.size()); }
  int Dim() const { return static_cast<int>(f.cols()); }
  double TotalCount() const { return n.sum(); }
  /// Stacked f (C*D), the right-hand side of the factor-model posterior.
  Vec StackedF() const;
  void Add(const SuffStats &other);
};

SuffStats AccumulateStats(const GmmUbm &ubm, const FeatureMatrix &f);

struct UbmTrainOptions {
  int components = 64;
  int em_iters = 20;
  int kmeans_iters = 10;          // Lloyd refinements after k-means++ seeding
  double variance_floor_frac = 1e-4;   // of the global variance, per dim
  double starvation_frac = 1e-3;       // reset when n_c < frac * T / C
};

/// Trains the UBM on pooled frames: k-means++ seeding, Lloyd refinement,
/// then EM. Deterministic given rng. The total data log-likelihood of the
/// parameters entering each EM iteration is appended to ll_history when
/// given; it is non-decreasing within 1e-8 relative. Starved components
/// are reset to a perturbed global mean (logged to stderr).
GmmUbm TrainUbm(const std::vector<const FeatureMatrix *> &features,
                const UbmTrainOptions &opts, Rng *rng,
                std::vector<double> *ll_history = nullptr);

void SaveUbm(const GmmUbm &ubm, const std::string &path);
GmmUbm LoadUbm(const std::string &path);

}  // namespace embedprobe

#endif  // EMBEDPROBE_GMM_H_
