// embedprobe/ivector.h
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

#ifndef EMBEDPROBE_IVECTOR_H_
#define EMBEDPROBE_IVECTOR_H_

#include <string>
#include <vector>

#include "embedprobe/gmm.h"
#include "embedprobe/numerics.h"
#include "embedprobe/rng.h"

namespace embedprobe {

/// Total-variability model: utterance supervectors are modeled as
/// m + T w with a standard-normal prior on w. The UBM supplies m and the
/// diagonal covariances; T is (C*D) x R.
struct TvModel {
  Mat t;           // (C*D) x R
  int components;  // C
  int dim;         // D

  int Rank() const { return static_cast<int>(t.cols()); }
  /// Rows of T for component c, a D x R block.
  Eigen::Block<const Mat> ComponentRows(int c) const {
    return t.block(c * dim, 0, dim, Rank());
  }
  void Validate() const;
};

/// Posterior machinery for a fixed (ubm, tv) pair. Precomputes the
/// per-component Gram matrices T_c' inv(Sigma_c) T_c so extraction is a
/// small solve per utterance instead of a fresh (C D R^2) contraction.
class IVectorExtractor {
 public:
  IVectorExtractor(const GmmUbm &ubm, const TvModel &tv);

  /// Posterior mean of w given the utterance statistics (the i-vector).
  Vec Extract(const SuffStats &stats) const;

  /// Posterior mean plus covariance inv(L); used in TV training.
  void Posterior(const SuffStats &stats, Vec *mean, Mat *cov,
                 double *aux = nullptr) const;

  int Rank() const { return tv_->Rank(); }
  const TvModel &tv() const { return *tv_; }
  const GmmUbm &ubm() const { return *ubm_; }

 private:
  // Precision matrix L = I + sum_c n_c Gram_c and linear term
  // a = T' inv(Sigma) stacked_f for one utterance.
  void BuildSystem(const SuffStats &stats, Mat *l, Vec *a) const;

  const GmmUbm *ubm_;
  const TvModel *tv_;
  std::vector<Mat> grams_;  // per component, R x R
  Mat t_scaled_;            // T with rows scaled by inv variances
};

struct TvTrainOptions {
  int rank = 100;
  int iters = 10;
  double init_scale = 0.1;  // of the average sigma
};

/// Estimates T from per-utterance statistics. Gaussian init scaled by
/// init_scale * mean sigma; each iteration accumulates posterior moments
/// and solves the per-component normal equations. The marginal
/// log-likelihood of the statistics under the factor model (up to
/// w-independent constants) is appended per iteration to aux_history when
/// given; it is non-decreasing within 1e-6 relative. Deterministic given
/// rng.
TvModel TrainTv(const GmmUbm &ubm, const std::vector<SuffStats> &stats,
                const TvTrainOptions &opts, Rng *rng,
                std::vector<double> *aux_history = nullptr);

void SaveTv(const TvModel &tv, const std::string &path);
TvModel LoadTv(const std::string &path);

}  // namespace embedprobe

#endif  // EMBEDPROBE_IVECTOR_H_
