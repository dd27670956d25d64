// embedprobe/numerics.h
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

#ifndef EMBEDPROBE_NUMERICS_H_
#define EMBEDPROBE_NUMERICS_H_

#include <Eigen/Dense>
#include <functional>

namespace embedprobe {

// All training math runs in 64-bit floats; storage formats are 32-bit.
// Matrices are row-major throughout so in-memory layout matches the
// on-disk row-major payloads.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                          Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

bool AllFinite(const Mat &m);
bool AllFinite(const Vec &v);

/// Cholesky factor of a symmetric positive-definite matrix, kept around so
/// one factorization can serve many right-hand sides (and the inverse).
class SpdCholesky {
 public:
  /// Factors A = L L^T. Throws NumericError if A is not square, not
  /// symmetric within `sym_tol` (relative to max |A|), or a pivot is not
  /// positive; the error names the failing pivot index.
  explicit SpdCholesky(const Mat &a, double sym_tol = 1e-9);

  Vec Solve(const Vec &b) const;
  Mat Solve(const Mat &b) const;  // column-wise
  Mat Inverse() const;
  double LogDet() const;
  int dim() const { return static_cast<int>(l_.rows()); }

 private:
  Mat l_;
};

/// Solves A x = b for symmetric positive-definite A via Cholesky.
/// Residual guarantee: ||Ax - b||_inf / ||b||_inf < 1e-8 on well-scaled
/// systems. Errors as SpdCholesky.
Vec SolveSpd(const Mat &a, const Vec &b);

/// log(sum_i exp(v_i)), max-shifted so it cannot overflow. v must be
/// nonempty.
double LogSumExp(const Vec &v);

/// Max relative error between the central finite difference of `f` at
/// `theta` (step h per coordinate) and the analytic gradient:
///   max_i |fd_i - g_i| / max(1, |g_i|).
/// Throws NumericError if f evaluates to a non-finite value.
double GradCheck(const std::function<double(const Vec &)> &f,
                 const Vec &theta, double h, const Vec &analytic_grad);

}  // namespace embedprobe

#endif  // EMBEDPROBE_NUMERICS_H_
