// embedprobe/numerics.cc
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

#include "embedprobe/numerics.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "embedprobe/common.h"

namespace embedprobe {

std::string HashToHex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

uint64_t HashFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open file for hashing: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    if (got > 0) h = Fnv1a64(buf, static_cast<size_t>(got), h);
  }
  return h;
}

bool AllFinite(const Mat &m) { return m.allFinite(); }
bool AllFinite(const Vec &v) { return v.allFinite(); }

SpdCholesky::SpdCholesky(const Mat &a, double sym_tol) {
  const auto n = a.rows();
  if (a.cols() != n) {
    throw NumericError("SpdCholesky: matrix is not square");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > sym_tol * scale) {
        std::ostringstream os;
        os << "SpdCholesky: matrix not symmetric at (" << i << "," << j
           << "): " << a(i, j) << " vs " << a(j, i);
        throw NumericError(os.str());
      }
    }
  }
  l_ = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "SpdCholesky: non-positive-definite pivot at index " << j
         << " (value " << d << ")";
      throw NumericError(os.str());
    }
    const double lj = std::sqrt(d);
    l_(j, j) = lj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      l_(i, j) = s / lj;
    }
  }
}

Vec SpdCholesky::Solve(const Vec &b) const {
  const auto n = l_.rows();
  if (b.size() != n) throw NumericError("SpdCholesky::Solve: size mismatch");
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b(i);
    for (Eigen::Index k = 0; k < i; ++k) s -= l_(i, k) * y(k);
    y(i) = s / l_(i, i);
  }
  Vec x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = y(i);
    for (Eigen::Index k = i + 1; k < n; ++k) s -= l_(k, i) * x(k);
    x(i) = s / l_(i, i);
  }
  return x;
}

Mat SpdCholesky::Solve(const Mat &b) const {
  Mat x(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    x.col(c) = Solve(Vec(b.col(c)));
  }
  return x;
}

Mat SpdCholesky::Inverse() const {
  const auto n = l_.rows();
  return Solve(Mat(Mat::Identity(n, n)));
}

double SpdCholesky::LogDet() const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < l_.rows(); ++i) s += std::log(l_(i, i));
  return 2.0 * s;
}

Vec SolveSpd(const Mat &a, const Vec &b) {
  if (a.rows() != b.size()) {
    throw NumericError("SolveSpd: dimension mismatch between A and b");
  }
  return SpdCholesky(a).Solve(b);
}

double LogSumExp(const Vec &v) {
  if (v.size() == 0) throw NumericError("LogSumExp: empty vector");
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf or contains +inf/nan
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v(i) - m);
  return m + std::log(s);
}

double GradCheck(const std::function<double(const Vec &)> &f,
                 const Vec &theta, double h, const Vec &analytic_grad) {
  if (theta.size() != analytic_grad.size()) {
    throw NumericError("GradCheck: gradient size mismatch");
  }
  Vec t = theta;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double orig = t(i);
    t(i) = orig + h;
    const double fp = f(t);
    t(i) = orig - h;
    const double fm = f(t);
    t(i) = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("GradCheck: non-finite function value");
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double g = analytic_grad(i);
    const double err = std::abs(fd - g) / std::max(1.0, std::abs(g));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace embedprobe
