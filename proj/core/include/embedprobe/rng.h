// embedprobe/rng.h
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

#ifndef EMBEDPROBE_RNG_H_
#define EMBEDPROBE_RNG_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace embedprobe {

/// Seeded random stream with named substreams.
///
/// Every consumer derives its own substream ("corpus", "ubm",
/// "nnet/svector", ...) from the global seed, so the draws one step makes
/// never shift another step's stream. Identical seed + name always yields
/// the identical sequence. Distribution sampling is implemented by hand
/// (not std::*_distribution) so streams do not depend on the standard
/// library vendor.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  /// Independent stream derived from this stream's seed and `name`.
  Rng Substream(std::string_view name) const;

  uint64_t seed() const { return seed_; }

  uint64_t NextU64();

  /// Uniform in [0, 1).
  double Uniform();
  /// Uniform in [lo, hi).
  double Uniform(double lo, double hi);
  /// Uniform integer in [0, n). Requires n >= 1.
  int64_t UniformInt(int64_t n);
  /// Standard normal via Box-Muller (one value per two uniform draws).
  double Gaussian();

  /// Deterministic Fisher-Yates shuffle.
  template <typename T>
  void Shuffle(std::vector<T> *v) {
    for (size_t i = v->size(); i > 1; --i) {
      size_t j = static_cast<size_t>(UniformInt(static_cast<int64_t>(i)));
      std::swap((*v)[i - 1], (*v)[j]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace embedprobe

#endif  // EMBEDPROBE_RNG_H_
