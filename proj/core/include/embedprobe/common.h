// embedprobe/common.h
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

#ifndef EMBEDPROBE_COMMON_H_
#define EMBEDPROBE_COMMON_H_

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace embedprobe {

// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Missing or corrupt on-disk artifact (CLI exit code 3).
class ArtifactError : public std::runtime_error {
 public:
  explicit ArtifactError(const std::string &msg) : std::runtime_error(msg) {}
};

// Numeric failure: divergence, non-PD systems, non-finite values
// (CLI exit code 4).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

// 64-bit FNV-1a over raw bytes. Used for artifact and model hashes.
inline uint64_t Fnv1a64(const void *data, size_t n,
                        uint64_t h = 0xcbf29ce484222325ull) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t Fnv1a64(std::string_view s) {
  return Fnv1a64(s.data(), s.size());
}

std::string HashToHex(uint64_t h);

// FNV-1a over a whole file's bytes. Throws ArtifactError if unreadable.
uint64_t HashFile(const std::string &path);

inline double WallSeconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace embedprobe

#endif  // EMBEDPROBE_COMMON_H_
