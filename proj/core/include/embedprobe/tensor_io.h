// embedprobe/tensor_io.h
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

#ifndef EMBEDPROBE_TENSOR_IO_H_
#define EMBEDPROBE_TENSOR_IO_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "embedprobe/numerics.h"

namespace embedprobe {

// Little-endian scalar I/O. The formats below are defined little-endian;
// big-endian hosts are not supported.
void WriteU16(std::ostream &os, uint16_t v);
void WriteU32(std::ostream &os, uint32_t v);
void WriteU8(std::ostream &os, uint8_t v);
void WriteF32(std::ostream &os, const float *data, size_t n);
uint16_t ReadU16(std::istream &is);
uint32_t ReadU32(std::istream &is);
uint8_t ReadU8(std::istream &is);
void ReadF32(std::istream &is, float *data, size_t n);

/// One tensor inside an EMDL container: name, shape, float32 payload in
/// row-major order.
struct NamedTensor {
  std::string name;
  std::vector<uint32_t> dims;
  std::vector<float> data;

  static NamedTensor FromMat(const std::string &name, const Mat &m);
  static NamedTensor FromVec(const std::string &name, const Vec &v);
  Mat ToMat() const;  // requires rank 2
  Vec ToVec() const;  // requires rank 1
  size_t NumElements() const;
};

/// EMDL model container: magic "EMDL", one JSON metadata line terminated
/// by '\n', then a sequence of named tensors (u16 name length, name bytes,
/// u8 rank, rank x u32 dims, float32 payload) until end of file.
struct ModelBlob {
  std::string meta_json;  // serialized metadata line (no trailing newline)
  std::vector<NamedTensor> tensors;

  nlohmann::json Meta() const;
  const NamedTensor &Find(const std::string &name) const;
  bool Has(const std::string &name) const;
};

void WriteModelBlob(const std::string &path, const ModelBlob &blob);
ModelBlob ReadModelBlob(const std::string &path);

}  // namespace embedprobe

#endif  // EMBEDPROBE_TENSOR_IO_H_
