// embedprobe/tensor_io.cc
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

#include "embedprobe/tensor_io.h"

#include <bit>
#include <fstream>

#include <nlohmann/json.hpp>

#include "embedprobe/common.h"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

namespace embedprobe {

void WriteU16(std::ostream &os, uint16_t v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(v));
}
void WriteU32(std::ostream &os, uint32_t v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(v));
}
void WriteU8(std::ostream &os, uint8_t v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(v));
}
void WriteF32(std::ostream &os, const float *data, size_t n) {
  os.write(reinterpret_cast<const char *>(data),
           static_cast<std::streamsize>(n * sizeof(float)));
}

namespace {
void Require(std::istream &is, const char *what) {
  if (!is) throw ArtifactError(std::string("truncated read: ") + what);
}
}  // namespace

uint16_t ReadU16(std::istream &is) {
  uint16_t v = 0;
  is.read(reinterpret_cast<char *>(&v), sizeof(v));
  Require(is, "u16");
  return v;
}
uint32_t ReadU32(std::istream &is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char *>(&v), sizeof(v));
  Require(is, "u32");
  return v;
}
uint8_t ReadU8(std::istream &is) {
  uint8_t v = 0;
  is.read(reinterpret_cast<char *>(&v), sizeof(v));
  Require(is, "u8");
  return v;
}
void ReadF32(std::istream &is, float *data, size_t n) {
  is.read(reinterpret_cast<char *>(data),
          static_cast<std::streamsize>(n * sizeof(float)));
  Require(is, "f32 payload");
}

NamedTensor NamedTensor::FromMat(const std::string &name, const Mat &m) {
  NamedTensor t;
  t.name = name;
  t.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  t.data.resize(static_cast<size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      t.data[static_cast<size_t>(i * m.cols() + j)] =
          static_cast<float>(m(i, j));
  return t;
}

NamedTensor NamedTensor::FromVec(const std::string &name, const Vec &v) {
  NamedTensor t;
  t.name = name;
  t.dims = {static_cast<uint32_t>(v.size())};
  t.data.resize(static_cast<size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    t.data[static_cast<size_t>(i)] = static_cast<float>(v(i));
  return t;
}

Mat NamedTensor::ToMat() const {
  if (dims.size() != 2)
    throw ArtifactError("tensor '" + name + "' is not rank 2");
  Mat m(dims[0], dims[1]);
  for (uint32_t i = 0; i < dims[0]; ++i)
    for (uint32_t j = 0; j < dims[1]; ++j)
      m(i, j) = static_cast<double>(data[static_cast<size_t>(i) * dims[1] + j]);
  return m;
}

Vec NamedTensor::ToVec() const {
  if (dims.size() != 1)
    throw ArtifactError("tensor '" + name + "' is not rank 1");
  Vec v(dims[0]);
  for (uint32_t i = 0; i < dims[0]; ++i) v(i) = static_cast<double>(data[i]);
  return v;
}

size_t NamedTensor::NumElements() const {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  return n;
}

nlohmann::json ModelBlob::Meta() const {
  return nlohmann::json::parse(meta_json);
}

const NamedTensor &ModelBlob::Find(const std::string &name) const {
  for (const auto &t : tensors) {
    if (t.name == name) return t;
  }
  throw ArtifactError("model container has no tensor named '" + name + "'");
}

bool ModelBlob::Has(const std::string &name) const {
  for (const auto &t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

void WriteModelBlob(const std::string &path, const ModelBlob &blob) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArtifactError("cannot write model file: " + path);
  os.write("EMDL", 4);
  os.write(blob.meta_json.data(),
           static_cast<std::streamsize>(blob.meta_json.size()));
  os.put('\n');
  for (const auto &t : blob.tensors) {
    if (t.name.size() > UINT16_MAX)
      throw ArtifactError("tensor name too long: " + t.name);
    WriteU16(os, static_cast<uint16_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    WriteU8(os, static_cast<uint8_t>(t.dims.size()));
    for (uint32_t d : t.dims) WriteU32(os, d);
    if (t.data.size() != t.NumElements())
      throw ArtifactError("tensor '" + t.name + "' payload/shape mismatch");
    WriteF32(os, t.data.data(), t.data.size());
  }
  if (!os) throw ArtifactError("write failed: " + path);
}

ModelBlob ReadModelBlob(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("cannot open model file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "EMDL")
    throw ArtifactError("bad magic in model file: " + path);
  ModelBlob blob;
  if (!std::getline(is, blob.meta_json))
    throw ArtifactError("missing metadata line in model file: " + path);
  while (true) {
    int c = is.peek();
    if (c == EOF) break;
    uint16_t name_len = ReadU16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    Require(is, "tensor name");
    NamedTensor t;
    t.name = std::move(name);
    uint8_t rank = ReadU8(is);
    t.dims.resize(rank);
    for (uint8_t i = 0; i < rank; ++i) t.dims[i] = ReadU32(is);
    t.data.resize(t.NumElements());
    ReadF32(is, t.data.data(), t.data.size());
    blob.tensors.push_back(std::move(t));
  }
  return blob;
}

}  // namespace embedprobe
