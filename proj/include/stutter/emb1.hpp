// Copyright (c) 2026 The stutterkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// EMB1: a 16-byte header followed by T*D little-endian float32 values, row-major.
//
//   bytes 0-3   magic "EMB1"
//   byte  4     version (0x01)
//   byte  5     dtype   (0x01 = float32 LE)
//   bytes 6-7   reserved, zero
//   bytes 8-11  T, u32 LE
//   bytes 12-15 D, u32 LE

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stutter/error.hpp"

namespace stutter {

/// One clip's embedding, T frames by D dims, as stored on disk.
using Tensor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace emb1 {

inline constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', '1'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kDtypeF32 = 0x01;
inline constexpr std::size_t kHeaderBytes = 16;

struct Header {
  std::uint32_t frames = 0;
  std::uint32_t dims = 0;
};

namespace detail {

inline void put_u32(unsigned char* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
}

inline std::uint32_t get_u32(const unsigned char* in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[i]) << (8 * i);
  return v;
}

inline Header parse_header(const unsigned char* bytes, const std::string& where) {
  if (std::memcmp(bytes, kMagic.data(), 4) != 0) fail(ErrorCode::BadMagic, where);
  if (bytes[4] != kVersion) fail(ErrorCode::UnsupportedVersion, where + ": version " + std::to_string(bytes[4]));
  if (bytes[5] != kDtypeF32) fail(ErrorCode::UnsupportedVersion, where + ": dtype " + std::to_string(bytes[5]));
  return Header{get_u32(bytes + 8), get_u32(bytes + 12)};
}

}  // namespace detail

/// Serializes a tensor to an in-memory EMB1 image.
inline std::vector<unsigned char> encode(const Tensor& tensor) {
  if (tensor.rows() < 1 || tensor.cols() < 1) fail(ErrorCode::EmptyTensor, "EMB1 requires T>=1 and D>=1");
  if (!tensor.allFinite()) fail(ErrorCode::NonFiniteValue, "tensor contains NaN or Inf");
  const auto count = static_cast<std::size_t>(tensor.size());
  std::vector<unsigned char> out(kHeaderBytes + 4 * count, 0);
  std::memcpy(out.data(), kMagic.data(), 4);
  out[4] = kVersion;
  out[5] = kDtypeF32;
  detail::put_u32(out.data() + 8, static_cast<std::uint32_t>(tensor.rows()));
  detail::put_u32(out.data() + 12, static_cast<std::uint32_t>(tensor.cols()));
  const float* src = tensor.data();
  for (std::size_t i = 0; i < count; ++i)
    detail::put_u32(out.data() + kHeaderBytes + 4 * i, std::bit_cast<std::uint32_t>(src[i]));
  return out;
}

inline Tensor decode(const std::vector<unsigned char>& bytes, const std::string& where = "<memory>") {
  if (bytes.size() < kHeaderBytes) fail(ErrorCode::TruncatedPayload, where + ": shorter than header");
  const Header h = detail::parse_header(bytes.data(), where);
  const std::uint64_t count = std::uint64_t{h.frames} * h.dims;
  if (bytes.size() != kHeaderBytes + 4 * count)
    fail(ErrorCode::TruncatedPayload, where + ": expected " + std::to_string(kHeaderBytes + 4 * count) +
                                          " bytes, found " + std::to_string(bytes.size()));
  if (h.frames == 0 || h.dims == 0) fail(ErrorCode::EmptyTensor, where);
  Tensor tensor(h.frames, h.dims);
  float* dst = tensor.data();
  for (std::uint64_t i = 0; i < count; ++i) {
    dst[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + kHeaderBytes + 4 * i));
    if (!std::isfinite(dst[i])) fail(ErrorCode::NonFiniteValue, where + ": value " + std::to_string(i));
  }
  return tensor;
}

}  // namespace emb1

inline void write_embedding(const Tensor& tensor, const std::filesystem::path& path) {
  const auto bytes = emb1::encode(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

/// Convenience overload; values are narrowed to float32.
inline void write_embedding(const Eigen::MatrixXd& values, const std::filesystem::path& path) {
  write_embedding(Tensor(values.cast<float>()), path);
}

inline Tensor read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return emb1::decode(bytes, path.string());
}

/// Reads and validates only the 16-byte header.
inline emb1::Header read_embedding_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::UnresolvablePath, path.string());
  std::array<unsigned char, emb1::kHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    fail(ErrorCode::TruncatedPayload, path.string() + ": shorter than header");
  return emb1::detail::parse_header(buf.data(), path.string());
}

}  // namespace stutter
