//==============================================================================
// Copyright 2026 The nsk Authors.
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
//==============================================================================
#include "nsk/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
//==============================================================================
namespace nsk {
//==============================================================================
namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void check_finite(std::span<const float> values, const char* context) {
  const auto bad = std::find_if(values.begin(), values.end(),
                                [](float v) { return !std::isfinite(v); });
  if (bad != values.end()) {
    throw Error(ErrorCode::kNonFinite,
                std::string(context) + ": non-finite value at index " +
                    std::to_string(std::distance(values.begin(), bad)));
  }
}

}  // namespace
//==============================================================================
const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kBadDtype: return "BadDtype";
    case ErrorCode::kBadShape: return "BadShape";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}
//==============================================================================
std::size_t element_count(const Tensor::Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}
//==============================================================================
Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw Error(ErrorCode::kBadShape,
                "tensor shape " + shape_string() + " does not hold " +
                    std::to_string(data_.size()) + " values");
  }
}
//==============================================================================
bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}
//==============================================================================
Matrix<float> Tensor::matrix() const {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (shape_.size() == 1) {
    rows = 1;
    cols = static_cast<Eigen::Index>(shape_[0]);
  } else if (shape_.size() == 2) {
    rows = static_cast<Eigen::Index>(shape_[0]);
    cols = static_cast<Eigen::Index>(shape_[1]);
  } else {
    throw Error(ErrorCode::kShapeMismatch,
                "expected a 1-D or 2-D tensor, got shape " + shape_string());
  }
  return Eigen::Map<const Matrix<float>>(data_.data(), rows, cols);
}
//==============================================================================
Vector<float> Tensor::vector() const {
  return Eigen::Map<const Vector<float>>(data_.data(),
                                         static_cast<Eigen::Index>(data_.size()));
}
//==============================================================================
std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ']';
  return os.str();
}
//==============================================================================
std::vector<std::uint8_t> encode_tensor(const Tensor& t, IoOptions opts) {
  if (t.ndim() == 0 || t.ndim() > std::numeric_limits<std::uint8_t>::max()) {
    throw Error(ErrorCode::kBadShape, "cannot encode tensor with ndim " +
                                          std::to_string(t.ndim()));
  }
  if (!opts.allow_nonfinite) check_finite(t.data(), "write_tensor");

  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.ndim() + 4 * t.size());
  out.insert(out.end(), std::begin(kNstfMagic), std::end(kNstfMagic));
  put_u16(out, kNstfVersion);
  put_u8(out, kDtypeF32);
  put_u8(out, static_cast<std::uint8_t>(t.ndim()));
  for (auto extent : t.shape()) {
    if (extent > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::kBadShape, "extent exceeds u32");
    }
    put_u32(out, static_cast<std::uint32_t>(extent));
  }
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}
//==============================================================================
Tensor decode_tensor(std::span<const std::uint8_t> bytes, IoOptions opts) {
  constexpr std::size_t kFixedHeader = 8;
  if (bytes.size() < kFixedHeader) {
    throw Error(ErrorCode::kTruncated, "header shorter than 8 bytes");
  }
  if (!std::equal(std::begin(kNstfMagic), std::end(kNstfMagic), bytes.begin(),
                  [](char a, std::uint8_t b) {
                    return static_cast<std::uint8_t>(a) == b;
                  })) {
    throw Error(ErrorCode::kBadMagic, "bad magic, expected NSTF");
  }
  const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kNstfVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "unsupported NSTF version " + std::to_string(version));
  }
  if (bytes[6] != kDtypeF32) {
    throw Error(ErrorCode::kBadDtype,
                "unsupported dtype code " + std::to_string(bytes[6]));
  }
  const std::size_t ndim = bytes[7];
  if (ndim == 0) throw Error(ErrorCode::kBadShape, "ndim is zero");
  if (bytes.size() < kFixedHeader + 4 * ndim) {
    throw Error(ErrorCode::kTruncated, "shape header truncated");
  }

  Tensor::Shape shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32(bytes.data() + kFixedHeader + 4 * i);
  }
  const std::size_t offset = kFixedHeader + 4 * ndim;
  const std::size_t count = element_count(shape);
  const std::size_t payload = bytes.size() - offset;
  if (payload < 4 * count) {
    throw Error(ErrorCode::kTruncated,
                "payload holds " + std::to_string(payload) + " bytes, expected " +
                    std::to_string(4 * count));
  }
  if (payload > 4 * count) {
    throw Error(ErrorCode::kBadShape, "trailing bytes after payload");
  }

  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes.data() + offset + 4 * i));
  }
  if (!opts.allow_nonfinite) check_finite(data, "read_tensor");
  return Tensor(std::move(shape), std::move(data));
}
//==============================================================================
void write_tensor(const Tensor& t, const std::filesystem::path& path,
                  IoOptions opts) {
  const auto bytes = encode_tensor(t, opts);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}
//==============================================================================
Tensor read_tensor(const std::filesystem::path& path, IoOptions opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
  try {
    return decode_tensor(bytes, opts);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}
//==============================================================================
}  // namespace nsk
//==============================================================================
