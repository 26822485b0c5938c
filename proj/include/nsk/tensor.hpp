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
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsk {
//==============================================================================
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXf = Matrix<float>;
using MatrixXd = Matrix<double>;
//==============================================================================
enum class ErrorCode {
  kBadMagic,
  kVersionMismatch,
  kBadDtype,
  kBadShape,
  kTruncated,
  kNonFinite,
  kShapeMismatch,
  kInvalidArgument,
  kIo,
};

/// Every failure raised by the library. `code()` separates I/O failures
/// (missing or unwritable files) from validation failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] bool is_io() const noexcept { return code_ == ErrorCode::kIo; }

 private:
  ErrorCode code_;
};

[[nodiscard]] const char* to_string(ErrorCode code) noexcept;
//==============================================================================
/// Row-major f32 tensor. Immutable after construction.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<float> data);

  /// Copies any Eigen expression; a column vector becomes a 1-D tensor.
  template <typename Derived>
  static Tensor from_eigen(const Eigen::DenseBase<Derived>& m) {
    const Matrix<float> rows = m.template cast<float>();
    std::vector<float> data(rows.data(), rows.data() + rows.size());
    if (Derived::ColsAtCompileTime == 1) {
      return Tensor({static_cast<std::size_t>(rows.rows())}, std::move(data));
    }
    return Tensor({static_cast<std::size_t>(rows.rows()),
                   static_cast<std::size_t>(rows.cols())},
                  std::move(data));
  }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t ndim() const noexcept { return shape_.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] bool all_finite() const noexcept;

  /// View a 2-D tensor (or a 1-D one as a single row) as a matrix.
  [[nodiscard]] Matrix<float> matrix() const;
  /// Flattened values as a column vector.
  [[nodiscard]] Vector<float> vector() const;

  [[nodiscard]] std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

[[nodiscard]] std::size_t element_count(const Tensor::Shape& shape) noexcept;
//==============================================================================
// NSTF: "NSTF" | u16 version=1 | u8 dtype=0 (f32) | u8 ndim | ndim x u32 | f32[]
// All integers and floats little-endian.
inline constexpr char kNstfMagic[4] = {'N', 'S', 'T', 'F'};
inline constexpr std::uint16_t kNstfVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

struct IoOptions {
  bool allow_nonfinite = false;
};

[[nodiscard]] std::vector<std::uint8_t> encode_tensor(const Tensor& t,
                                                      IoOptions opts = {});
[[nodiscard]] Tensor decode_tensor(std::span<const std::uint8_t> bytes,
                                   IoOptions opts = {});

void write_tensor(const Tensor& t, const std::filesystem::path& path,
                  IoOptions opts = {});
[[nodiscard]] Tensor read_tensor(const std::filesystem::path& path,
                                 IoOptions opts = {});
//==============================================================================
}  // namespace nsk
//==============================================================================
