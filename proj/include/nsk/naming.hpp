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

#include "nsk/tensor.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace nsk {
//==============================================================================
inline constexpr Eigen::Index kSequenceLength = 77;
inline constexpr Eigen::Index kNameTokens = 8;
inline constexpr Eigen::Index kEmbeddingDim = 2048;
//==============================================================================
/// A name embedding is a K x D block of token rows (8 x 2048 by default).
template <typename Scalar>
using NameEmbedding = Matrix<Scalar>;

enum class Segment : std::uint8_t { kStart, kSemantic, kPadding };

/// Per-token text embedding (L x D) with a segment tag per row.
/// Tags are ordered: one start row, then semantic rows, then padding rows.
template <typename Scalar>
class TokenSequence {
 public:
  TokenSequence() = default;

  TokenSequence(Matrix<Scalar> rows, std::vector<Segment> tags)
      : rows_(std::move(rows)), tags_(std::move(tags)) {
    validate();
  }

  /// Tags row 0 start, the next `semantic` rows semantic and the rest
  /// padding. Without a count every non-start row is semantic.
  static TokenSequence from_rows(Matrix<Scalar> rows,
                                 std::optional<Eigen::Index> semantic = std::nullopt) {
    const Eigen::Index n = rows.rows();
    if (n == 0) {
      throw Error(ErrorCode::kShapeMismatch, "token sequence has no rows");
    }
    const Eigen::Index sem = semantic.value_or(n - 1);
    if (sem < 0 || sem > n - 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "semantic token count " + std::to_string(sem) +
                      " exceeds sequence length");
    }
    std::vector<Segment> tags(static_cast<std::size_t>(n), Segment::kPadding);
    tags[0] = Segment::kStart;
    for (Eigen::Index i = 1; i <= sem; ++i) {
      tags[static_cast<std::size_t>(i)] = Segment::kSemantic;
    }
    return TokenSequence(std::move(rows), std::move(tags));
  }

  [[nodiscard]] Eigen::Index length() const noexcept { return rows_.rows(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return rows_.cols(); }
  [[nodiscard]] const Matrix<Scalar>& rows() const noexcept { return rows_; }
  [[nodiscard]] const std::vector<Segment>& tags() const noexcept { return tags_; }
  [[nodiscard]] Eigen::Index semantic_count() const noexcept {
    Eigen::Index n = 0;
    for (auto t : tags_) n += t == Segment::kSemantic;
    return n;
  }

 private:
  void validate() const {
    if (static_cast<std::size_t>(rows_.rows()) != tags_.size()) {
      throw Error(ErrorCode::kShapeMismatch, "one segment tag per row required");
    }
    if (tags_.empty() || tags_[0] != Segment::kStart) {
      throw Error(ErrorCode::kInvalidArgument, "row 0 must be the start token");
    }
    for (std::size_t i = 1; i < tags_.size(); ++i) {
      if (tags_[i] == Segment::kStart || tags_[i] < tags_[i - 1]) {
        throw Error(ErrorCode::kInvalidArgument,
                    "segment tags out of order at row " + std::to_string(i));
      }
    }
  }

  Matrix<Scalar> rows_;
  std::vector<Segment> tags_;
};
//==============================================================================
/// Recalibration and sampling hyper-parameters.
struct GuidanceConfig {
  double gamma = 7.0;  // classifier-free guidance scale
  double delta = 5.0;  // name guidance strength around the mean name
  double eta = 80.0;   // Frobenius norm of the final name embedding

  void validate() const {
    if (!std::isfinite(gamma) || !std::isfinite(delta)) {
      throw Error(ErrorCode::kInvalidArgument, "gamma and delta must be finite");
    }
    if (!(eta > 0.0) || !std::isfinite(eta)) {
      throw Error(ErrorCode::kInvalidArgument, "eta must be positive");
    }
  }
};
//==============================================================================
namespace detail {

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
}

}  // namespace detail
//==============================================================================
/// Inserts the name rows right after the start token and truncates the tail
/// so the result keeps the input length. Inserted rows are tagged semantic.
template <typename Scalar, typename Derived>
TokenSequence<Scalar> name_prepend(const Eigen::MatrixBase<Derived>& name,
                                   const TokenSequence<Scalar>& seq) {
  const Eigen::Index length = seq.length();
  const Eigen::Index k = name.rows();
  if (length != kSequenceLength) {
    throw Error(ErrorCode::kShapeMismatch,
                "name_prepend: sequence length " + std::to_string(length) +
                    ", expected " + std::to_string(kSequenceLength));
  }
  if (name.cols() != seq.dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "name_prepend: name width " + std::to_string(name.cols()) +
                    " != sequence width " + std::to_string(seq.dim()));
  }
  if (k + 1 > length) {
    throw Error(ErrorCode::kShapeMismatch, "name_prepend: name longer than sequence");
  }

  const Eigen::Index kept = length - 1 - k;
  Matrix<Scalar> rows(length, seq.dim());
  rows.row(0) = seq.rows().row(0);
  rows.middleRows(1, k) = name.template cast<Scalar>();
  rows.bottomRows(kept) = seq.rows().middleRows(1, kept);

  std::vector<Segment> tags;
  tags.reserve(static_cast<std::size_t>(length));
  tags.push_back(Segment::kStart);
  tags.insert(tags.end(), static_cast<std::size_t>(k), Segment::kSemantic);
  tags.insert(tags.end(), seq.tags().begin() + 1, seq.tags().begin() + 1 + kept);
  return TokenSequence<Scalar>(std::move(rows), std::move(tags));
}
//==============================================================================
/// mean + delta * (name - mean), evaluated as (1 - delta) * mean + delta * name
/// so that delta = 1 returns `name` and delta = 0 returns `mean` bit-exactly.
template <typename A, typename B>
typename A::PlainObject recalibrate(const Eigen::MatrixBase<A>& name,
                                    const Eigen::MatrixBase<B>& mean,
                                    typename A::Scalar delta) {
  using Scalar = typename A::Scalar;
  detail::require_same_shape(name, mean, "recalibrate");
  return (Scalar(1) - delta) * mean + delta * name;
}
//==============================================================================
/// Scales the embedding to Frobenius norm `eta`.
template <typename A>
typename A::PlainObject rescale(const Eigen::MatrixBase<A>& name,
                                typename A::Scalar eta) {
  using Scalar = typename A::Scalar;
  if (!(eta > Scalar(0))) {
    throw Error(ErrorCode::kInvalidArgument, "rescale: eta must be positive");
  }
  // Accumulate the norm in at least double precision.
  using Acc = std::common_type_t<Scalar, double>;
  const Acc norm = name.template cast<Acc>().norm();
  if (!(norm > Acc(0)) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kInvalidArgument, "rescale: input has zero norm");
  }
  return (name.template cast<Acc>() * (Acc(eta) / norm)).template cast<Scalar>();
}
//==============================================================================
/// rescale(recalibrate(name, mean, delta), eta): the name embedding actually
/// fed to sampling.
template <typename A, typename B>
typename A::PlainObject guided_name(const Eigen::MatrixBase<A>& name,
                                    const Eigen::MatrixBase<B>& mean,
                                    const GuidanceConfig& cfg) {
  using Scalar = typename A::Scalar;
  cfg.validate();
  return rescale(recalibrate(name, mean, static_cast<Scalar>(cfg.delta)),
                 static_cast<Scalar>(cfg.eta));
}
//==============================================================================
template <typename Scalar>
NameEmbedding<Scalar> mean_name(std::span<const NameEmbedding<Scalar>> names) {
  if (names.empty()) throw Error(ErrorCode::kInvalidArgument, "mean_name: empty list");
  using Acc = std::common_type_t<Scalar, double>;
  Matrix<Acc> sum = Matrix<Acc>::Zero(names.front().rows(), names.front().cols());
  for (const auto& n : names) {
    detail::require_same_shape(n, names.front(), "mean_name");
    sum += n.template cast<Acc>();
  }
  sum /= static_cast<Acc>(names.size());
  return sum.template cast<Scalar>();
}

template <typename Scalar>
NameEmbedding<Scalar> mean_name(const std::vector<NameEmbedding<Scalar>>& names) {
  return mean_name(std::span<const NameEmbedding<Scalar>>(names));
}
//==============================================================================
/// (1 - t) * a + t * b, t in [0, 1].
template <typename A, typename B>
typename A::PlainObject interpolate(const Eigen::MatrixBase<A>& a,
                                    const Eigen::MatrixBase<B>& b,
                                    typename A::Scalar t) {
  using Scalar = typename A::Scalar;
  detail::require_same_shape(a, b, "interpolate");
  if (!(t >= Scalar(0) && t <= Scalar(1))) {
    throw Error(ErrorCode::kInvalidArgument, "interpolate: t outside [0, 1]");
  }
  return (Scalar(1) - t) * a + t * b;
}
//==============================================================================
/// Ground-truth name of a name-only prompt encoding: the `k` rows right
/// after the start token.
template <typename Scalar>
NameEmbedding<Scalar> extract_gt_name(const TokenSequence<Scalar>& seq,
                                      Eigen::Index k = kNameTokens) {
  if (seq.length() < k + 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "extract_gt_name: sequence has " + std::to_string(seq.length()) +
                    " rows, need " + std::to_string(k + 1));
  }
  return seq.rows().middleRows(1, k);
}
//==============================================================================
}  // namespace nsk
//==============================================================================
