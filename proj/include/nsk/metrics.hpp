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

#include "nsk/rng.hpp"
#include "nsk/tensor.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace nsk {
//==============================================================================
// Feature populations are n x dim matrices, one sample per row. All
// metrics accumulate in double regardless of the input scalar.

inline constexpr double kEigenClamp = 1e-10;

namespace detail {

template <typename Derived>
double checked_row_norm(const Eigen::MatrixBase<Derived>& row, const char* op) {
  const double n = row.template cast<double>().norm();
  if (!(n > 0.0)) throw Error(ErrorCode::kInvalidArgument, std::string(op) + ": zero-norm row");
  return n;
}

template <typename A, typename B>
double cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* op) {
  return a.template cast<double>().dot(b.template cast<double>()) /
         (checked_row_norm(a, op) * checked_row_norm(b, op));
}

/// Symmetric PSD square root; eigenvalues below kEigenClamp count as zero.
inline Matrix<double> psd_sqrt(const Matrix<double>& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd roots =
      es.eigenvalues().unaryExpr([](double l) { return l < kEigenClamp ? 0.0 : std::sqrt(l); });
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail
//==============================================================================
/// Mean text/image cosine similarity over row pairs, times 100.
template <typename A, typename B>
double clip_ti(const Eigen::MatrixBase<A>& text, const Eigen::MatrixBase<B>& image) {
  if (text.rows() != image.rows() || text.cols() != image.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "clip_ti: populations differ in shape");
  }
  if (text.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "clip_ti: empty population");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < text.rows(); ++i) {
    sum += detail::cosine(text.row(i), image.row(i), "clip_ti");
  }
  return 100.0 * sum / static_cast<double>(text.rows());
}
//==============================================================================
struct Moments {
  Eigen::VectorXd mean;
  Matrix<double> covariance;  // unbiased
};

template <typename A>
Moments moments(const Eigen::MatrixBase<A>& pop) {
  if (pop.rows() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "covariance needs at least two samples");
  }
  const Matrix<double> x = pop.template cast<double>();
  Moments m;
  m.mean = x.colwise().mean().transpose();
  const Matrix<double> centered = x.rowwise() - m.mean.transpose();
  m.covariance = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  return m;
}

/// Frechet distance between Gaussian fits:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
template <typename A, typename B>
double fid(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::kShapeMismatch, "fid: widths differ");
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const Matrix<double> root_a = detail::psd_sqrt(ma.covariance);
  Matrix<double> inner = root_a * mb.covariance * root_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (l >= kEigenClamp) trace_root += std::sqrt(l);
  }
  return (ma.mean - mb.mean).squaredNorm() + ma.covariance.trace() + mb.covariance.trace() -
         2.0 * trace_root;
}

/// True when either population has fewer than dim + 1 samples, where the
/// covariance estimate is rank deficient.
template <typename A, typename B>
bool fid_undersampled(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() < a.cols() + 1 || b.rows() < b.cols() + 1;
}
//==============================================================================
/// Partner of sample i: uniform over the other n - 1 samples.
inline Eigen::Index draw_partner(Rng& rng, Eigen::Index i, Eigen::Index n) {
  const auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n - 1)));
  return j >= i ? j + 1 : j;
}

/// Random-partner identity consistency: every sample is compared with one
/// seeded uniformly drawn other sample; the cosines are averaged.
template <typename A>
double id_consistency(const Eigen::MatrixBase<A>& faces, std::uint64_t seed) {
  const Eigen::Index n = faces.rows();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "id_consistency needs at least two rows");
  Rng rng(seed);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = draw_partner(rng, i, n);
    sum += detail::cosine(faces.row(i), faces.row(j), "id_consistency");
  }
  return sum / static_cast<double>(n);
}
//==============================================================================
// Prompt fixtures for per-task breakdowns: four groups of ten prompts.
inline constexpr std::array<std::string_view, 4> kTaskNames = {"Style", "Scene", "Emotion",
                                                               "Action"};

[[nodiscard]] const std::array<std::array<std::string_view, 10>, 4>& evaluation_prompts();

/// Task group of a prompt. Matching ignores case and extra whitespace, and
/// treats "man"/"woman" as "person".
[[nodiscard]] std::optional<std::string_view> task_for_prompt(std::string_view prompt);
//==============================================================================
}  // namespace nsk
//==============================================================================
