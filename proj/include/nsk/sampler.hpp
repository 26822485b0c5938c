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

#include "nsk/naming.hpp"
#include "nsk/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace nsk {
//==============================================================================
/// Cumulative signal levels alpha_bar[0..T]; alpha_bar[0] is the clean end.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
    if (alpha_bar_.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument, "schedule needs at least one step");
    }
    if (!(alpha_bar_[0] > 0.999 && alpha_bar_[0] <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "alpha_bar[0] must lie in (0.999, 1]");
    }
    for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
      if (!(alpha_bar_[t] > 0.0 && alpha_bar_[t] < alpha_bar_[t - 1])) {
        throw Error(ErrorCode::kInvalidArgument,
                    "alpha_bar must be strictly decreasing in (0, 1] (step " +
                        std::to_string(t) + ")");
      }
    }
  }

  /// Linear in alpha_bar from `first` (t = 0) to `last` (t = steps).
  static NoiseSchedule linear(std::size_t steps = 100, double first = 0.9999,
                              double last = 0.02) {
    if (steps == 0) throw Error(ErrorCode::kInvalidArgument, "schedule needs steps >= 1");
    std::vector<double> ab(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t) {
      ab[t] = first + (last - first) * static_cast<double>(t) / static_cast<double>(steps);
    }
    return NoiseSchedule(std::move(ab));
  }

  [[nodiscard]] std::size_t steps() const noexcept { return alpha_bar_.size() - 1; }
  [[nodiscard]] double alpha_bar(std::size_t t) const { return alpha_bar_.at(t); }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return alpha_bar_; }

 private:
  std::vector<double> alpha_bar_;
};
//==============================================================================
/// Noise predictor contract. Implementations must be reentrant and
/// deterministic, and return a tensor shaped like `x`.
template <typename Scalar>
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  [[nodiscard]] virtual Matrix<Scalar> predict(const Matrix<Scalar>& x,
                                               const TokenSequence<Scalar>& condition,
                                               std::size_t t) const = 0;
};

template <typename Scalar>
class ZeroDenoiser final : public Denoiser<Scalar> {
 public:
  Matrix<Scalar> predict(const Matrix<Scalar>& x, const TokenSequence<Scalar>&,
                         std::size_t) const override {
    return Matrix<Scalar>::Zero(x.rows(), x.cols());
  }
};

/// Always returns the same planted noise.
template <typename Scalar>
class ExactNoiseDenoiser final : public Denoiser<Scalar> {
 public:
  explicit ExactNoiseDenoiser(Matrix<Scalar> eps) : eps_(std::move(eps)) {}
  Matrix<Scalar> predict(const Matrix<Scalar>& x, const TokenSequence<Scalar>&,
                         std::size_t) const override {
    if (x.rows() != eps_.rows() || x.cols() != eps_.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "exact denoiser: state shape differs");
    }
    return eps_;
  }

 private:
  Matrix<Scalar> eps_;
};

/// eps = A * vec(x), reshaped back to x's shape.
template <typename Scalar>
class LinearDenoiser final : public Denoiser<Scalar> {
 public:
  explicit LinearDenoiser(Matrix<Scalar> a) : a_(std::move(a)) {}
  Matrix<Scalar> predict(const Matrix<Scalar>& x, const TokenSequence<Scalar>&,
                         std::size_t) const override {
    if (a_.cols() != x.size() || a_.rows() != x.size()) {
      throw Error(ErrorCode::kShapeMismatch, "linear denoiser: operator size mismatch");
    }
    const Eigen::Map<const Vector<Scalar>> flat(x.data(), x.size());
    const Vector<Scalar> out = a_ * flat;
    return Eigen::Map<const Matrix<Scalar>>(out.data(), x.rows(), x.cols());
  }

 private:
  Matrix<Scalar> a_;
};

/// eps = decay * x + P * mean_row(condition): a condition-sensitive toy
/// predictor whose projection P is drawn from a seed.
template <typename Scalar>
class ConditionProjectionDenoiser final : public Denoiser<Scalar> {
 public:
  ConditionProjectionDenoiser(Eigen::Index state_size, Eigen::Index embed_dim,
                              std::uint64_t seed, Scalar decay = Scalar(0.1))
      : projection_(state_size, embed_dim), decay_(decay) {
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (Eigen::Index i = 0; i < projection_.size(); ++i) {
      projection_.data()[i] = static_cast<Scalar>(scale * rng.normal());
    }
  }

  Matrix<Scalar> predict(const Matrix<Scalar>& x, const TokenSequence<Scalar>& condition,
                         std::size_t) const override {
    if (x.size() != projection_.rows() || condition.dim() != projection_.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "projection denoiser: shape mismatch");
    }
    const Vector<Scalar> summary = condition.rows().colwise().mean().transpose();
    const Vector<Scalar> drive = projection_ * summary;
    const Eigen::Map<const Matrix<Scalar>> shaped(drive.data(), x.rows(), x.cols());
    return decay_ * x + shaped;
  }

 private:
  Matrix<Scalar> projection_;
  Scalar decay_;
};
//==============================================================================
/// eps_uncond + gamma * (eps_cond - eps_uncond)
template <typename A, typename B>
typename A::PlainObject cfg_combine(const Eigen::MatrixBase<A>& eps_uncond,
                                    const Eigen::MatrixBase<B>& eps_cond,
                                    typename A::Scalar gamma) {
  detail::require_same_shape(eps_uncond, eps_cond, "cfg_combine");
  return eps_uncond + gamma * (eps_cond - eps_uncond);
}

/// Deterministic DDIM update from level a_t to a_prev (a_prev > a_t).
template <typename A, typename B>
typename A::PlainObject ddim_step(const Eigen::MatrixBase<A>& x_t,
                                  const Eigen::MatrixBase<B>& eps, double a_t,
                                  double a_prev) {
  using Scalar = typename A::Scalar;
  detail::require_same_shape(x_t, eps, "ddim_step");
  if (!(a_t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ddim_step: a_t must be > 0");
  if (!(a_t < a_prev && a_prev <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ddim_step: need a_t < a_prev <= 1");
  }
  const auto sqrt_one_minus_at = static_cast<Scalar>(std::sqrt(1.0 - a_t));
  const auto inv_sqrt_at = static_cast<Scalar>(1.0 / std::sqrt(a_t));
  const auto sqrt_prev = static_cast<Scalar>(std::sqrt(a_prev));
  const auto sqrt_one_minus_prev = static_cast<Scalar>(std::sqrt(1.0 - a_prev));
  const typename A::PlainObject x0 = (x_t - sqrt_one_minus_at * eps) * inv_sqrt_at;
  return sqrt_prev * x0 + sqrt_one_minus_prev * eps;
}
//==============================================================================
/// Standard normal state of the given shape, drawn in row-major order.
template <typename Scalar>
Matrix<Scalar> initial_state(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix<Scalar> x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<Scalar>(rng.normal());
  return x;
}

/// The identity-bearing condition: the guided name prepended to the prompt.
template <typename Scalar>
TokenSequence<Scalar> build_condition(const NameEmbedding<Scalar>& name,
                                      const TokenSequence<Scalar>& prompt,
                                      const NameEmbedding<Scalar>& mean,
                                      const GuidanceConfig& cfg) {
  return name_prepend(guided_name(name, mean, cfg), prompt);
}

/// Runs t = T..1 with guidance, starting from x_T; returns x_0.
template <typename Scalar>
Matrix<Scalar> denoise(Matrix<Scalar> x, const TokenSequence<Scalar>& condition,
                       const TokenSequence<Scalar>& null_condition, double gamma,
                       const NoiseSchedule& sched, const Denoiser<Scalar>& denoiser) {
  const auto g = static_cast<Scalar>(gamma);
  for (std::size_t t = sched.steps(); t >= 1; --t) {
    const Matrix<Scalar> eps_uncond = denoiser.predict(x, null_condition, t);
    const Matrix<Scalar> eps_cond = denoiser.predict(x, condition, t);
    if (eps_uncond.rows() != x.rows() || eps_uncond.cols() != x.cols() ||
        eps_cond.rows() != x.rows() || eps_cond.cols() != x.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "denoiser output shape differs from state");
    }
    x = ddim_step(x, cfg_combine(eps_uncond, eps_cond, g), sched.alpha_bar(t),
                  sched.alpha_bar(t - 1));
    if (!x.allFinite()) throw Error(ErrorCode::kNonFinite, "sampler state became non-finite");
  }
  return x;
}

struct LatentShape {
  Eigen::Index rows = 1;
  Eigen::Index cols = 16;
};

/// End-to-end identity-conditioned sampling: recalibrate and rescale the
/// name, prepend it to the prompt, draw x_T from `seed`, then run guided
/// DDIM over the whole schedule. The null branch is left unnamed.
template <typename Scalar>
Matrix<Scalar> generate(const NameEmbedding<Scalar>& name, const TokenSequence<Scalar>& prompt,
                        const TokenSequence<Scalar>& null_seq,
                        const NameEmbedding<Scalar>& mean, const GuidanceConfig& cfg,
                        const NoiseSchedule& sched, const Denoiser<Scalar>& denoiser,
                        std::uint64_t seed, LatentShape shape = {}) {
  if (prompt.length() != kSequenceLength || null_seq.length() != kSequenceLength) {
    throw Error(ErrorCode::kShapeMismatch, "prompt and null sequences must have 77 rows");
  }
  if (prompt.dim() != null_seq.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "prompt and null sequences differ in width");
  }
  const auto condition = build_condition(name, prompt, mean, cfg);
  return denoise(initial_state<Scalar>(shape.rows, shape.cols, seed), condition, null_seq,
                 cfg.gamma, sched, denoiser);
}
//==============================================================================
}  // namespace nsk
//==============================================================================
