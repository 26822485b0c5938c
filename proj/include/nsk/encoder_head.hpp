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
#include "nsk/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace nsk {
//==============================================================================
/// Widths of the image-to-name head. The default is the full-size profile:
/// 768 + 1280 features -> 4096 -> 8192 -> 16384 = 8 x 2048.
struct HeadProfile {
  Eigen::Index small_dim = 768;
  Eigen::Index large_dim = 1280;
  Eigen::Index hidden1 = 4096;
  Eigen::Index hidden2 = 8192;
  Eigen::Index name_tokens = kNameTokens;
  Eigen::Index embed_dim = kEmbeddingDim;

  [[nodiscard]] Eigen::Index input_dim() const noexcept { return small_dim + large_dim; }
  [[nodiscard]] Eigen::Index output_dim() const noexcept { return name_tokens * embed_dim; }

  /// 4 -> 4 -> 4 -> 8 with K = 2, D = 4.
  static HeadProfile toy() { return {2, 2, 4, 4, 2, 4}; }

  friend bool operator==(const HeadProfile&, const HeadProfile&) = default;
};
//==============================================================================
template <typename Scalar>
struct BackboneFeatures {
  Vector<Scalar> small;
  Vector<Scalar> large;
};

/// Weights are out x in; biases are column vectors.
template <typename Scalar>
struct HeadParameters {
  Matrix<Scalar> w1, w2, w3;
  Vector<Scalar> b1, b2, b3;

  static HeadParameters zeros(const HeadProfile& p) {
    return {Matrix<Scalar>::Zero(p.hidden1, p.input_dim()),
            Matrix<Scalar>::Zero(p.hidden2, p.hidden1),
            Matrix<Scalar>::Zero(p.output_dim(), p.hidden2),
            Vector<Scalar>::Zero(p.hidden1),
            Vector<Scalar>::Zero(p.hidden2),
            Vector<Scalar>::Zero(p.output_dim())};
  }

  /// Visits (name, dense block) pairs in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    f("w1", w1); f("b1", b1); f("w2", w2); f("b2", b2); f("w3", w3); f("b3", b3);
  }
  template <typename F>
  void for_each(F&& f) const {
    f("w1", w1); f("b1", b1); f("w2", w2); f("b2", b2); f("w3", w3); f("b3", b3);
  }

  [[nodiscard]] bool all_finite() const {
    bool ok = true;
    for_each([&](const char*, const auto& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  template <typename To>
  [[nodiscard]] HeadParameters<To> cast() const {
    return {w1.template cast<To>(), w2.template cast<To>(), w3.template cast<To>(),
            b1.template cast<To>(), b2.template cast<To>(), b3.template cast<To>()};
  }

  friend bool operator==(const HeadParameters& a, const HeadParameters& b) {
    return a.w1 == b.w1 && a.w2 == b.w2 && a.w3 == b.w3 && a.b1 == b.b1 &&
           a.b2 == b.b2 && a.b3 == b.b3;
  }
};

template <typename Scalar>
using HeadGradients = HeadParameters<Scalar>;
//==============================================================================
/// A mini-batch: one sample per column.
template <typename Scalar>
struct HeadBatch {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> inputs;   // input_dim x B
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> targets;  // output_dim x B
};
//==============================================================================
/// Three fully connected layers: rectifier after the first two, linear
/// output, reshaped row-major into K x D.
template <typename Scalar>
class EncoderHead {
 public:
  using Batch = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  EncoderHead(HeadProfile profile, HeadParameters<Scalar> params)
      : profile_(profile), params_(std::move(params)) {
    check_shapes();
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  static EncoderHead initialize(const HeadProfile& profile, std::uint64_t seed) {
    Rng rng(seed);
    auto params = HeadParameters<Scalar>::zeros(profile);
    auto fill = [&rng](auto& m, Eigen::Index fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    };
    fill(params.w1, profile.input_dim());
    fill(params.b1, profile.input_dim());
    fill(params.w2, profile.hidden1);
    fill(params.b2, profile.hidden1);
    fill(params.w3, profile.hidden2);
    fill(params.b3, profile.hidden2);
    return EncoderHead(profile, std::move(params));
  }

  [[nodiscard]] const HeadProfile& profile() const noexcept { return profile_; }
  [[nodiscard]] const HeadParameters<Scalar>& parameters() const noexcept { return params_; }
  [[nodiscard]] HeadParameters<Scalar>& parameters() noexcept { return params_; }

  /// Concatenates (small, large) into a single input column.
  [[nodiscard]] Vector<Scalar> concat(const BackboneFeatures<Scalar>& f) const {
    if (f.small.size() != profile_.small_dim || f.large.size() != profile_.large_dim) {
      throw Error(ErrorCode::kShapeMismatch,
                  "backbone features must be " + std::to_string(profile_.small_dim) +
                      " + " + std::to_string(profile_.large_dim) + ", got " +
                      std::to_string(f.small.size()) + " + " +
                      std::to_string(f.large.size()));
    }
    Vector<Scalar> x(profile_.input_dim());
    x << f.small, f.large;
    return x;
  }

  [[nodiscard]] Batch forward_batch(const Batch& inputs) const {
    check_input(inputs);
    Batch out = params_.w3 * relu(params_.w2 * relu(params_.w1 * inputs +
                                                    bias(params_.b1, inputs.cols())) +
                                  bias(params_.b2, inputs.cols())) +
                bias(params_.b3, inputs.cols());
    if (!out.allFinite()) {
      throw Error(ErrorCode::kNonFinite, "encoder head produced non-finite activations");
    }
    return out;
  }

  [[nodiscard]] NameEmbedding<Scalar> forward(const BackboneFeatures<Scalar>& f) const {
    const Batch y = forward_batch(concat(f));
    return reshape_name(y.col(0));
  }

  /// Mean squared error over all entries of the batch.
  [[nodiscard]] Scalar loss(const HeadBatch<Scalar>& batch) const {
    check_targets(batch);
    const Batch diff = forward_batch(batch.inputs) - batch.targets;
    return diff.squaredNorm() / static_cast<Scalar>(diff.size());
  }

  [[nodiscard]] Scalar loss(const BackboneFeatures<Scalar>& f,
                            const NameEmbedding<Scalar>& target) const {
    return loss(single(f, target));
  }

  /// Returns the batch loss and its exact gradient w.r.t. every parameter.
  [[nodiscard]] std::pair<Scalar, HeadGradients<Scalar>> backward(
      const HeadBatch<Scalar>& batch) const {
    check_input(batch.inputs);
    check_targets(batch);
    const auto& p = params_;
    const Eigen::Index n = batch.inputs.cols();

    const Batch z1 = p.w1 * batch.inputs + bias(p.b1, n);
    const Batch a1 = relu(z1);
    const Batch z2 = p.w2 * a1 + bias(p.b2, n);
    const Batch a2 = relu(z2);
    const Batch y = p.w3 * a2 + bias(p.b3, n);
    if (!y.allFinite()) {
      throw Error(ErrorCode::kNonFinite, "encoder head produced non-finite activations");
    }

    const Batch diff = y - batch.targets;
    const auto count = static_cast<Scalar>(diff.size());
    const Scalar loss = diff.squaredNorm() / count;

    HeadGradients<Scalar> g;
    const Batch dy = (Scalar(2) / count) * diff;
    g.w3 = dy * a2.transpose();
    g.b3 = dy.rowwise().sum();
    const Batch dz2 = (p.w3.transpose() * dy).cwiseProduct(step(z2));
    g.w2 = dz2 * a1.transpose();
    g.b2 = dz2.rowwise().sum();
    const Batch dz1 = (p.w2.transpose() * dz2).cwiseProduct(step(z1));
    g.w1 = dz1 * batch.inputs.transpose();
    g.b1 = dz1.rowwise().sum();
    return {loss, std::move(g)};
  }

  [[nodiscard]] std::pair<Scalar, HeadGradients<Scalar>> backward(
      const BackboneFeatures<Scalar>& f, const NameEmbedding<Scalar>& target) const {
    return backward(single(f, target));
  }

  [[nodiscard]] NameEmbedding<Scalar> reshape_name(
      const Eigen::Ref<const Vector<Scalar>>& flat) const {
    return Eigen::Map<const Matrix<Scalar>>(flat.data(), profile_.name_tokens,
                                            profile_.embed_dim);
  }

  [[nodiscard]] Vector<Scalar> flatten_name(const NameEmbedding<Scalar>& name) const {
    if (name.rows() != profile_.name_tokens || name.cols() != profile_.embed_dim) {
      throw Error(ErrorCode::kShapeMismatch,
                  "target name must be " + std::to_string(profile_.name_tokens) + "x" +
                      std::to_string(profile_.embed_dim));
    }
    return Eigen::Map<const Vector<Scalar>>(name.data(), name.size());
  }

  [[nodiscard]] HeadBatch<Scalar> single(const BackboneFeatures<Scalar>& f,
                                         const NameEmbedding<Scalar>& target) const {
    return {concat(f), flatten_name(target)};
  }

 private:
  static Batch relu(const Batch& z) { return z.cwiseMax(Scalar(0)); }
  static Batch step(const Batch& z) {
    return (z.array() > Scalar(0)).template cast<Scalar>().matrix();
  }
  static auto bias(const Vector<Scalar>& b, Eigen::Index n) { return b.replicate(1, n); }

  void check_input(const Batch& inputs) const {
    if (inputs.rows() != profile_.input_dim()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "head input width " + std::to_string(inputs.rows()) + ", expected " +
                      std::to_string(profile_.input_dim()));
    }
  }
  void check_targets(const HeadBatch<Scalar>& b) const {
    if (b.targets.rows() != profile_.output_dim() || b.targets.cols() != b.inputs.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "target batch shape mismatch");
    }
  }
  void check_shapes() const {
    const auto& p = params_;
    const auto& q = profile_;
    const bool ok = p.w1.rows() == q.hidden1 && p.w1.cols() == q.input_dim() &&
                    p.w2.rows() == q.hidden2 && p.w2.cols() == q.hidden1 &&
                    p.w3.rows() == q.output_dim() && p.w3.cols() == q.hidden2 &&
                    p.b1.size() == q.hidden1 && p.b2.size() == q.hidden2 &&
                    p.b3.size() == q.output_dim();
    if (!ok) {
      throw Error(ErrorCode::kShapeMismatch,
                  "encoder head parameters inconsistent with profile widths");
    }
  }

  HeadProfile profile_;
  HeadParameters<Scalar> params_;
};
//==============================================================================
struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments.
template <typename Scalar>
class Adam {
 public:
  Adam(const HeadProfile& profile, AdamConfig cfg)
      : cfg_(cfg),
        m_(HeadParameters<Scalar>::zeros(profile)),
        v_(HeadParameters<Scalar>::zeros(profile)) {
    if (!(cfg.learning_rate >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "learning rate must be non-negative");
    }
  }

  Adam(AdamConfig cfg, HeadParameters<Scalar> m, HeadParameters<Scalar> v,
       std::uint64_t step)
      : cfg_(cfg), m_(std::move(m)), v_(std::move(v)), step_(step) {}

  void step(HeadParameters<Scalar>& params, const HeadGradients<Scalar>& grads) {
    ++step_;
    const auto t = static_cast<double>(step_);
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto lr = static_cast<Scalar>(cfg_.learning_rate);
    const auto eps = static_cast<Scalar>(cfg_.epsilon);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta1, t));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(cfg_.beta2, t));

    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    update(params.w1, grads.w1, m_.w1, v_.w1);
    update(params.b1, grads.b1, m_.b1, v_.b1);
    update(params.w2, grads.w2, m_.w2, v_.w2);
    update(params.b2, grads.b2, m_.b2, v_.b2);
    update(params.w3, grads.w3, m_.w3, v_.w3);
    update(params.b3, grads.b3, m_.b3, v_.b3);
  }

  [[nodiscard]] const AdamConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] std::uint64_t step_count() const noexcept { return step_; }
  [[nodiscard]] const HeadParameters<Scalar>& first_moment() const noexcept { return m_; }
  [[nodiscard]] const HeadParameters<Scalar>& second_moment() const noexcept { return v_; }

 private:
  AdamConfig cfg_;
  HeadParameters<Scalar> m_;
  HeadParameters<Scalar> v_;
  std::uint64_t step_ = 0;
};
//==============================================================================
struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 16;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 0;
  bool keep_best = true;
};

template <typename Scalar>
struct TrainSample {
  BackboneFeatures<Scalar> features;
  NameEmbedding<Scalar> target;
};

template <typename Scalar>
struct TrainResult {
  EncoderHead<Scalar> final_head;
  Adam<Scalar> optimizer;
  /// Parameters at the lowest mini-batch loss seen, if kept.
  std::optional<HeadParameters<Scalar>> best_parameters;
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();
  std::size_t best_step = 0;
  /// Mini-batch loss per step, measured before that step's update.
  std::vector<Scalar> loss_history;
};

/// Packs samples[indices] into a column batch.
template <typename Scalar>
HeadBatch<Scalar> make_batch(const EncoderHead<Scalar>& head,
                             std::span<const TrainSample<Scalar>> samples,
                             std::span<const std::size_t> indices) {
  const auto& p = head.profile();
  const auto n = static_cast<Eigen::Index>(indices.size());
  HeadBatch<Scalar> batch{typename EncoderHead<Scalar>::Batch(p.input_dim(), n),
                          typename EncoderHead<Scalar>::Batch(p.output_dim(), n)};
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& s = samples[indices[static_cast<std::size_t>(c)]];
    batch.inputs.col(c) = head.concat(s.features);
    batch.targets.col(c) = head.flatten_name(s.target);
  }
  return batch;
}

/// MSE of the head over a whole dataset, averaged over all entries.
template <typename Scalar>
Scalar dataset_loss(const EncoderHead<Scalar>& head,
                    std::span<const TrainSample<Scalar>> samples) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "empty dataset");
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return head.loss(make_batch(head, samples, std::span<const std::size_t>(all)));
}

/// Thrown when the loss stops being finite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t step, double loss)
      : Error(ErrorCode::kNonFinite, "training diverged at step " + std::to_string(step) +
                                         " (loss " + std::to_string(loss) + ")"),
        step_(step) {}
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Mini-batch Adam. Each epoch visits the samples in a seeded shuffled
/// order; a final short batch wraps into the next epoch. `on_step` receives
/// (step, loss) as each step completes.
template <typename Scalar>
TrainResult<Scalar> train(EncoderHead<Scalar> head,
                          std::span<const TrainSample<Scalar>> samples,
                          const TrainConfig& cfg,
                          const std::type_identity_t<std::function<void(std::size_t, Scalar)>>& on_step = {},
                          std::type_identity_t<std::optional<Adam<Scalar>>> resume = std::nullopt) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "train: empty dataset");
  if (!(cfg.adam.learning_rate >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "train: learning rate must be non-negative");
  }
  if (cfg.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "train: batch size 0");

  Adam<Scalar> adam = resume ? std::move(*resume) : Adam<Scalar>(head.profile(), cfg.adam);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  std::optional<HeadParameters<Scalar>> best_parameters;
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();
  std::size_t best_step = 0;
  std::vector<Scalar> history;
  history.reserve(cfg.max_steps);
  std::vector<std::size_t> indices(std::min(cfg.batch_size, samples.size()));

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    for (auto& idx : indices) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      idx = order[cursor++];
    }
    auto [loss, grads] =
        head.backward(make_batch(head, samples, std::span<const std::size_t>(indices)));
    if (!std::isfinite(static_cast<double>(loss))) {
      throw TrainingDiverged(step, static_cast<double>(loss));
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_step = step;
      if (cfg.keep_best) best_parameters = head.parameters();
    }
    adam.step(head.parameters(), grads);
    if (!head.parameters().all_finite()) {
      throw TrainingDiverged(step, static_cast<double>(loss));
    }
    history.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  return TrainResult<Scalar>{std::move(head), std::move(adam), std::move(best_parameters),
                             best_loss, best_step, std::move(history)};
}
//==============================================================================
// Checkpoints: a directory holding `checkpoint.tsv` (a manifest with role
// `parameter`) plus one NSTF file per parameter, per Adam moment, the step
// counter and the head profile.
struct Checkpoint {
  EncoderHead<float> head;
  std::optional<Adam<float>> optimizer;
};

void save_checkpoint(const std::filesystem::path& dir, const EncoderHead<float>& head,
                     const Adam<float>* optimizer = nullptr);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& dir);
//==============================================================================
}  // namespace nsk
//==============================================================================
