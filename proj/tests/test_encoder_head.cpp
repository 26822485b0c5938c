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
#include "doctest.h"
#include "nsk/encoder_head.hpp"
#include "support.hpp"

#include <cmath>

using namespace nsk;
using nsk::test::random_matrix;
using nsk::test::random_vector;
using nsk::test::TempDir;

namespace {

const HeadProfile kToy = HeadProfile::toy();

EncoderHead<double> hand_set_head() {
  auto p = HeadParameters<double>::zeros(kToy);
  p.w1.setIdentity();
  p.b1 << 0.5, -1.0, 0.0, 0.25;
  p.w2 << 1, 0, 0, 0, 0, 2, 0, 0, 0, 0, -1, 0, 1, 1, 1, 1;
  p.b2 << 0.0, 0.0, 0.5, -0.25;
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) p.w3(i, j) = (i + 1) * (j % 2 ? -1.0 : 1.0) / 4.0;
    p.b3(i) = 0.1 * static_cast<double>(i);
  }
  return EncoderHead<double>(kToy, p);
}

std::vector<TrainSample<float>> random_samples(Rng& rng, int n, const HeadProfile& p) {
  std::vector<TrainSample<float>> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({{random_vector<float>(rng, p.small_dim), random_vector<float>(rng, p.large_dim)},
                   random_matrix<float>(rng, p.name_tokens, p.embed_dim)});
  }
  return out;
}

}  // namespace

TEST_CASE("toy forward pass matches the hand-derived output") {
  const auto head = hand_set_head();
  Vector<double> small(2), large(2);
  small << 1.0, -2.0;
  large << 0.5, 3.0;
  const NameEmbedding<double> y = head.forward({small, large});
  REQUIRE(y.rows() == 2);
  REQUIRE(y.cols() == 4);
  const double expect[8] = {-0.875, -1.65, -2.425, -3.2, -3.975, -4.75, -5.525, -6.3};
  for (int i = 0; i < 8; ++i) CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("initialization is seeded and bounded by fan-in") {
  const auto a = EncoderHead<float>::initialize(kToy, 3);
  const auto b = EncoderHead<float>::initialize(kToy, 3);
  const auto c = EncoderHead<float>::initialize(kToy, 4);
  CHECK(a.parameters() == b.parameters());
  CHECK_FALSE(a.parameters() == c.parameters());
  CHECK(a.parameters().w1.cwiseAbs().maxCoeff() <= 0.5f);
  CHECK(a.parameters().w3.cwiseAbs().maxCoeff() <= 0.5f);
}

TEST_CASE("shape errors are reported") {
  const auto head = EncoderHead<float>::initialize(kToy, 1);
  Vector<float> wrong = Vector<float>::Zero(3);
  CHECK_THROWS_AS((void)head.forward({wrong, Vector<float>::Zero(2)}), Error);
  CHECK_THROWS_AS((void)head.flatten_name(Matrix<float>::Zero(8, 4)), Error);
  auto p = HeadParameters<float>::zeros(kToy);
  p.b2.resize(3);
  CHECK_THROWS_AS(EncoderHead<float>(kToy, p), Error);
}

TEST_CASE("backward matches central differences on a batch") {
  Rng rng(99);
  const auto head = EncoderHead<double>::initialize(kToy, 5);
  HeadBatch<double> batch{random_matrix<double>(rng, 4, 3), random_matrix<double>(rng, 8, 3)};
  const auto [loss, grads] = head.backward(batch);
  CHECK(loss == doctest::Approx(head.loss(batch)).epsilon(1e-14));
  auto params = head.parameters();
  const double h = 1e-6;
  params.for_each([&](const char* name, auto& block) {
    INFO(name);
    for (Eigen::Index i = 0; i < block.size(); ++i) {
      const double saved = block.data()[i];
      block.data()[i] = saved + h;
      const double up = EncoderHead<double>(kToy, params).loss(batch);
      block.data()[i] = saved - h;
      const double down = EncoderHead<double>(kToy, params).loss(batch);
      block.data()[i] = saved;
      const double fd = (up - down) / (2 * h);
      double analytic = 0.0;
      grads.for_each([&](const char* gname, const auto& g) {
        if (std::string(gname) == name) analytic = g.data()[i];
      });
      CHECK(std::abs(fd - analytic) <= 1e-6 + 1e-4 * std::abs(fd));
    }
  });
}

TEST_CASE("adam matches a scalar reference within 1e-12") {
  const AdamConfig cfg{1e-3, 0.9, 0.999, 1e-8};
  Adam<double> adam(kToy, cfg);
  auto params = HeadParameters<double>::zeros(kToy);
  params.w1(0, 0) = 0.3;
  const double grads_seq[3] = {0.5, -0.2, 1e-3};
  double p = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    auto g = HeadParameters<double>::zeros(kToy);
    g.w1(0, 0) = grads_seq[t - 1];
    adam.step(params, g);
    const double gt = grads_seq[t - 1];
    m = 0.9 * m + 0.1 * gt;
    v = 0.999 * v + 0.001 * gt * gt;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    p -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(std::abs(params.w1(0, 0) - p) < 1e-12);
  }
  CHECK(adam.step_count() == 3);
  CHECK(params.w1(1, 1) == 0.0);
}

TEST_CASE("training is deterministic and records losses before each update") {
  Rng rng(12);
  const auto samples = random_samples(rng, 20, kToy);
  TrainConfig cfg;
  cfg.adam.learning_rate = 1e-2;
  cfg.batch_size = 4;
  cfg.max_steps = 30;
  cfg.seed = 9;
  const auto head = EncoderHead<float>::initialize(kToy, 1);
  std::vector<std::size_t> seen;
  const auto a = train(head, std::span<const TrainSample<float>>(samples), cfg,
                       [&](std::size_t step, float) { seen.push_back(step); });
  const auto b = train(head, std::span<const TrainSample<float>>(samples), cfg);
  CHECK(a.final_head.parameters() == b.final_head.parameters());
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.loss_history.size() == 30);
  CHECK(seen.size() == 30);
  CHECK(seen.back() == 30);
  REQUIRE(a.best_parameters.has_value());
  CHECK(a.best_loss == *std::min_element(a.loss_history.begin(), a.loss_history.end()));
  CHECK(a.loss_history[a.best_step - 1] == a.best_loss);
}

TEST_CASE("resuming from saved optimizer state continues the run exactly") {
  Rng rng(13);
  const auto samples = random_samples(rng, 1, kToy);
  const std::span<const TrainSample<float>> view(samples);
  TrainConfig cfg;
  cfg.adam.learning_rate = 1e-2;
  cfg.batch_size = 1;
  cfg.max_steps = 10;
  const auto head = EncoderHead<float>::initialize(kToy, 2);
  const auto full = train(head, view, cfg);
  cfg.max_steps = 5;
  const auto first = train(head, view, cfg);
  TempDir dir("resume");
  save_checkpoint(dir.path(), first.final_head, &first.optimizer);
  auto ckpt = load_checkpoint(dir.path());
  REQUIRE(ckpt.optimizer.has_value());
  CHECK(ckpt.optimizer->step_count() == 5);
  // The stored config is f32; rebuild the optimizer from the exact one.
  Adam<float> resumed(cfg.adam, ckpt.optimizer->first_moment(), ckpt.optimizer->second_moment(),
                      ckpt.optimizer->step_count());
  const auto second = train(ckpt.head, view, cfg, {}, std::move(resumed));
  CHECK(second.final_head.parameters() == full.final_head.parameters());
}

TEST_CASE("checkpoint round trip preserves profile and parameters") {
  const HeadProfile p{3, 2, 5, 6, 2, 3};
  const auto head = EncoderHead<float>::initialize(p, 8);
  TempDir dir("ckpt");
  save_checkpoint(dir.path(), head);
  const auto back = load_checkpoint(dir.path());
  CHECK(back.head.profile() == p);
  CHECK(back.head.parameters() == head.parameters());
  CHECK_FALSE(back.optimizer.has_value());
  std::filesystem::remove(dir.path() / "w2.nstf");
  CHECK_THROWS_AS((void)load_checkpoint(dir.path()), Error);
}

TEST_CASE("divergence raises a typed error") {
  Rng rng(14);
  auto samples = random_samples(rng, 2, kToy);
  samples[0].target *= 1e30f;
  TrainConfig cfg;
  cfg.adam.learning_rate = 1e3;
  cfg.max_steps = 200;
  const auto head = EncoderHead<float>::initialize(kToy, 1);
  CHECK_THROWS_AS((void)train(head, std::span<const TrainSample<float>>(samples), cfg),
                  TrainingDiverged);
}
