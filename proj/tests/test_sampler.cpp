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
#include "nsk/sampler.hpp"
#include "support.hpp"

#include <cmath>

using namespace nsk;
using nsk::test::random_matrix;

namespace {

TokenSequence<float> sequence(Rng& rng, Eigen::Index dim) {
  return TokenSequence<float>::from_rows(random_matrix<float>(rng, 77, dim), 4);
}

}  // namespace

TEST_CASE("linear schedule endpoints and validation") {
  const auto s = NoiseSchedule::linear();
  CHECK(s.steps() == 100);
  CHECK(s.alpha_bar(0) == 0.9999);
  CHECK(s.alpha_bar(100) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK_THROWS_AS(NoiseSchedule({0.99, 0.5}), Error);
  CHECK_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.6}), Error);
  CHECK_THROWS_AS(NoiseSchedule({1.0, 0.0}), Error);
  CHECK_THROWS_AS(NoiseSchedule({1.0}), Error);
}

TEST_CASE("ddim step matches the scalar reference") {
  Matrix<double> x(1, 1), eps(1, 1);
  x << 1.0;
  eps << 0.5;
  const Matrix<double> y = ddim_step(x, eps, 0.25, 0.81);
  CHECK(y(0, 0) == doctest::Approx(1.2385220837710389).epsilon(1e-15));
  CHECK_THROWS_AS((void)ddim_step(x, eps, 0.9, 0.8), Error);
  CHECK_THROWS_AS((void)ddim_step(x, eps, 0.0, 0.8), Error);
}

TEST_CASE("cfg combine reduces to either branch") {
  Rng rng(1);
  const Matrix<double> u = random_matrix<double>(rng, 2, 3);
  const Matrix<double> c = random_matrix<double>(rng, 2, 3);
  CHECK(cfg_combine(u, c, 0.0) == u);
  CHECK(((cfg_combine(u, c, 1.0) - c).cwiseAbs().maxCoeff()) < 1e-15);
  CHECK(((cfg_combine(u, c, 7.0) - (u + 7.0 * (c - u))).cwiseAbs().maxCoeff()) == 0.0);
}

TEST_CASE("exact noise oracle recovers x0 when alpha_bar(0) is 1") {
  Rng rng(2);
  const Matrix<double> x0 = random_matrix<double>(rng, 2, 8);
  const Matrix<double> eps = random_matrix<double>(rng, 2, 8);
  const auto sched = NoiseSchedule::linear(100, 1.0, 0.02);
  const Matrix<double> xt =
      std::sqrt(sched.alpha_bar(100)) * x0 + std::sqrt(1 - sched.alpha_bar(100)) * eps;
  const auto cond = TokenSequence<double>::from_rows(Matrix<double>::Zero(77, 2));
  const ExactNoiseDenoiser<double> den(eps);
  const Matrix<double> out = denoise(xt, cond, cond, 7.0, sched, den);
  CHECK((out - x0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact noise oracle lands on the t=0 marginal for the default schedule") {
  Rng rng(3);
  const Matrix<double> x0 = random_matrix<double>(rng, 1, 16);
  const Matrix<double> eps = random_matrix<double>(rng, 1, 16);
  const auto sched = NoiseSchedule::linear();
  const double aT = sched.alpha_bar(100);
  const auto cond = TokenSequence<double>::from_rows(Matrix<double>::Zero(77, 2));
  const Matrix<double> out =
      denoise<double>(std::sqrt(aT) * x0 + std::sqrt(1 - aT) * eps, cond, cond, 3.0, sched,
                      ExactNoiseDenoiser<double>(eps));
  const Matrix<double> expect = std::sqrt(0.9999) * x0 + std::sqrt(1 - 0.9999) * eps;
  CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("condition-blind denoisers ignore gamma") {
  Rng rng(4);
  const auto prompt = sequence(rng, 4);
  const auto null_seq = sequence(rng, 4);
  const Matrix<float> name = random_matrix<float>(rng, 8, 4);
  const Matrix<float> mean = random_matrix<float>(rng, 8, 4);
  const LinearDenoiser<float> den(0.05f * Matrix<float>::Identity(16, 16));
  const auto sched = NoiseSchedule::linear();
  GuidanceConfig cfg;
  cfg.gamma = 0.0;
  const Matrix<float> a = generate(name, prompt, null_seq, mean, cfg, sched, den, 5);
  cfg.gamma = 7.0;
  const Matrix<float> b = generate(name, prompt, null_seq, mean, cfg, sched, den, 5);
  CHECK(a == b);
}

TEST_CASE("generation is seeded and condition-sensitive") {
  Rng rng(5);
  const auto prompt = sequence(rng, 4);
  const auto null_seq = sequence(rng, 4);
  const Matrix<float> name = random_matrix<float>(rng, 8, 4);
  const Matrix<float> other = random_matrix<float>(rng, 8, 4);
  const Matrix<float> mean = random_matrix<float>(rng, 8, 4);
  const ConditionProjectionDenoiser<float> den(16, 4, 11);
  const auto sched = NoiseSchedule::linear(20);
  const GuidanceConfig cfg;
  const Matrix<float> a = generate(name, prompt, null_seq, mean, cfg, sched, den, 1);
  CHECK(a == generate(name, prompt, null_seq, mean, cfg, sched, den, 1));
  CHECK_FALSE(a == generate(name, prompt, null_seq, mean, cfg, sched, den, 2));
  CHECK_FALSE(a == generate(other, prompt, null_seq, mean, cfg, sched, den, 1));
  CHECK(a.allFinite());
}

TEST_CASE("sampler rejects wrong shapes") {
  Rng rng(6);
  const auto prompt = TokenSequence<float>::from_rows(random_matrix<float>(rng, 70, 4));
  const auto null_seq = sequence(rng, 4);
  const Matrix<float> name = random_matrix<float>(rng, 8, 4);
  const ZeroDenoiser<float> den;
  CHECK_THROWS_AS((void)generate(name, prompt, null_seq, name, GuidanceConfig{},
                                 NoiseSchedule::linear(), den, 1),
                  Error);
  const ExactNoiseDenoiser<float> exact(Matrix<float>::Zero(2, 2));
  CHECK_THROWS_AS((void)denoise<float>(Matrix<float>::Zero(1, 16), null_seq, null_seq, 1.0,
                                       NoiseSchedule::linear(), exact),
                  Error);
}
