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
#include "nsk/encoder_head.hpp"

#include "nsk/manifest.hpp"

#include <string>
//==============================================================================
namespace nsk {
//==============================================================================
namespace {

constexpr const char* kCheckpointManifest = "checkpoint.tsv";
constexpr double kMaxExactStep = 16777216.0;  // 2^24, exact in f32

template <typename M>
Tensor block_tensor(const M& m) {
  std::vector<float> data(m.data(), m.data() + m.size());
  if (M::ColsAtCompileTime == 1) {
    return Tensor({static_cast<std::size_t>(m.size())}, std::move(data));
  }
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                std::move(data));
}

template <typename M>
void fill_block(M& m, const Tensor& t, const std::string& id) {
  if (t.size() != static_cast<std::size_t>(m.size())) {
    throw Error(ErrorCode::kShapeMismatch,
                "checkpoint entry " + id + " has shape " + t.shape_string());
  }
  std::copy(t.data().begin(), t.data().end(), m.data());
}

void put(Manifest& manifest, const std::filesystem::path& dir, const std::string& id,
         const Tensor& t) {
  const std::string file = id + ".nstf";
  write_tensor(t, dir / file);
  manifest.add({id, id, Role::kParameter, file});
}

}  // namespace
//==============================================================================
void save_checkpoint(const std::filesystem::path& dir, const EncoderHead<float>& head,
                     const Adam<float>* optimizer) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create checkpoint dir: " + dir.string());

  Manifest manifest;
  const auto& p = head.profile();
  put(manifest, dir, "profile",
      Tensor({6}, {static_cast<float>(p.small_dim), static_cast<float>(p.large_dim),
                   static_cast<float>(p.hidden1), static_cast<float>(p.hidden2),
                   static_cast<float>(p.name_tokens), static_cast<float>(p.embed_dim)}));
  head.parameters().for_each(
      [&](const char* name, const auto& m) { put(manifest, dir, name, block_tensor(m)); });

  if (optimizer != nullptr) {
    if (static_cast<double>(optimizer->step_count()) > kMaxExactStep) {
      throw Error(ErrorCode::kInvalidArgument, "step counter exceeds f32 exact range");
    }
    const auto& c = optimizer->config();
    put(manifest, dir, "adam_step",
        Tensor({1}, {static_cast<float>(optimizer->step_count())}));
    put(manifest, dir, "adam_config",
        Tensor({4}, {static_cast<float>(c.learning_rate), static_cast<float>(c.beta1),
                     static_cast<float>(c.beta2), static_cast<float>(c.epsilon)}));
    optimizer->first_moment().for_each([&](const char* name, const auto& m) {
      put(manifest, dir, std::string("adam_m_") + name, block_tensor(m));
    });
    optimizer->second_moment().for_each([&](const char* name, const auto& m) {
      put(manifest, dir, std::string("adam_v_") + name, block_tensor(m));
    });
  }
  manifest.write(dir / kCheckpointManifest);
}
//==============================================================================
Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = Manifest::read(dir / kCheckpointManifest);
  manifest.check_paths();

  const Tensor prof = manifest.load("profile");
  if (prof.shape() != Tensor::Shape{6}) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint profile must have shape [6]");
  }
  const auto d = prof.data();
  const HeadProfile profile{static_cast<Eigen::Index>(d[0]), static_cast<Eigen::Index>(d[1]),
                            static_cast<Eigen::Index>(d[2]), static_cast<Eigen::Index>(d[3]),
                            static_cast<Eigen::Index>(d[4]), static_cast<Eigen::Index>(d[5])};

  auto load_set = [&](const std::string& prefix) {
    auto params = HeadParameters<float>::zeros(profile);
    params.for_each([&](const char* name, auto& m) {
      const std::string id = prefix + name;
      fill_block(m, manifest.load(id), id);
    });
    return params;
  };

  Checkpoint ckpt{EncoderHead<float>(profile, load_set("")), std::nullopt};
  if (manifest.find("adam_step") != nullptr) {
    const Tensor step = manifest.load("adam_step");
    const Tensor cfg = manifest.load("adam_config");
    if (step.size() != 1 || cfg.size() != 4) {
      throw Error(ErrorCode::kShapeMismatch, "malformed optimizer state in checkpoint");
    }
    const auto c = cfg.data();
    ckpt.optimizer.emplace(AdamConfig{c[0], c[1], c[2], c[3]}, load_set("adam_m_"),
                           load_set("adam_v_"),
                           static_cast<std::uint64_t>(step.data()[0]));
  }
  return ckpt;
}
//==============================================================================
}  // namespace nsk
//==============================================================================
