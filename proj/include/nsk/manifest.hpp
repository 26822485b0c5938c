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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nsk {
//==============================================================================
enum class Role {
  kImageFeature768,
  kImageFeature1280,
  kTextEmbedding,  // 77 x D
  kNameEmbedding,  // 8 x D
  kFaceEmbedding,
  kParameter,      // checkpoint entries, any shape
};

[[nodiscard]] std::string_view to_string(Role role) noexcept;
[[nodiscard]] std::optional<Role> parse_role(std::string_view text) noexcept;
/// True iff `shape` is admissible for `role`.
[[nodiscard]] bool role_accepts(Role role, const Tensor::Shape& shape) noexcept;

struct ManifestRecord {
  std::string id;
  std::string name;
  Role role = Role::kParameter;
  std::string path;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Line format: `id<TAB>name<TAB>role<TAB>path`. Blank lines and lines
/// starting with '#' are ignored. Relative paths resolve against the
/// manifest's directory.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<ManifestRecord> records,
                    std::filesystem::path base_dir = {});

  [[nodiscard]] static Manifest parse(std::string_view text,
                                      std::filesystem::path base_dir = {});
  [[nodiscard]] static Manifest read(const std::filesystem::path& path);

  [[nodiscard]] std::string serialize() const;
  void write(const std::filesystem::path& path) const;

  void add(ManifestRecord record);

  [[nodiscard]] const std::vector<ManifestRecord>& records() const noexcept {
    return records_;
  }
  [[nodiscard]] const std::filesystem::path& base_dir() const noexcept {
    return base_dir_;
  }
  [[nodiscard]] const ManifestRecord* find(std::string_view id) const noexcept;
  [[nodiscard]] std::filesystem::path resolve(const ManifestRecord& r) const;

  /// Throws kIo for any path that does not exist.
  void check_paths() const;

  /// Reads a record's tensor and rejects role/shape disagreement.
  [[nodiscard]] Tensor load(const ManifestRecord& r, IoOptions opts = {}) const;
  [[nodiscard]] Tensor load(std::string_view id, IoOptions opts = {}) const;

 private:
  std::vector<ManifestRecord> records_;
  std::filesystem::path base_dir_;
};

[[nodiscard]] std::vector<std::string_view> split_tabs(std::string_view line);
//==============================================================================
}  // namespace nsk
//==============================================================================
