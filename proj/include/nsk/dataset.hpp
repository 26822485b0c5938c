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

#include "nsk/manifest.hpp"
#include "nsk/naming.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nsk {
//==============================================================================
struct Hash64 {
  std::uint64_t bits = 0;
  friend bool operator==(const Hash64&, const Hash64&) = default;
};

[[nodiscard]] inline int hamming(Hash64 a, Hash64 b) noexcept {
  return std::popcount(a.bits ^ b.bits);
}

/// Average hash of an 8x8 luminance grid: bit i is set iff pixel i is at or
/// above the grid mean. Pixels are taken row-major, pixel 0 in the MSB.
template <typename Derived>
Hash64 average_hash(const Eigen::MatrixBase<Derived>& gray) {
  if (gray.rows() != 8 || gray.cols() != 8) {
    throw Error(ErrorCode::kShapeMismatch, "average_hash needs an 8x8 grid");
  }
  const Matrix<double> g = gray.template cast<double>();
  const double mean = g.sum() / 64.0;
  std::uint64_t bits = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    bits = (bits << 1) | (g.data()[i] >= mean ? 1u : 0u);
  }
  return Hash64{bits};
}
//==============================================================================
struct DedupResult {
  std::vector<std::size_t> kept;
  /// Per input item: index of the kept item it duplicates, if dropped.
  std::vector<std::optional<std::size_t>> duplicate_of;
};

/// Greedy scan in input order; an item is dropped iff it lies within
/// `max_hamming` of an already kept item.
[[nodiscard]] DedupResult dedup(std::span<const Hash64> hashes, int max_hamming = 0);
//==============================================================================
using FaceEmbedding = Vector<float>;

struct CorpusImage {
  std::string image_id;
  std::string caption;
  FaceEmbedding face;
  Matrix<float> gray;  // 8 x 8 luminance
};

/// External models the construction procedure depends on.
struct OracleSet {
  std::function<std::vector<std::string>(const std::string& caption)> name_extractor;
  std::function<std::string(const std::string& name)> name_cleaner;
  std::function<TokenSequence<float>(const std::string& name)> text_encoder;
  std::function<std::vector<FaceEmbedding>(const std::string& name,
                                           const NameEmbedding<float>& embedding)>
      portrait_generator;
  std::function<bool(const FaceEmbedding&, const FaceEmbedding&)> face_matcher;

  [[nodiscard]] bool complete() const noexcept {
    return name_extractor && name_cleaner && text_encoder && portrait_generator &&
           face_matcher;
  }
};

struct PipelineConfig {
  bool dedup = true;
  int max_hamming = 0;
  std::size_t portraits = 4;
  std::size_t min_images = 5;
  Eigen::Index name_tokens = kNameTokens;
};

struct ImageEntry {
  std::string image_id;
  std::size_t corpus_index = 0;
  std::optional<Hash64> hash;
  bool kept = true;
  std::string reason;
};

struct IdentityRecord {
  std::string name;
  std::optional<NameEmbedding<float>> name_embedding;
  std::vector<FaceEmbedding> portraits;
  std::vector<ImageEntry> images;

  [[nodiscard]] std::size_t kept_images() const noexcept;
};
//==============================================================================
struct AuditEntry {
  std::string group;  // image id (step 1), raw name (step 2), or record name
  std::string item;   // image id for per-image decisions, else empty
  int step = 0;
  bool kept = false;
  std::string reason;

  [[nodiscard]] std::string record_id() const {
    return item.empty() ? group : group + "/" + item;
  }
};

struct StepCount {
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

class AuditLog {
 public:
  static constexpr const char* kHeader = "record_id\tstep\tdecision\treason";

  void add(AuditEntry e);
  /// Orders entries: steps 1-2 first, then per record name, steps ascending.
  void finalize();

  [[nodiscard]] const std::vector<AuditEntry>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::array<StepCount, 9> step_counts() const;
  [[nodiscard]] std::string serialize() const;

 private:
  std::vector<AuditEntry> entries_;
};

struct PipelineResult {
  /// Records that survive every step, sorted by name.
  std::vector<IdentityRecord> records;
  AuditLog audit;
};

/// The eight-step curation procedure: extract names, clean and merge them,
/// encode each name and keep its name rows, generate portraits from the
/// name embedding, require all portrait pairs to match, dedup the authentic
/// images, keep authentic images matching the generated identity, and drop
/// records left with fewer than `min_images` images.
///
/// An oracle failure drops the affected item and is recorded in the audit.
[[nodiscard]] PipelineResult run_pipeline(std::span<const CorpusImage> corpus,
                                          const OracleSet& oracles,
                                          const PipelineConfig& cfg = {});
//==============================================================================
// Corpus manifest: `image_id<TAB>caption<TAB>feature-path<TAB>gray8x8-path`.
[[nodiscard]] std::vector<CorpusImage> read_corpus(const std::filesystem::path& path,
                                                   IoOptions opts = {});

// Built-in oracles for scripted runs.
namespace oracles {

/// Runs of two or more capitalized words, e.g. "Ada Lovelace".
[[nodiscard]] std::vector<std::string> capitalized_names(const std::string& caption);
/// Trims and collapses internal whitespace.
[[nodiscard]] std::string collapse_whitespace(const std::string& name);
/// Looks names up among text-embedding records by their `name` field.
[[nodiscard]] std::function<TokenSequence<float>(const std::string&)> manifest_text_encoder(
    const Manifest& manifest);
/// Returns, in manifest order, the face-embedding records named `name`.
[[nodiscard]] std::function<std::vector<FaceEmbedding>(const std::string&,
                                                       const NameEmbedding<float>&)>
manifest_portraits(const Manifest& manifest);
/// Same identity iff Euclidean distance <= tolerance.
[[nodiscard]] std::function<bool(const FaceEmbedding&, const FaceEmbedding&)>
euclidean_matcher(double tolerance);

}  // namespace oracles
//==============================================================================
}  // namespace nsk
//==============================================================================
