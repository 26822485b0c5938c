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

#include "nsk/dataset.hpp"
#include "nsk/rng.hpp"
#include "nsk/tensor.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace nsk::test {
//==============================================================================
/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("nsk_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

template <typename Scalar>
Matrix<Scalar> random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                             double hi = 1.0) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  return m;
}

template <typename Scalar>
Vector<Scalar> random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  Vector<Scalar> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<Scalar>(rng.uniform(lo, hi));
  return v;
}
//==============================================================================
// Planted curation corpus.
//
// Faces are one-hot identity labels, so Euclidean matching with a small
// tolerance is label equality. Identities:
//   Alice Smith : 6 unique images, 2 planted duplicates, 1 impostor face
//   Bob Jones   : 5 unique images, 2 planted duplicates
//   Cara Diaz   : 4 unique images, 2 planted duplicates
//   Dan Wong    : 5 unique images, one of its four portraits is someone else
// plus two captions without a name. Each identity has one exact duplicate
// (a rescaled grid, same hash) and one near duplicate (hash distance 1), so
// the fixture is meant to run with max_hamming = 1.
inline constexpr int kIdentityCount = 6;
inline constexpr int kPlantedMaxHamming = 1;

inline FaceEmbedding label_face(int label) {
  FaceEmbedding f = FaceEmbedding::Zero(kIdentityCount);
  f(label) = 1.0f;
  return f;
}

/// Two bright pixels at 2p and 2p+1, so distinct patterns hash 4 bits apart.
inline Matrix<float> pattern_grid(int pattern) {
  Matrix<float> g = Matrix<float>::Zero(8, 8);
  g.data()[2 * pattern] = 1.0f;
  g.data()[2 * pattern + 1] = 1.0f;
  return g;
}

/// Pattern grid with one extra bright pixel in the last row: distance 1.
/// Valid for patterns below 28, whose pixels stay out of the last row.
inline Matrix<float> near_duplicate_grid(int pattern) {
  Matrix<float> g = pattern_grid(pattern);
  g.data()[63 - (pattern % 8)] = 1.0f;
  return g;
}

struct PlantedCorpus {
  std::vector<CorpusImage> images;
  std::map<std::string, int> identity_label;  // canonical name -> face label
  std::map<std::string, std::vector<std::string>> expected_kept;
  std::set<std::string> expected_duplicates;  // record/image ids dropped at step 6
};

inline PlantedCorpus planted_corpus() {
  PlantedCorpus pc;
  pc.identity_label = {{"Alice Smith", 0}, {"Bob Jones", 1}, {"Cara Diaz", 2}, {"Dan Wong", 3}};
  int pattern = 0;
  auto add = [&](const std::string& id, const std::string& caption, int label,
                 Matrix<float> grid) {
    pc.images.push_back({id, caption, label_face(label), std::move(grid)});
  };
  // Adds `unique` images then an exact and a near duplicate of the first two.
  auto identity = [&](char prefix, const std::string& name, const std::string& shout,
                      int label, int unique) {
    std::vector<int> patterns;
    int n = 0;
    auto id = [&] { return std::string(1, prefix) + "0" + std::to_string(++n); };
    for (int i = 0; i < unique; ++i) {
      patterns.push_back(pattern++);
      add(id(), i % 2 ? "portrait of " + shout : name + " at the premiere", label,
          pattern_grid(patterns.back()));
    }
    const std::string exact = id();
    add(exact, name + ", again", label, 2.0f * pattern_grid(patterns[0]));
    const std::string near = id();
    add(near, name + " interview", label, near_duplicate_grid(patterns[1]));
    pc.expected_duplicates.insert(name + "/" + exact);
    pc.expected_duplicates.insert(name + "/" + near);
  };
  identity('a', "Alice Smith", "ALICE SMITH", 0, 6);
  add("a10", "Alice Smith with a fan", 5, pattern_grid(pattern++));
  identity('b', "Bob Jones", "BOB JONES", 1, 5);
  identity('c', "Cara Diaz", "CARA DIAZ", 2, 4);
  for (int i = 1; i <= 5; ++i) {
    add("d0" + std::to_string(i), "Dan Wong smiling", 3, pattern_grid(pattern++));
  }
  add("x01", "a sunset over the sea", 4, pattern_grid(pattern++));
  add("x02", "two cats, one dog in Paris", 4, pattern_grid(pattern++));

  pc.expected_kept = {
      {"Alice Smith", {"a01", "a02", "a03", "a04", "a05", "a06"}},
      {"Bob Jones", {"b01", "b02", "b03", "b04", "b05"}},
  };
  return pc;
}

/// Title-cases every word, so "ALICE SMITH" and "Alice Smith" merge.
inline std::string title_case(const std::string& name) {
  std::string out = oracles::collapse_whitespace(name);
  bool start = true;
  for (auto& c : out) {
    const auto u = static_cast<unsigned char>(c);
    c = static_cast<char>(start ? std::toupper(u) : std::tolower(u));
    start = c == ' ';
  }
  return out;
}

/// Oracles for the planted corpus. The portrait set of "Dan Wong" has one
/// portrait of a different identity.
inline OracleSet planted_oracles(const PlantedCorpus& pc, Eigen::Index dim = 4) {
  OracleSet o;
  o.name_extractor = oracles::capitalized_names;
  o.name_cleaner = title_case;
  o.text_encoder = [dim](const std::string& name) {
    Matrix<float> rows(77, dim);
    const auto seed = std::hash<std::string>{}(name);
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
      rows.data()[i] = static_cast<float>((seed >> (i % 48)) % 97) / 97.0f;
    }
    return TokenSequence<float>::from_rows(std::move(rows), 3);
  };
  const auto labels = pc.identity_label;
  o.portrait_generator = [labels](const std::string& name, const NameEmbedding<float>&) {
    const int label = labels.at(name);
    std::vector<FaceEmbedding> faces(4, label_face(label));
    if (name == "Dan Wong") faces[2] = label_face(4);
    return faces;
  };
  o.face_matcher = oracles::euclidean_matcher(1e-3);
  return o;
}
//==============================================================================
}  // namespace nsk::test
//==============================================================================
