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
#include "nsk/manifest.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>
//==============================================================================
namespace nsk {
//==============================================================================
namespace {

constexpr std::array<std::pair<Role, std::string_view>, 6> kRoleNames = {{
    {Role::kImageFeature768, "image-feature-768"},
    {Role::kImageFeature1280, "image-feature-1280"},
    {Role::kTextEmbedding, "text-embedding-77xD"},
    {Role::kNameEmbedding, "name-embedding-8xD"},
    {Role::kFaceEmbedding, "face-embedding"},
    {Role::kParameter, "parameter"},
}};

}  // namespace
//==============================================================================
std::string_view to_string(Role role) noexcept {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view text) noexcept {
  for (const auto& [r, name] : kRoleNames) {
    if (name == text) return r;
  }
  return std::nullopt;
}

bool role_accepts(Role role, const Tensor::Shape& shape) noexcept {
  switch (role) {
    case Role::kImageFeature768:
      return shape == Tensor::Shape{768};
    case Role::kImageFeature1280:
      return shape == Tensor::Shape{1280};
    case Role::kTextEmbedding:
      return shape.size() == 2 && shape[0] == 77 && shape[1] > 0;
    case Role::kNameEmbedding:
      return shape.size() == 2 && shape[0] == 8 && shape[1] > 0;
    case Role::kFaceEmbedding:
      return shape.size() == 1 && shape[0] > 0;
    case Role::kParameter:
      return true;
  }
  return false;
}
//==============================================================================
std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}
//==============================================================================
Manifest::Manifest(std::vector<ManifestRecord> records,
                   std::filesystem::path base_dir)
    : base_dir_(std::move(base_dir)) {
  for (auto& r : records) add(std::move(r));
}

void Manifest::add(ManifestRecord record) {
  if (record.id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "manifest record with empty id");
  }
  for (std::string_view field : {std::string_view(record.id),
                                 std::string_view(record.name),
                                 std::string_view(record.path)}) {
    if (field.find_first_of("\t\n") != std::string_view::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "manifest field contains a tab or newline: " + record.id);
    }
  }
  if (find(record.id) != nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate manifest id: " + record.id);
  }
  records_.push_back(std::move(record));
}

Manifest Manifest::parse(std::string_view text, std::filesystem::path base_dir) {
  Manifest m({}, std::move(base_dir));
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw Error(ErrorCode::kInvalidArgument,
                  "manifest line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    const auto role = parse_role(fields[2]);
    if (!role) {
      throw Error(ErrorCode::kInvalidArgument,
                  "manifest line " + std::to_string(line_no) + ": unknown role '" +
                      std::string(fields[2]) + "'");
    }
    m.add({std::string(fields[0]), std::string(fields[1]), *role,
           std::string(fields[3])});
  }
  return m;
}

Manifest Manifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

std::string Manifest::serialize() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.id;
    out += '\t';
    out += r.name;
    out += '\t';
    out += to_string(r.role);
    out += '\t';
    out += r.path;
    out += '\n';
  }
  return out;
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest: " + path.string());
  out << serialize();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}
//==============================================================================
const ManifestRecord* Manifest::find(std::string_view id) const noexcept {
  for (const auto& r : records_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::filesystem::path Manifest::resolve(const ManifestRecord& r) const {
  std::filesystem::path p(r.path);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

void Manifest::check_paths() const {
  for (const auto& r : records_) {
    if (!std::filesystem::exists(resolve(r))) {
      throw Error(ErrorCode::kIo, "manifest path does not exist: " + r.path +
                                      " (record " + r.id + ")");
    }
  }
}

Tensor Manifest::load(const ManifestRecord& r, IoOptions opts) const {
  Tensor t = read_tensor(resolve(r), opts);
  if (!role_accepts(r.role, t.shape())) {
    throw Error(ErrorCode::kShapeMismatch,
                "record " + r.id + ": role " + std::string(to_string(r.role)) +
                    " does not accept shape " + t.shape_string());
  }
  return t;
}

Tensor Manifest::load(std::string_view id, IoOptions opts) const {
  const auto* r = find(id);
  if (r == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "no manifest record with id " + std::string(id));
  }
  return load(*r, opts);
}
//==============================================================================
}  // namespace nsk
//==============================================================================
