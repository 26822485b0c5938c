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
#include "nsk/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
//==============================================================================
namespace nsk {
//==============================================================================
namespace {

std::string sanitize(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; },
                  ' ');
  return s;
}

std::string failure(const std::exception& e) {
  return std::string("oracle-failure: ") + e.what();
}

}  // namespace
//==============================================================================
DedupResult dedup(std::span<const Hash64> hashes, int max_hamming) {
  DedupResult out;
  out.duplicate_of.resize(hashes.size());
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    for (auto k : out.kept) {
      if (hamming(hashes[i], hashes[k]) <= max_hamming) {
        out.duplicate_of[i] = k;
        break;
      }
    }
    if (!out.duplicate_of[i]) out.kept.push_back(i);
  }
  return out;
}
//==============================================================================
std::size_t IdentityRecord::kept_images() const noexcept {
  return static_cast<std::size_t>(std::count_if(images.begin(), images.end(),
                                                [](const ImageEntry& e) { return e.kept; }));
}
//==============================================================================
void AuditLog::add(AuditEntry e) {
  e.group = sanitize(std::move(e.group));
  e.item = sanitize(std::move(e.item));
  e.reason = sanitize(std::move(e.reason));
  entries_.push_back(std::move(e));
}

void AuditLog::finalize() {
  auto key = [](const AuditEntry& e) {
    const bool early = e.step <= 2;
    return std::make_tuple(early ? 0 : 1, early ? e.step : 0, std::cref(e.group), e.step,
                           std::cref(e.item));
  };
  std::stable_sort(entries_.begin(), entries_.end(),
                   [&](const AuditEntry& a, const AuditEntry& b) { return key(a) < key(b); });
}

std::array<StepCount, 9> AuditLog::step_counts() const {
  std::array<StepCount, 9> counts{};
  for (const auto& e : entries_) {
    if (e.step < 1 || e.step > 8) continue;
    auto& c = counts[static_cast<std::size_t>(e.step)];
    (e.kept ? c.kept : c.dropped) += 1;
  }
  return counts;
}

std::string AuditLog::serialize() const {
  std::string out = kHeader;
  out += '\n';
  for (const auto& e : entries_) {
    out += e.record_id();
    out += '\t';
    out += std::to_string(e.step);
    out += '\t';
    out += e.kept ? "kept" : "dropped";
    out += '\t';
    out += e.reason;
    out += '\n';
  }
  return out;
}
//==============================================================================
PipelineResult run_pipeline(std::span<const CorpusImage> corpus, const OracleSet& oracles,
                            const PipelineConfig& cfg) {
  if (!oracles.complete()) {
    throw Error(ErrorCode::kInvalidArgument, "run_pipeline: oracle set incomplete");
  }
  PipelineResult result;
  auto& audit = result.audit;

  // 1. Extract names from captions.
  std::map<std::string, std::vector<std::size_t>> raw_names;  // raw name -> images
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& img = corpus[i];
    std::vector<std::string> names;
    try {
      names = oracles.name_extractor(img.caption);
    } catch (const std::exception& e) {
      audit.add({img.image_id, "", 1, false, failure(e)});
      continue;
    }
    std::set<std::string> unique(names.begin(), names.end());
    unique.erase("");
    if (unique.empty()) {
      audit.add({img.image_id, "", 1, false, "no-name"});
      continue;
    }
    std::string listed;
    for (const auto& n : unique) {
      if (!listed.empty()) listed += ';';
      listed += n;
      auto& imgs = raw_names[n];
      if (imgs.empty() || imgs.back() != i) imgs.push_back(i);
    }
    audit.add({img.image_id, "", 1, true, "names=" + listed});
  }

  // 2. Clean and merge names.
  std::map<std::string, std::vector<std::string>> canonical;  // canonical -> raw names
  for (const auto& [raw, imgs] : raw_names) {
    std::string clean;
    try {
      clean = oracles.name_cleaner(raw);
    } catch (const std::exception& e) {
      audit.add({raw, "", 2, false, failure(e)});
      continue;
    }
    if (clean.empty()) {
      audit.add({raw, "", 2, false, "empty-after-cleaning"});
      continue;
    }
    canonical[clean].push_back(raw);
  }
  std::vector<IdentityRecord> records;
  for (const auto& [name, raws] : canonical) {
    // raws are in sorted order; the first one founds the record.
    audit.add({raws.front(), "", 2, true, "canonical=" + name});
    std::set<std::size_t> members;
    for (std::size_t r = 0; r < raws.size(); ++r) {
      if (r > 0) audit.add({raws[r], "", 2, false, "merged-into=" + name});
      const auto& imgs = raw_names.at(raws[r]);
      members.insert(imgs.begin(), imgs.end());
    }
    IdentityRecord rec;
    rec.name = name;
    for (auto idx : members) rec.images.push_back({corpus[idx].image_id, idx, {}, true, ""});
    records.push_back(std::move(rec));
  }

  for (auto& rec : records) {
    const std::string& id = rec.name;

    // 3. Encode the name and keep the rows after the start token.
    try {
      const auto seq = oracles.text_encoder(rec.name);
      rec.name_embedding = extract_gt_name(seq, cfg.name_tokens);
    } catch (const std::exception& e) {
      audit.add({id, "", 3, false, failure(e)});
      continue;
    }
    audit.add({id, "", 3, true, "name-rows=" + std::to_string(cfg.name_tokens)});

    // 4. Generate portraits from the name embedding.
    try {
      rec.portraits = oracles.portrait_generator(rec.name, *rec.name_embedding);
    } catch (const std::exception& e) {
      audit.add({id, "", 4, false, failure(e)});
      continue;
    }
    if (rec.portraits.size() != cfg.portraits) {
      audit.add({id, "", 4, false,
                 "portraits=" + std::to_string(rec.portraits.size()) + " expected " +
                     std::to_string(cfg.portraits)});
      continue;
    }
    audit.add({id, "", 4, true, "portraits=" + std::to_string(cfg.portraits)});

    // 5. Every unordered pair of portraits must show the same identity.
    std::string mismatch;
    try {
      for (std::size_t a = 0; a < rec.portraits.size() && mismatch.empty(); ++a) {
        for (std::size_t b = a + 1; b < rec.portraits.size(); ++b) {
          if (!oracles.face_matcher(rec.portraits[a], rec.portraits[b])) {
            mismatch = "portrait-mismatch=" + std::to_string(a) + "," + std::to_string(b);
            break;
          }
        }
      }
    } catch (const std::exception& e) {
      mismatch = failure(e);
    }
    if (!mismatch.empty()) {
      audit.add({id, "", 5, false, mismatch});
      continue;
    }
    audit.add({id, "", 5, true, "portraits-consistent"});

    // 6. Deduplicate the authentic images by average hash.
    std::vector<Hash64> hashes;
    std::vector<std::size_t> hashed;  // positions in rec.images
    for (std::size_t k = 0; k < rec.images.size(); ++k) {
      auto& entry = rec.images[k];
      try {
        entry.hash = average_hash(corpus[entry.corpus_index].gray);
        hashes.push_back(*entry.hash);
        hashed.push_back(k);
      } catch (const std::exception& e) {
        entry.kept = false;
        entry.reason = std::string("hash-failure: ") + e.what();
        audit.add({id, entry.image_id, 6, false, entry.reason});
      }
    }
    if (cfg.dedup) {
      const auto d = dedup(hashes, cfg.max_hamming);
      for (std::size_t h = 0; h < hashed.size(); ++h) {
        auto& entry = rec.images[hashed[h]];
        if (d.duplicate_of[h]) {
          entry.kept = false;
          entry.reason = "duplicate-of=" + rec.images[hashed[*d.duplicate_of[h]]].image_id;
          audit.add({id, entry.image_id, 6, false, entry.reason});
        } else {
          audit.add({id, entry.image_id, 6, true, "unique"});
        }
      }
    } else {
      for (auto k : hashed) audit.add({id, rec.images[k].image_id, 6, true, "dedup-disabled"});
    }

    // 7. Keep authentic images that match the generated identity.
    for (auto& entry : rec.images) {
      if (!entry.kept) continue;
      bool match = false;
      try {
        match = oracles.face_matcher(corpus[entry.corpus_index].face, rec.portraits.front());
        entry.reason = match ? "matched" : "no-match";
      } catch (const std::exception& e) {
        entry.reason = failure(e);
      }
      entry.kept = match;
      audit.add({id, entry.image_id, 7, match, entry.reason});
    }

    // 8. Quantity control.
    const std::size_t n = rec.kept_images();
    const bool enough = n >= cfg.min_images;
    audit.add({id, "", 8, enough,
               "images=" + std::to_string(n) + (enough ? "" : " below " +
                                                               std::to_string(cfg.min_images))});
    if (enough) result.records.push_back(std::move(rec));
  }

  audit.finalize();
  return result;
}
//==============================================================================
std::vector<CorpusImage> read_corpus(const std::filesystem::path& path, IoOptions opts) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open corpus manifest: " + path.string());
  const auto base = path.parent_path();
  auto resolve = [&](std::string_view p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::vector<CorpusImage> corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 4) {
      throw Error(ErrorCode::kInvalidArgument,
                  "corpus line " + std::to_string(line_no) + ": expected 4 fields");
    }
    CorpusImage img;
    img.image_id = std::string(f[0]);
    if (!ids.insert(img.image_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate image id " + img.image_id);
    }
    img.caption = std::string(f[1]);
    const Tensor face = read_tensor(resolve(f[2]), opts);
    if (face.ndim() != 1) {
      throw Error(ErrorCode::kShapeMismatch, img.image_id + ": face embedding must be 1-D");
    }
    img.face = face.vector();
    const Tensor gray = read_tensor(resolve(f[3]), opts);
    if (gray.shape() != Tensor::Shape{8, 8}) {
      throw Error(ErrorCode::kShapeMismatch, img.image_id + ": gray grid must be [8, 8]");
    }
    img.gray = gray.matrix();
    corpus.push_back(std::move(img));
  }
  return corpus;
}
//==============================================================================
namespace oracles {

std::vector<std::string> capitalized_names(const std::string& caption) {
  std::vector<std::string> words;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) words.push_back(word);
    word.clear();
  };
  for (char c : caption) {
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '\'' || c == '-') {
      word += c;
    } else {
      flush();
      if (c != ' ') words.emplace_back();  // punctuation breaks a name
    }
  }
  flush();

  std::vector<std::string> names;
  std::string current;
  std::size_t run = 0;
  auto close = [&] {
    if (run >= 2) names.push_back(current);
    current.clear();
    run = 0;
  };
  for (const auto& w : words) {
    if (!w.empty() && std::isupper(static_cast<unsigned char>(w.front()))) {
      if (run) current += ' ';
      current += w;
      ++run;
    } else {
      close();
    }
  }
  close();
  return names;
}

std::string collapse_whitespace(const std::string& name) {
  std::istringstream in(name);
  std::string out;
  std::string w;
  while (in >> w) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::function<TokenSequence<float>(const std::string&)> manifest_text_encoder(
    const Manifest& manifest) {
  return [manifest](const std::string& name) {
    for (const auto& r : manifest.records()) {
      if (r.role == Role::kTextEmbedding && r.name == name) {
        return TokenSequence<float>::from_rows(manifest.load(r).matrix());
      }
    }
    throw Error(ErrorCode::kInvalidArgument, "no text embedding for '" + name + "'");
  };
}

std::function<std::vector<FaceEmbedding>(const std::string&, const NameEmbedding<float>&)>
manifest_portraits(const Manifest& manifest) {
  return [manifest](const std::string& name, const NameEmbedding<float>&) {
    std::vector<FaceEmbedding> out;
    for (const auto& r : manifest.records()) {
      if (r.role == Role::kFaceEmbedding && r.name == name) {
        out.push_back(manifest.load(r).vector());
      }
    }
    return out;
  };
}

std::function<bool(const FaceEmbedding&, const FaceEmbedding&)> euclidean_matcher(
    double tolerance) {
  return [tolerance](const FaceEmbedding& a, const FaceEmbedding& b) {
    if (a.size() != b.size()) {
      throw Error(ErrorCode::kShapeMismatch, "face embeddings differ in width");
    }
    return (a.cast<double>() - b.cast<double>()).norm() <= tolerance;
  };
}

}  // namespace oracles
//==============================================================================
}  // namespace nsk
//==============================================================================
