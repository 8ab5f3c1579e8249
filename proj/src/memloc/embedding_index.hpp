// Copyright 2026 The memloc Authors
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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace memloc {

/// Unit-norm embedding. Only constructible through normalize().
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  std::span<const float> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }

 private:
  friend EmbeddingVector normalize(std::span<const float> raw);
  std::vector<float> values_;
};

/// v / ||v||. Throws Error(kInvalidArgument, "degenerate embedding") on a
/// zero or non-finite vector.
EmbeddingVector normalize(std::span<const float> raw);

/// Exact inner-product index, one row per keyframe id.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  /// Normalizes each of the ids.size() rows of `raw` (row-major, `dim` wide).
  EmbeddingIndex(std::vector<std::int64_t> ids, std::size_t dim, std::span<const float> raw, std::size_t jobs = 1);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }

  std::int64_t id(std::size_t row) const { return ids_[row]; }
  const std::vector<std::int64_t>& ids() const { return ids_; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  const std::vector<float>& data() const { return data_; }

  /// Row index of a keyframe id; throws Error(kNotFound).
  std::size_t row_of(std::int64_t id) const;

 private:
  std::vector<std::int64_t> ids_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<std::size_t> by_id_;  // rows sorted by id
};

/// Inner product accumulated in double, in component order.
double dot(std::span<const float> a, std::span<const float> b);

enum class QueryKind { kText, kCategory, kImage };

struct Query {
  QueryKind kind = QueryKind::kText;
  std::string payload;  // text, category, or image reference
  std::string label;    // segmentation prompt for image queries
  EmbeddingVector embedding;

  /// Prompt used for re-ranking and segmentation.
  const std::string& prompt() const { return kind == QueryKind::kImage ? label : payload; }
  void validate() const;
};

struct Candidate {
  std::int64_t frame_id = 0;
  double score = 0.0;

  bool operator==(const Candidate&) const = default;
};

/// min(k, N) best rows by score, descending; ties go to the smaller frame id.
std::vector<Candidate> top_k(const EmbeddingIndex& index, const EmbeddingVector& q, std::size_t k);

/// Greedy scan in input order: a candidate is skipped when its cosine
/// similarity to any already kept candidate exceeds `sim_max`.
std::vector<Candidate> dedup(std::span<const Candidate> cands, const EmbeddingIndex& index, double sim_max);

struct RetrievalConfig {
  std::size_t k = 10;
  double dedup_sim_max = 0.9;
  std::size_t overfetch = 4;  // multiple of k fetched before dedup
};

/// Stage-1 retrieval. With re-ranking enabled the raw top-k is returned; the
/// feature-only path deduplicates an overfetched list and truncates to k.
std::vector<Candidate> retrieve(const EmbeddingIndex& index, const EmbeddingVector& q, const RetrievalConfig& cfg,
                                bool rerank_enabled);

/// Contents of an EMB1 file.
struct EmbeddingMatrix {
  std::uint32_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const { return {data.data() + r * dim, dim}; }
};

EmbeddingMatrix read_emb1(const std::string& path);
void write_emb1(const std::string& path, const EmbeddingMatrix& m);

/// Format checker: magic, header, payload length, finite values. Returns an
/// empty string when valid, otherwise the first problem found.
std::string validate_emb1(const std::string& path);

std::vector<std::int64_t> read_id_sidecar(const std::string& path);
void write_id_sidecar(const std::string& path, std::span<const std::int64_t> ids);

}  // namespace memloc
