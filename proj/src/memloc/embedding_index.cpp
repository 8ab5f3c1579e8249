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

#include "memloc/embedding_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "memloc/errors.hpp"
#include "memloc/parallel.hpp"

namespace memloc {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

EmbeddingVector normalize(std::span<const float> raw) {
  double sq = 0.0;
  for (float x : raw) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (raw.empty() || !(norm > 0.0) || !std::isfinite(norm)) fail(ErrorCode::kInvalidArgument, "degenerate embedding");
  EmbeddingVector v;
  v.values_.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) v.values_[i] = static_cast<float>(raw[i] / norm);
  return v;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

EmbeddingIndex::EmbeddingIndex(std::vector<std::int64_t> ids, std::size_t dim, std::span<const float> raw,
                               std::size_t jobs)
    : ids_(std::move(ids)), dim_(dim) {
  require(dim_ > 0, "embedding index: dim must be positive");
  require(raw.size() == ids_.size() * dim_, "embedding index: payload does not match count x dim");
  data_.resize(raw.size());
  parallel_for(ids_.size(), jobs, [&](std::size_t r) {
    try {
      const EmbeddingVector v = normalize(raw.subspan(r * dim_, dim_));
      std::copy(v.values().begin(), v.values().end(), data_.begin() + r * dim_);
    } catch (const Error&) {
      fail(ErrorCode::kInvalidArgument, "degenerate embedding for frame " + std::to_string(ids_[r]));
    }
  });
  by_id_.resize(ids_.size());
  std::iota(by_id_.begin(), by_id_.end(), 0);
  std::sort(by_id_.begin(), by_id_.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  for (std::size_t i = 1; i < by_id_.size(); ++i) {
    require(ids_[by_id_[i - 1]] != ids_[by_id_[i]], "embedding index: duplicate frame id " + std::to_string(ids_[by_id_[i]]));
  }
}

std::size_t EmbeddingIndex::row_of(std::int64_t id) const {
  auto it = std::lower_bound(by_id_.begin(), by_id_.end(), id, [&](std::size_t r, std::int64_t v) { return ids_[r] < v; });
  if (it == by_id_.end() || ids_[*it] != id) fail(ErrorCode::kNotFound, "frame " + std::to_string(id) + " not in index");
  return *it;
}

void Query::validate() const {
  require(embedding.dim() > 0, "query: missing embedding");
  if (kind == QueryKind::kImage) {
    require(!payload.empty(), "image query needs an image reference");
    require(!label.empty(), "image query needs a category label for segmentation");
  } else {
    require(!payload.empty(), "query text is empty");
  }
}

namespace {

bool ranks_before(const Candidate& a, const Candidate& b) {
  return a.score > b.score || (a.score == b.score && a.frame_id < b.frame_id);
}

}  // namespace

std::vector<Candidate> top_k(const EmbeddingIndex& index, const EmbeddingVector& q, std::size_t k) {
  if (index.empty()) fail(ErrorCode::kInvalidArgument, "top_k: empty index");
  require(k >= 1, "top_k: K must be >= 1");
  require(q.dim() == index.dim(), "top_k: query dim " + std::to_string(q.dim()) + " != index dim " +
                                      std::to_string(index.dim()));
  std::vector<Candidate> all(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) all[r] = {index.id(r), dot(q.values(), index.row(r))};
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + n, all.end(), ranks_before);
  all.resize(n);
  return all;
}

std::vector<Candidate> dedup(std::span<const Candidate> cands, const EmbeddingIndex& index, double sim_max) {
  std::vector<Candidate> kept;
  std::vector<std::size_t> kept_rows;
  for (const auto& c : cands) {
    const std::size_t row = index.row_of(c.frame_id);
    const bool redundant = std::any_of(kept_rows.begin(), kept_rows.end(),
                                       [&](std::size_t k) { return dot(index.row(row), index.row(k)) > sim_max; });
    if (redundant) continue;
    kept.push_back(c);
    kept_rows.push_back(row);
  }
  return kept;
}

std::vector<Candidate> retrieve(const EmbeddingIndex& index, const EmbeddingVector& q, const RetrievalConfig& cfg,
                                bool rerank_enabled) {
  if (rerank_enabled) return top_k(index, q, cfg.k);
  auto kept = dedup(top_k(index, q, cfg.k * std::max<std::size_t>(cfg.overfetch, 1)), index, cfg.dedup_sim_max);
  if (kept.size() > cfg.k) kept.resize(cfg.k);
  return kept;
}

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

}  // namespace

EmbeddingMatrix read_emb1(const std::string& path) {
  if (const std::string problem = validate_emb1(path); !problem.empty()) fail(ErrorCode::kIo, path + ": " + problem);
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  EmbeddingMatrix m;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&m.count), 4);
  in.read(reinterpret_cast<char*>(&m.dim), 4);
  m.data.resize(static_cast<std::size_t>(m.count) * m.dim);
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(float)));
  if (!in) fail(ErrorCode::kIo, path + ": truncated payload");
  return m;
}

void write_emb1(const std::string& path, const EmbeddingMatrix& m) {
  require(m.data.size() == static_cast<std::size_t>(m.count) * m.dim, "write_emb1: payload does not match count x dim");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&m.count), 4);
  out.write(reinterpret_cast<const char*>(&m.dim), 4);
  out.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(float)));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

std::string validate_emb1(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) return "cannot open file";
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  if (size < 12) return "file shorter than the 12-byte header";
  char magic[4];
  std::uint32_t count = 0, dim = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (std::memcmp(magic, kMagic, 4) != 0) return "bad magic (expected EMB1)";
  if (dim == 0) return "dim is zero";
  const std::uint64_t expected = 12 + static_cast<std::uint64_t>(count) * dim * sizeof(float);
  if (size != expected) {
    return "payload size " + std::to_string(size - 12) + " does not match count " + std::to_string(count) + " x dim " +
           std::to_string(dim);
  }
  std::vector<float> row(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), dim * sizeof(float));
    for (float x : row) {
      if (!std::isfinite(x)) return "non-finite value in row " + std::to_string(r);
    }
  }
  return {};
}

std::vector<std::int64_t> read_id_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open id sidecar '" + path + "'");
  std::vector<std::int64_t> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ids.push_back(std::stoll(line));
    } catch (const std::exception&) {
      fail(ErrorCode::kIo, path + ": bad id '" + line + "'");
    }
  }
  return ids;
}

void write_id_sidecar(const std::string& path, std::span<const std::int64_t> ids) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  for (auto id : ids) out << id << '\n';
}

}  // namespace memloc
