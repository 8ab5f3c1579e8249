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
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "memloc/config.hpp"
#include "memloc/embedding_index.hpp"
#include "memloc/localization.hpp"
#include "memloc/scene_memory.hpp"

namespace memloc {

/// Writes index.emb (normalized rows), index.ids, scene.jsonl (absolute
/// paths) and stats.json under `out_dir`; returns the stats.
nlohmann::json build_index(const std::string& manifest, const std::string& embeddings, const std::string& out_dir,
                           std::size_t jobs = 1);

/// A built index loaded back into memory.
struct OpenIndex {
  std::string dir;
  SceneMemory memory;
  EmbeddingIndex index;

  static OpenIndex open(const std::string& dir, std::size_t jobs = 1);
  nlohmann::json info() const;
};

struct QuerySpec {
  QueryKind kind = QueryKind::kText;
  std::string text;            // text or category query
  std::string image_path;      // image query
  std::string label;           // segmentation prompt of an image query
  std::string embedding_path;  // EMB1 file holding the query embedding
  std::size_t embedding_row = 0;
  Vec3 agent = Vec3::Zero();
  bool include_points = false;
};

Query make_query(const QuerySpec& spec);

/// Providers described by a run config. Owns what it creates.
class ProviderSet {
 public:
  explicit ProviderSet(const RunConfig& cfg);
  Providers view() const { return {seg_.get(), rerank_.get()}; }

 private:
  std::unique_ptr<SegmentationProvider> seg_;
  std::unique_ptr<RerankProvider> rerank_;
};

LocalizeOptions localize_options(const RunConfig& cfg, const Vec3& agent, std::size_t jobs);

/// Localization report: {"query", "query_kind", "mode", "agent",
/// "candidates": [{"rank", "center", "num_points", "member_frames",
/// "confidence", "distance_to_agent", "points"?}], "config"}.
nlohmann::json localization_report(const QuerySpec& spec, const std::vector<GoalCandidate>& cands,
                                   const RunConfig& cfg);

nlohmann::json localize_query(const OpenIndex& idx, const RunConfig& cfg, const QuerySpec& spec, std::size_t jobs = 1);

/// Keyframe selection plus downsampling of a recorded trajectory. Writes a
/// new manifest (and the matching embedding rows when given) to `out_dir`.
nlohmann::json reduce_trajectory(const RunConfig& cfg, const std::string& manifest, const std::string& embeddings,
                                 const std::string& out_dir);

/// Goal candidates read back from a localization report with points.
std::vector<GoalCandidate> candidates_from_report(const nlohmann::json& report);

/// Runs one episode. Without a report the goal-labelled objects of the scene
/// (nearest first) are the candidates. Trace lines go to `trace_path` if set.
nlohmann::json simulate(const RunConfig& cfg, const std::string& scene_file, const std::string& report_path,
                        const std::string& trace_path, std::size_t start_index = 0);

struct EvalOutput {
  nlohmann::json report;
  std::string csv;
};

/// Localization metrics from `pred` + `gt`, navigation metrics from `nav`
/// (JSON lines of simulate() outputs). Paths may be empty.
EvalOutput evaluate(const RunConfig& cfg, const std::string& pred, const std::string& gt, const std::string& nav);

/// Times index build and one localization per query embedding file.
nlohmann::json profile_run(const RunConfig& cfg, const std::string& manifest, const std::string& embeddings,
                           const std::vector<std::string>& query_embeddings, const std::string& work_dir,
                           std::size_t jobs = 1);

struct SynthOptions {
  std::string kind = "room";  // room | maze
  std::uint64_t seed = 0;
  std::size_t frames = 36;
  int width = 64;
  int height = 48;
  bool keyframes = false;  // apply keyframe selection before writing
  int downsample = 1;
};

nlohmann::json synthesize(const SynthOptions& opts, const std::string& out_dir, const RunConfig& cfg = {});

/// Reads a file fully; Error(kIo) when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);
nlohmann::json read_json_file(const std::string& path);

}  // namespace memloc
