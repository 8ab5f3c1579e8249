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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memloc/embedding_index.hpp"
#include "memloc/geometry.hpp"
#include "memloc/rerank.hpp"
#include "memloc/scene_memory.hpp"

namespace memloc {

/// Text-prompted instance segmentation. Implementations throw ProviderError
/// on transport failure; an empty result means nothing was found.
class SegmentationProvider {
 public:
  virtual ~SegmentationProvider() = default;
  virtual std::vector<Mask> segment(const Keyframe& frame, std::string_view prompt) = 0;
};

struct FusionConfig {
  std::size_t max_nearby_views = 5;
  double nearby_radius = 3.0;
  double overlap_merge = 0.15;
  double merge_dist = 0.5;
  double far_view_median = 4.0;
  std::size_t min_confirming_views = 2;
  double largest_cluster_floor = 0.05;
  double overlap_radius = 0.10;
  double dbscan_eps = 0.10;
  std::size_t dbscan_min_pts = 10;
  double voxel_size = 0.02;
  DepthRange depth_range;

  void validate() const;
};

struct ViewPrediction {
  std::int64_t frame_id = 0;
  Mask mask;
  PointCloud cloud;
  std::optional<double> stage2_confidence;
  double stage1_score = 0.0;
};

struct GoalCandidate {
  std::vector<ViewPrediction> member_predictions;  // seed first, then confirmed views
  PointCloud fused_cloud;
  Vec3 center = Vec3::Zero();
  double distance_to_agent = 0.0;
  double confidence = 0.0;
};

/// Picks the highest-confidence mask and lifts it to 3D. Returns nullopt when
/// the view is discarded: no mask, median masked depth above
/// `far_view_median`, empty cloud, or provider failure.
std::optional<ViewPrediction> segment_and_backproject(const Keyframe& frame, std::string_view prompt,
                                                      SegmentationProvider& seg, const FusionConfig& cfg);

/// Sequential greedy grouping. Each prediction joins the first cluster (in
/// creation order) whose merged cloud overlaps it by >= overlap_merge or lies
/// closer than merge_dist; otherwise it seeds a new cluster. Returns indices
/// into `preds`.
std::vector<std::vector<std::size_t>> group_instances(std::span<const ViewPrediction> preds, const FusionConfig& cfg);

/// Largest density cluster of the cloud (DBSCAN over voxel representatives),
/// or the input unchanged when that cluster holds less than
/// largest_cluster_floor of the points.
PointCloud density_filter(const PointCloud& cloud, const FusionConfig& cfg);

struct FusionTrace {
  std::size_t nearby_considered = 0;  // provider calls made for nearby cameras
  std::size_t confirmed = 0;          // seed included
};

/// Multi-view fusion for one cluster, members in rank order. Throws
/// Error(kNotFound, "no valid geometry for candidate") if nothing survives.
GoalCandidate fuse_cluster(std::span<const ViewPrediction> cluster, const SceneMemory& scene,
                           SegmentationProvider& seg, const FusionConfig& cfg, std::string_view prompt,
                           FusionTrace* trace = nullptr);

enum class LocalizeMode { kNavigation, kBenchmark };

struct LocalizeOptions {
  RetrievalConfig retrieval;
  FusionConfig fusion;
  bool rerank_enabled = false;
  LocalizeMode mode = LocalizeMode::kNavigation;
  Vec3 agent_position = Vec3::Zero();
  std::size_t jobs = 1;
};

struct Providers {
  SegmentationProvider* segmentation = nullptr;
  RerankProvider* rerank = nullptr;
};

/// Retrieval, optional re-ranking, per-view lifting, grouping and fusion.
/// Navigation mode orders candidates by distance to the agent; benchmark mode
/// fuses every view on its own and keeps the retrieval order.
/// Throws Error(kNotFound, "target not found") when no candidate survives.
std::vector<GoalCandidate> localize(const Query& query, const SceneMemory& scene, const EmbeddingIndex& index,
                                    const Providers& providers, const LocalizeOptions& opts);

}  // namespace memloc
