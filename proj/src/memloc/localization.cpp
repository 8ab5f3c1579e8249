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

#include "memloc/localization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "memloc/errors.hpp"
#include "memloc/log.hpp"
#include "memloc/parallel.hpp"
#include "memloc/spatial_hash.hpp"

namespace memloc {

void FusionConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kConfig, std::string("fusion config: ") + what);
  };
  check(max_nearby_views > 0, "max_nearby_views must be positive");
  check(nearby_radius > 0, "nearby_radius must be positive");
  check(overlap_merge > 0 && overlap_merge < 1, "overlap_merge must be in (0, 1)");
  check(merge_dist > 0, "merge_dist must be positive");
  check(far_view_median > 0, "far_view_median must be positive");
  check(min_confirming_views > 0, "min_confirming_views must be positive");
  check(largest_cluster_floor > 0 && largest_cluster_floor < 1, "largest_cluster_floor must be in (0, 1)");
  check(overlap_radius > 0, "overlap_radius must be positive");
  check(dbscan_eps > 0 && dbscan_min_pts > 0, "dbscan parameters must be positive");
  check(voxel_size > 0, "voxel_size must be positive");
  check(depth_range.min_m > 0 && depth_range.min_m < depth_range.max_m, "depth range must satisfy 0 < min < max");
}

std::optional<ViewPrediction> segment_and_backproject(const Keyframe& frame, std::string_view prompt,
                                                      SegmentationProvider& seg, const FusionConfig& cfg) {
  std::vector<Mask> masks;
  try {
    masks = seg.segment(frame, prompt);
  } catch (const ProviderError& e) {
    logger().warn("segmentation failed on frame {}: {}", frame.id, e.what());
    return std::nullopt;
  }
  if (masks.empty()) return std::nullopt;

  const auto best = std::max_element(masks.begin(), masks.end(),
                                     [](const Mask& a, const Mask& b) { return a.confidence < b.confidence; });
  if (best->width != frame.intrinsics.width || best->height != frame.intrinsics.height) {
    logger().warn("segmentation mask for frame {} is {}x{}, expected {}x{}", frame.id, best->width, best->height,
                 frame.intrinsics.width, frame.intrinsics.height);
    return std::nullopt;
  }
  if (median_masked_depth(frame.depth, *best) > cfg.far_view_median) return std::nullopt;

  ViewPrediction pred;
  pred.frame_id = frame.id;
  pred.cloud = backproject(frame.depth, *best, frame.intrinsics, frame.pose, cfg.depth_range);
  if (pred.cloud.empty()) return std::nullopt;
  pred.mask = *best;
  return pred;
}

std::vector<std::vector<std::size_t>> group_instances(std::span<const ViewPrediction> preds, const FusionConfig& cfg) {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<PointCloud> merged;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const PointCloud& cloud = preds[i].cloud;
    bool placed = false;
    for (std::size_t c = 0; c < clusters.size() && !placed; ++c) {
      if (cloud.empty()) break;
      const bool joins = cloud_overlap(cloud, merged[c], cfg.overlap_radius) >= cfg.overlap_merge ||
                         min_point_distance(cloud, merged[c]) < cfg.merge_dist;
      if (joins) {
        clusters[c].push_back(i);
        merged[c].insert(merged[c].end(), cloud.begin(), cloud.end());
        placed = true;
      }
    }
    if (!placed) {
      clusters.push_back({i});
      merged.push_back(cloud);
    }
  }
  return clusters;
}

namespace {

struct Voxelized {
  std::vector<Vec3> reps;
  std::vector<std::uint32_t> rep_of;  // per input point
};

Voxelized voxelize(const PointCloud& cloud, double voxel) {
  Voxelized v;
  v.rep_of.resize(cloud.size());
  const double inv = 1.0 / voxel;
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const noexcept {
      return static_cast<std::size_t>((k[0] * 73856093) ^ (k[1] * 19349663) ^ (k[2] * 83492791));
    }
  };
  std::unordered_map<std::array<std::int64_t, 3>, std::uint32_t, KeyHash> index;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(cloud[i].x() * inv)),
                                          static_cast<std::int64_t>(std::floor(cloud[i].y() * inv)),
                                          static_cast<std::int64_t>(std::floor(cloud[i].z() * inv))};
    auto [it, inserted] = index.try_emplace(key, static_cast<std::uint32_t>(v.reps.size()));
    if (inserted) {
      v.reps.push_back(Vec3::Zero());
      counts.push_back(0);
    }
    v.reps[it->second] += cloud[i];
    ++counts[it->second];
    v.rep_of[i] = it->second;
  }
  for (std::size_t r = 0; r < v.reps.size(); ++r) v.reps[r] /= static_cast<double>(counts[r]);
  return v;
}

constexpr int kUnvisited = -1;
constexpr int kNoise = -2;

// Classic DBSCAN; neighbourhoods include the point itself and use <= eps.
std::vector<int> dbscan(const std::vector<Vec3>& pts, double eps, std::size_t min_pts) {
  std::vector<int> label(pts.size(), kUnvisited);
  const SpatialHash grid(pts, eps);
  const double eps2 = eps * eps;
  std::vector<std::uint32_t> nbrs, inner;
  int next_cluster = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (label[i] != kUnvisited) continue;
    grid.within(pts[i], eps2, nbrs);
    if (nbrs.size() < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int c = next_cluster++;
    label[i] = c;
    std::vector<std::uint32_t> frontier(nbrs.begin(), nbrs.end());
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const std::uint32_t j = frontier[f];
      if (label[j] == kNoise) label[j] = c;
      if (label[j] != kUnvisited) continue;
      label[j] = c;
      grid.within(pts[j], eps2, inner);
      if (inner.size() >= min_pts) frontier.insert(frontier.end(), inner.begin(), inner.end());
    }
  }
  return label;
}

}  // namespace

PointCloud density_filter(const PointCloud& cloud, const FusionConfig& cfg) {
  require(!cloud.empty(), "density_filter: empty cloud");
  const Voxelized vox = voxelize(cloud, cfg.voxel_size);
  const std::vector<int> rep_label = dbscan(vox.reps, cfg.dbscan_eps, cfg.dbscan_min_pts);

  std::unordered_map<int, std::pair<std::size_t, std::size_t>> stats;  // label -> (count, first index)
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int l = rep_label[vox.rep_of[i]];
    if (l < 0) continue;
    auto [it, inserted] = stats.try_emplace(l, 0, i);
    ++it->second.first;
  }
  int best = kNoise;
  std::size_t best_count = 0, best_first = 0;
  for (const auto& [l, s] : stats) {
    if (s.first > best_count || (s.first == best_count && s.second < best_first)) {
      best = l;
      best_count = s.first;
      best_first = s.second;
    }
  }
  if (best == kNoise || static_cast<double>(best_count) < cfg.largest_cluster_floor * static_cast<double>(cloud.size())) {
    return cloud;
  }
  PointCloud out;
  out.reserve(best_count);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (rep_label[vox.rep_of[i]] == best) out.push_back(cloud[i]);
  }
  return out;
}

GoalCandidate fuse_cluster(std::span<const ViewPrediction> cluster, const SceneMemory& scene,
                           SegmentationProvider& seg, const FusionConfig& cfg, std::string_view prompt,
                           FusionTrace* trace) {
  require(!cluster.empty(), "fuse_cluster: empty cluster");
  const ViewPrediction& seed = cluster.front();
  GoalCandidate cand;
  cand.member_predictions.push_back(seed);
  PointCloud merged = seed.cloud;

  for (std::size_t i = 1; i < cluster.size(); ++i) {
    if (cloud_overlap(cluster[i].cloud, merged, cfg.overlap_radius) >= cfg.overlap_merge) {
      merged.insert(merged.end(), cluster[i].cloud.begin(), cluster[i].cloud.end());
      cand.member_predictions.push_back(cluster[i]);
    }
  }

  std::size_t nearby_calls = 0;
  if (cand.member_predictions.size() < cfg.min_confirming_views && !seed.cloud.empty()) {
    const Vec3 anchor = centroid(seed.cloud);
    std::unordered_set<std::int64_t> taken;
    for (const auto& p : cluster) taken.insert(p.frame_id);

    std::vector<std::pair<double, const Keyframe*>> eligible;
    for (const auto& kf : scene.keyframes()) {
      if (taken.count(kf.id)) continue;
      const double d = (kf.pose.translation - anchor).norm();
      if (d > cfg.nearby_radius) continue;
      if (!frustum_contains(kf.intrinsics, kf.pose, seed.cloud)) continue;
      eligible.emplace_back(d, &kf);
    }
    std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && a.second->id < b.second->id);
    });
    if (eligible.size() > cfg.max_nearby_views) eligible.resize(cfg.max_nearby_views);

    for (const auto& [dist, kf] : eligible) {
      ++nearby_calls;
      auto pred = segment_and_backproject(*kf, prompt, seg, cfg);
      if (!pred) continue;
      if (cloud_overlap(pred->cloud, merged, cfg.overlap_radius) >= cfg.overlap_merge) {
        merged.insert(merged.end(), pred->cloud.begin(), pred->cloud.end());
        cand.member_predictions.push_back(std::move(*pred));
      }
    }
  }
  if (trace) {
    trace->nearby_considered = nearby_calls;
    trace->confirmed = cand.member_predictions.size();
  }

  if (merged.empty()) fail(ErrorCode::kNotFound, "no valid geometry for candidate");
  cand.fused_cloud = density_filter(merged, cfg);
  if (cand.fused_cloud.empty()) fail(ErrorCode::kNotFound, "no valid geometry for candidate");
  cand.center = BoundingBox::of(cand.fused_cloud).center();
  cand.confidence = seed.stage2_confidence.value_or(seed.stage1_score);
  return cand;
}

std::vector<GoalCandidate> localize(const Query& query, const SceneMemory& scene, const EmbeddingIndex& index,
                                    const Providers& providers, const LocalizeOptions& opts) {
  query.validate();
  opts.fusion.validate();
  require(providers.segmentation != nullptr, "localize: no segmentation provider");
  const std::string& prompt = query.prompt();

  struct View {
    Candidate cand;
    std::optional<double> confidence;
  };
  std::vector<View> views;
  const auto cands = retrieve(index, query.embedding, opts.retrieval, opts.rerank_enabled);
  if (opts.rerank_enabled) {
    require(providers.rerank != nullptr, "localize: re-ranking enabled without a provider");
    std::vector<std::string> refs;
    for (const auto& c : cands) refs.push_back(scene.by_id(c.frame_id).rgb_ref);
    for (const auto& r : rerank(cands, *providers.rerank, prompt, refs, opts.jobs)) {
      views.push_back({r.candidate, r.verdict.confidence});
    }
  } else {
    for (const auto& c : cands) views.push_back({c, std::nullopt});
  }

  std::vector<std::optional<ViewPrediction>> lifted(views.size());
  parallel_for(views.size(), opts.jobs, [&](std::size_t i) {
    lifted[i] = segment_and_backproject(scene.by_id(views[i].cand.frame_id), prompt, *providers.segmentation,
                                        opts.fusion);
    if (lifted[i]) {
      lifted[i]->stage1_score = views[i].cand.score;
      lifted[i]->stage2_confidence = views[i].confidence;
    }
  });
  std::vector<ViewPrediction> preds;
  for (auto& p : lifted) {
    if (p) preds.push_back(std::move(*p));
  }
  if (preds.empty()) fail(ErrorCode::kNotFound, "target not found");

  std::vector<std::vector<std::size_t>> clusters;
  if (opts.mode == LocalizeMode::kNavigation) {
    clusters = group_instances(preds, opts.fusion);
  } else {
    for (std::size_t i = 0; i < preds.size(); ++i) clusters.push_back({i});
  }

  std::vector<GoalCandidate> out;
  for (const auto& members : clusters) {
    std::vector<ViewPrediction> cluster;
    for (std::size_t i : members) cluster.push_back(preds[i]);
    try {
      out.push_back(fuse_cluster(cluster, scene, *providers.segmentation, opts.fusion, prompt));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotFound) throw;
      logger().warn("dropping candidate seeded by frame {}: {}", cluster.front().frame_id, e.what());
    }
  }
  if (out.empty()) fail(ErrorCode::kNotFound, "target not found");

  for (auto& c : out) c.distance_to_agent = (c.center - opts.agent_position).norm();
  if (opts.mode == LocalizeMode::kNavigation) {
    std::stable_sort(out.begin(), out.end(),
                     [](const GoalCandidate& a, const GoalCandidate& b) { return a.distance_to_agent < b.distance_to_agent; });
  } else {
    std::stable_sort(out.begin(), out.end(), [](const GoalCandidate& a, const GoalCandidate& b) {
      const auto& sa = a.member_predictions.front();
      const auto& sb = b.member_predictions.front();
      const double ca = sa.stage2_confidence.value_or(0.0), cb = sb.stage2_confidence.value_or(0.0);
      if (ca != cb) return ca > cb;
      return sa.stage1_score > sb.stage1_score;
    });
  }
  return out;
}

}  // namespace memloc
