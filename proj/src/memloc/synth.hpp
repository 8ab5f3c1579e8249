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

#include <atomic>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "memloc/embedding_index.hpp"
#include "memloc/localization.hpp"
#include "memloc/nav_sim.hpp"
#include "memloc/rerank.hpp"

namespace memloc {

/// Object vocabulary of the synthetic worlds. Embedding dimension i < size()
/// counts pixels of that label; the last three count wall, floor and void.
const std::vector<std::string>& synthetic_vocabulary();
std::size_t synthetic_embedding_dim();

/// Portable seeded generator (mt19937_64 output is fixed by the standard).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);  // inclusive

 private:
  std::mt19937_64 engine_;
};

struct RoomParams {
  double min_size = 5.0;
  double max_size = 7.0;
  int min_objects = 4;
  int max_objects = 6;
  double cell_size = 0.1;
};

/// Walled rectangular room with labelled boxes placed along the walls and a
/// clear central area. One start at the center; every object label is a goal.
SyntheticScene make_room(std::uint64_t seed, const RoomParams& p = {});

struct MazeParams {
  int cells_x = 5;
  int cells_z = 5;
  double corridor = 1.0;
  double wall = 0.2;
  double cell_size = 0.1;
  double braid = 0.15;  // fraction of extra walls removed to create loops
};

/// Perfect maze (randomized depth-first carving) with optional loops, a start
/// in the first corridor cell and one tall goal box in the farthest cell.
SyntheticScene make_maze(std::uint64_t seed, const MazeParams& p = {});

/// Camera loop around the room center, looking outward with a slow sweep.
std::vector<AgentState> survey_loop(const SyntheticScene& scene, std::size_t frames, double radius_fraction = 0.15);

struct SyntheticFrame {
  Keyframe keyframe;
  std::vector<int> labels;  // per pixel, render() label convention
};

/// Renders one keyframe. Depth is pre-quantized to the 16-bit storage step so
/// that a PNG round trip is lossless.
SyntheticFrame capture(const SyntheticScene& scene, const AgentState& agent, const CameraIntrinsics& intr,
                       std::int64_t id);

/// Downsamples keyframe and label image consistently.
SyntheticFrame downsample_frame(const SyntheticFrame& frame, int factor);

/// Noiseless embedding: per-label pixel counts.
std::vector<float> frame_embedding(const SyntheticFrame& frame, const SyntheticScene& scene);
/// One-hot query embedding for a vocabulary label.
std::vector<float> label_embedding(const std::string& label);

/// Perfect masks straight from the rendered labels, one per visible instance,
/// confidence = pixel fraction of the instance.
class LabelSegmenter : public SegmentationProvider {
 public:
  LabelSegmenter(const SyntheticScene& scene, std::span<const SyntheticFrame> frames);
  std::vector<Mask> segment(const Keyframe& frame, std::string_view prompt) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<std::string> object_labels_;
  std::map<std::int64_t, const SyntheticFrame*> frames_;
  std::atomic<std::size_t> calls_{0};
};

/// Answers the re-rank prompt from the labels: "yes <score>" when the label
/// covers any pixel, score = ceil(100 * fraction) clamped to 10, else "no 0".
class LabelReranker : public RerankProvider {
 public:
  LabelReranker(const SyntheticScene& scene, std::span<const SyntheticFrame> frames);
  std::string ask(const RerankRequest& req) override;

 private:
  std::vector<std::string> object_labels_;
  std::map<std::int64_t, const SyntheticFrame*> frames_;
};

std::string label_rerank_answer(const SyntheticScene& scene, const SyntheticFrame& frame, const std::string& label);

struct SyntheticDataset {
  SyntheticScene world;
  std::vector<SyntheticFrame> frames;

  EmbeddingIndex index(std::size_t jobs = 1) const;
  SceneMemory memory() const;
  /// Distinct object labels in first-placement order.
  std::vector<std::string> labels() const;
  /// Box centers of every object with the label.
  std::vector<Vec3> goals(const std::string& label) const;
};

struct DatasetParams {
  std::size_t frames = 36;
  int width = 64;
  int height = 48;
  double hfov_deg = 79.0;
  RoomParams room;
};

SyntheticDataset make_room_dataset(std::uint64_t seed, const DatasetParams& p = {});

/// Files written under `dir`: world.json, manifest.jsonl with rgb/ and depth/
/// PNGs, embeddings.emb, masks/masks.jsonl with mask PNGs, rerank.jsonl,
/// queries/<label>.emb and gt.json.
void write_dataset(const std::string& dir, const SyntheticDataset& ds);

/// Surface samples of an object box (all faces but the bottom) on a grid of
/// the given spacing, as a navigation goal candidate.
GoalCandidate box_candidate(const SceneObject& obj, double spacing = 0.05);

}  // namespace memloc
