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

#include "memloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <queue>

#include "memloc/errors.hpp"
#include "memloc/providers.hpp"

namespace memloc {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& synthetic_vocabulary() {
  static const std::vector<std::string> vocab = {
      "chair", "table", "sofa", "bed",  "plant",     "tv",           "lamp", "cabinet",
      "sink",  "toilet", "bookshelf", "refrigerator", "oven", "desk", "bathtub", "piano"};
  return vocab;
}

std::size_t synthetic_embedding_dim() { return synthetic_vocabulary().size() + 3; }

SeededRng::SeededRng(std::uint64_t seed) : engine_(seed) {}

double SeededRng::uniform(double lo, double hi) {
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

int SeededRng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(engine_() % span);
}

namespace {

std::size_t vocab_index(const std::string& label) {
  const auto& v = synthetic_vocabulary();
  const auto it = std::find(v.begin(), v.end(), label);
  if (it == v.end()) fail(ErrorCode::kInvalidArgument, "label '" + label + "' is not in the synthetic vocabulary");
  return static_cast<std::size_t>(it - v.begin());
}

std::vector<std::uint8_t> boundary_walls(int rows, int cols) {
  std::vector<std::uint8_t> w(static_cast<std::size_t>(rows) * cols, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (r == 0 || c == 0 || r == rows - 1 || c == cols - 1) w[static_cast<std::size_t>(r) * cols + c] = 1;
    }
  }
  return w;
}

bool boxes_overlap(const SceneObject& a, const SceneObject& b, double gap) {
  return a.min_corner.x() < b.max_corner.x() + gap && b.min_corner.x() < a.max_corner.x() + gap &&
         a.min_corner.z() < b.max_corner.z() + gap && b.min_corner.z() < a.max_corner.z() + gap;
}

}  // namespace

SyntheticScene make_room(std::uint64_t seed, const RoomParams& p) {
  require(p.min_size >= 4.0 && p.max_size >= p.min_size, "room size range invalid");
  require(p.min_objects >= 1 && p.max_objects >= p.min_objects &&
              p.max_objects <= static_cast<int>(synthetic_vocabulary().size()),
          "room object count range invalid");
  SeededRng rng(seed);
  const double cs = p.cell_size;
  const int cols = static_cast<int>(std::lround(rng.uniform(p.min_size, p.max_size) / cs));
  const int rows = static_cast<int>(std::lround(rng.uniform(p.min_size, p.max_size) / cs));
  const double width = cols * cs, depth = rows * cs;
  SyntheticScene scene(rows, cols, cs, boundary_walls(rows, cols));

  std::vector<std::string> labels = synthetic_vocabulary();
  for (std::size_t i = labels.size() - 1; i > 0; --i) {
    std::swap(labels[i], labels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
  }
  const int n = rng.uniform_int(p.min_objects, p.max_objects);
  const double cx = width / 2, cz = depth / 2;
  const double clear_radius = 0.15 * std::min(width, depth) + 0.4;
  auto snap = [cs](double v) { return std::round(v / cs) * cs; };

  std::vector<SceneObject> placed;
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < 500; ++attempt) {
      const double sx = snap(rng.uniform(0.3, 0.7)), sz = snap(rng.uniform(0.3, 0.7));
      const double h = std::round(rng.uniform(0.5, 1.3) * 100.0) / 100.0;
      const int side = rng.uniform_int(0, 3);
      const double gap = snap(rng.uniform(0.2, 0.5));
      double x0, z0;
      if (side < 2) {
        x0 = snap(rng.uniform(cs + 0.2, width - cs - 0.2 - sx));
        z0 = side == 0 ? cs + gap : depth - cs - gap - sz;
      } else {
        z0 = snap(rng.uniform(cs + 0.2, depth - cs - 0.2 - sz));
        x0 = side == 2 ? cs + gap : width - cs - gap - sx;
      }
      SceneObject obj{labels[i], Vec3(x0, 0.0, z0), Vec3(x0 + sx, h, z0 + sz)};
      const double dx = std::max({obj.min_corner.x() - cx, 0.0, cx - obj.max_corner.x()});
      const double dz = std::max({obj.min_corner.z() - cz, 0.0, cz - obj.max_corner.z()});
      if (std::hypot(dx, dz) < clear_radius) continue;
      if (std::any_of(placed.begin(), placed.end(), [&](const SceneObject& o) { return boxes_overlap(o, obj, 0.3); })) {
        continue;
      }
      placed.push_back(obj);
      break;
    }
  }
  for (const auto& o : placed) {
    scene.add_object(o);
    scene.goal_labels.push_back(o.label);
  }
  scene.starts.push_back({cx, cz, 0.0});
  return scene;
}

SyntheticScene make_maze(std::uint64_t seed, const MazeParams& p) {
  require(p.cells_x >= 2 && p.cells_z >= 2, "maze needs at least 2x2 cells");
  const double cs = p.cell_size;
  const int cw = static_cast<int>(std::lround(p.corridor / cs));
  const int ww = static_cast<int>(std::lround(p.wall / cs));
  require(cw >= 4 && ww >= 1, "maze corridor or wall too thin for the cell size");
  const int pitch = cw + ww;
  const int cols = p.cells_x * pitch + ww, rows = p.cells_z * pitch + ww;
  std::vector<std::uint8_t> walls(static_cast<std::size_t>(rows) * cols, 1);
  auto clear = [&](int r0, int r1, int c0, int c1) {
    for (int r = r0; r < r1; ++r) {
      for (int c = c0; c < c1; ++c) walls[static_cast<std::size_t>(r) * cols + c] = 0;
    }
  };
  // Passage bookkeeping: east[i][j] opens (i,j)-(i+1,j), south[i][j] opens (i,j)-(i,j+1).
  const int nx = p.cells_x, nz = p.cells_z;
  std::vector<std::uint8_t> east(static_cast<std::size_t>(nx) * nz, 0), south(east.size(), 0), seen(east.size(), 0);
  auto at = [nx](int i, int j) { return static_cast<std::size_t>(j) * nx + i; };

  SeededRng rng(seed);
  std::vector<std::pair<int, int>> stack{{0, 0}};
  seen[at(0, 0)] = 1;
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    std::vector<std::pair<int, int>> options;
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int a = i + di[k], b = j + dj[k];
      if (a >= 0 && b >= 0 && a < nx && b < nz && !seen[at(a, b)]) options.emplace_back(a, b);
    }
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    const auto [a, b] = options[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(options.size()) - 1))];
    if (a != i) {
      east[at(std::min(a, i), j)] = 1;
    } else {
      south[at(i, std::min(b, j))] = 1;
    }
    seen[at(a, b)] = 1;
    stack.emplace_back(a, b);
  }
  // Braiding adds loops so that shortest paths are not unique corridors.
  for (int j = 0; j < nz; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i + 1 < nx && !east[at(i, j)] && rng.uniform(0.0, 1.0) < p.braid) east[at(i, j)] = 1;
      if (j + 1 < nz && !south[at(i, j)] && rng.uniform(0.0, 1.0) < p.braid) south[at(i, j)] = 1;
    }
  }
  for (int j = 0; j < nz; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c0 = ww + i * pitch, r0 = ww + j * pitch;
      clear(r0, r0 + cw, c0, c0 + cw);
      if (east[at(i, j)]) clear(r0, r0 + cw, c0 + cw, c0 + pitch);
      if (south[at(i, j)]) clear(r0 + cw, r0 + pitch, c0, c0 + cw);
    }
  }
  SyntheticScene scene(rows, cols, cs, std::move(walls));

  // Farthest corridor cell (breadth-first hops) holds the goal.
  std::vector<int> hops(east.size(), -1);
  std::queue<std::pair<int, int>> q;
  q.emplace(0, 0);
  hops[at(0, 0)] = 0;
  std::pair<int, int> far{0, 0};
  while (!q.empty()) {
    const auto [i, j] = q.front();
    q.pop();
    if (hops[at(i, j)] > hops[at(far.first, far.second)]) far = {i, j};
    auto visit = [&](int a, int b) {
      if (hops[at(a, b)] < 0) {
        hops[at(a, b)] = hops[at(i, j)] + 1;
        q.emplace(a, b);
      }
    };
    if (i + 1 < nx && east[at(i, j)]) visit(i + 1, j);
    if (i > 0 && east[at(i - 1, j)]) visit(i - 1, j);
    if (j + 1 < nz && south[at(i, j)]) visit(i, j + 1);
    if (j > 0 && south[at(i, j - 1)]) visit(i, j - 1);
  }
  const auto& vocab = synthetic_vocabulary();
  const std::string label = vocab[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(vocab.size()) - 1))];
  const double half = 2 * cs;
  const double gx = (ww + far.first * pitch + cw / 2.0) * cs, gz = (ww + far.second * pitch + cw / 2.0) * cs;
  const double h = std::round(rng.uniform(0.95, 1.3) * 100.0) / 100.0;
  scene.add_object({label, Vec3(gx - half, 0.0, gz - half), Vec3(gx + half, h, gz + half)});
  scene.goal_labels.push_back(label);
  const double s0 = (ww + cw / 2.0) * cs;
  scene.starts.push_back({s0, s0, std::round(rng.uniform(0.0, 360.0))});
  return scene;
}

std::vector<AgentState> survey_loop(const SyntheticScene& scene, std::size_t frames, double radius_fraction) {
  require(frames > 0, "survey_loop: frames must be positive");
  const double width = scene.cols() * scene.cell_size(), depth = scene.rows() * scene.cell_size();
  const double r = radius_fraction * std::min(width, depth);
  std::vector<AgentState> out;
  out.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(frames);
    AgentState a;
    a.x = width / 2 + r * std::sin(phi);
    a.z = depth / 2 + r * std::cos(phi);
    double h = std::fmod(phi * 180.0 / std::numbers::pi + 20.0 * std::sin(3.0 * phi) + 360.0, 360.0);
    a.heading_deg = h;
    out.push_back(a);
  }
  return out;
}

namespace {

std::array<std::uint8_t, 3> label_color(const SyntheticScene& scene, int label) {
  if (label == kLabelWall) return {200, 190, 170};
  if (label == kLabelFloor) return {120, 110, 100};
  if (label == kLabelNone) return {0, 0, 0};
  const std::size_t v = vocab_index(scene.objects()[static_cast<std::size_t>(label)].label);
  // Spread hues over the vocabulary.
  return {static_cast<std::uint8_t>(40 + (v * 97) % 200), static_cast<std::uint8_t>(40 + (v * 53) % 200),
          static_cast<std::uint8_t>(40 + (v * 151) % 200)};
}

}  // namespace

SyntheticFrame capture(const SyntheticScene& scene, const AgentState& agent, const CameraIntrinsics& intr,
                       std::int64_t id) {
  RenderResult rr = render(scene, agent, intr);
  SyntheticFrame f;
  Keyframe& kf = f.keyframe;
  kf.id = id;
  kf.intrinsics = intr;
  kf.pose = agent_camera_pose(agent, scene.camera_height);
  kf.depth = std::move(rr.depth);
  const double q = kf.depth.quantization;
  for (auto& d : kf.depth.values) d = static_cast<float>(std::round(d / q) * q);
  Image8 rgb{intr.width, intr.height, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(intr.width) * intr.height * 3)};
  for (std::size_t i = 0; i < rr.labels.size(); ++i) {
    const auto col = label_color(scene, rr.labels[i]);
    const double shade = 1.0 - std::min<double>(kf.depth.values[i], kMaxRenderDepth) / 40.0;
    for (int c = 0; c < 3; ++c) rgb.data[i * 3 + c] = static_cast<std::uint8_t>(std::lround(col[c] * shade));
  }
  kf.rgb = std::move(rgb);
  f.labels = std::move(rr.labels);
  return f;
}

SyntheticFrame downsample_frame(const SyntheticFrame& frame, int factor) {
  SyntheticFrame out;
  out.keyframe = downsample(frame.keyframe, factor);
  const int w = out.keyframe.intrinsics.width, h = out.keyframe.intrinsics.height;
  const int src_w = frame.keyframe.intrinsics.width;
  out.labels.resize(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      out.labels[static_cast<std::size_t>(v) * w + u] =
          frame.labels[static_cast<std::size_t>(v * factor) * src_w + static_cast<std::size_t>(u * factor)];
    }
  }
  return out;
}

std::vector<float> frame_embedding(const SyntheticFrame& frame, const SyntheticScene& scene) {
  const std::size_t v = synthetic_vocabulary().size();
  std::vector<float> e(synthetic_embedding_dim(), 0.0f);
  for (int l : frame.labels) {
    if (l >= 0) {
      e[vocab_index(scene.objects()[static_cast<std::size_t>(l)].label)] += 1.0f;
    } else {
      e[v + static_cast<std::size_t>(-l - 1)] += 1.0f;  // wall, floor, void
    }
  }
  return e;
}

std::vector<float> label_embedding(const std::string& label) {
  std::vector<float> e(synthetic_embedding_dim(), 0.0f);
  e[vocab_index(label)] = 1.0f;
  return e;
}

namespace {

std::vector<std::string> object_labels(const SyntheticScene& scene) {
  std::vector<std::string> out;
  for (const auto& o : scene.objects()) out.push_back(o.label);
  return out;
}

std::map<std::int64_t, const SyntheticFrame*> by_id(std::span<const SyntheticFrame> frames) {
  std::map<std::int64_t, const SyntheticFrame*> m;
  for (const auto& f : frames) m[f.keyframe.id] = &f;
  return m;
}

std::size_t label_pixels(const std::vector<std::string>& object_labels, const std::vector<int>& labels,
                         std::string_view label) {
  std::size_t n = 0;
  for (int l : labels) {
    if (l >= 0 && object_labels[static_cast<std::size_t>(l)] == label) ++n;
  }
  return n;
}

}  // namespace

LabelSegmenter::LabelSegmenter(const SyntheticScene& scene, std::span<const SyntheticFrame> frames)
    : object_labels_(object_labels(scene)), frames_(by_id(frames)) {}

std::vector<Mask> LabelSegmenter::segment(const Keyframe& frame, std::string_view prompt) {
  ++calls_;
  const auto it = frames_.find(frame.id);
  if (it == frames_.end()) return {};
  const SyntheticFrame& f = *it->second;
  const int w = frame.depth.width, h = frame.depth.height;
  if (f.labels.size() != static_cast<std::size_t>(w) * h) {
    throw ProviderError("label image size mismatch for frame " + std::to_string(frame.id));
  }
  std::vector<Mask> out;
  for (std::size_t o = 0; o < object_labels_.size(); ++o) {
    if (object_labels_[o] != prompt) continue;
    Mask m(w, h, 0.0);
    for (std::size_t i = 0; i < f.labels.size(); ++i) m.bits[i] = f.labels[i] == static_cast<int>(o) ? 1 : 0;
    const std::size_t n = m.count();
    if (n == 0) continue;
    m.confidence = static_cast<double>(n) / static_cast<double>(f.labels.size());
    out.push_back(std::move(m));
  }
  return out;
}

std::string label_rerank_answer(const SyntheticScene& scene, const SyntheticFrame& frame, const std::string& label) {
  const std::size_t n = label_pixels(object_labels(scene), frame.labels, label);
  if (n == 0) return "no 0";
  const double frac = static_cast<double>(n) / static_cast<double>(frame.labels.size());
  return "yes " + std::to_string(std::min(10, static_cast<int>(std::ceil(100.0 * frac))));
}

LabelReranker::LabelReranker(const SyntheticScene& scene, std::span<const SyntheticFrame> frames)
    : object_labels_(object_labels(scene)), frames_(by_id(frames)) {}

std::string LabelReranker::ask(const RerankRequest& req) {
  const auto it = frames_.find(req.frame_id);
  if (it == frames_.end()) throw ProviderError("unknown frame " + std::to_string(req.frame_id));
  const std::size_t n = label_pixels(object_labels_, it->second->labels, req.query_text);
  if (n == 0) return "no 0";
  const double frac = static_cast<double>(n) / static_cast<double>(it->second->labels.size());
  return "yes " + std::to_string(std::min(10, static_cast<int>(std::ceil(100.0 * frac))));
}

EmbeddingIndex SyntheticDataset::index(std::size_t jobs) const {
  std::vector<std::int64_t> ids;
  std::vector<float> raw;
  for (const auto& f : frames) {
    ids.push_back(f.keyframe.id);
    const auto e = frame_embedding(f, world);
    raw.insert(raw.end(), e.begin(), e.end());
  }
  return EmbeddingIndex(std::move(ids), synthetic_embedding_dim(), raw, jobs);
}

SceneMemory SyntheticDataset::memory() const {
  std::vector<Keyframe> kfs;
  kfs.reserve(frames.size());
  for (const auto& f : frames) kfs.push_back(f.keyframe);
  return SceneMemory("synthetic", std::move(kfs));
}

std::vector<std::string> SyntheticDataset::labels() const {
  std::vector<std::string> out;
  for (const auto& o : world.objects()) {
    if (std::find(out.begin(), out.end(), o.label) == out.end()) out.push_back(o.label);
  }
  return out;
}

std::vector<Vec3> SyntheticDataset::goals(const std::string& label) const {
  std::vector<Vec3> out;
  for (const auto& o : world.objects()) {
    if (o.label == label) out.push_back(o.box().center());
  }
  return out;
}

SyntheticDataset make_room_dataset(std::uint64_t seed, const DatasetParams& p) {
  SyntheticDataset ds{make_room(seed, p.room), {}};
  const CameraIntrinsics intr = CameraIntrinsics::from_hfov(p.width, p.height, p.hfov_deg);
  const auto poses = survey_loop(ds.world, p.frames);
  ds.frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    ds.frames.push_back(capture(ds.world, poses[i], intr, static_cast<std::int64_t>(i)));
  }
  return ds;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

void write_dataset(const std::string& dir, const SyntheticDataset& ds) {
  const fs::path root(dir);
  fs::create_directories(root / "masks");
  fs::create_directories(root / "queries");
  write_text(root / "world.json", ds.world.to_json().dump(2) + "\n");

  std::vector<Keyframe> kfs;
  for (const auto& f : ds.frames) kfs.push_back(f.keyframe);
  const auto records = write_keyframes(dir, kfs);
  write_manifest((root / "manifest.jsonl").string(), records);

  EmbeddingMatrix emb{static_cast<std::uint32_t>(ds.frames.size()),
                      static_cast<std::uint32_t>(synthetic_embedding_dim()), {}};
  for (const auto& f : ds.frames) {
    const auto v = normalize(frame_embedding(f, ds.world));
    emb.data.insert(emb.data.end(), v.values().begin(), v.values().end());
  }
  write_emb1((root / "embeddings.emb").string(), emb);

  const auto labels = ds.labels();
  std::string masks_jsonl, rerank_jsonl;
  for (const auto& f : ds.frames) {
    const int w = f.keyframe.intrinsics.width, h = f.keyframe.intrinsics.height;
    for (std::size_t o = 0; o < ds.world.objects().size(); ++o) {
      Image8 img{w, h, 1, std::vector<std::uint8_t>(f.labels.size(), 0)};
      std::size_t n = 0;
      for (std::size_t i = 0; i < f.labels.size(); ++i) {
        if (f.labels[i] == static_cast<int>(o)) {
          img.data[i] = 255;
          ++n;
        }
      }
      if (n == 0) continue;
      char name[64];
      std::snprintf(name, sizeof(name), "%06lld_%02zu.png", static_cast<long long>(f.keyframe.id), o);
      write_png((root / "masks" / name).string(), img);
      masks_jsonl += json{{"image_id", image_id(f.keyframe.id)},
                          {"prompt", ds.world.objects()[o].label},
                          {"mask", name},
                          {"confidence", static_cast<double>(n) / static_cast<double>(f.labels.size())}}
                         .dump() +
                     "\n";
    }
    for (const auto& label : labels) {
      rerank_jsonl += json{{"image_id", image_id(f.keyframe.id)},
                           {"query", label},
                           {"raw", label_rerank_answer(ds.world, f, label)}}
                          .dump() +
                      "\n";
    }
  }
  write_text(root / "masks" / "masks.jsonl", masks_jsonl);
  write_text(root / "rerank.jsonl", rerank_jsonl);

  json episodes = json::array();
  for (const auto& label : labels) {
    const auto e = label_embedding(label);
    write_emb1((root / "queries" / (label + ".emb")).string(),
               EmbeddingMatrix{1, static_cast<std::uint32_t>(e.size()), e});
    json goals = json::array();
    for (const auto& g : ds.goals(label)) goals.push_back({g.x(), g.y(), g.z()});
    episodes.push_back({{"query", label}, {"goals", goals}});
  }
  write_text(root / "gt.json", json{{"episodes", episodes}}.dump(2) + "\n");
}

GoalCandidate box_candidate(const SceneObject& obj, double spacing) {
  require(spacing > 0, "box_candidate: spacing must be positive");
  const Vec3 lo = obj.min_corner, hi = obj.max_corner;
  auto steps = [spacing](double extent) { return std::max(1, static_cast<int>(std::ceil(extent / spacing))); };
  const int nx = steps(hi.x() - lo.x()), ny = steps(hi.y() - lo.y()), nz = steps(hi.z() - lo.z());
  auto lerp = [](double a, double b, int i, int n) { return a + (b - a) * i / n; };
  GoalCandidate g;
  PointCloud& pts = g.fused_cloud;
  for (int i = 0; i <= nx; ++i) {
    for (int k = 0; k <= nz; ++k) pts.emplace_back(lerp(lo.x(), hi.x(), i, nx), hi.y(), lerp(lo.z(), hi.z(), k, nz));
  }
  for (int j = 0; j < ny; ++j) {
    const double y = lerp(lo.y(), hi.y(), j, ny);
    for (int i = 0; i <= nx; ++i) {
      pts.emplace_back(lerp(lo.x(), hi.x(), i, nx), y, lo.z());
      pts.emplace_back(lerp(lo.x(), hi.x(), i, nx), y, hi.z());
    }
    for (int k = 1; k < nz; ++k) {
      pts.emplace_back(lo.x(), y, lerp(lo.z(), hi.z(), k, nz));
      pts.emplace_back(hi.x(), y, lerp(lo.z(), hi.z(), k, nz));
    }
  }
  g.center = obj.box().center();
  g.confidence = 1.0;
  return g;
}

}  // namespace memloc
