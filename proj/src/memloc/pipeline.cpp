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

#include "memloc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "memloc/errors.hpp"
#include "memloc/log.hpp"
#include "memloc/providers.hpp"
#include "memloc/synth.hpp"

namespace memloc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, "malformed JSON in '" + path + "': " + e.what());
  }
}

namespace {

// A whole-file JSON document, or JSON lines collected into an array.
json read_json_or_lines(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception&) {
  }
  json arr = json::array();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      arr.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidArgument, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return arr;
}

std::uint64_t file_bytes(const fs::path& p) {
  std::error_code ec;
  const auto n = fs::file_size(p, ec);
  if (ec) fail(ErrorCode::kIo, "cannot stat '" + p.string() + "'");
  return n;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

json build_index(const std::string& manifest, const std::string& embeddings, const std::string& out_dir,
                 std::size_t jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = read_manifest(manifest);
  const EmbeddingMatrix emb = read_emb1(embeddings);
  if (emb.count != records.size()) {
    fail(ErrorCode::kInvalidArgument, "embedding rows (" + std::to_string(emb.count) + ") do not match manifest frames (" +
                                          std::to_string(records.size()) + ")");
  }
  const SceneMemory mem = load_scene(manifest, false);
  std::vector<std::int64_t> ids;
  for (const auto& kf : mem.keyframes()) ids.push_back(kf.id);
  const EmbeddingIndex index(ids, emb.dim, emb.data, jobs);

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_emb1((out / "index.emb").string(), EmbeddingMatrix{emb.count, emb.dim, index.data()});
  write_id_sidecar((out / "index.ids").string(), ids);
  std::vector<ManifestRecord> abs = records;
  for (std::size_t i = 0; i < abs.size(); ++i) {
    abs[i].rgb = fs::absolute(mem.keyframes()[i].rgb_ref).lexically_normal().string();
    abs[i].depth = fs::absolute(mem.keyframes()[i].depth_ref).lexically_normal().string();
  }
  write_manifest((out / "scene.jsonl").string(), abs);

  const StorageStats storage = storage_stats(mem);
  const std::uint64_t index_bytes = file_bytes(out / "index.emb") + file_bytes(out / "index.ids");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json stats = {{"N", emb.count},
                {"d", emb.dim},
                {"build_seconds", seconds},
                {"keyframe_bytes", storage.total_bytes},
                {"index_bytes", index_bytes},
                {"total_bytes", storage.total_bytes + index_bytes}};
  write_file((out / "stats.json").string(), stats.dump(2) + "\n");
  logger().info("indexed {} keyframes (d={}) in {:.3f} s", emb.count, emb.dim, seconds);
  return stats;
}

OpenIndex OpenIndex::open(const std::string& dir, std::size_t jobs) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "index directory '" + dir + "' does not exist");
  SceneMemory mem = load_scene((root / "scene.jsonl").string(), false);
  const EmbeddingMatrix emb = read_emb1((root / "index.emb").string());
  auto ids = read_id_sidecar((root / "index.ids").string());
  if (ids.size() != emb.count || ids.size() != mem.size()) {
    fail(ErrorCode::kIo, "index '" + dir + "' is inconsistent: " + std::to_string(ids.size()) + " ids, " +
                             std::to_string(emb.count) + " rows, " + std::to_string(mem.size()) + " keyframes");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != mem.keyframes()[i].id) fail(ErrorCode::kIo, "index '" + dir + "': id sidecar does not match scene");
  }
  EmbeddingIndex index(std::move(ids), emb.dim, emb.data, jobs);
  return OpenIndex{dir, std::move(mem), std::move(index)};
}

json OpenIndex::info() const {
  return {{"dir", dir}, {"N", index.size()}, {"d", index.dim()}, {"scene_id", memory.scene_id()}};
}

Query make_query(const QuerySpec& spec) {
  Query q;
  q.kind = spec.kind;
  if (spec.kind == QueryKind::kImage) {
    q.payload = spec.image_path;
    q.label = spec.label;
    if (q.label.empty()) fail(ErrorCode::kInvalidArgument, "image queries need a label for segmentation");
  } else {
    q.payload = spec.text;
  }
  if (spec.embedding_path.empty()) fail(ErrorCode::kInvalidArgument, "query embedding file required");
  const EmbeddingMatrix emb = read_emb1(spec.embedding_path);
  if (spec.embedding_row >= emb.count) {
    fail(ErrorCode::kInvalidArgument, "query embedding row " + std::to_string(spec.embedding_row) + " out of range (" +
                                          std::to_string(emb.count) + " rows)");
  }
  q.embedding = normalize(emb.row(spec.embedding_row));
  q.validate();
  return q;
}

ProviderSet::ProviderSet(const RunConfig& cfg) {
  if (!cfg.seg_dir.empty()) {
    seg_ = std::make_unique<MaskDirectorySegmenter>(cfg.seg_dir);
  } else if (!cfg.seg_url.empty()) {
    seg_ = std::make_unique<HttpSegmenter>(cfg.seg_url, cfg.provider_timeout);
  } else {
    fail(ErrorCode::kConfig, "no segmentation provider: set seg_dir or seg_url");
  }
  if (cfg.rerank) {
    if (!cfg.rerank_table.empty()) {
      rerank_ = std::make_unique<LookupTableReranker>(cfg.rerank_table);
    } else if (!cfg.rerank_url.empty()) {
      rerank_ = std::make_unique<HttpReranker>(cfg.rerank_url, cfg.rerank_send_image, cfg.provider_timeout);
    } else {
      fail(ErrorCode::kConfig, "re-ranking enabled without rerank_url or rerank_table");
    }
  }
}

LocalizeOptions localize_options(const RunConfig& cfg, const Vec3& agent, std::size_t jobs) {
  LocalizeOptions o;
  o.retrieval = cfg.retrieval;
  o.fusion = cfg.fusion;
  o.rerank_enabled = cfg.rerank;
  o.mode = cfg.mode == "benchmark" ? LocalizeMode::kBenchmark : LocalizeMode::kNavigation;
  o.agent_position = agent;
  o.jobs = std::max<std::size_t>(1, jobs);
  return o;
}

json localization_report(const QuerySpec& spec, const std::vector<GoalCandidate>& cands, const RunConfig& cfg) {
  static constexpr const char* kKinds[] = {"text", "category", "image"};
  json list = json::array();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& c = cands[i];
    json members = json::array();
    for (const auto& m : c.member_predictions) members.push_back(m.frame_id);
    json entry = {{"rank", i + 1},
                  {"center", vec_json(c.center)},
                  {"num_points", c.fused_cloud.size()},
                  {"member_frames", members},
                  {"confidence", c.confidence},
                  {"distance_to_agent", c.distance_to_agent}};
    if (spec.include_points) {
      json pts = json::array();
      for (const auto& p : c.fused_cloud) pts.push_back(vec_json(p));
      entry["points"] = std::move(pts);
    }
    list.push_back(std::move(entry));
  }
  return {{"query", spec.kind == QueryKind::kImage ? spec.label : spec.text},
          {"query_kind", kKinds[static_cast<int>(spec.kind)]},
          {"mode", cfg.mode},
          {"agent", vec_json(spec.agent)},
          {"candidates", list},
          {"config", cfg.to_json()}};
}

json localize_query(const OpenIndex& idx, const RunConfig& cfg, const QuerySpec& spec, std::size_t jobs) {
  cfg.validate();
  const Query q = make_query(spec);
  const ProviderSet providers(cfg);
  const auto cands = localize(q, idx.memory, idx.index, providers.view(), localize_options(cfg, spec.agent, jobs));
  return localization_report(spec, cands, cfg);
}

json reduce_trajectory(const RunConfig& cfg, const std::string& manifest, const std::string& embeddings,
                       const std::string& out_dir) {
  cfg.validate();
  const SceneMemory mem = load_scene(manifest, true);
  std::vector<Pose> poses;
  for (const auto& kf : mem.keyframes()) poses.push_back(kf.pose);
  const auto selected = select_keyframes(poses, cfg.keyframes);
  std::vector<Keyframe> kept;
  for (std::size_t i : selected) kept.push_back(downsample(mem.keyframes()[i], cfg.downsample));

  const fs::path out(out_dir);
  fs::create_directories(out);
  write_manifest((out / "manifest.jsonl").string(), write_keyframes(out_dir, kept));
  if (!embeddings.empty()) {
    const EmbeddingMatrix emb = read_emb1(embeddings);
    if (emb.count != mem.size()) {
      fail(ErrorCode::kInvalidArgument, "embedding rows (" + std::to_string(emb.count) +
                                            ") do not match manifest frames (" + std::to_string(mem.size()) + ")");
    }
    EmbeddingMatrix sub{static_cast<std::uint32_t>(selected.size()), emb.dim, {}};
    for (std::size_t i : selected) sub.data.insert(sub.data.end(), emb.row(i).begin(), emb.row(i).end());
    write_emb1((out / "embeddings.emb").string(), sub);
  }
  const auto before = storage_stats(mem);
  const auto after = storage_stats(load_scene((out / "manifest.jsonl").string(), false));
  return {{"input_frames", mem.size()},
          {"keyframes", selected.size()},
          {"downsample", cfg.downsample},
          {"bytes_before", before.total_bytes},
          {"bytes_after", after.total_bytes},
          {"reduction", static_cast<double>(before.total_bytes) / static_cast<double>(after.total_bytes)}};
}

std::vector<GoalCandidate> candidates_from_report(const json& report) {
  std::vector<GoalCandidate> out;
  try {
    for (const auto& c : report.at("candidates")) {
      if (!c.contains("points")) {
        fail(ErrorCode::kInvalidArgument, "report candidates carry no points; localize with points enabled");
      }
      GoalCandidate g;
      for (const auto& p : c.at("points")) {
        const auto a = p.get<std::array<double, 3>>();
        g.fused_cloud.emplace_back(a[0], a[1], a[2]);
      }
      const auto ctr = c.at("center").get<std::array<double, 3>>();
      g.center = Vec3(ctr[0], ctr[1], ctr[2]);
      g.confidence = c.value("confidence", 0.0);
      if (!g.fused_cloud.empty()) out.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed localization report: ") + e.what());
  }
  if (out.empty()) fail(ErrorCode::kNotFound, "report holds no goal candidates");
  return out;
}

json simulate(const RunConfig& cfg, const std::string& scene_file, const std::string& report_path,
              const std::string& trace_path, std::size_t start_index) {
  cfg.validate();
  SyntheticScene scene = SyntheticScene::load(scene_file);
  if (scene.starts.empty()) fail(ErrorCode::kInvalidArgument, "scene file has no start states");
  if (start_index >= scene.starts.size()) {
    fail(ErrorCode::kInvalidArgument, "start index " + std::to_string(start_index) + " out of range");
  }
  const StartState start = scene.starts[start_index];

  std::vector<GoalCandidate> goals;
  if (!report_path.empty()) {
    const json report = read_json_file(report_path);
    goals = candidates_from_report(report);
    // Success is judged against the queried label when the scene has it.
    const std::string label = report.value("query", "");
    const auto& objs = scene.objects();
    if (std::any_of(objs.begin(), objs.end(), [&](const SceneObject& o) { return o.label == label; })) {
      scene.goal_labels = {label};
    }
  } else {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < scene.objects().size(); ++i) {
      const auto& o = scene.objects()[i];
      if (std::find(scene.goal_labels.begin(), scene.goal_labels.end(), o.label) == scene.goal_labels.end()) continue;
      order.emplace_back(std::hypot(o.box().center().x() - start.x, o.box().center().z() - start.z), i);
    }
    std::stable_sort(order.begin(), order.end());
    for (const auto& [d, i] : order) goals.push_back(box_candidate(scene.objects()[i]));
    if (goals.empty()) fail(ErrorCode::kNotFound, "scene has no goal-labelled objects");
  }

  std::vector<TraceRecord> trace;
  const EpisodeResult res = run_episode(scene, start, goals, cfg.sim, trace_path.empty() ? nullptr : &trace);
  if (!trace_path.empty()) {
    std::string lines;
    for (const auto& t : trace) lines += t.to_json().dump() + "\n";
    write_file(trace_path, lines);
  }
  return {{"episode", res.to_json()},
          {"start", {start.x, start.z, start.heading_deg}},
          {"candidates", goals.size()},
          {"goal_labels", scene.goal_labels},
          {"config", cfg.to_json()}};
}

EvalOutput evaluate(const RunConfig& cfg, const std::string& pred, const std::string& gt, const std::string& nav) {
  cfg.validate();
  if (pred.empty() != gt.empty()) fail(ErrorCode::kInvalidArgument, "predictions and ground truth go together");
  if (pred.empty() && nav.empty()) fail(ErrorCode::kInvalidArgument, "nothing to evaluate");
  std::vector<LocalizationEpisode> loc;
  if (!pred.empty()) loc = episodes_from_reports(read_json_or_lines(pred), read_json_file(gt));
  std::vector<EpisodeResult> results;
  if (!nav.empty()) {
    json lines = read_json_or_lines(nav);
    if (!lines.is_array()) lines = json::array({lines});
    for (const auto& j : lines) results.push_back(EpisodeResult::from_json(j.contains("episode") ? j.at("episode") : j));
  }
  EvalOutput out;
  out.report = metric_report(loc, results, cfg.metric);
  out.report["run_config"] = cfg.to_json();
  out.csv = metric_csv(out.report);
  return out;
}

json profile_run(const RunConfig& cfg, const std::string& manifest, const std::string& embeddings,
                 const std::vector<std::string>& query_embeddings, const std::string& work_dir, std::size_t jobs) {
  cfg.validate();
  std::optional<OpenIndex> idx;
  std::size_t not_found = 0;
  const ProfileResult prof = profile(
      [&] {
        const json stats = build_index(manifest, embeddings, work_dir, jobs);
        idx.emplace(OpenIndex::open(work_dir, jobs));
        return stats.at("total_bytes").get<std::uint64_t>();
      },
      [&](std::size_t i) {
        QuerySpec spec;
        spec.text = fs::path(query_embeddings[i]).stem().string();
        spec.embedding_path = query_embeddings[i];
        try {
          localize_query(*idx, cfg, spec, jobs);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNotFound) throw;
          ++not_found;
        }
      },
      query_embeddings.size());
  json out = prof.to_json();
  out["not_found"] = not_found;
  out["config"] = cfg.to_json();
  return out;
}

json synthesize(const SynthOptions& opts, const std::string& out_dir, const RunConfig& cfg) {
  fs::create_directories(out_dir);
  if (opts.kind == "maze") {
    const SyntheticScene maze = make_maze(opts.seed);
    write_file((fs::path(out_dir) / "world.json").string(), maze.to_json().dump(2) + "\n");
    return {{"kind", "maze"}, {"seed", opts.seed}, {"goal_labels", maze.goal_labels}};
  }
  if (opts.kind != "room") fail(ErrorCode::kInvalidArgument, "unknown synthetic world kind '" + opts.kind + "'");
  DatasetParams p;
  p.frames = opts.frames;
  p.width = opts.width;
  p.height = opts.height;
  SyntheticDataset ds = make_room_dataset(opts.seed, p);
  const std::size_t recorded = ds.frames.size();
  if (opts.keyframes || opts.downsample > 1) {
    std::vector<std::size_t> keep(ds.frames.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    if (opts.keyframes) {
      std::vector<Pose> poses;
      for (const auto& f : ds.frames) poses.push_back(f.keyframe.pose);
      keep = select_keyframes(poses, cfg.keyframes);
    }
    std::vector<SyntheticFrame> reduced;
    for (std::size_t i : keep) reduced.push_back(downsample_frame(ds.frames[i], opts.downsample));
    ds.frames = std::move(reduced);
  }
  write_dataset(out_dir, ds);
  return {{"kind", "room"},
          {"seed", opts.seed},
          {"frames", recorded},
          {"keyframes", ds.frames.size()},
          {"downsample", opts.downsample},
          {"labels", ds.labels()}};
}

}  // namespace memloc
