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

// memloc command-line tool. Every subcommand is a thin binding over the C
// API; the process exit code is the memloc_status of the failing call.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "memloc/memloc.h"

namespace {

constexpr int kUsageExit = 4;  // bad flags count as configuration errors

struct Owned {
  char* s = nullptr;
  ~Owned() { memloc_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

class Failure {
 public:
  explicit Failure(memloc_status st) : status(st) {}
  memloc_status status;
};

void check(memloc_status st) {
  if (st != MEMLOC_OK) throw Failure(st);
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::fprintf(stderr, "memloc: cannot write '%s'\n", path.c_str());
    throw Failure(MEMLOC_ERR_IO);
  }
  out << text << "\n";
}

template <typename T>
std::string to_text(const T& v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Resolved run configuration: defaults, then --config, then flags.
struct ConfigBuilder {
  std::string file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;

  template <typename T>
  void flag(const std::string& key, const std::optional<T>& v) {
    if (v) flags.emplace_back(key, to_text(*v));
  }

  memloc_config* build() const {
    memloc_config* cfg = nullptr;
    check(memloc_config_create(&cfg));
    try {
      if (!file.empty()) check(memloc_config_load(cfg, file.c_str()));
      for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::fprintf(stderr, "memloc: --set expects key=value, got '%s'\n", kv.c_str());
          throw Failure(MEMLOC_ERR_CONFIG);
        }
        check(memloc_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
      }
      for (const auto& [k, v] : flags) check(memloc_config_set(cfg, k.c_str(), v.c_str()));
    } catch (...) {
      memloc_config_destroy(cfg);
      throw;
    }
    return cfg;
  }
};

struct ConfigHandle {
  memloc_config* p;
  ~ConfigHandle() { memloc_config_destroy(p); }
};

std::string defaults_footer() {
  memloc_config* cfg = nullptr;
  Owned json;
  if (memloc_config_create(&cfg) != MEMLOC_OK) return "";
  memloc_config_to_json(cfg, &json.s);
  memloc_config_destroy(cfg);
  std::string out =
      "Configuration keys and defaults (config file lines `key = value`, or --set key=value; flags win):\n";
  const auto defaults = nlohmann::json::parse(json.str());
  for (const auto& [k, v] : defaults.items()) {
    out += "  " + k + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
  }
  out += "\nExit codes: 0 success, 2 not found, 3 I/O, 4 config/usage, 5 provider, 6 invalid input, 1 internal.";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memloc: map-free 3D object localization from posed RGB-D keyframes"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.footer(defaults_footer());

  ConfigBuilder conf;
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  std::string log_level = "warn";
  app.add_option("--config", conf.file, "Run configuration file (key = value lines)");
  app.add_option("--set", conf.sets, "Override one configuration key: key=value (repeatable)");
  app.add_option("--jobs", jobs, "Worker threads used inside modules")->capture_default_str();
  app.add_option("--seed", seed, "Seed for synthetic data generation")->capture_default_str();
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  // build-index
  auto* build = app.add_subcommand("build-index", "Index a scene: manifest + EMB1 embeddings -> index directory");
  std::string b_scene, b_emb, b_out;
  build->add_option("--scene", b_scene, "Scene manifest (JSON lines)")->required();
  build->add_option("--embeddings", b_emb, "EMB1 file, one row per manifest line")->required();
  build->add_option("--out", b_out, "Output index directory")->required();

  // localize
  auto* loc = app.add_subcommand("localize", "Localize a query in an indexed scene");
  std::string l_index, l_text, l_category, l_image, l_label, l_emb, l_out, l_rerank, l_rerank_table, l_seg,
      l_seg_dir, l_mode_s;
  std::size_t l_row = 0;
  std::optional<std::size_t> l_k;
  std::optional<std::string> l_mode;
  std::vector<double> l_agent{0.0, 0.0, 0.0};
  bool l_points = false;
  loc->add_option("--index", l_index, "Index directory from build-index")->required();
  auto* q_text = loc->add_option("--query", l_text, "Free-text query");
  auto* q_cat = loc->add_option("--category", l_category, "Category query");
  auto* q_img = loc->add_option("--query-image", l_image, "Image query (needs --label)");
  q_text->excludes(q_cat)->excludes(q_img);
  q_cat->excludes(q_img);
  loc->add_option("--label", l_label, "Segmentation prompt for an image query");
  loc->add_option("--query-emb", l_emb, "EMB1 file holding the query embedding")->required();
  loc->add_option("--query-row", l_row, "Row of the query embedding file")->capture_default_str();
  loc->add_option("--top-k", l_k, "Stage-1 candidates K (default 10)");
  loc->add_option("--rerank", l_rerank, "Re-rank endpoint base URL (enables re-ranking)");
  loc->add_option("--rerank-table", l_rerank_table, "Re-rank lookup table, JSON lines (enables re-ranking)");
  auto* seg_url = loc->add_option("--seg", l_seg, "Segmentation endpoint base URL");
  auto* seg_dir = loc->add_option("--seg-dir", l_seg_dir, "Mask directory with masks.jsonl");
  seg_url->excludes(seg_dir);
  loc->add_option("--mode", l_mode, "nav (grouped, nearest first) or benchmark (per view) (default nav)")
      ->check(CLI::IsMember({"nav", "benchmark"}));
  loc->add_option("--agent", l_agent, "Agent position x y z")->expected(3)->capture_default_str();
  loc->add_flag("--with-points", l_points, "Include fused clouds in the report (needed by sim-nav)");
  loc->add_option("--out", l_out, "Report path (default stdout)");

  // keyframes
  auto* kf = app.add_subcommand("keyframes", "Keyframe selection and downsampling of a recorded trajectory");
  std::string k_scene, k_emb, k_out;
  std::optional<double> k_rot, k_trans;
  std::optional<int> k_down;
  kf->add_option("--scene", k_scene, "Trajectory manifest")->required();
  kf->add_option("--embeddings", k_emb, "Per-frame EMB1 file to subset alongside");
  kf->add_option("--out", k_out, "Output directory")->required();
  kf->add_option("--theta-rot", k_rot, "Rotation threshold, degrees (default 15)");
  kf->add_option("--theta-trans", k_trans, "Translation threshold, meters (default 0.25)");
  kf->add_option("--downsample", k_down, "Resolution reduction factor (default 1)");

  // sim-nav
  auto* sim = app.add_subcommand("sim-nav", "Simulate navigation to localized goals in a synthetic scene");
  std::string s_scene, s_report, s_trace, s_out;
  std::size_t s_start = 0;
  std::optional<int> s_max_steps;
  std::optional<double> s_radius;
  sim->add_option("--scene-file", s_scene, "Synthetic scene JSON")->required();
  sim->add_option("--report", s_report, "Localization report with points (default: scene goal objects)");
  sim->add_option("--trace", s_trace, "Episode trace output, JSON lines");
  sim->add_option("--start", s_start, "Start state index")->capture_default_str();
  sim->add_option("--max-steps", s_max_steps, "Step budget (default 500)");
  sim->add_option("--success-radius", s_radius, "Stop distance counted as success, meters (default 0.25)");
  sim->add_option("--out", s_out, "Result path (default stdout)");

  // eval
  auto* ev = app.add_subcommand("eval", "SR@K from localization reports, SR/SPL from episode results");
  std::string e_pred, e_gt, e_nav, e_out, e_csv;
  std::optional<double> e_tau;
  std::optional<std::size_t> e_k;
  ev->add_option("--pred", e_pred, "Localization report(s): JSON, JSON array or JSON lines");
  ev->add_option("--gt", e_gt, "Ground truth {\"episodes\": [{\"query\", \"goals\"}]}");
  ev->add_option("--nav", e_nav, "Episode results from sim-nav, JSON lines");
  ev->add_option("--tau", e_tau, "SR@K distance threshold, meters (default 1.5)");
  ev->add_option("--k", e_k, "SR@K cutoff (default 5)");
  ev->add_option("--out", e_out, "Metric report path (default stdout)");
  ev->add_option("--csv", e_csv, "CSV export path");

  // profile
  auto* prof = app.add_subcommand("profile", "Build time, storage and per-query latency");
  std::string p_scene, p_emb, p_work, p_out, p_seg, p_seg_dir;
  std::vector<std::string> p_queries;
  prof->add_option("--scene", p_scene, "Scene manifest")->required();
  prof->add_option("--embeddings", p_emb, "EMB1 embeddings")->required();
  prof->add_option("--queries", p_queries, "Query embedding files (EMB1, first row)");
  prof->add_option("--work", p_work, "Scratch index directory")->required();
  prof->add_option("--seg", p_seg, "Segmentation endpoint base URL");
  prof->add_option("--seg-dir", p_seg_dir, "Mask directory with masks.jsonl");
  prof->add_option("--out", p_out, "Profile path (default stdout)");

  // synth
  auto* syn = app.add_subcommand("synth", "Write a synthetic room dataset or maze scene");
  std::string y_kind = "room", y_out;
  std::size_t y_frames = 36;
  int y_width = 64, y_height = 48, y_down = 1;
  bool y_keyframes = false;
  syn->add_option("--kind", y_kind, "room or maze")->check(CLI::IsMember({"room", "maze"}))->capture_default_str();
  syn->add_option("--frames", y_frames, "Recorded frames")->capture_default_str();
  syn->add_option("--width", y_width, "Image width")->capture_default_str();
  syn->add_option("--height", y_height, "Image height")->capture_default_str();
  syn->add_flag("--keyframes", y_keyframes, "Apply keyframe selection before writing");
  syn->add_option("--downsample", y_down, "Resolution reduction factor")->capture_default_str();
  syn->add_option("--out", y_out, "Output directory")->required();

  // validate-emb
  auto* val = app.add_subcommand("validate-emb", "Check EMB1 files");
  std::vector<std::string> v_files;
  val->add_option("files", v_files, "EMB1 files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    check(memloc_set_log_level(log_level.c_str()));

    if (*build) {
      Owned stats;
      check(memloc_build_index(b_scene.c_str(), b_emb.c_str(), b_out.c_str(), jobs, &stats.s));
      emit("", stats.str());
    } else if (*loc) {
      conf.flag("k", l_k);
      conf.flag("mode", l_mode);
      if (!l_rerank.empty()) conf.flags.emplace_back("rerank_url", l_rerank);
      if (!l_rerank_table.empty()) conf.flags.emplace_back("rerank_table", l_rerank_table);
      if (!l_rerank.empty() || !l_rerank_table.empty()) conf.flags.emplace_back("rerank", "true");
      if (!l_seg.empty()) conf.flags.emplace_back("seg_url", l_seg);
      if (!l_seg_dir.empty()) conf.flags.emplace_back("seg_dir", l_seg_dir);
      ConfigHandle cfg{conf.build()};
      memloc_query q{};
      if (!l_image.empty()) {
        q.kind = MEMLOC_QUERY_IMAGE;
        q.image_path = l_image.c_str();
        q.label = l_label.c_str();
      } else if (!l_category.empty()) {
        q.kind = MEMLOC_QUERY_CATEGORY;
        q.text = l_category.c_str();
      } else {
        if (l_text.empty()) {
          std::fprintf(stderr, "memloc: one of --query, --category or --query-image is required\n");
          return kUsageExit;
        }
        q.kind = MEMLOC_QUERY_TEXT;
        q.text = l_text.c_str();
      }
      q.embedding_path = l_emb.c_str();
      q.embedding_row = l_row;
      for (int i = 0; i < 3; ++i) q.agent[i] = l_agent[static_cast<std::size_t>(i)];
      q.include_points = l_points ? 1 : 0;
      memloc_index* index = nullptr;
      check(memloc_index_open(l_index.c_str(), jobs, &index));
      Owned report;
      const memloc_status st = memloc_localize(index, cfg.p, &q, jobs, &report.s);
      memloc_index_close(index);
      check(st);
      emit(l_out, report.str());
    } else if (*kf) {
      conf.flag("theta_rot_deg", k_rot);
      conf.flag("theta_trans_m", k_trans);
      conf.flag("downsample", k_down);
      ConfigHandle cfg{conf.build()};
      Owned out;
      check(memloc_reduce_trajectory(cfg.p, k_scene.c_str(), or_null(k_emb), k_out.c_str(), &out.s));
      emit("", out.str());
    } else if (*sim) {
      conf.flag("max_steps", s_max_steps);
      conf.flag("success_radius", s_radius);
      ConfigHandle cfg{conf.build()};
      Owned out;
      check(memloc_sim_nav(cfg.p, s_scene.c_str(), or_null(s_report), or_null(s_trace), s_start, &out.s));
      emit(s_out, out.str());
    } else if (*ev) {
      conf.flag("tau", e_tau);
      conf.flag("sr_k", e_k);
      ConfigHandle cfg{conf.build()};
      Owned json, csv;
      check(memloc_eval(cfg.p, or_null(e_pred), or_null(e_gt), or_null(e_nav), &json.s, &csv.s));
      emit(e_out, json.str());
      if (!e_csv.empty()) {
        std::string text = csv.str();
        if (!text.empty() && text.back() == '\n') text.pop_back();
        emit(e_csv, text);
      }
    } else if (*prof) {
      if (!p_seg.empty()) conf.flags.emplace_back("seg_url", p_seg);
      if (!p_seg_dir.empty()) conf.flags.emplace_back("seg_dir", p_seg_dir);
      ConfigHandle cfg{conf.build()};
      std::vector<const char*> qs;
      for (const auto& q : p_queries) qs.push_back(q.c_str());
      Owned out;
      check(memloc_profile(cfg.p, p_scene.c_str(), p_emb.c_str(), qs.data(), qs.size(), p_work.c_str(), jobs, &out.s));
      emit(p_out, out.str());
    } else if (*syn) {
      ConfigHandle cfg{conf.build()};
      Owned out;
      check(memloc_synth(cfg.p, y_kind.c_str(), seed, y_frames, y_width, y_height, y_keyframes ? 1 : 0, y_down,
                         y_out.c_str(), &out.s));
      emit("", out.str());
    } else if (*val) {
      int bad = 0;
      for (const auto& f : v_files) {
        Owned problem;
        check(memloc_emb1_validate(f.c_str(), &problem.s));
        if (problem.s) {
          std::printf("%s: INVALID: %s\n", f.c_str(), problem.s);
          ++bad;
        } else {
          std::printf("%s: ok\n", f.c_str());
        }
      }
      return bad ? MEMLOC_ERR_INVALID_ARGUMENT : 0;
    }
  } catch (const Failure& f) {
    const char* msg = memloc_last_error();
    if (msg && *msg) std::fprintf(stderr, "memloc: %s\n", msg);
    return static_cast<int>(f.status);
  }
  return 0;
}
