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

#include "memloc/config.hpp"

#include <charconv>
#include <fstream>
#include <variant>

#include "memloc/errors.hpp"

namespace memloc {

using nlohmann::json;

namespace {

using FieldPtr = std::variant<double*, int*, std::size_t*, bool*, std::string*>;

struct Field {
  const char* key;
  FieldPtr ptr;
};

std::vector<Field> fields(RunConfig& c) {
  return {
      {"theta_rot_deg", &c.keyframes.theta_rot_deg},
      {"theta_trans_m", &c.keyframes.theta_trans_m},
      {"downsample", &c.downsample},
      {"k", &c.retrieval.k},
      {"dedup_sim_max", &c.retrieval.dedup_sim_max},
      {"overfetch", &c.retrieval.overfetch},
      {"rerank", &c.rerank},
      {"mode", &c.mode},
      {"max_nearby_views", &c.fusion.max_nearby_views},
      {"nearby_radius", &c.fusion.nearby_radius},
      {"overlap_merge", &c.fusion.overlap_merge},
      {"merge_dist", &c.fusion.merge_dist},
      {"far_view_median", &c.fusion.far_view_median},
      {"min_confirming_views", &c.fusion.min_confirming_views},
      {"largest_cluster_floor", &c.fusion.largest_cluster_floor},
      {"overlap_radius", &c.fusion.overlap_radius},
      {"dbscan_eps", &c.fusion.dbscan_eps},
      {"dbscan_min_pts", &c.fusion.dbscan_min_pts},
      {"voxel_size", &c.fusion.voxel_size},
      {"depth_min", &c.fusion.depth_range.min_m},
      {"depth_max", &c.fusion.depth_range.max_m},
      {"turn_deg", &c.sim.turn_deg},
      {"step_m", &c.sim.step_m},
      {"hfov_deg", &c.sim.hfov_deg},
      {"max_steps", &c.sim.max_steps},
      {"success_radius", &c.sim.success_radius},
      {"stop_visibility_floor", &c.sim.stop_visibility_floor},
      {"stuck_window", &c.sim.stuck_window},
      {"stuck_displacement", &c.sim.stuck_displacement},
      {"visibility_margin", &c.sim.visibility_margin},
      {"clearance", &c.sim.clearance},
      {"approach_standoff", &c.sim.approach_standoff},
      {"image_width", &c.sim.image_width},
      {"image_height", &c.sim.image_height},
      {"tau", &c.metric.tau},
      {"sr_k", &c.metric.k},
      {"rerank_url", &c.rerank_url},
      {"rerank_table", &c.rerank_table},
      {"rerank_send_image", &c.rerank_send_image},
      {"seg_url", &c.seg_url},
      {"seg_dir", &c.seg_dir},
      {"provider_timeout", &c.provider_timeout},
  };
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::kConfig, "config key '" + key + "': '" + value + "' is not " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, expected);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields(*this)) {
    if (key != f.key) continue;
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double>) {
            *p = parse_number<double>(key, value, "a number");
          } else if constexpr (std::is_same_v<T, int>) {
            *p = parse_number<int>(key, value, "an integer");
          } else if constexpr (std::is_same_v<T, std::size_t>) {
            *p = parse_number<std::size_t>(key, value, "a non-negative integer");
          } else if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") {
              *p = true;
            } else if (value == "false" || value == "0") {
              *p = false;
            } else {
              bad_value(key, value, "a boolean");
            }
          } else {
            *p = value;
          }
        },
        f.ptr);
    return;
  }
  fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
}

void RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfig, path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    set(key, value);
  }
}

void RunConfig::validate() const {
  keyframes.validate();
  if (downsample < 1) fail(ErrorCode::kConfig, "downsample must be >= 1");
  if (retrieval.k < 1 || retrieval.overfetch < 1) fail(ErrorCode::kConfig, "k and overfetch must be >= 1");
  if (!(retrieval.dedup_sim_max > -1.0 && retrieval.dedup_sim_max <= 1.0)) {
    fail(ErrorCode::kConfig, "dedup_sim_max must be in (-1, 1]");
  }
  if (mode != "nav" && mode != "benchmark") fail(ErrorCode::kConfig, "mode must be 'nav' or 'benchmark'");
  if (!rerank_url.empty() && !rerank_table.empty()) {
    fail(ErrorCode::kConfig, "rerank_url and rerank_table are mutually exclusive");
  }
  if (!seg_url.empty() && !seg_dir.empty()) fail(ErrorCode::kConfig, "seg_url and seg_dir are mutually exclusive");
  if (!(provider_timeout > 0)) fail(ErrorCode::kConfig, "provider_timeout must be positive");
  fusion.validate();
  sim.validate();
  metric.validate();
}

json RunConfig::to_json() const {
  json out = json::object();
  for (const auto& f : fields(const_cast<RunConfig&>(*this))) {
    std::visit([&](auto* p) { out[f.key] = *p; }, f.ptr);
  }
  return out;
}

std::vector<std::string> RunConfig::keys() {
  RunConfig c;
  std::vector<std::string> out;
  for (const auto& f : fields(c)) out.emplace_back(f.key);
  return out;
}

}  // namespace memloc
