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

#include "memloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "memloc/errors.hpp"

namespace memloc {

using nlohmann::json;

double d_xz(const Vec3& a, const Vec3& b) { return std::hypot(a.x() - b.x(), a.z() - b.z()); }

void MetricConfig::validate() const {
  if (!(tau > 0) || k < 1 || !(success_radius > 0)) {
    fail(ErrorCode::kConfig, "metric config: tau, k and success_radius must be positive");
  }
}

bool episode_hit(const LocalizationEpisode& ep, double tau, std::size_t k) {
  require(!ep.ground_truth.empty(), "episode '" + ep.query + "' has no ground-truth goals");
  const std::size_t n = std::min(k, ep.predictions.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& g : ep.ground_truth) {
      if (d_xz(ep.predictions[i], g) < tau) return true;
    }
  }
  return false;
}

double sr_at_k(std::span<const LocalizationEpisode> episodes, double tau, std::size_t k) {
  require(!episodes.empty(), "sr_at_k: no episodes");
  require(k >= 1, "sr_at_k: k must be >= 1");
  std::size_t hits = 0;
  for (const auto& ep : episodes) hits += episode_hit(ep, tau, k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(episodes.size());
}

double success_rate(std::span<const EpisodeResult> results) {
  require(!results.empty(), "success_rate: no episodes");
  const auto n = std::count_if(results.begin(), results.end(), [](const EpisodeResult& r) { return r.success; });
  return static_cast<double>(n) / static_cast<double>(results.size());
}

double spl_term(const EpisodeResult& r) {
  if (!r.success) return 0.0;
  if (r.geodesic_optimum <= 0.0) return 1.0;
  return r.geodesic_optimum / std::max(r.path_length, r.geodesic_optimum);
}

double spl(std::span<const EpisodeResult> results) {
  require(!results.empty(), "spl: no episodes");
  double sum = 0.0;
  for (const auto& r : results) sum += spl_term(r);
  return sum / static_cast<double>(results.size());
}

ArResult ar_at_k(std::span<const std::vector<std::int64_t>> ranked, std::span<const std::vector<std::int64_t>> relevant,
                 std::size_t k) {
  require(k >= 1, "ar_at_k: k must be >= 1");
  require(ranked.size() == relevant.size(), "ar_at_k: ranked and relevant lists differ in length");
  ArResult res;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    if (relevant[q].empty()) {
      ++res.excluded;
      continue;
    }
    ++res.evaluated;
    const std::size_t n = std::min(k, ranked[q].size());
    const bool hit = std::any_of(ranked[q].begin(), ranked[q].begin() + static_cast<std::ptrdiff_t>(n), [&](auto id) {
      return std::find(relevant[q].begin(), relevant[q].end(), id) != relevant[q].end();
    });
    hits += hit ? 1 : 0;
  }
  res.value = res.evaluated ? static_cast<double>(hits) / static_cast<double>(res.evaluated) : 0.0;
  return res;
}

double ProfileResult::mean_latency() const {
  if (latencies.empty()) return 0.0;
  return std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
}

json ProfileResult::to_json() const {
  return {{"build_seconds", build_seconds},
          {"store_bytes", store_bytes},
          {"query_count", latencies.size()},
          {"latency_seconds", latencies},
          {"mean_latency_seconds", mean_latency()}};
}

ProfileResult profile(const std::function<std::uint64_t()>& build, const std::function<void(std::size_t)>& query,
                      std::size_t query_count) {
  using clock = std::chrono::steady_clock;
  ProfileResult res;
  const auto t0 = clock::now();
  res.store_bytes = build();
  res.build_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  for (std::size_t i = 0; i < query_count; ++i) {
    const auto q0 = clock::now();
    query(i);
    res.latencies.push_back(std::chrono::duration<double>(clock::now() - q0).count());
  }
  return res;
}

namespace {

Vec3 vec3_of(const json& j) {
  const auto a = j.get<std::array<double, 3>>();
  return {a[0], a[1], a[2]};
}

}  // namespace

std::vector<LocalizationEpisode> episodes_from_reports(const json& reports, const json& ground_truth) {
  try {
    std::vector<const json*> list;
    if (reports.is_array()) {
      for (const auto& r : reports) list.push_back(&r);
    } else if (reports.contains("reports")) {
      for (const auto& r : reports.at("reports")) list.push_back(&r);
    } else {
      list.push_back(&reports);
    }
    std::vector<LocalizationEpisode> out;
    for (const auto& ep : ground_truth.at("episodes")) {
      LocalizationEpisode e;
      e.query = ep.at("query").get<std::string>();
      for (const auto& g : ep.at("goals")) e.ground_truth.push_back(vec3_of(g));
      if (e.ground_truth.empty()) fail(ErrorCode::kInvalidArgument, "episode '" + e.query + "' has no goals");
      for (const json* r : list) {
        if (r->at("query").get<std::string>() != e.query) continue;
        for (const auto& c : r->at("candidates")) e.predictions.push_back(vec3_of(c.at("center")));
        break;
      }
      out.push_back(std::move(e));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed report or ground truth: ") + e.what());
  }
}

json metric_report(std::span<const LocalizationEpisode> loc, std::span<const EpisodeResult> nav,
                   const MetricConfig& cfg) {
  cfg.validate();
  json out;
  out["config"] = {{"tau", cfg.tau}, {"k", cfg.k}, {"success_radius", cfg.success_radius}};
  const std::string key = "sr_at_" + std::to_string(cfg.k);
  if (!loc.empty()) {
    json eps = json::array();
    for (const auto& e : loc) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < std::min(cfg.k, e.predictions.size()); ++i) {
        for (const auto& g : e.ground_truth) best = std::min(best, d_xz(e.predictions[i], g));
      }
      eps.push_back({{"query", e.query},
                     {"hit", episode_hit(e, cfg.tau, cfg.k) ? 1 : 0},
                     {"min_distance", std::isfinite(best) ? json(best) : json(nullptr)},
                     {"predictions", e.predictions.size()}});
    }
    out["localization"] = {{"episodes", loc.size()}, {key, sr_at_k(loc, cfg.tau, cfg.k)}, {"per_episode", eps}};
  }
  if (!nav.empty()) {
    json eps = json::array();
    for (const auto& r : nav) {
      json j = r.to_json();
      j["spl_term"] = spl_term(r);
      eps.push_back(std::move(j));
    }
    out["navigation"] = {{"episodes", nav.size()}, {"sr", success_rate(nav)}, {"spl", spl(nav)}, {"per_episode", eps}};
  }
  return out;
}

std::string metric_csv(const json& report) {
  const std::size_t k = report.at("config").at("k").get<std::size_t>();
  const std::string key = "sr_at_" + std::to_string(k);
  std::ostringstream os;
  os.precision(17);
  os << "episodes,SR@" << k << ",nav_episodes,SR,SPL\n";
  if (report.contains("localization")) {
    const auto& l = report.at("localization");
    os << l.at("episodes").get<std::size_t>() << ',' << l.at(key).get<double>();
  } else {
    os << "0,";
  }
  os << ',';
  if (report.contains("navigation")) {
    const auto& n = report.at("navigation");
    os << n.at("episodes").get<std::size_t>() << ',' << n.at("sr").get<double>() << ',' << n.at("spl").get<double>();
  } else {
    os << "0,,";
  }
  os << '\n';
  return os.str();
}

}  // namespace memloc
