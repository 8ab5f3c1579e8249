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

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memloc/nav_sim.hpp"
#include "memloc/scene_memory.hpp"

namespace memloc {

/// Distance on the xz-plane; height is ignored.
double d_xz(const Vec3& a, const Vec3& b);

struct LocalizationEpisode {
  std::string query;
  std::vector<Vec3> predictions;  // ranked
  std::vector<Vec3> ground_truth;
};

struct MetricConfig {
  double tau = 1.5;
  std::size_t k = 5;
  double success_radius = 0.25;

  void validate() const;
};

/// Any of the first k predictions strictly closer than tau to a goal.
bool episode_hit(const LocalizationEpisode& ep, double tau, std::size_t k);

double sr_at_k(std::span<const LocalizationEpisode> episodes, double tau, std::size_t k);

double success_rate(std::span<const EpisodeResult> results);

/// Per-episode S * l* / max(l, l*); a success with l* = 0 scores 1.
double spl_term(const EpisodeResult& r);
double spl(std::span<const EpisodeResult> results);

struct ArResult {
  double value = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // queries without relevant ids
};

ArResult ar_at_k(std::span<const std::vector<std::int64_t>> ranked, std::span<const std::vector<std::int64_t>> relevant,
                 std::size_t k);

struct ProfileResult {
  double build_seconds = 0.0;
  std::uint64_t store_bytes = 0;
  std::vector<double> latencies;  // seconds per query

  double mean_latency() const;
  nlohmann::json to_json() const;
};

/// Times `build` (which returns the stored byte count) and each query call.
ProfileResult profile(const std::function<std::uint64_t()>& build, const std::function<void(std::size_t)>& query,
                      std::size_t query_count);

/// Pairs localization reports with ground-truth episodes by query string.
/// `reports` is one report object, an array of them, or {"reports": [...]}.
/// Episodes without a report get no predictions.
std::vector<LocalizationEpisode> episodes_from_reports(const nlohmann::json& reports, const nlohmann::json& ground_truth);

/// Metric report: per-episode terms plus aggregates. Either input may be empty.
nlohmann::json metric_report(std::span<const LocalizationEpisode> loc, std::span<const EpisodeResult> nav,
                             const MetricConfig& cfg);

/// One header row and one aggregate row: episodes, SR@k, nav_episodes, SR, SPL.
std::string metric_csv(const nlohmann::json& report);

}  // namespace memloc
