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

#include <string>
#include <vector>

#include <json.hpp>

#include "memloc/embedding_index.hpp"
#include "memloc/eval.hpp"
#include "memloc/localization.hpp"
#include "memloc/nav_sim.hpp"
#include "memloc/scene_memory.hpp"

namespace memloc {

/// Every tunable of a run. Loaded from a key = value file, overridden by
/// command-line flags, and embedded in every report.
struct RunConfig {
  KeyframeSelectionConfig keyframes;
  int downsample = 1;
  RetrievalConfig retrieval;
  bool rerank = false;
  std::string mode = "nav";  // nav | benchmark
  FusionConfig fusion;
  SimConfig sim;
  MetricConfig metric;
  std::string rerank_url;
  std::string rerank_table;
  bool rerank_send_image = true;
  std::string seg_url;
  std::string seg_dir;
  double provider_timeout = 30.0;

  /// Throws Error(kConfig) for an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  /// Lines of `key = value`; '#' starts a comment; values may be quoted.
  void load(const std::string& path);
  void validate() const;
  nlohmann::json to_json() const;

  static std::vector<std::string> keys();
};

}  // namespace memloc
