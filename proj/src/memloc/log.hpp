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

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace memloc {

/// Library logger. Writes to stderr so stdout stays free for reports.
inline spdlog::logger& logger() {
  static const auto instance = [] {
    auto existing = spdlog::get("memloc");
    return existing ? existing : spdlog::stderr_color_mt("memloc");
  }();
  return *instance;
}

}  // namespace memloc
