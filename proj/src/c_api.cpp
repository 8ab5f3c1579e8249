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

#include "memloc/memloc.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "memloc/config.hpp"
#include "memloc/errors.hpp"
#include "memloc/pipeline.hpp"

struct memloc_config {
  memloc::RunConfig cfg;
};

struct memloc_index {
  memloc::OpenIndex open;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

std::string str(const char* s) { return s ? s : ""; }

template <typename Fn>
memloc_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MEMLOC_OK;
  } catch (const memloc::Error& e) {
    g_last_error = e.what();
    return static_cast<memloc_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return MEMLOC_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (p == nullptr) memloc::fail(memloc::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

const memloc::RunConfig& config_or_default(const memloc_config* cfg) {
  static const memloc::RunConfig defaults;
  return cfg ? cfg->cfg : defaults;
}

}  // namespace

extern "C" {

const char* memloc_version(void) { return "0.1.0"; }

const char* memloc_last_error(void) { return g_last_error.c_str(); }

void memloc_string_free(char* s) { std::free(s); }

memloc_status memloc_set_log_level(const char* level) {
  return guarded([&] {
    need(level, "level");
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && std::strcmp(level, "off") != 0) {
      memloc::fail(memloc::ErrorCode::kConfig, std::string("unknown log level '") + level + "'");
    }
    spdlog::set_level(lvl);
  });
}

memloc_status memloc_config_create(memloc_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new memloc_config{};
  });
}

void memloc_config_destroy(memloc_config* cfg) { delete cfg; }

memloc_status memloc_config_load(memloc_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "cfg");
    need(path, "path");
    cfg->cfg.load(path);
  });
}

memloc_status memloc_config_set(memloc_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

memloc_status memloc_config_to_json(const memloc_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out_json, "out_json");
    put(out_json, cfg->cfg.to_json().dump(2));
  });
}

memloc_status memloc_config_keys(char** out_keys) {
  return guarded([&] {
    need(out_keys, "out_keys");
    std::string all;
    for (const auto& k : memloc::RunConfig::keys()) all += k + "\n";
    put(out_keys, all);
  });
}

memloc_status memloc_build_index(const char* manifest, const char* embeddings, const char* out_dir, size_t jobs,
                                 char** out_stats_json) {
  return guarded([&] {
    need(manifest, "manifest");
    need(embeddings, "embeddings");
    need(out_dir, "out_dir");
    put(out_stats_json, memloc::build_index(manifest, embeddings, out_dir, jobs).dump(2));
  });
}

memloc_status memloc_index_open(const char* dir, size_t jobs, memloc_index** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = new memloc_index{memloc::OpenIndex::open(dir, jobs)};
  });
}

void memloc_index_close(memloc_index* index) { delete index; }

memloc_status memloc_index_info(const memloc_index* index, char** out_json) {
  return guarded([&] {
    need(index, "index");
    need(out_json, "out_json");
    put(out_json, index->open.info().dump(2));
  });
}

memloc_status memloc_localize(const memloc_index* index, const memloc_config* cfg, const memloc_query* query,
                              size_t jobs, char** out_report_json) {
  return guarded([&] {
    need(index, "index");
    need(query, "query");
    need(out_report_json, "out_report_json");
    memloc::QuerySpec spec;
    switch (query->kind) {
      case MEMLOC_QUERY_TEXT:
        spec.kind = memloc::QueryKind::kText;
        break;
      case MEMLOC_QUERY_CATEGORY:
        spec.kind = memloc::QueryKind::kCategory;
        break;
      case MEMLOC_QUERY_IMAGE:
        spec.kind = memloc::QueryKind::kImage;
        break;
      default:
        memloc::fail(memloc::ErrorCode::kInvalidArgument, "unknown query kind");
    }
    spec.text = str(query->text);
    spec.image_path = str(query->image_path);
    spec.label = str(query->label);
    spec.embedding_path = str(query->embedding_path);
    spec.embedding_row = query->embedding_row;
    spec.agent = memloc::Vec3(query->agent[0], query->agent[1], query->agent[2]);
    spec.include_points = query->include_points != 0;
    put(out_report_json, memloc::localize_query(index->open, config_or_default(cfg), spec, jobs).dump(2));
  });
}

memloc_status memloc_reduce_trajectory(const memloc_config* cfg, const char* manifest, const char* embeddings,
                                       const char* out_dir, char** out_json) {
  return guarded([&] {
    need(manifest, "manifest");
    need(out_dir, "out_dir");
    put(out_json, memloc::reduce_trajectory(config_or_default(cfg), manifest, str(embeddings), out_dir).dump(2));
  });
}

memloc_status memloc_sim_nav(const memloc_config* cfg, const char* scene_file, const char* report_path,
                             const char* trace_path, size_t start_index, char** out_json) {
  return guarded([&] {
    need(scene_file, "scene_file");
    put(out_json,
        memloc::simulate(config_or_default(cfg), scene_file, str(report_path), str(trace_path), start_index).dump(2));
  });
}

memloc_status memloc_eval(const memloc_config* cfg, const char* pred_path, const char* gt_path, const char* nav_path,
                          char** out_json, char** out_csv) {
  return guarded([&] {
    const auto res = memloc::evaluate(config_or_default(cfg), str(pred_path), str(gt_path), str(nav_path));
    put(out_json, res.report.dump(2));
    put(out_csv, res.csv);
  });
}

memloc_status memloc_profile(const memloc_config* cfg, const char* manifest, const char* embeddings,
                             const char* const* query_embeddings, size_t query_count, const char* work_dir,
                             size_t jobs, char** out_json) {
  return guarded([&] {
    need(manifest, "manifest");
    need(embeddings, "embeddings");
    need(work_dir, "work_dir");
    if (query_count > 0) need(query_embeddings, "query_embeddings");
    std::vector<std::string> queries;
    for (size_t i = 0; i < query_count; ++i) queries.push_back(str(query_embeddings[i]));
    put(out_json,
        memloc::profile_run(config_or_default(cfg), manifest, embeddings, queries, work_dir, jobs).dump(2));
  });
}

memloc_status memloc_synth(const memloc_config* cfg, const char* kind, uint64_t seed, size_t frames, int width,
                           int height, int keyframes, int downsample, const char* out_dir, char** out_json) {
  return guarded([&] {
    need(kind, "kind");
    need(out_dir, "out_dir");
    memloc::SynthOptions o;
    o.kind = kind;
    o.seed = seed;
    o.frames = frames;
    o.width = width;
    o.height = height;
    o.keyframes = keyframes != 0;
    o.downsample = downsample;
    put(out_json, memloc::synthesize(o, out_dir, config_or_default(cfg)).dump(2));
  });
}

memloc_status memloc_emb1_validate(const char* path, char** out_problem) {
  return guarded([&] {
    need(path, "path");
    need(out_problem, "out_problem");
    const std::string problem = memloc::validate_emb1(path);
    *out_problem = problem.empty() ? nullptr : dup_string(problem);
  });
}

}  // extern "C"
