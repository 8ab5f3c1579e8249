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

/* C interface of the memloc engine. Every call returns a memloc_status;
 * on failure memloc_last_error() describes the problem for the calling
 * thread. Strings returned through out-parameters are heap-allocated and
 * must be released with memloc_string_free(). */
#ifndef MEMLOC_MEMLOC_H_
#define MEMLOC_MEMLOC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MEMLOC_API __declspec(dllexport)
#else
#define MEMLOC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as command-line exit codes. */
typedef enum memloc_status {
  MEMLOC_OK = 0,
  MEMLOC_ERR_INTERNAL = 1,
  MEMLOC_ERR_NOT_FOUND = 2,
  MEMLOC_ERR_IO = 3,
  MEMLOC_ERR_CONFIG = 4,
  MEMLOC_ERR_PROVIDER = 5,
  MEMLOC_ERR_INVALID_ARGUMENT = 6
} memloc_status;

typedef struct memloc_config memloc_config;
typedef struct memloc_index memloc_index;

MEMLOC_API const char* memloc_version(void);
MEMLOC_API const char* memloc_last_error(void);
MEMLOC_API void memloc_string_free(char* s);

/* trace, debug, info, warn, error, off */
MEMLOC_API memloc_status memloc_set_log_level(const char* level);

/* Run configuration with every default set. */
MEMLOC_API memloc_status memloc_config_create(memloc_config** out);
MEMLOC_API void memloc_config_destroy(memloc_config* cfg);
/* Applies a key = value file on top of the current values. */
MEMLOC_API memloc_status memloc_config_load(memloc_config* cfg, const char* path);
MEMLOC_API memloc_status memloc_config_set(memloc_config* cfg, const char* key, const char* value);
MEMLOC_API memloc_status memloc_config_to_json(const memloc_config* cfg, char** out_json);
/* Newline-separated list of accepted keys. */
MEMLOC_API memloc_status memloc_config_keys(char** out_keys);

/* Builds an index directory from a manifest and an EMB1 embedding file.
 * out_stats_json may be NULL. */
MEMLOC_API memloc_status memloc_build_index(const char* manifest, const char* embeddings, const char* out_dir,
                                            size_t jobs, char** out_stats_json);

MEMLOC_API memloc_status memloc_index_open(const char* dir, size_t jobs, memloc_index** out);
MEMLOC_API void memloc_index_close(memloc_index* index);
MEMLOC_API memloc_status memloc_index_info(const memloc_index* index, char** out_json);

typedef enum memloc_query_kind {
  MEMLOC_QUERY_TEXT = 0,
  MEMLOC_QUERY_CATEGORY = 1,
  MEMLOC_QUERY_IMAGE = 2
} memloc_query_kind;

typedef struct memloc_query {
  memloc_query_kind kind;
  const char* text;           /* text or category queries */
  const char* image_path;     /* image queries */
  const char* label;          /* segmentation prompt of image queries */
  const char* embedding_path; /* EMB1 file with the query embedding */
  size_t embedding_row;
  double agent[3];            /* agent position, world frame */
  int include_points;         /* nonzero: report carries fused clouds */
} memloc_query;

/* Localization report JSON for one query. */
MEMLOC_API memloc_status memloc_localize(const memloc_index* index, const memloc_config* cfg,
                                         const memloc_query* query, size_t jobs, char** out_report_json);

/* Keyframe selection + downsampling of a recorded trajectory.
 * embeddings may be NULL. */
MEMLOC_API memloc_status memloc_reduce_trajectory(const memloc_config* cfg, const char* manifest,
                                                  const char* embeddings, const char* out_dir, char** out_json);

/* One simulated episode. report_path and trace_path may be NULL. */
MEMLOC_API memloc_status memloc_sim_nav(const memloc_config* cfg, const char* scene_file, const char* report_path,
                                        const char* trace_path, size_t start_index, char** out_json);

/* Metric report; any of pred/gt/nav may be NULL (pred and gt together).
 * out_csv may be NULL. */
MEMLOC_API memloc_status memloc_eval(const memloc_config* cfg, const char* pred_path, const char* gt_path,
                                     const char* nav_path, char** out_json, char** out_csv);

MEMLOC_API memloc_status memloc_profile(const memloc_config* cfg, const char* manifest, const char* embeddings,
                                        const char* const* query_embeddings, size_t query_count,
                                        const char* work_dir, size_t jobs, char** out_json);

/* kind: "room" or "maze". keyframes nonzero applies keyframe selection. */
MEMLOC_API memloc_status memloc_synth(const memloc_config* cfg, const char* kind, uint64_t seed, size_t frames,
                                      int width, int height, int keyframes, int downsample, const char* out_dir,
                                      char** out_json);

/* Checks an EMB1 file. *out_problem is NULL when the file is valid. */
MEMLOC_API memloc_status memloc_emb1_validate(const char* path, char** out_problem);

#ifdef __cplusplus
}
#endif

#endif /* MEMLOC_MEMLOC_H_ */
