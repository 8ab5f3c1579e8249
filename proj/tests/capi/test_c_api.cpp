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


// Exercises the shared library through its C header only.
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include "memloc/memloc.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Takes ownership of a library string.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  memloc_string_free(s);
  return out;
}

struct Scratch {
  fs::path dir;
  Scratch() {
    std::string pattern = (fs::temp_directory_path() / "memloc-capi-XXXXXX").string();
    REQUIRE(mkdtemp(pattern.data()) != nullptr);
    dir = pattern;
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string operator/(const std::string& rel) const { return (dir / rel).string(); }
};

struct Config {
  memloc_config* cfg = nullptr;
  Config() { REQUIRE(memloc_config_create(&cfg) == MEMLOC_OK); }
  ~Config() { memloc_config_destroy(cfg); }
};

}  // namespace

TEST_CASE("version and errors") {
  CHECK(std::string(memloc_version()).size() > 0);
  CHECK(memloc_config_create(nullptr) == MEMLOC_ERR_INVALID_ARGUMENT);
  CHECK(std::string(memloc_last_error()).find("NULL") != std::string::npos);
  CHECK(memloc_set_log_level("loud") == MEMLOC_ERR_CONFIG);
  CHECK(memloc_set_log_level("warn") == MEMLOC_OK);
  memloc_string_free(nullptr);
  memloc_config_destroy(nullptr);
  memloc_index_close(nullptr);
}

TEST_CASE("last error is per thread") {
  CHECK(memloc_index_open("/nonexistent/index", 1, nullptr) != MEMLOC_OK);
  const std::string mine = memloc_last_error();
  std::thread other([] {
    memloc_config* cfg = nullptr;
    memloc_config_create(&cfg);
    CHECK(memloc_config_set(cfg, "bogus", "1") == MEMLOC_ERR_CONFIG);
    CHECK(std::string(memloc_last_error()).find("bogus") != std::string::npos);
    memloc_config_destroy(cfg);
  });
  other.join();
  CHECK(std::string(memloc_last_error()) == mine);
}

TEST_CASE("config handle") {
  Config c;
  CHECK(memloc_config_set(c.cfg, "k", "7") == MEMLOC_OK);
  CHECK(memloc_config_set(c.cfg, "k", "seven") == MEMLOC_ERR_CONFIG);
  CHECK(memloc_config_set(c.cfg, "nope", "1") == MEMLOC_ERR_CONFIG);
  char* js = nullptr;
  REQUIRE(memloc_config_to_json(c.cfg, &js) == MEMLOC_OK);
  const json j = json::parse(take(js));
  CHECK(j["k"] == 7);
  CHECK(j["tau"] == 1.5);
  char* keys = nullptr;
  REQUIRE(memloc_config_keys(&keys) == MEMLOC_OK);
  const std::string ks = take(keys);
  CHECK(ks.find("dedup_sim_max\n") != std::string::npos);
  CHECK(ks.find("success_radius") != std::string::npos);
  CHECK(memloc_config_load(c.cfg, "/nonexistent.conf") == MEMLOC_ERR_IO);
  Scratch tmp;
  std::ofstream(tmp / "a.conf") << "overfetch = 2\n";
  CHECK(memloc_config_load(c.cfg, (tmp / "a.conf").c_str()) == MEMLOC_OK);
}

TEST_CASE("end to end through the C interface") {
  Scratch tmp;
  Config c;
  const std::string data = tmp / "room";
  char* out = nullptr;
  REQUIRE(memloc_synth(c.cfg, "room", 2, 36, 64, 48, 0, 1, data.c_str(), &out) == MEMLOC_OK);
  const json synth = json::parse(take(out));
  REQUIRE(!synth["labels"].empty());
  const std::string label = synth["labels"][0];

  char* problem = reinterpret_cast<char*>(1);
  REQUIRE(memloc_emb1_validate((data + "/embeddings.emb").c_str(), &problem) == MEMLOC_OK);
  CHECK(problem == nullptr);
  std::ofstream(tmp / "junk.emb") << "not an embedding file";
  REQUIRE(memloc_emb1_validate((tmp / "junk.emb").c_str(), &problem) == MEMLOC_OK);
  CHECK(take(problem).size() > 0);

  const std::string index_dir = tmp / "index";
  REQUIRE(memloc_build_index((data + "/manifest.jsonl").c_str(), (data + "/embeddings.emb").c_str(),
                             index_dir.c_str(), 1, &out) == MEMLOC_OK);
  CHECK(json::parse(take(out))["N"] == 36);
  CHECK(memloc_build_index((data + "/manifest.jsonl").c_str(), (tmp / "junk.emb").c_str(), (tmp / "bad").c_str(), 1,
                           nullptr) != MEMLOC_OK);

  memloc_index* index = nullptr;
  REQUIRE(memloc_index_open(index_dir.c_str(), 1, &index) == MEMLOC_OK);
  REQUIRE(memloc_index_info(index, &out) == MEMLOC_OK);
  CHECK(json::parse(take(out))["N"] == 36);

  REQUIRE(memloc_config_set(c.cfg, "seg_dir", (data + "/masks").c_str()) == MEMLOC_OK);
  const std::string qemb = data + "/queries/" + label + ".emb";
  memloc_query q{};
  q.kind = MEMLOC_QUERY_TEXT;
  q.text = label.c_str();
  q.embedding_path = qemb.c_str();
  q.include_points = 1;
  REQUIRE(memloc_localize(index, c.cfg, &q, 1, &out) == MEMLOC_OK);
  const std::string report_text = take(out);
  const json report = json::parse(report_text);
  CHECK(report["query"] == label);
  REQUIRE(!report["candidates"].empty());
  CHECK(report["candidates"][0].contains("points"));
  std::ofstream(tmp / "report.json") << report_text;

  // Same query twice: identical bytes.
  REQUIRE(memloc_localize(index, c.cfg, &q, 1, &out) == MEMLOC_OK);
  CHECK(take(out) == report_text);

  q.text = "unicorn";
  CHECK(memloc_localize(index, c.cfg, &q, 1, &out) == MEMLOC_ERR_NOT_FOUND);
  q.text = label.c_str();
  q.kind = static_cast<memloc_query_kind>(9);
  CHECK(memloc_localize(index, c.cfg, &q, 1, &out) == MEMLOC_ERR_INVALID_ARGUMENT);
  CHECK(memloc_localize(nullptr, c.cfg, &q, 1, &out) == MEMLOC_ERR_INVALID_ARGUMENT);
  memloc_index_close(index);

  REQUIRE(memloc_sim_nav(c.cfg, (data + "/world.json").c_str(), (tmp / "report.json").c_str(), nullptr, 0, &out) ==
          MEMLOC_OK);
  const std::string nav = take(out);
  CHECK(json::parse(nav)["episode"]["success"] == 1);
  std::ofstream(tmp / "nav.jsonl") << nav << "\n";
  std::ofstream(tmp / "pred.json") << report_text;

  char* csv = nullptr;
  REQUIRE(memloc_eval(c.cfg, (tmp / "pred.json").c_str(), (data + "/gt.json").c_str(), (tmp / "nav.jsonl").c_str(),
                      &out, &csv) == MEMLOC_OK);
  const json metrics = json::parse(take(out));
  CHECK(metrics["navigation"]["sr"] == 1.0);
  CHECK(take(csv).rfind("episodes,SR@5", 0) == 0);
  CHECK(memloc_eval(c.cfg, nullptr, nullptr, nullptr, &out, nullptr) == MEMLOC_ERR_INVALID_ARGUMENT);

  REQUIRE(memloc_reduce_trajectory(c.cfg, (data + "/manifest.jsonl").c_str(), nullptr, (tmp / "small").c_str(),
                                   &out) == MEMLOC_OK);
  CHECK(json::parse(take(out))["input_frames"] == 36);

  const char* queries[] = {qemb.c_str()};
  REQUIRE(memloc_profile(c.cfg, (data + "/manifest.jsonl").c_str(), (data + "/embeddings.emb").c_str(), queries, 1,
                         (tmp / "work").c_str(), 1, &out) == MEMLOC_OK);
  CHECK(json::parse(take(out))["query_count"] == 1);

  CHECK(memloc_synth(c.cfg, "volcano", 1, 36, 64, 48, 0, 1, (tmp / "v").c_str(), &out) ==
        MEMLOC_ERR_INVALID_ARGUMENT);
}
