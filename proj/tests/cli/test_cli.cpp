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


// Drives the installed command-line binary as a user would.
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <sstream>

#include "fixtures.hpp"
#include "memloc/pipeline.hpp"

using namespace memloc;
using memloc::testing::TempDir;
using memloc::testing::slurp;
using memloc::testing::spit;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

/// Runs the CLI with `args` (shell syntax); stderr is discarded.
Run cli(const std::string& args) {
  const std::string cmd = std::string(MEMLOC_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

/// One synthetic room with an index, shared by the cases below.
struct Room {
  TempDir tmp;
  std::string data = tmp / "room";
  std::string index = tmp / "index";
  std::vector<std::string> labels;

  Room() {
    REQUIRE(cli("synth --kind room --seed 12 --out " + data).status == 0);
    REQUIRE(cli("build-index --scene " + data + "/manifest.jsonl --embeddings " + data + "/embeddings.emb --out " +
                index)
                .status == 0);
    const json gt = read_json_file(data + "/gt.json");
    for (const auto& l : gt["episodes"]) labels.push_back(l["query"]);
    REQUIRE(!labels.empty());
  }
  std::string localize_args(const std::string& label) const {
    return "localize --index " + index + " --query " + label + " --query-emb " + data + "/queries/" + label +
           ".emb --seg-dir " + data + "/masks";
  }
};

}  // namespace

TEST_CASE("help lists every config key with its default and the exit codes") {
  const Run r = cli("--help");
  CHECK(r.status == 0);
  for (const auto& key : RunConfig::keys()) CHECK_MESSAGE(r.out.find("  " + key + " = ") != std::string::npos, key);
  CHECK(r.out.find("dedup_sim_max = 0.9") != std::string::npos);
  CHECK(r.out.find("tau = 1.5") != std::string::npos);
  CHECK(r.out.find("Exit codes") != std::string::npos);
  CHECK(cli("localize --help").status == 0);
}

TEST_CASE("usage errors exit 4") {
  CHECK(cli("").status == 4);
  CHECK(cli("frobnicate").status == 4);
  CHECK(cli("synth --kind room --nope --out /tmp/x").status == 4);
  CHECK(cli("--set bogus=1 synth --out /tmp/memloc-never").status == 4);
  CHECK(cli("--set k synth --out /tmp/memloc-never").status == 4);
  CHECK(cli("--config /nonexistent.conf synth --out /tmp/memloc-never").status == 3);
}

TEST_CASE("index build, localization and evaluation") {
  Room room;
  // Idempotent index.
  const std::string again = room.tmp / "index2";
  REQUIRE(cli("build-index --scene " + room.data + "/manifest.jsonl --embeddings " + room.data +
              "/embeddings.emb --out " + again)
              .status == 0);
  CHECK(slurp(again + "/index.emb") == slurp(room.index + "/index.emb"));
  CHECK(slurp(again + "/index.ids") == slurp(room.index + "/index.ids"));

  // The report equals the library's for the same configuration.
  const std::string label = room.labels[0];
  const Run loc = cli(room.localize_args(label));
  REQUIRE(loc.status == 0);
  RunConfig cfg;
  cfg.seg_dir = room.data + "/masks";
  QuerySpec spec;
  spec.text = label;
  spec.embedding_path = room.data + "/queries/" + label + ".emb";
  const json golden = localize_query(OpenIndex::open(room.index), cfg, spec);
  CHECK(json::parse(loc.out) == golden);

  // Byte-identical across runs and worker counts.
  CHECK(cli(room.localize_args(label)).out == loc.out);
  // Logging goes to stderr and never mixes into the report.
  CHECK(cli("--log-level info " + room.localize_args(label)).out == loc.out);
  CHECK(cli("--log-level info build-index --scene " + room.data + "/manifest.jsonl --embeddings " + room.data +
            "/embeddings.emb --out " + again)
            .out.find("[info]") == std::string::npos);
  CHECK(cli("--jobs 3 " + room.localize_args(label)).out == loc.out);

  // Missing target, missing index, missing required flag.
  CHECK(cli("localize --index " + room.index + " --query unicorn --query-emb " + spec.embedding_path +
            " --seg-dir " + cfg.seg_dir)
            .status == 2);
  CHECK(cli("localize --index " + room.tmp / "none" + " --query x --query-emb " + spec.embedding_path +
            " --seg-dir " + cfg.seg_dir)
            .status == 3);
  CHECK(cli("localize --index " + room.index + " --query x --seg-dir " + cfg.seg_dir).status == 4);
  CHECK(cli("localize --index " + room.index + " --query x --query-emb " + spec.embedding_path).status == 4);

  // Every label, then metrics in JSON and CSV.
  std::string lines;
  for (const auto& l : room.labels) {
    const Run r = cli(room.localize_args(l));
    REQUIRE(r.status == 0);
    lines += json::parse(r.out).dump() + "\n";
  }
  spit(room.tmp / "pred.jsonl", lines);
  const Run ev = cli("eval --pred " + room.tmp / "pred.jsonl" + " --gt " + room.data + "/gt.json --csv " +
                     room.tmp / "m.csv");
  REQUIRE(ev.status == 0);
  const json metrics = json::parse(ev.out);
  CHECK(metrics["localization"]["sr_at_5"] == 1.0);
  std::istringstream csv(slurp(room.tmp / "m.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header == "episodes,SR@5,nav_episodes,SR,SPL");
  CHECK(std::stoul(row.substr(0, row.find(','))) == room.labels.size());
  CHECK(std::stod(row.substr(row.find(',') + 1)) == metrics["localization"]["sr_at_5"].get<double>());
  CHECK(cli("eval --k 0 --pred " + room.tmp / "pred.jsonl" + " --gt " + room.data + "/gt.json").status == 4);
  CHECK(cli("eval").status == 6);
}

TEST_CASE("configuration precedence: defaults, file, --set, flags") {
  Room room;
  spit(room.tmp / "run.conf", "k = 7\noverfetch = 3\n");
  const std::string base = "--config " + room.tmp / "run.conf" + " ";
  const json from_file = json::parse(cli(base + room.localize_args(room.labels[0])).out);
  CHECK(from_file["config"]["k"] == 7);
  CHECK(from_file["config"]["overfetch"] == 3);
  const json from_set = json::parse(cli(base + "--set k=4 " + room.localize_args(room.labels[0])).out);
  CHECK(from_set["config"]["k"] == 4);
  CHECK(from_set["config"]["overfetch"] == 3);
  const json from_flag =
      json::parse(cli(base + "--set k=4 " + room.localize_args(room.labels[0]) + " --top-k 2").out);
  CHECK(from_flag["config"]["k"] == 2);
}

TEST_CASE("navigation through the CLI") {
  Room room;
  const std::string label = room.labels[0];
  REQUIRE(cli(room.localize_args(label) + " --with-points --out " + room.tmp / "rep.json").status == 0);
  const Run nav = cli("sim-nav --scene-file " + room.data + "/world.json --report " + room.tmp / "rep.json" +
                      " --trace " + room.tmp / "trace.jsonl");
  REQUIRE(nav.status == 0);
  const json ep = json::parse(nav.out);
  CHECK(ep["episode"]["success"] == 1);
  spit(room.tmp / "nav.jsonl", ep.dump() + "\n");
  const json m = json::parse(cli("eval --nav " + room.tmp / "nav.jsonl").out);
  CHECK(m["navigation"]["sr"] == 1.0);
  // Without points the report cannot drive navigation.
  REQUIRE(cli(room.localize_args(label) + " --out " + room.tmp / "bare.json").status == 0);
  CHECK(cli("sim-nav --scene-file " + room.data + "/world.json --report " + room.tmp / "bare.json").status == 6);

  TempDir maze;
  REQUIRE(cli("synth --kind maze --seed 4 --out " + maze.path().string()).status == 0);
  const Run m1 = cli("sim-nav --scene-file " + maze / "world.json");
  REQUIRE(m1.status == 0);
  CHECK(json::parse(m1.out)["episode"]["success"] == 1);
  CHECK(cli("sim-nav --scene-file " + maze / "world.json").out == m1.out);
  CHECK(cli("sim-nav --scene-file " + maze / "world.json --start 3").status == 6);
}

TEST_CASE("keyframes, profile and EMB1 validation") {
  Room room;
  const Run kf = cli("keyframes --scene " + room.data + "/manifest.jsonl --embeddings " + room.data +
                     "/embeddings.emb --downsample 2 --out " + room.tmp / "small");
  REQUIRE(kf.status == 0);
  const json k = json::parse(kf.out);
  CHECK(k["input_frames"] == 36);
  CHECK(k["reduction"].get<double>() > 1.0);

  const Run prof = cli("profile --scene " + room.data + "/manifest.jsonl --embeddings " + room.data +
                       "/embeddings.emb --queries " + room.data + "/queries/" + room.labels[0] + ".emb --work " +
                       room.tmp / "work" + " --seg-dir " + room.data + "/masks");
  REQUIRE(prof.status == 0);
  CHECK(json::parse(prof.out)["query_count"] == 1);

  spit(room.tmp / "junk.emb", "EMB1 but not really");
  const Run good = cli("validate-emb " + room.data + "/embeddings.emb");
  CHECK(good.status == 0);
  CHECK(good.out.find(": ok") != std::string::npos);
  const Run bad = cli("validate-emb " + room.data + "/embeddings.emb " + room.tmp / "junk.emb");
  CHECK(bad.status == 6);
  CHECK(bad.out.find("INVALID") != std::string::npos);
}
