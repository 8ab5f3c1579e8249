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


#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "memloc/errors.hpp"
#include "memloc/eval.hpp"

using namespace memloc;
using nlohmann::json;

namespace {

LocalizationEpisode episode(std::string q, std::vector<Vec3> preds, std::vector<Vec3> gt) {
  return {std::move(q), std::move(preds), std::move(gt)};
}

EpisodeResult nav(bool success, double l, double l_star) {
  EpisodeResult r;
  r.success = success;
  r.path_length = l;
  r.geodesic_optimum = l_star;
  return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("planar distance ignores height") {
    CHECK(d_xz(Vec3(0, 0, 0), Vec3(3, 100, 4)) == 5.0);
    CHECK(d_xz(Vec3(1, -2, 1), Vec3(1, 7, 1)) == 0.0);
  }

  TEST_CASE("SR@K uses a strict threshold") {
    const std::vector<LocalizationEpisode> eps{
        episode("a", {Vec3(1.5, 0, 0)}, {Vec3(0, 0, 0)}),          // exactly tau: miss
        episode("b", {Vec3(1.49, 5, 0)}, {Vec3(0, 0, 0)}),         // height ignored: hit
        episode("c", {Vec3(9, 0, 0), Vec3(0, 0, 1)}, {Vec3(0, 0, 0), Vec3(8, 0, 8)}),
    };
    CHECK(!episode_hit(eps[0], 1.5, 5));
    CHECK(episode_hit(eps[1], 1.5, 5));
    CHECK(sr_at_k(eps, 1.5, 5) == doctest::Approx(2.0 / 3.0));
    // Only the first prediction counts at k = 1.
    CHECK(sr_at_k(eps, 1.5, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(!episode_hit(episode("none", {}, {Vec3(0, 0, 0)}), 1.5, 5));
    CHECK_THROWS_AS(episode_hit(episode("x", {Vec3(0, 0, 0)}, {}), 1.5, 5), Error);
    CHECK_THROWS_AS(sr_at_k({}, 1.5, 5), Error);
    CHECK_THROWS_AS(sr_at_k(eps, 1.5, 0), Error);
  }

  TEST_CASE("SR@K is monotone and order independent") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> pos(0, 6);
    for (int t = 0; t < 50; ++t) {
      std::vector<LocalizationEpisode> eps;
      for (int e = 0; e < 20; ++e) {
        LocalizationEpisode ep;
        for (int i = 0; i < 8; ++i) ep.predictions.emplace_back(pos(rng), pos(rng), pos(rng));
        for (int i = 0; i < 2; ++i) ep.ground_truth.emplace_back(pos(rng), pos(rng), pos(rng));
        eps.push_back(ep);
      }
      double prev = 0.0;
      for (std::size_t k = 1; k <= 10; ++k) {
        const double v = sr_at_k(eps, 1.0, k);
        CHECK(v >= prev);
        prev = v;
      }
      CHECK(sr_at_k(eps, 0.5, 5) <= sr_at_k(eps, 1.5, 5));
      const double before = sr_at_k(eps, 1.0, 3);
      std::shuffle(eps.begin(), eps.end(), rng);
      CHECK(sr_at_k(eps, 1.0, 3) == before);
    }
  }

  TEST_CASE("SR and SPL") {
    CHECK(spl_term(nav(true, 4.0, 2.0)) == 0.5);
    CHECK(spl_term(nav(true, 2.0, 2.0)) == 1.0);
    CHECK(spl_term(nav(false, 2.0, 2.0)) == 0.0);
    CHECK(spl_term(nav(true, 0.0, 0.0)) == 1.0);
    CHECK(spl_term(nav(true, 1.0, 0.0)) == 1.0);
    CHECK(spl_term(nav(true, 1.0, 2.0)) == 1.0);
    const std::vector<EpisodeResult> runs{nav(true, 4.0, 2.0), nav(false, 3.0, 1.0), nav(true, 1.0, 1.0),
                                          nav(true, 0.0, 0.0)};
    CHECK(success_rate(runs) == 0.75);
    CHECK(spl(runs) == doctest::Approx((0.5 + 0.0 + 1.0 + 1.0) / 4.0));
    CHECK(spl(runs) <= success_rate(runs));
    CHECK_THROWS_AS(spl({}), Error);
    CHECK_THROWS_AS(success_rate({}), Error);
  }

  TEST_CASE("AR@K") {
    // The only relevant id sits at rank 6.
    const std::vector<std::vector<std::int64_t>> ranked{{10, 11, 12, 13, 14, 7, 15}};
    const std::vector<std::vector<std::int64_t>> relevant{{7}};
    CHECK(ar_at_k(ranked, relevant, 5).value == 0.0);
    CHECK(ar_at_k(ranked, relevant, 10).value == 1.0);
    CHECK(ar_at_k(ranked, relevant, 6).value == 1.0);

    const std::vector<std::vector<std::int64_t>> r2{{1, 2}, {3}, {4}};
    const std::vector<std::vector<std::int64_t>> rel2{{2}, {}, {9}};
    const ArResult a = ar_at_k(r2, rel2, 5);
    CHECK(a.value == 0.5);
    CHECK(a.evaluated == 2);
    CHECK(a.excluded == 1);
    CHECK(ar_at_k(std::vector<std::vector<std::int64_t>>{{1}}, std::vector<std::vector<std::int64_t>>{{}}, 5).value ==
          0.0);
    CHECK_THROWS_AS(ar_at_k(r2, relevant, 5), Error);
  }

  TEST_CASE("profile times the build and each query") {
    std::vector<std::size_t> seen;
    const ProfileResult p = profile([] { return std::uint64_t{1234}; }, [&](std::size_t i) { seen.push_back(i); }, 4);
    CHECK(p.store_bytes == 1234);
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3});
    REQUIRE(p.latencies.size() == 4);
    for (double l : p.latencies) CHECK(l >= 0.0);
    CHECK(p.build_seconds >= 0.0);
    const json j = p.to_json();
    CHECK(j["query_count"] == 4);
    CHECK(j["store_bytes"] == 1234);
    CHECK(j["mean_latency_seconds"].get<double>() == doctest::Approx(p.mean_latency()));
    CHECK(ProfileResult{}.mean_latency() == 0.0);
  }

  TEST_CASE("episodes from reports") {
    const json gt{{"episodes",
                   {{{"query", "chair"}, {"goals", {{1.0, 0.0, 1.0}}}},
                    {{"query", "lamp"}, {"goals", {{5.0, 0.0, 5.0}, {0.0, 0.0, 0.0}}}},
                    {{"query", "sofa"}, {"goals", {{2.0, 0.0, 2.0}}}}}}};
    const json chair{{"query", "chair"}, {"candidates", {{{"center", {1.2, 0.4, 1.0}}}, {{"center", {9.0, 0.0, 9.0}}}}}};
    const json lamp{{"query", "lamp"}, {"candidates", {{{"center", {0.5, 0.0, 0.5}}}}}};

    for (const json& reports : {json::array({chair, lamp}), json{{"reports", {chair, lamp}}}}) {
      const auto eps = episodes_from_reports(reports, gt);
      REQUIRE(eps.size() == 3);
      CHECK(eps[0].query == "chair");
      CHECK(eps[0].predictions.size() == 2);
      CHECK(eps[1].ground_truth.size() == 2);
      CHECK(eps[2].predictions.empty());
      CHECK(sr_at_k(eps, 1.5, 5) == doctest::Approx(2.0 / 3.0));
    }
    const auto single = episodes_from_reports(chair, gt);
    CHECK(single[0].predictions.size() == 1 + 1);
    CHECK(single[1].predictions.empty());

    try {
      episodes_from_reports(chair, json{{"episodes", {{{"query", "chair"}}}}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
    }
    CHECK_THROWS_AS(episodes_from_reports(chair, json{{"episodes", {{{"query", "chair"}, {"goals", json::array()}}}}}),
                    Error);
    CHECK_THROWS_AS(episodes_from_reports(json{{"query", "chair"}}, gt), Error);
  }

  TEST_CASE("metric report and CSV agree") {
    const std::vector<LocalizationEpisode> loc{episode("a", {Vec3(1.0, 0, 0)}, {Vec3(0, 0, 0)}),
                                               episode("b", {Vec3(3.0, 0, 0)}, {Vec3(0, 0, 0)}),
                                               episode("c", {}, {Vec3(0, 0, 0)})};
    const std::vector<EpisodeResult> runs{nav(true, 4.0, 2.0), nav(false, 3.0, 1.0), nav(true, 3.0, 1.0)};
    MetricConfig cfg;
    const json rep = metric_report(loc, runs, cfg);
    CHECK(rep["localization"]["sr_at_5"].get<double>() == doctest::Approx(1.0 / 3.0));
    CHECK(rep["localization"]["per_episode"][0]["min_distance"] == 1.0);
    CHECK(rep["localization"]["per_episode"][2]["min_distance"].is_null());
    CHECK(rep["navigation"]["sr"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(rep["navigation"]["per_episode"][0]["spl_term"] == 0.5);

    const std::string csv = metric_csv(rep);
    std::istringstream in(csv);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "episodes,SR@5,nav_episodes,SR,SPL");
    const auto cells = split(row, ',');
    REQUIRE(cells.size() == 5);
    CHECK(std::stoul(cells[0]) == 3);
    CHECK(std::stod(cells[1]) == rep["localization"]["sr_at_5"].get<double>());
    CHECK(std::stoul(cells[2]) == 3);
    CHECK(std::stod(cells[3]) == rep["navigation"]["sr"].get<double>());
    CHECK(std::stod(cells[4]) == rep["navigation"]["spl"].get<double>());

    // Either block may be absent.
    const json only_nav = metric_report({}, runs, cfg);
    CHECK(!only_nav.contains("localization"));
    CHECK(split(metric_csv(only_nav).substr(header.size() + 1), ',')[0] == "0");
    cfg.k = 0;
    CHECK_THROWS_AS(metric_report(loc, runs, cfg), Error);
    cfg = MetricConfig{};
    cfg.tau = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}
