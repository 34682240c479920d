// tests/experiment_test.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <vector>

#include "doctest.h"
#include "inkrover/error.h"
#include "inkrover/experiment.h"

using namespace inkrover;

#ifndef INKROVER_CONFIG_DIR
#define INKROVER_CONFIG_DIR "configs"
#endif

namespace {

ExperimentConfig config(const char* name) {
  return load_experiment_config(std::string(INKROVER_CONFIG_DIR) + "/" + name);
}

}  // namespace

TEST_CASE("noise-free lines are read perfectly by every system and by the combination") {
  auto cfg = config("noise_free.cfg");
  for (std::uint64_t seed : {1, 2, 3}) {
    cfg.seed = seed;
    const auto report = run_experiment(cfg);
    CAPTURE(seed);
    REQUIRE(report.systems.size() == 3);
    for (const auto& s : report.systems) {
      CAPTURE(s.name);
      CHECK(s.test.recognition_rate == 100.0);
      CHECK(s.test.accuracy == 100.0);
    }
    CHECK(report.combined.recognition_rate == 100.0);
    CHECK(report.combined.accuracy == 100.0);
    CHECK(report.delta_rate() == 0.0);
    CHECK(report.combined_hypotheses.size() == report.split.test.size());
  }
}

TEST_CASE("experiment runs are deterministic and independent of the worker count") {
  auto cfg = config("noise_free.cfg");
  cfg.lines = 40;
  cfg.seed = 7;
  cfg.workers = 1;
  const auto a = run_experiment(cfg);
  cfg.workers = 3;
  const auto b = run_experiment(cfg);
  CHECK(experiment_report_to_json(a).dump() == experiment_report_to_json(b).dump());
  CHECK(format_experiment_markdown(a) == format_experiment_markdown(b));
}

TEST_CASE("report markdown carries both tables") {
  auto cfg = config("noise_free.cfg");
  cfg.lines = 40;
  const auto report = run_experiment(cfg);
  const auto md = format_experiment_markdown(report);
  CHECK(md.find("| System | Recognition Rate | Precision |") != std::string::npos);
  CHECK(md.find("| offline-raw | ") != std::string::npos);
  CHECK(md.find("Highest Single System (") != std::string::npos);
  CHECK(md.find("| ROVER combination (3 systems) | 100.0% | 100.0% |") != std::string::npos);
  CHECK(md.find("| Change | 0.0% | 0.0% |") != std::string::npos);
  const auto doc = experiment_report_to_json(report);
  CHECK(doc["systems"].size() == 3);
  CHECK(doc["ranking"].size() == 3);
}

TEST_CASE("experiment config round-trips through JSON") {
  const auto cfg = config("paper_repro.cfg");
  const auto doc = experiment_config_to_json(cfg);
  const auto back = experiment_config_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(experiment_config_to_json(back).dump() == doc.dump());
  CHECK(cfg.variants.size() == 3);
}

TEST_CASE("experiment config errors") {
  auto doc = nlohmann::json::parse(experiment_config_to_json(config("noise_free.cfg")).dump());
  SUBCASE("unknown key") {
    doc["colour"] = 1;
    CHECK_THROWS_AS(experiment_config_from_json(doc), ConfigError);
  }
  SUBCASE("reserved variant name") {
    doc["variants"][0]["name"] = "rover";
    CHECK_THROWS_AS(experiment_config_from_json(doc), ConfigError);
  }
  SUBCASE("one variant") {
    doc["variants"].erase(1);
    doc["variants"].erase(1);
    CHECK_THROWS_AS(experiment_config_from_json(doc), ConfigError);
  }
  SUBCASE("duplicate variant") {
    doc["variants"][1]["name"] = doc["variants"][0]["name"];
    CHECK_THROWS_AS(experiment_config_from_json(doc), ConfigError);
  }
  SUBCASE("unknown recognizer key") {
    doc["recognizer"]["states"] = 8;
    CHECK_THROWS_AS(experiment_config_from_json(doc), ConfigError);
  }
  SUBCASE("unknown training key") {
    doc["recognizer"]["hmm"]["iterations"] = 8;
    CHECK_THROWS_AS(experiment_config_from_json(doc), ConfigError);
  }
  SUBCASE("bad ratios") {
    doc["split_ratios"] = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(experiment_config_from_json(doc), ConfigError);
  }
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/cfg.json"), Error);
}

TEST_CASE("parallel_for visits every index once") {
  for (std::size_t workers : {0, 1, 2, 5}) {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("called"); });
}
