// tests/eval_test.cc
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

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "inkrover/error.h"
#include "inkrover/preprocess.h"
#include "inkrover/scoring.h"
#include "inkrover/synth.h"
#include "score_fixtures.h"

using namespace inkrover;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("four-stage split") {
  const auto s = split_four_stages(ids(100), kDefaultSplitRatios, 3);
  CHECK(s.train.size() == 60);
  CHECK(s.validation_meta.size() == 15);
  CHECK(s.validation_lm.size() == 10);
  CHECK(s.test.size() == 15);
  s.validate();
  CHECK(split_to_json(split_four_stages(ids(100), kDefaultSplitRatios, 3)) == split_to_json(s));
  CHECK(split_to_json(split_four_stages(ids(100), kDefaultSplitRatios, 4)) != split_to_json(s));

  const auto tiny = split_four_stages(ids(4));
  CHECK(tiny.train.size() == 1);
  CHECK(tiny.validation_meta.size() == 1);
  CHECK(tiny.validation_lm.size() == 1);
  CHECK(tiny.test.size() == 1);
  CHECK_THROWS_AS(split_four_stages(ids(3)), TooFewSamples);
  CHECK_THROWS_AS(split_four_stages(ids(10), {0.5, 0.5, 0.0, 0.0}), ConfigError);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 4 + seed * 7;
    const auto sp = split_four_stages(ids(n), kDefaultSplitRatios, seed);
    sp.validate();
    CHECK(sp.size() == n);
  }
  CHECK(split_to_json(split_from_json(split_to_json(s))) == split_to_json(s));
}

TEST_CASE("recognition rate fixtures") {
  for (const auto& f : score_fixtures()) {
    const auto r = recognition_rate(words_of(f.hyp), words_of(f.ref));
    INFO(f.ref, " | ", f.hyp);
    CHECK(r.n_correct == f.correct);
    CHECK(r.n_substitutions == f.sub);
    CHECK(r.n_deletions == f.del);
    CHECK(r.n_insertions == f.ins);
    CHECK(format_percent(r.recognition_rate) == f.rate);
    CHECK(format_percent(r.accuracy) == f.accuracy);
  }
}

TEST_CASE("recognition rate properties") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> a(rng() % 8), b(rng() % 8);
    for (auto& w : a) w = std::string(1, static_cast<char>('A' + rng() % 4));
    for (auto& w : b) w = std::string(1, static_cast<char>('A' + rng() % 4));
    const auto r = recognition_rate(b, a);
    CHECK(r.n_correct + r.n_substitutions + r.n_deletions == a.size());
    CHECK(r.n_correct + r.n_substitutions + r.n_insertions == b.size());
    CHECK(r.recognition_rate >= 0.0);
    CHECK(r.recognition_rate <= 100.0);
    CHECK(r.accuracy >= -100.0);
    CHECK(r.accuracy <= r.recognition_rate);
    if (!a.empty()) CHECK(recognition_rate(a, a).recognition_rate == 100.0);
  }
}

TEST_CASE("corpus totals") {
  auto total = recognition_rate(words_of("A B X D"), words_of("A B C D"));
  total += recognition_rate(words_of("A B"), words_of("A B C D"));
  CHECK(total.n_ref_words == 8);
  CHECK(total.n_correct == 5);
  CHECK(format_percent(total.recognition_rate) == "62.5%");
}

TEST_CASE("report tables") {
  ScoreReport off, on;
  off.recognition_rate = 68.4;
  off.accuracy = 62.8;
  on.recognition_rate = 74.6;
  on.accuracy = 66.3;
  const auto t1 = format_system_table("Single systems", {{"Offline", off}, {"Online", on}});
  CHECK(t1 ==
        "Single systems\n\n| System | Recognition Rate | Precision |\n|---|---|---|\n"
        "| Offline | 68.4% | 62.8% |\n| Online | 74.6% | 66.3% |\n");
  ScoreReport comb;
  comb.recognition_rate = 76.0;
  comb.accuracy = 68.2;
  const auto t2 = format_combination_table("Combination", {"Online", on}, {"ROVER", comb});
  CHECK(t2.find("| Highest Single System (Online) | 74.6% | 66.3% |") != std::string::npos);
  CHECK(t2.find("| ROVER | 76.0% | 68.2% |") != std::string::npos);
  CHECK(t2.find("| Change | +1.4% | +1.9% |") != std::string::npos);
  CHECK(format_percent(-0.01) == "0.0%");
}

TEST_CASE("templates") {
  for (char c = 'a'; c <= 'j'; ++c) {
    const auto g = glyph_template(c);
    CHECK(g.front() == Point{0, 0, 0});
    CHECK(g.back().y == 0.0);
    CHECK(g.back().x >= 8.0);
  }
  CHECK_THROWS_AS(glyph_template('k'), UnknownCharacter);
}

TEST_CASE("noise-free lines are the templates") {
  SynthConfig cfg;
  const Lexicon lex{"abc", "dig", "hij"};
  const auto data = synth_dataset(cfg, lex, 20);
  REQUIRE(data.lines.size() == 20);
  CHECK(data.defects.empty());
  for (const auto& line : data.lines) {
    REQUIRE(line.transcript);
    CHECK(line == draw_line(*line.transcript, cfg, line.sample_id));
    CHECK(validate_trace(line).empty());
  }
  // "dig" lifts the pen after d and g
  const auto dig = draw_line({"dig"}, cfg, "x");
  CHECK(dig.strokes.size() == 2);
  CHECK(draw_line({"abc"}, cfg, "x").strokes.size() == 1);
  CHECK(dehook_stroke(dig.strokes[0], PreprocessConfig{}) == dig.strokes[0]);
}

TEST_CASE("synth is deterministic") {
  SynthConfig cfg;
  cfg.jitter_sigma = 0.4;
  cfg.hook_probability = 0.3;
  cfg.gap_probability = 0.3;
  cfg.max_slant_deg = 10;
  cfg.seed = 5;
  const auto lex = make_lexicon(synth_alphabet(10), 12, 2, 4, 1);
  CHECK(lex.size() == 12);
  CHECK(std::set<std::string>(lex.begin(), lex.end()).size() == 12);
  const auto a = synth_dataset(cfg, lex, 10);
  const auto b = synth_dataset(cfg, lex, 10);
  CHECK(a.lines == b.lines);
  cfg.seed = 6;
  CHECK(synth_dataset(cfg, lex, 10).lines != a.lines);
  CHECK_THROWS_AS(synth_dataset(cfg, {}, 1), EmptyLexicon);
  cfg.hook_probability = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(synth_config_from_json(nlohmann::json::parse(R"({"jiter_sigma": 1})")), ConfigError);
}

TEST_CASE("synth config json") {
  SynthConfig cfg;
  cfg.jitter_sigma = 0.7;
  cfg.seed = 99;
  const auto back = synth_config_from_json(nlohmann::json::parse(synth_config_to_json(cfg).dump()));
  CHECK(synth_config_to_json(back) == synth_config_to_json(cfg));
}

TEST_CASE("injected hooks are removed") {
  SynthConfig cfg;
  cfg.jitter_sigma = 0.3;
  cfg.hook_probability = 1.0;
  cfg.max_slant_deg = 15;
  const auto lex = make_lexicon(synth_alphabet(10), 20, 1, 4, 2);
  const auto data = synth_dataset(cfg, lex, 200);
  CHECK(data.stats.hooks == data.stats.strokes);
  std::size_t removed = 0, untouched = 0;
  for (const auto& d : data.defects) {
    const auto& s = data.lines[d.line].strokes[d.stroke];
    const auto out = dehook_stroke(s, PreprocessConfig{});
    removed += out.points.back() == d.before.points.back();
    untouched += out == d.before;
  }
  CHECK(removed >= data.stats.hooks * 99 / 100);
  // a few strokes also lose a hook-like letter start
  CHECK(untouched >= data.stats.hooks * 95 / 100);
}

TEST_CASE("defect rates") {
  SynthConfig cfg;
  cfg.jitter_sigma = 0.3;
  cfg.hook_probability = 0.3;
  cfg.gap_probability = 0.2;
  cfg.min_words = 3;
  cfg.max_words = 5;
  const auto lex = make_lexicon(synth_alphabet(10), 30, 2, 5, 3);
  const auto data = synth_dataset(cfg, lex, 1800);
  REQUIRE(data.stats.strokes >= 10000);
  const double n = static_cast<double>(data.stats.strokes);
  CHECK(std::abs(static_cast<double>(data.stats.hooks) / n - 0.3) <= 0.02);
  CHECK(std::abs(static_cast<double>(data.stats.gaps) / n - 0.2) <= 0.02);
}

TEST_CASE("injected gaps are refilled on the line") {
  SynthConfig cfg;
  cfg.gap_probability = 1.0;
  const auto lex = make_lexicon(synth_alphabet(10), 20, 2, 4, 4);
  const auto data = synth_dataset(cfg, lex, 50);
  PreprocessConfig pre;
  for (const auto& d : data.defects) {
    const auto& s = data.lines[d.line].strokes[d.stroke];
    const auto filled = interpolate_gaps(s, pre, cfg.point_spacing);
    const std::size_t added = filled.points.size() - s.points.size();
    REQUIRE(added > 0);
    const Point a = s.points[d.point], b = s.points[d.point + 1];
    const int nx = static_cast<int>(std::ceil(std::abs(b.x - a.x) / cfg.point_spacing - 1e-9));
    const int ny = static_cast<int>(std::ceil(std::abs(b.y - a.y) / cfg.point_spacing - 1e-9));
    const auto cells = bresenham_line({0, 0}, {b.x < a.x ? -nx : nx, b.y < a.y ? -ny : ny});
    REQUIRE(added == cells.size() - 2);
    for (std::size_t k = 1; k + 1 < cells.size(); ++k) {
      const Point& p = filled.points[d.point + k];
      CHECK(p.x == doctest::Approx(a.x + (nx ? std::abs(cells[k].x) / double(nx) : 0.0) * (b.x - a.x)));
      CHECK(p.y == doctest::Approx(a.y + (ny ? std::abs(cells[k].y) / double(ny) : 0.0) * (b.y - a.y)));
    }
  }
}
