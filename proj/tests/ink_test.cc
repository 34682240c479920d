// tests/ink_test.cc
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

#include <random>

#include "doctest.h"
#include "inkrover/error.h"
#include "inkrover/ink.h"

using namespace inkrover;

namespace {

InkTrace line_trace(std::vector<Point> pts) {
  InkTrace tr;
  tr.sample_id = "s";
  tr.strokes.push_back({std::move(pts)});
  return tr;
}

// Round-half-down of the exact line; the same cells Bresenham must produce.
std::vector<GridPoint> exact_line(GridPoint a, GridPoint b) {
  std::vector<GridPoint> out;
  const int dx = b.x - a.x, dy = b.y - a.y;
  const int n = std::max(std::abs(dx), std::abs(dy));
  if (n == 0) return {a};
  const bool x_major = std::abs(dx) >= std::abs(dy);
  for (int i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / n;
    const int major = i * ((x_major ? dx : dy) >= 0 ? 1 : -1);
    const double minor = f * (x_major ? dy : dx);
    const int rounded = minor >= 0 ? static_cast<int>(std::ceil(minor - 0.5)) : -static_cast<int>(std::ceil(-minor - 0.5));
    out.push_back(x_major ? GridPoint{a.x + major, a.y + rounded} : GridPoint{a.x + rounded, a.y + major});
  }
  return out;
}

}  // namespace

TEST_CASE("load a minimal document") {
  const auto tr = load_ink(R"({"version":1,"sample_id":"a","transcript":null,"strokes":[{"points":[[0,0,0],[1,0,5],[2,1,9]]}]})");
  CHECK(tr.strokes.size() == 1);
  CHECK(tr.strokes[0].points.size() == 3);
  CHECK(tr.strokes[0].points[2] == Point{2, 1, 9});
  CHECK_FALSE(tr.transcript.has_value());
}

TEST_CASE("load errors") {
  CHECK_THROWS_AS(load_ink(R"({"version":1,"sample_id":"a","transcript":null,"strokes":[]})"), InvariantError);
  CHECK_THROWS_AS(load_ink("{not json"), ParseError);
  CHECK_THROWS_AS(load_ink(R"({"version":1,"sample_id":"a","strokes":[{"points":[[0,0]]}]})"), ParseError);
  CHECK_THROWS_AS(load_ink(R"({"version":1,"sample_id":"a","transcript":null,"strokes":[{"points":[[0,0,5],[1,0,2]]}]})"),
                  InvariantError);
}

TEST_CASE("save and reload") {
  auto tr = line_trace({{0, 0, 0}});
  const auto doc = save_ink(tr);
  CHECK(doc.find("[[0.0,0.0,0.0]]") != std::string::npos);
  tr.transcript = std::vector<std::string>{"hello", "world"};
  const auto with = save_ink(tr);
  CHECK(with.find("\"transcript\":[\"hello\",\"world\"]") != std::string::npos);
  CHECK(load_ink(with) == tr);
  CHECK(save_ink(load_ink(with)) == with);
}

TEST_CASE("randomized round trip") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1000, 1000), dt(0, 30);
  InkTrace tr;
  tr.sample_id = "big";
  double t = 0;
  for (int s = 0; s < 1000; ++s) {
    Stroke st;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) st.points.push_back({u(rng), u(rng), t += dt(rng)});
    tr.strokes.push_back(st);
  }
  const auto bytes = save_ink(tr);
  const auto back = load_ink(bytes);
  CHECK(back == tr);
  CHECK(save_ink(back) == bytes);
}

TEST_CASE("validate_trace") {
  auto tr = line_trace({{0, 0, 0}, {1, 0, 5}, {2, 0, 3}});
  CHECK(validate_trace(line_trace({{0, 0, 0}, {1, 0, 1}})).empty());
  auto v = validate_trace(tr);
  REQUIRE(v.size() == 1);
  CHECK(v[0].stroke == 0);
  CHECK(v[0].point == 2);
  tr.strokes.push_back({{{0, 0, 6}, {1, 0, 4}}});
  CHECK(validate_trace(tr).size() == 2);
}

TEST_CASE("bresenham") {
  const std::vector<GridPoint> want{{0, 0}, {1, 0}, {2, 1}, {3, 1}, {4, 2}};
  CHECK(bresenham_line({0, 0}, {4, 2}) == want);
  for (int x = -6; x <= 6; ++x)
    for (int y = -6; y <= 6; ++y) {
      CHECK(bresenham_line({2, -1}, {2 + x, -1 + y}) == exact_line({2, -1}, {2 + x, -1 + y}));
    }
}

TEST_CASE("render_offline") {
  auto img = render_offline(line_trace({{3, 3, 0}}), 1.0, 1, 0);
  CHECK(img.width == 1);
  CHECK(img.height == 1);
  CHECK(img.ink_count() == 1);

  img = render_offline(line_trace({{0, 0, 0}, {10, 0, 1}}), 1.0, 1, 0);
  CHECK(img.width == 11);
  CHECK(img.height == 1);
  CHECK(img.ink_count() == 11);

  img = render_offline(line_trace({{0, 0, 0}, {4, 2, 1}}), 1.0, 1, 0);
  CHECK(img.ink_count() == 5);
  for (auto p : std::vector<GridPoint>{{0, 0}, {1, 0}, {2, 1}, {3, 1}, {4, 2}}) CHECK(img.is_ink(p.x, p.y));

  img = render_offline(line_trace({{0, 0, 0}, {4, 2, 1}}), 1.0, 3, 2);
  CHECK(img.width == 4 + 3 + 4);
  for (int x = 0; x < img.width; ++x)
    for (int y = 0; y < img.height; ++y)
      if (x < 2 || y < 2 || x >= img.width - 2 || y >= img.height - 2) CHECK_FALSE(img.is_ink(x, y));
  CHECK(render_offline(line_trace({{0, 0, 0}, {4, 2, 1}}), 1.0, 3, 2) == img);

  CHECK_THROWS_AS(render_offline(InkTrace{"e", {}, {}}, 1.0, 1, 0), EmptyTrace);
}

TEST_CASE("pgm round trip") {
  auto img = render_offline(line_trace({{0, 0, 0}, {7, 3, 1}}), 2.0, 2, 1);
  const auto bytes = to_pgm(img);
  CHECK(bytes.rfind("P5", 0) == 0);
  CHECK(from_pgm(bytes) == img);
  CHECK_THROWS_AS(from_pgm("P2\n1 1\n255\n0"), ParseError);
}
