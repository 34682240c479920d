// tests/features_test.cc
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
#include <numbers>

#include "doctest.h"
#include "inkrover/error.h"
#include "inkrover/features.h"
#include "inkrover/preprocess.h"

using namespace inkrover;

namespace {

InkTrace single_stroke(std::vector<Point> pts) {
  InkTrace tr;
  tr.sample_id = "f";
  tr.strokes.push_back({std::move(pts)});
  return tr;
}

}  // namespace

TEST_CASE("offline windows") {
  RasterImage img(20, 10);
  img.at(3, 5) = 255;
  const auto seq = extract_offline_windows(img);
  CHECK(seq.size() == 20);
  CHECK(seq.dim == kOfflineDim);
  const auto& f = seq.frames[3];
  CHECK(f[kInkCount] == 1);
  CHECK(f[kCenterOfGravity] == 5);
  CHECK(f[kSecondMoment] == 0);
  CHECK(f[kTopContour] == 5);
  CHECK(f[kBottomContour] == 5);
  CHECK(f[kInkFractionBetweenContours] == 1);
  CHECK(f[kTransitions] == 2);
  for (double v : seq.frames[0]) CHECK(v == 0.0);

  CHECK(extract_offline_windows(img, 3, 2).size() == 9);
  CHECK(extract_offline_windows(img, 20, 1).size() == 1);
  CHECK_THROWS_AS(extract_offline_windows(RasterImage(4, 4)), BlankImage);
}

TEST_CASE("offline column with a hole") {
  RasterImage img(3, 10);
  for (int y : {2, 3, 6}) img.at(1, y) = 255;
  img.at(0, 1) = 255;
  img.at(2, 5) = 255;
  const auto f = extract_offline_windows(img).frames[1];
  CHECK(f[kInkCount] == 3);
  CHECK(f[kCenterOfGravity] == doctest::Approx(11.0 / 3.0));
  CHECK(f[kSecondMoment] == doctest::Approx((25.0 / 9 + 4.0 / 9 + 49.0 / 9) / 3.0));
  CHECK(f[kTopContour] == 2);
  CHECK(f[kBottomContour] == 6);
  CHECK(f[kInkFractionBetweenContours] == doctest::Approx(3.0 / 5.0));
  CHECK(f[kTransitions] == 4);
  CHECK(f[kTopSlope] == doctest::Approx((5.0 - 1.0) / 2.0));
  CHECK(f[kBottomSlope] == doctest::Approx((5.0 - 1.0) / 2.0));
}

TEST_CASE("baseline shift makes features translation invariant") {
  RasterImage a(12, 30), b(12, 30);
  for (int x = 1; x < 11; ++x)
    for (int y = 10 + x % 3; y < 16; ++y) {
      a.at(x, y) = 255;
      b.at(x, y + 3) = 255;
    }
  const auto fa = shift_to_baseline(extract_offline_windows(a), estimate_baseline(a).row);
  const auto fb = shift_to_baseline(extract_offline_windows(b), estimate_baseline(b).row);
  CHECK(fa.frames == fb.frames);
}

TEST_CASE("resampling") {
  Stroke s{{{0, 0, 0}, {10, 0, 100}}};
  CHECK(resample_stroke(s, 1.0).size() == 11);
  const auto feats = extract_online_features(single_stroke(s.points), 1.0);
  CHECK(feats.size() == 11);
  CHECK(feats.dim == kOnlineDim);
  for (std::size_t i = 1; i + 1 < feats.size(); ++i) {
    CHECK(feats.frames[i][kDirCos] == doctest::Approx(1.0));
    CHECK(feats.frames[i][kDirSin] == doctest::Approx(0.0));
    CHECK(feats.frames[i][kCurvature] == doctest::Approx(0.0));
    CHECK(feats.frames[i][kPenDown] == 1.0);
  }
  CHECK_THROWS_AS(extract_online_features(single_stroke({{0, 0, 0}}), 1.0), DegenerateTrace);
}

TEST_CASE("circle curvature") {
  const double r = 20.0;
  std::vector<Point> pts;
  for (int i = 0; i <= 400; ++i) {
    const double a = std::numbers::pi * i / 400.0;
    pts.push_back({r * std::cos(a), -r * std::sin(a), double(i)});
  }
  const auto feats = extract_online_features(single_stroke(pts), 0.5);
  for (std::size_t i = 1; i + 1 < feats.size(); ++i)
    CHECK(std::abs(std::abs(feats.frames[i][kCurvature]) - 1.0 / r) <= 0.05 / r);
}

TEST_CASE("pen-up bridges") {
  InkTrace tr;
  tr.sample_id = "two";
  tr.strokes.push_back({{{0, 0, 0}, {2, 0, 10}}});
  tr.strokes.push_back({{{5, 0, 50}, {7, 0, 60}}});
  const auto f = extract_online_features(tr, 1.0);
  std::size_t up = 0;
  for (const auto& fr : f.frames) up += fr[kPenDown] == 0.0;
  CHECK(up == 2);
  CHECK(f.size() == 8);
}

TEST_CASE("normalizer") {
  FeatureSequence a;
  a.dim = 2;
  a.frames = {{0.0, 3.0}, {2.0, 3.0}};
  std::vector<FeatureSequence> v{a};
  const auto st = fit_normalizer(v);
  CHECK(st.mean == std::vector<double>{1.0, 3.0});
  CHECK(st.stddev == std::vector<double>{1.0, kStdFloor});

  const auto z = apply_normalizer(a, st);
  CHECK(z.frames[0][0] == doctest::Approx(-1.0));
  CHECK(z.frames[1][0] == doctest::Approx(1.0));
  for (std::size_t t = 0; t < 2; ++t)
    CHECK(z.frames[t][0] * st.stddev[0] + st.mean[0] == doctest::Approx(a.frames[t][0]).epsilon(1e-9));

  const NormalizerStats id{{0.0, 0.0}, {1.0, 1.0}};
  CHECK(apply_normalizer(a, id).frames == a.frames);

  FeatureSequence b;
  b.dim = 3;
  b.frames = {{1, 2, 3}};
  std::vector<FeatureSequence> mixed{a, b};
  CHECK_THROWS_AS(fit_normalizer(mixed), DimensionMismatch);
  CHECK_THROWS_AS(apply_normalizer(b, st), DimensionMismatch);
}

TEST_CASE("feature dump round trip") {
  FeatureSequence a;
  a.dim = 2;
  a.source = FeatureSource::kOnline;
  a.frames = {{0.1, -3.25}, {1e-17, 2.0 / 3.0}};
  const auto text = write_feature_dump(a);
  CHECK(text.rfind("dim=2 source=online\n", 0) == 0);
  const auto back = read_feature_dump(text);
  CHECK(back.frames == a.frames);
  CHECK(back.source == FeatureSource::kOnline);
  CHECK_THROWS_AS(read_feature_dump("dim=3 source=online\n1 2\n"), ParseError);
}
