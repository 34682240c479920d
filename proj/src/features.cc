// src/features.cc
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

#include "inkrover/features.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "inkrover/error.h"

namespace inkrover {

std::string_view to_string(FeatureSource source) {
  return source == FeatureSource::kOnline ? "online" : "offline";
}

FeatureSource feature_source_from_string(std::string_view name) {
  if (name == "online") return FeatureSource::kOnline;
  if (name == "offline") return FeatureSource::kOffline;
  throw ParseError("unknown feature source '" + std::string(name) + "'");
}

void FeatureSequence::check() const {
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != dim) {
      throw DimensionMismatch("frame " + std::to_string(t) + " has dimension " +
                              std::to_string(frames[t].size()) + ", expected " +
                              std::to_string(dim));
    }
  }
}

FeatureSequence extract_offline_windows(const RasterImage& image, int window_width, int step) {
  if (window_width < 1 || step < 1) throw ConfigError("window width and step must be >= 1");
  if (image.ink_count() == 0) throw BlankImage("no ink to extract features from");

  FeatureSequence seq;
  seq.dim = kOfflineDim;
  seq.source = FeatureSource::kOffline;
  const int positions = image.width - window_width + 1;
  if (positions <= 0) return seq;

  for (int x0 = 0; x0 < image.width - window_width + 1; x0 += step) {
    FeatureVector f(kOfflineDim, 0.0);
    double count = 0.0, sum = 0.0, sum_sq = 0.0, transitions = 0.0;
    int top = image.height, bottom = -1;
    for (int x = x0; x < x0 + window_width; ++x) {
      bool prev = false;
      for (int y = 0; y < image.height; ++y) {
        const bool ink = image.is_ink(x, y);
        if (ink) {
          count += 1.0;
          sum += y;
          sum_sq += static_cast<double>(y) * y;
          top = std::min(top, y);
          bottom = std::max(bottom, y);
        }
        if (ink != prev) transitions += 1.0;
        prev = ink;
      }
      if (prev) transitions += 1.0;  // ink touching the lower border
    }
    if (count > 0.0) {
      const double mean = sum / count;
      f[kInkCount] = count;
      f[kCenterOfGravity] = mean;
      f[kSecondMoment] = std::max(0.0, sum_sq / count - mean * mean);
      f[kTopContour] = top;
      f[kBottomContour] = bottom;
      f[kInkFractionBetweenContours] = count / (static_cast<double>(window_width) * (bottom - top + 1));
      f[kTransitions] = transitions;
    }
    seq.frames.push_back(std::move(f));
  }

  const std::size_t n = seq.frames.size();
  auto has_ink = [&](std::size_t i) { return seq.frames[i][kInkCount] > 0.0; };
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_ink(i)) continue;
    const std::size_t a = (i > 0 && has_ink(i - 1)) ? i - 1 : i;
    const std::size_t b = (i + 1 < n && has_ink(i + 1)) ? i + 1 : i;
    if (a == b) continue;
    const double span = static_cast<double>(b - a);
    seq.frames[i][kTopSlope] = (seq.frames[b][kTopContour] - seq.frames[a][kTopContour]) / span;
    seq.frames[i][kBottomSlope] =
        (seq.frames[b][kBottomContour] - seq.frames[a][kBottomContour]) / span;
  }
  return seq;
}

FeatureSequence shift_to_baseline(FeatureSequence seq, double baseline_row) {
  if (seq.source != FeatureSource::kOffline || seq.dim != kOfflineDim) {
    throw DimensionMismatch("baseline shift applies to offline window features only");
  }
  for (auto& f : seq.frames) {
    if (f[kInkCount] <= 0.0) continue;
    f[kCenterOfGravity] -= baseline_row;
    f[kTopContour] -= baseline_row;
    f[kBottomContour] -= baseline_row;
  }
  return seq;
}

std::vector<Point> resample_stroke(const Stroke& stroke, double distance) {
  std::vector<Point> out;
  const auto& p = stroke.points;
  if (p.empty()) return out;
  out.push_back(p.front());
  double travelled = 0.0;  // arc length at p[i-1]
  double next = distance;  // arc length of the next sample
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double seg = std::hypot(p[i].x - p[i - 1].x, p[i].y - p[i - 1].y);
    if (seg <= 0.0) continue;
    const double tol = 1e-9 * std::max(1.0, next);
    while (next <= travelled + seg + tol) {
      const double u = std::min(1.0, (next - travelled) / seg);
      out.push_back({p[i - 1].x + u * (p[i].x - p[i - 1].x), p[i - 1].y + u * (p[i].y - p[i - 1].y),
                     p[i - 1].t + u * (p[i].t - p[i - 1].t)});
      next += distance;
    }
    travelled += seg;
  }
  return out;
}

FeatureSequence extract_online_features(const InkTrace& trace, double resample_distance) {
  if (!(resample_distance > 0.0)) throw ConfigError("resample distance must be positive");
  if (trace.num_points() < 2) throw DegenerateTrace("online features need at least two points");

  struct Sample {
    double x, y;
    bool pen_down;
  };
  std::vector<Sample> samples;
  for (const auto& stroke : trace.strokes) {
    auto pts = resample_stroke(stroke, resample_distance);
    if (pts.empty()) continue;
    if (!samples.empty()) {
      // Pen-up bridge from the previous stroke end to this stroke start.
      const Sample from = samples.back();
      const double dx = pts.front().x - from.x, dy = pts.front().y - from.y;
      const double gap = std::hypot(dx, dy);
      const int n = static_cast<int>(std::ceil(gap / resample_distance - 1e-9));
      for (int k = 1; k < n; ++k) {
        const double u = k * resample_distance / gap;
        samples.push_back({from.x + u * dx, from.y + u * dy, false});
      }
    }
    for (const auto& p : pts) samples.push_back({p.x, p.y, true});
  }
  if (samples.size() < 2) throw DegenerateTrace("trace resamples to fewer than two frames");

  double y_min = samples.front().y, y_max = y_min;
  std::vector<double> down_y;
  for (const auto& s : samples) {
    y_min = std::min(y_min, s.y);
    y_max = std::max(y_max, s.y);
    if (s.pen_down) down_y.push_back(s.y);
  }
  const double height = std::max(y_max - y_min, resample_distance);
  std::nth_element(down_y.begin(), down_y.begin() + static_cast<std::ptrdiff_t>(down_y.size() / 2),
                   down_y.end());
  const double baseline = down_y[down_y.size() / 2];

  FeatureSequence seq;
  seq.dim = kOnlineDim;
  seq.source = FeatureSource::kOnline;
  const std::size_t n = samples.size();
  double x_sum = 0.0;
  double last_sin = 0.0, last_cos = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector f(kOnlineDim, 0.0);
    x_sum += samples[i].x;
    f[kXOffset] = (samples[i].x - x_sum / static_cast<double>(i + 1)) / height;
    f[kYBaseline] = (samples[i].y - baseline) / height;

    const std::size_t a = i > 0 ? i - 1 : i;
    const std::size_t b = i + 1 < n ? i + 1 : i;
    const double dx = samples[b].x - samples[a].x;
    const double dy = samples[b].y - samples[a].y;
    const double len = std::hypot(dx, dy);
    if (len > 0.0) {
      last_cos = dx / len;
      last_sin = -dy / len;  // y grows downwards on screen
    }
    f[kDirSin] = last_sin;
    f[kDirCos] = last_cos;

    if (i > 0 && i + 1 < n) {
      const double a1 = std::atan2(samples[i].y - samples[i - 1].y, samples[i].x - samples[i - 1].x);
      const double a2 = std::atan2(samples[i + 1].y - samples[i].y, samples[i + 1].x - samples[i].x);
      double d = a2 - a1;
      while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
      while (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
      f[kCurvature] = -d / resample_distance;  // counterclockwise on screen is positive
    }
    f[kPenDown] = samples[i].pen_down ? 1.0 : 0.0;
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

NormalizerStats fit_normalizer(std::span<const FeatureSequence> sequences) {
  if (sequences.empty()) throw DimensionMismatch("cannot fit a normalizer on zero sequences");
  const std::size_t dim = sequences.front().dim;
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  double n = 0.0;
  for (const auto& seq : sequences) {
    if (seq.dim != dim) {
      throw DimensionMismatch("normalizer inputs mix dimensions " + std::to_string(dim) + " and " +
                              std::to_string(seq.dim));
    }
    seq.check();
    for (const auto& f : seq.frames) {
      for (std::size_t d = 0; d < dim; ++d) sum[d] += f[d];
    }
    n += static_cast<double>(seq.frames.size());
  }
  NormalizerStats stats{std::vector<double>(dim, 0.0), std::vector<double>(dim, kStdFloor)};
  if (n == 0.0) return stats;
  for (std::size_t d = 0; d < dim; ++d) stats.mean[d] = sum[d] / n;
  // Two-pass variance.
  for (const auto& seq : sequences) {
    for (const auto& f : seq.frames) {
      for (std::size_t d = 0; d < dim; ++d) sum_sq[d] += (f[d] - stats.mean[d]) * (f[d] - stats.mean[d]);
    }
  }
  for (std::size_t d = 0; d < dim; ++d) stats.stddev[d] = std::max(kStdFloor, std::sqrt(sum_sq[d] / n));
  return stats;
}

FeatureSequence apply_normalizer(const FeatureSequence& seq, const NormalizerStats& stats) {
  if (stats.mean.size() != seq.dim || stats.stddev.size() != seq.dim) {
    throw DimensionMismatch("normalizer has dimension " + std::to_string(stats.mean.size()) +
                            ", sequence has " + std::to_string(seq.dim));
  }
  seq.check();
  FeatureSequence out = seq;
  for (auto& f : out.frames) {
    for (std::size_t d = 0; d < seq.dim; ++d) f[d] = (f[d] - stats.mean[d]) / stats.stddev[d];
  }
  return out;
}

std::string write_feature_dump(const FeatureSequence& seq) {
  std::string out = "dim=" + std::to_string(seq.dim) + " source=" + std::string(to_string(seq.source)) + "\n";
  char buf[32];
  for (const auto& f : seq.frames) {
    for (std::size_t d = 0; d < f.size(); ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", f[d]);
      if (d > 0) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

FeatureSequence read_feature_dump(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) throw ParseError("feature dump is empty");
  FeatureSequence seq;
  {
    std::istringstream hs(header);
    std::string dim_tok, src_tok;
    hs >> dim_tok >> src_tok;
    if (dim_tok.rfind("dim=", 0) != 0 || src_tok.rfind("source=", 0) != 0) {
      throw ParseError("feature dump header must read 'dim=<d> source=<online|offline>'");
    }
    seq.dim = std::stoul(dim_tok.substr(4));
    seq.source = feature_source_from_string(src_tok.substr(7));
  }
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    FeatureVector f;
    double v;
    while (ls >> v) f.push_back(v);
    if (!ls.eof()) throw ParseError("feature dump line " + std::to_string(line_no) + ": bad number");
    if (f.size() != seq.dim) {
      throw ParseError("feature dump line " + std::to_string(line_no) + " has " +
                              std::to_string(f.size()) + " values");
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace inkrover
