// src/preprocess.cc
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

#include "inkrover/preprocess.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "inkrover/error.h"
#include "json.hpp"

namespace inkrover {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double dist(const Point& a, const Point& b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

void PreprocessConfig::validate() const {
  if (!(gap_factor > 0.0)) throw ConfigError("gap_factor must be positive");
  if (!(hook_max_fraction > 0.0)) throw ConfigError("hook_max_fraction must be positive");
  if (!(hook_min_turn > 0.0)) throw ConfigError("hook_min_turn must be positive");
  if (!(digraph_merge_gap > 0.0)) throw ConfigError("digraph_merge_gap must be positive");
  if (!(digraph_merge_distance > 0.0)) throw ConfigError("digraph_merge_distance must be positive");
  double sum = 0.0;
  for (double w : smoothing_kernel) {
    if (!(w >= 0.0)) throw ConfigError("smoothing_kernel weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("smoothing_kernel must sum to 1");
}

PreprocessConfig preprocess_config_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("preprocess config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("preprocess config must be a JSON object");
  static const char* kKeys[] = {"gap_factor",        "smoothing_kernel",  "hook_max_fraction",
                                "hook_min_turn",     "digraph_merge_gap", "digraph_merge_distance"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
      throw ConfigError("unknown preprocess setting \"" + key + "\"");
  }
  PreprocessConfig cfg;
  try {
    cfg.gap_factor = doc.value("gap_factor", cfg.gap_factor);
    if (doc.contains("smoothing_kernel")) {
      auto k = doc["smoothing_kernel"].get<std::vector<double>>();
      if (k.size() != 3) throw ConfigError("smoothing_kernel must have three weights");
      std::copy(k.begin(), k.end(), cfg.smoothing_kernel.begin());
    }
    cfg.hook_max_fraction = doc.value("hook_max_fraction", cfg.hook_max_fraction);
    cfg.hook_min_turn = doc.value("hook_min_turn", cfg.hook_min_turn);
    cfg.digraph_merge_gap = doc.value("digraph_merge_gap", cfg.digraph_merge_gap);
    cfg.digraph_merge_distance = doc.value("digraph_merge_distance", cfg.digraph_merge_distance);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("preprocess config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string preprocess_config_to_json(const PreprocessConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["gap_factor"] = cfg.gap_factor;
  doc["smoothing_kernel"] = cfg.smoothing_kernel;
  doc["hook_max_fraction"] = cfg.hook_max_fraction;
  doc["hook_min_turn"] = cfg.hook_min_turn;
  doc["digraph_merge_gap"] = cfg.digraph_merge_gap;
  doc["digraph_merge_distance"] = cfg.digraph_merge_distance;
  return doc.dump(2) + "\n";
}

double median_point_spacing(const InkTrace& trace) {
  std::vector<double> steps;
  for (const auto& s : trace.strokes) {
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      const double d = dist(s.points[i - 1], s.points[i]);
      if (d > 0.0) steps.push_back(d);
    }
  }
  if (steps.empty()) return 1.0;
  const auto mid = steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2);
  std::nth_element(steps.begin(), mid, steps.end());
  if (steps.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(steps.begin(), mid);
  return 0.5 * (lower + upper);
}

Stroke interpolate_gaps(const Stroke& stroke, const PreprocessConfig& cfg, double spacing) {
  if (stroke.points.size() < 2 || !(spacing > 0.0)) return stroke;
  const double threshold = cfg.gap_factor * spacing;
  Stroke out;
  out.points.reserve(stroke.points.size());
  out.points.push_back(stroke.points.front());
  for (std::size_t i = 1; i < stroke.points.size(); ++i) {
    const Point& a = stroke.points[i - 1];
    const Point& b = stroke.points[i];
    if (dist(a, b) > threshold) {
      // Cell counts per axis are rounded up so the pitch never exceeds
      // `spacing` and the far endpoint sits exactly on the last cell.
      const double dx = b.x - a.x, dy = b.y - a.y;
      const int nx = static_cast<int>(std::ceil(std::abs(dx) / spacing - 1e-9));
      const int ny = static_cast<int>(std::ceil(std::abs(dy) / spacing - 1e-9));
      const GridPoint end{dx < 0 ? -nx : nx, dy < 0 ? -ny : ny};
      const auto cells = bresenham_line({0, 0}, end);
      const double steps = static_cast<double>(cells.size() - 1);
      for (std::size_t k = 1; k + 1 < cells.size(); ++k) {
        const double fx = nx == 0 ? 0.0 : static_cast<double>(std::abs(cells[k].x)) / nx;
        const double fy = ny == 0 ? 0.0 : static_cast<double>(std::abs(cells[k].y)) / ny;
        out.points.push_back({a.x + fx * dx, a.y + fy * dy,
                              a.t + (b.t - a.t) * (static_cast<double>(k) / steps)});
      }
    }
    out.points.push_back(b);
  }
  return out;
}

Stroke smooth_stroke(const Stroke& stroke, const PreprocessConfig& cfg) {
  Stroke out = stroke;
  const auto& k = cfg.smoothing_kernel;
  const auto& in = stroke.points;
  for (std::size_t i = 1; i + 1 < in.size(); ++i) {
    out.points[i].x = k[0] * in[i - 1].x + k[1] * in[i].x + k[2] * in[i + 1].x;
    out.points[i].y = k[0] * in[i - 1].y + k[1] * in[i].y + k[2] * in[i + 1].y;
  }
  return out;
}

std::vector<int> chain_codes(const Stroke& stroke) {
  const auto& p = stroke.points;
  if (p.size() < 2) return {};
  std::vector<int> codes(p.size() - 1, -1);
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    const double dx = p[k + 1].x - p[k].x;
    const double dy = p[k + 1].y - p[k].y;
    if (dx == 0.0 && dy == 0.0) continue;
    const double octant = std::atan2(-dy, dx) / (std::numbers::pi / 4.0);
    codes[k] = static_cast<int>(std::lround(octant) + 8) % 8;
  }
  // Zero-length segments inherit the previous code, or the next one at the
  // start of the stroke.
  int last = -1;
  for (auto& c : codes) {
    if (c < 0) c = last; else last = c;
  }
  int next = -1;
  for (auto it = codes.rbegin(); it != codes.rend(); ++it) {
    if (*it < 0) *it = next; else next = *it;
  }
  for (auto& c : codes) c = std::max(c, 0);
  return codes;
}

namespace {

// Signed turn between two chain codes in octants, in (-4, 4].
int turn(int from, int to) {
  int d = (to - from) % 8;
  if (d <= -4) d += 8;
  if (d > 4) d -= 8;
  return d;
}

struct HookCut {
  std::size_t index = 0;  // suffix: keep [0, index]; prefix: keep [index, n)
  int sharpness = 0;
};

}  // namespace

Stroke dehook_stroke(const Stroke& stroke, const PreprocessConfig& cfg) {
  const auto& p = stroke.points;
  const std::size_t n = p.size();
  if (n < 4) return stroke;
  const auto codes = chain_codes(stroke);
  const std::size_t m = codes.size();
  std::vector<double> len(m);
  for (std::size_t k = 0; k < m; ++k) len[k] = dist(p[k], p[k + 1]);
  const double total = std::accumulate(len.begin(), len.end(), 0.0);
  if (!(total > 0.0)) return stroke;
  const double max_arc = cfg.hook_max_fraction * total;
  const double min_turn = cfg.hook_min_turn / 45.0;

  // Suffix hooks: segments [s, m) removed, body ends with segment s-1.
  HookCut suffix{m, 0};
  {
    double arc = 0.0;
    for (std::size_t s = m - 1; s >= 1; --s) {
      arc += len[s];
      if (arc > max_arc) break;
      const int corner = turn(codes[s - 1], codes[s]);
      if (corner == 0) continue;
      int cumulative = 0, widest = 0;
      for (std::size_t k = s; k < m; ++k) {
        cumulative += turn(codes[k - 1], codes[k]);
        widest = std::max(widest, std::abs(cumulative));
      }
      if (widest <= min_turn) continue;
      if (std::abs(corner) >= suffix.sharpness) suffix = {s, std::abs(corner)};
    }
  }
  // Prefix hooks: segments [0, q) removed, body starts with segment q.
  HookCut prefix{0, 0};
  {
    double arc = 0.0;
    for (std::size_t q = 1; q < m; ++q) {
      arc += len[q - 1];
      if (arc > max_arc) break;
      const int corner = turn(codes[q - 1], codes[q]);
      if (corner == 0) continue;
      int cumulative = 0, widest = 0;
      for (std::size_t k = q; k >= 1; --k) {
        cumulative += turn(codes[k - 1], codes[k]);
        widest = std::max(widest, std::abs(cumulative));
      }
      if (widest <= min_turn) continue;
      if (std::abs(corner) >= prefix.sharpness) prefix = {q, std::abs(corner)};
    }
  }

  std::size_t first = prefix.index;
  std::size_t last = suffix.index;  // inclusive point index
  if (last <= first) {
    // Overlapping cuts would consume the body; keep only the sharper one.
    if (prefix.sharpness >= suffix.sharpness) last = m; else first = 0;
  }
  if (first == 0 && last == m) return stroke;
  Stroke out;
  out.points.assign(p.begin() + static_cast<std::ptrdiff_t>(first),
                    p.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  return out;
}

InkTrace merge_digraph_strokes(const InkTrace& trace, const PreprocessConfig& cfg) {
  InkTrace current = trace;
  while (current.strokes.size() > 1) {
    const double max_dist = cfg.digraph_merge_distance * median_point_spacing(current);
    std::vector<Stroke> merged;
    merged.reserve(current.strokes.size());
    bool changed = false;
    for (const auto& s : current.strokes) {
      if (!merged.empty() && !merged.back().points.empty() && !s.points.empty()) {
        const Point& end = merged.back().points.back();
        const Point& start = s.points.front();
        if (start.t - end.t <= cfg.digraph_merge_gap && dist(end, start) <= max_dist) {
          auto& dst = merged.back().points;
          dst.insert(dst.end(), s.points.begin(), s.points.end());
          changed = true;
          continue;
        }
      }
      merged.push_back(s);
    }
    current.strokes = std::move(merged);
    if (!changed) break;
  }
  return current;
}

InkTrace run_online_pipeline(const InkTrace& trace, const PreprocessConfig& cfg) {
  cfg.validate();
  const double spacing = median_point_spacing(trace);
  InkTrace out = trace;
  for (auto& s : out.strokes) {
    s = dehook_stroke(smooth_stroke(interpolate_gaps(s, cfg, spacing), cfg), cfg);
  }
  return merge_digraph_strokes(out, cfg);
}

// ---------------------------------------------------------------------------
// Offline normalization.

namespace {

struct InkPixel {
  double x, y;  // relative to the image center
};

std::vector<InkPixel> ink_pixels(const RasterImage& image) {
  std::vector<InkPixel> out;
  const double cx = (image.width - 1) / 2.0, cy = (image.height - 1) / 2.0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (image.is_ink(x, y)) out.push_back({x - cx, y - cy});
    }
  }
  return out;
}

// Peak of a unit-bin projection histogram with linear (two-bin) weighting.
double projection_peak(const std::vector<InkPixel>& ink, double cos_a, double sin_a) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> r(ink.size());
  for (std::size_t i = 0; i < ink.size(); ++i) {
    r[i] = ink[i].y * cos_a + ink[i].x * sin_a;
    lo = std::min(lo, r[i]);
    hi = std::max(hi, r[i]);
  }
  std::vector<double> hist(static_cast<std::size_t>(std::ceil(hi - lo)) + 2, 0.0);
  for (double v : r) {
    const double pos = v - lo;
    const auto b = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(b);
    hist[b] += 1.0 - frac;
    hist[b + 1] += frac;
  }
  return *std::max_element(hist.begin(), hist.end());
}

// Grows the canvas symmetrically so every forward-mapped ink pixel fits.
void grown_canvas(const RasterImage& image, const std::vector<InkPixel>& mapped, int& w, int& h) {
  double half_w = 0.0, half_h = 0.0;
  for (const auto& p : mapped) {
    half_w = std::max(half_w, std::abs(p.x));
    half_h = std::max(half_h, std::abs(p.y));
  }
  const int grow_x = std::max(0, static_cast<int>(std::ceil(half_w + 0.5 - image.width / 2.0)));
  const int grow_y = std::max(0, static_cast<int>(std::ceil(half_h + 0.5 - image.height / 2.0)));
  w = image.width + 2 * grow_x;
  h = image.height + 2 * grow_y;
}

template <typename Inverse>
RasterImage resample(const RasterImage& image, int w, int h, Inverse inverse) {
  RasterImage out(w, h);
  const double cx = (image.width - 1) / 2.0, cy = (image.height - 1) / 2.0;
  const double ocx = (w - 1) / 2.0, ocy = (h - 1) / 2.0;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double sx, sy;
      inverse(u - ocx, v - ocy, sx, sy);
      const int x = static_cast<int>(std::floor(sx + cx + 0.5));
      const int y = static_cast<int>(std::floor(sy + cy + 0.5));
      if (image.in_bounds(x, y)) out.at(u, v) = image.at(x, y);
    }
  }
  return out;
}

}  // namespace

BaselineEstimate estimate_baseline(const RasterImage& image) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(image.height), 0);
  std::size_t total = 0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (image.is_ink(x, y)) {
        ++rows[static_cast<std::size_t>(y)];
        ++total;
      }
    }
  }
  if (total == 0) throw BlankImage("cannot estimate a baseline on a blank image");

  BaselineEstimate est;
  const auto peak = std::max_element(rows.begin(), rows.end());  // first maximum = lowest row
  est.row = static_cast<int>(peak - rows.begin());
  est.confidence = static_cast<double>(*peak) / static_cast<double>(total);

  // Sweep order 0, -0.5, +0.5, -1, ... so ties resolve toward the smallest
  // correction.
  const auto ink = ink_pixels(image);
  double best_peak = -1.0;
  for (int k = 0; k <= 30; ++k) {
    for (int sign : {-1, 1}) {
      if (k == 0 && sign == 1) continue;
      const double deg = sign * 0.5 * k;
      const double peak_mass = projection_peak(ink, std::cos(deg * kDegToRad),
                                               std::sin(deg * kDegToRad));
      if (peak_mass > best_peak) {
        best_peak = peak_mass;
        est.skew_deg = deg;
      }
    }
  }
  return est;
}

RasterImage rotate_image(const RasterImage& image, double deg) {
  if (deg == 0.0) return image;
  const double c = std::cos(deg * kDegToRad), s = std::sin(deg * kDegToRad);
  auto mapped = ink_pixels(image);
  for (auto& p : mapped) p = {p.x * c - p.y * s, p.x * s + p.y * c};
  int w, h;
  grown_canvas(image, mapped, w, h);
  return resample(image, w, h, [&](double u, double v, double& x, double& y) {
    x = u * c + v * s;
    y = -u * s + v * c;
  });
}

RasterImage correct_skew(const RasterImage& image, double skew_deg) {
  // Counterclockwise by -skew is clockwise by +skew.
  return rotate_image(image, skew_deg);
}

RasterImage shear_image(const RasterImage& image, double deg) {
  if (deg == 0.0) return image;
  const double k = std::tan(deg * kDegToRad);
  auto mapped = ink_pixels(image);
  for (auto& p : mapped) p.x -= p.y * k;
  int w, h;
  grown_canvas(image, mapped, w, h);
  // Rows keep their height, so only the width may change.
  h = image.height;
  return resample(image, w, h, [&](double u, double v, double& x, double& y) {
    x = u + v * k;
    y = v;
  });
}

namespace {
constexpr double kSlantBlurSigma = 2.0;
constexpr int kHistSigma = 4;  // degrees
constexpr int kRefineSteps = 10;
constexpr double kRefineStep = 0.1;
}  // namespace

double estimate_slant(const RasterImage& image) {
  if (image.ink_count() == 0) throw BlankImage("cannot estimate slant on a blank image");
  const int w = image.width, h = image.height;
  // A Gaussian blur turns the staircase edges of sheared strokes into
  // smooth gradients.
  constexpr int kRadius = 6;
  const std::array<double, 2 * kRadius + 1> kernel = [] {
    std::array<double, 2 * kRadius + 1> g{};
    double sum = 0.0;
    for (int i = -kRadius; i <= kRadius; ++i)
      sum += g[static_cast<std::size_t>(i + kRadius)] = std::exp(-0.5 * i * i / (kSlantBlurSigma * kSlantBlurSigma));
    for (auto& v : g) v /= sum;
    return g;
  }();
  const int pad = kRadius + 2;
  const int pw = w + 2 * pad, ph = h + 2 * pad;
  std::vector<double> src(static_cast<std::size_t>(pw) * ph, 0.0), tmp(src.size(), 0.0),
      blur(src.size(), 0.0);
  auto idx = [pw](int x, int y) { return static_cast<std::size_t>(y) * pw + x; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) src[idx(x + pad, y + pad)] = image.at(x, y) / 255.0;
  for (int y = 0; y < ph; ++y)
    for (int x = kRadius; x < pw - kRadius; ++x) {
      double acc = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i)
        acc += kernel[static_cast<std::size_t>(i + kRadius)] * src[idx(x + i, y)];
      tmp[idx(x, y)] = acc;
    }
  for (int y = kRadius; y < ph - kRadius; ++y)
    for (int x = 0; x < pw; ++x) {
      double acc = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i)
        acc += kernel[static_cast<std::size_t>(i + kRadius)] * tmp[idx(x, y + i)];
      blur[idx(x, y)] = acc;
    }

  struct Sample {
    double angle, weight;
  };
  std::vector<Sample> samples;
  double max_mag = 0.0;
  for (int y = 1; y < ph - 1; ++y) {
    for (int x = 1; x < pw - 1; ++x) {
      const double gx = (blur[idx(x + 1, y - 1)] + 2 * blur[idx(x + 1, y)] + blur[idx(x + 1, y + 1)]) -
                        (blur[idx(x - 1, y - 1)] + 2 * blur[idx(x - 1, y)] + blur[idx(x - 1, y + 1)]);
      const double gy = (blur[idx(x - 1, y + 1)] + 2 * blur[idx(x, y + 1)] + blur[idx(x + 1, y + 1)]) -
                        (blur[idx(x - 1, y - 1)] + 2 * blur[idx(x, y - 1)] + blur[idx(x + 1, y - 1)]);
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      // The gradient is normal to the stroke edge: a stroke leaning right by
      // phi has its gradient at phi (mod 180) in image coordinates.
      double a = std::atan2(gy, gx) / kDegToRad;
      if (a > 90.0) a -= 180.0;
      if (a <= -90.0) a += 180.0;
      max_mag = std::max(max_mag, mag);
      if (std::abs(a) <= 45.0) samples.push_back({a, mag});
    }
  }
  const double floor_mag = 0.1 * max_mag;
  std::array<double, 91> hist{};  // 1 degree bins over [-45, 45]
  for (const auto& s : samples) {
    if (s.weight < floor_mag) continue;
    hist[static_cast<std::size_t>(std::lround(s.angle + 45.0))] += s.weight;
  }
  std::array<double, 91> smooth{};
  for (int i = 0; i < 91; ++i)
    for (int j = std::max(0, i - 3 * kHistSigma); j <= std::min(90, i + 3 * kHistSigma); ++j)
      smooth[static_cast<std::size_t>(i)] +=
          hist[static_cast<std::size_t>(j)] * std::exp(-0.5 * (i - j) * (i - j) / double(kHistSigma * kHistSigma));
  const auto mode = std::max_element(smooth.begin(), smooth.end()) - smooth.begin();
  if (smooth[static_cast<std::size_t>(mode)] <= 0.0) return 0.0;
  const double mode_deg = static_cast<double>(mode) - 45.0;

  // The upright shear is the one whose column projection is most
  // concentrated. The histogram mode competes with a whole-degree sweep,
  // and the winner is refined in tenths.
  std::vector<std::pair<double, double>> ink;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (image.is_ink(x, y)) ink.emplace_back(x, y - 0.5 * (h - 1));
  std::vector<double> bins;
  auto sharpness = [&](double deg) {
    const double tan_a = std::tan(deg * kDegToRad);
    const double lo = -0.5 * h - 1.0;
    bins.assign(static_cast<std::size_t>(w + h + 4), 0.0);
    for (const auto& [x, y] : ink) {
      const double pos = x + y * tan_a - lo * std::abs(tan_a);
      const double base = std::floor(pos);
      const double frac = pos - base;
      const auto i = static_cast<std::size_t>(base);
      bins[i] += 1.0 - frac;
      bins[i + 1] += frac;
    }
    double score = 0.0;
    for (double v : bins) score += v * v;
    return score;
  };
  double best = mode_deg, best_score = sharpness(mode_deg);
  for (int deg = -45; deg <= 45; ++deg) {
    const double score = sharpness(deg);
    if (score > best_score) {
      best_score = score;
      best = deg;
    }
  }
  const double coarse = best;
  for (int k = -kRefineSteps; k <= kRefineSteps; ++k) {
    const double cand = coarse + k * kRefineStep;
    if (k == 0 || std::abs(cand) > 45.0) continue;
    const double score = sharpness(cand);
    if (score > best_score) {
      best_score = score;
      best = cand;
    }
  }
  return best;
}

RasterImage correct_slant(const RasterImage& image) {
  const double slant = estimate_slant(image);
  if (std::abs(slant) < 1e-9) return image;
  return shear_image(image, -slant);
}

}  // namespace inkrover
