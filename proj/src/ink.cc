// src/ink.cc
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

#include "inkrover/ink.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "inkrover/error.h"
#include "json.hpp"

namespace inkrover {

using ordered_json = nlohmann::ordered_json;

std::size_t InkTrace::num_points() const {
  std::size_t n = 0;
  for (const auto& s : strokes) n += s.points.size();
  return n;
}

RasterImage::RasterImage(int w, int h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

std::size_t RasterImage::ink_count() const {
  return static_cast<std::size_t>(
      std::count_if(pixels.begin(), pixels.end(), [](std::uint8_t p) { return p != 0; }));
}

namespace {

std::string where(int stroke, int point) {
  std::ostringstream os;
  if (stroke >= 0) os << "stroke " << stroke;
  if (point >= 0) os << (stroke >= 0 ? ", " : "") << "point " << point;
  return os.str();
}

}  // namespace

std::vector<Violation> validate_trace(const InkTrace& trace) {
  std::vector<Violation> out;
  if (trace.sample_id.empty()) out.push_back({-1, -1, "sample_id is empty"});
  if (trace.strokes.empty()) out.push_back({-1, -1, "trace has no strokes"});
  double prev_start = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < trace.strokes.size(); ++s) {
    const auto& pts = trace.strokes[s].points;
    const int si = static_cast<int>(s);
    if (pts.empty()) {
      out.push_back({si, -1, "stroke has no points"});
      continue;
    }
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const Point& pt = pts[p];
      const int pi = static_cast<int>(p);
      if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) {
        out.push_back({si, pi, "non-finite coordinate"});
      }
      if (!std::isfinite(pt.t) || pt.t < 0.0) {
        out.push_back({si, pi, "timestamp must be finite and non-negative"});
      }
      if (p > 0 && pt.t < pts[p - 1].t) {
        out.push_back({si, pi, "timestamp decreases within stroke"});
      }
    }
    if (pts.front().t < prev_start) {
      out.push_back({si, 0, "stroke starts before the previous stroke"});
    }
    prev_start = pts.front().t;
  }
  return out;
}

InkTrace load_ink(std::string_view bytes) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("ink document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("ink document must be a JSON object");
  if (!doc.contains("version") || !doc["version"].is_number_integer() || doc["version"] != 1) {
    throw ParseError("ink document must declare \"version\": 1");
  }
  if (!doc.contains("sample_id") || !doc["sample_id"].is_string()) {
    throw ParseError("ink document is missing string \"sample_id\"");
  }
  if (!doc.contains("strokes") || !doc["strokes"].is_array()) {
    throw ParseError("ink document is missing array \"strokes\"");
  }

  InkTrace trace;
  trace.sample_id = doc["sample_id"].get<std::string>();
  if (doc.contains("transcript") && !doc["transcript"].is_null()) {
    const auto& tr = doc["transcript"];
    if (!tr.is_array()) throw ParseError("\"transcript\" must be an array or null");
    std::vector<std::string> words;
    for (const auto& w : tr) {
      if (!w.is_string()) throw ParseError("\"transcript\" entries must be strings");
      words.push_back(w.get<std::string>());
    }
    trace.transcript = std::move(words);
  }

  const auto& strokes = doc["strokes"];
  for (std::size_t s = 0; s < strokes.size(); ++s) {
    const auto& js = strokes[s];
    const int si = static_cast<int>(s);
    if (!js.is_object() || !js.contains("points") || !js["points"].is_array()) {
      throw ParseError(where(si, -1) + ": expected {\"points\": [...]}");
    }
    Stroke stroke;
    const auto& pts = js["points"];
    stroke.points.reserve(pts.size());
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const auto& jp = pts[p];
      if (!jp.is_array() || jp.size() != 3 || !jp[0].is_number() || !jp[1].is_number() ||
          !jp[2].is_number()) {
        throw ParseError(where(si, static_cast<int>(p)) + ": expected [x, y, t]");
      }
      stroke.points.push_back({jp[0].get<double>(), jp[1].get<double>(), jp[2].get<double>()});
    }
    trace.strokes.push_back(std::move(stroke));
  }

  auto violations = validate_trace(trace);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::string loc = where(v.stroke, v.point);
    throw InvariantError((loc.empty() ? "" : loc + ": ") + v.message);
  }
  return trace;
}

std::string save_ink(const InkTrace& trace) {
  ordered_json doc;
  doc["version"] = 1;
  doc["sample_id"] = trace.sample_id;
  if (trace.transcript) {
    doc["transcript"] = *trace.transcript;
  } else {
    doc["transcript"] = nullptr;
  }
  ordered_json strokes = ordered_json::array();
  for (const auto& s : trace.strokes) {
    ordered_json pts = ordered_json::array();
    for (const auto& p : s.points) pts.push_back({p.x, p.y, p.t});
    strokes.push_back({{"points", std::move(pts)}});
  }
  doc["strokes"] = std::move(strokes);
  return doc.dump() + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

InkTrace read_ink_file(const std::string& path) { return load_ink(read_file(path)); }

void write_ink_file(const std::string& path, const InkTrace& trace) {
  write_file(path, save_ink(trace));
}

std::vector<GridPoint> bresenham_line(GridPoint from, GridPoint to) {
  const int dx = std::abs(to.x - from.x);
  const int dy = std::abs(to.y - from.y);
  const int sx = to.x >= from.x ? 1 : -1;
  const int sy = to.y >= from.y ? 1 : -1;
  std::vector<GridPoint> out;
  out.reserve(static_cast<std::size_t>(std::max(dx, dy)) + 1);

  const bool x_major = dx >= dy;
  const int major = x_major ? dx : dy;
  const int minor = x_major ? dy : dx;
  int decision = 2 * minor - major;
  int x = from.x;
  int y = from.y;
  for (int i = 0; i <= major; ++i) {
    out.push_back({x, y});
    if (decision > 0) {
      if (x_major) y += sy; else x += sx;
      decision -= 2 * major;
    }
    decision += 2 * minor;
    if (x_major) x += sx; else y += sy;
  }
  return out;
}

namespace {

int to_pixel(double v, double scale) { return static_cast<int>(std::floor(v * scale + 0.5)); }

}  // namespace

RasterImage render_offline(const InkTrace& trace, double scale, int pen_width, int margin) {
  if (!(scale > 0.0)) throw InvariantError("render scale must be positive");
  if (pen_width < 1) throw InvariantError("pen width must be at least 1");
  if (margin < 0) throw InvariantError("margin must be non-negative");

  int min_x = std::numeric_limits<int>::max(), min_y = min_x;
  int max_x = std::numeric_limits<int>::min(), max_y = max_x;
  for (const auto& s : trace.strokes) {
    for (const auto& p : s.points) {
      const int px = to_pixel(p.x, scale), py = to_pixel(p.y, scale);
      min_x = std::min(min_x, px);
      max_x = std::max(max_x, px);
      min_y = std::min(min_y, py);
      max_y = std::max(max_y, py);
    }
  }
  if (min_x > max_x) throw EmptyTrace("trace has no drawable points");

  const int lo = (pen_width - 1) / 2;  // brush extent left/up of the center
  RasterImage img(max_x - min_x + pen_width + 2 * margin, max_y - min_y + pen_width + 2 * margin);
  auto stamp = [&](GridPoint c) {
    const int cx = c.x - min_x + margin + lo;
    const int cy = c.y - min_y + margin + lo;
    for (int dy = -lo; dy < pen_width - lo; ++dy) {
      for (int dx = -lo; dx < pen_width - lo; ++dx) img.at(cx + dx, cy + dy) = 255;
    }
  };
  for (const auto& s : trace.strokes) {
    if (s.points.empty()) continue;
    GridPoint prev{to_pixel(s.points.front().x, scale), to_pixel(s.points.front().y, scale)};
    stamp(prev);
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      GridPoint cur{to_pixel(s.points[i].x, scale), to_pixel(s.points[i].y, scale)};
      for (const auto& g : bresenham_line(prev, cur)) stamp(g);
      prev = cur;
    }
  }
  return img;
}

std::string to_pgm(const RasterImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

RasterImage from_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError("malformed PGM header");
    return std::stoi(std::string(bytes.substr(start, pos - start)));
  };
  if (bytes.substr(0, 2) != "P5") throw ParseError("not a binary PGM (P5) image");
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w <= 0 || h <= 0 || maxval != 255) throw ParseError("unsupported PGM geometry or depth");
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < pos + n) throw ParseError("truncated PGM raster");
  RasterImage img(w, h);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), n, img.pixels.begin());
  return img;
}

void write_pgm_file(const std::string& path, const RasterImage& image) {
  write_file(path, to_pgm(image));
}

RasterImage read_pgm_file(const std::string& path) { return from_pgm(read_file(path)); }

}  // namespace inkrover
