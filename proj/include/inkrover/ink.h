// include/inkrover/ink.h
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

#ifndef INKROVER_INK_H_
#define INKROVER_INK_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace inkrover {

/// A pen sample. Coordinates are abstract units with y growing downwards;
/// t is milliseconds since the start of the trace.
struct Point {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Pen-down to pen-up segment.
struct Stroke {
  std::vector<Point> points;

  friend bool operator==(const Stroke&, const Stroke&) = default;
};

/// Online representation of one text line.
struct InkTrace {
  std::string sample_id;
  std::vector<Stroke> strokes;
  std::optional<std::vector<std::string>> transcript;

  std::size_t num_points() const;
  friend bool operator==(const InkTrace&, const InkTrace&) = default;
};

/// Offline representation: row-major 8-bit intensities, 0 = background,
/// 255 = ink.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RasterImage() = default;
  RasterImage(int w, int h);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool is_ink(int x, int y) const { return at(x, y) != 0; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t ink_count() const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

struct Violation {
  int stroke = -1;  // -1 when the violation concerns the whole trace
  int point = -1;   // -1 when the violation concerns a whole stroke
  std::string message;
};

std::vector<Violation> validate_trace(const InkTrace& trace);

/// Parses the JSON ink document. Throws ParseError on malformed input and
/// InvariantError when the decoded trace violates an InkTrace invariant.
InkTrace load_ink(std::string_view bytes);
std::string save_ink(const InkTrace& trace);

InkTrace read_ink_file(const std::string& path);
void write_ink_file(const std::string& path, const InkTrace& trace);

struct GridPoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Integer Bresenham line from `from` to `to`, both endpoints included.
/// The minor coordinate only advances when the decision term is strictly
/// positive, so exact half-way cases stay on the current row/column.
std::vector<GridPoint> bresenham_line(GridPoint from, GridPoint to);

/// Draws every stroke with a square brush of `pen_width` pixels. Point
/// (x, y) lands on pixel round(x * scale) relative to the ink bounding box,
/// which is then padded by `margin` pixels on every side.
RasterImage render_offline(const InkTrace& trace, double scale, int pen_width, int margin);

/// Binary PGM (P5) serialization.
std::string to_pgm(const RasterImage& image);
RasterImage from_pgm(std::string_view bytes);
void write_pgm_file(const std::string& path, const RasterImage& image);
RasterImage read_pgm_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace inkrover

#endif  // INKROVER_INK_H_
