// include/inkrover/preprocess.h
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

#ifndef INKROVER_PREPROCESS_H_
#define INKROVER_PREPROCESS_H_

#include <array>
#include <string>
#include <vector>

#include "inkrover/ink.h"

namespace inkrover {

struct PreprocessConfig {
  /// A gap is filled when consecutive points are farther apart than
  /// gap_factor * median point spacing.
  double gap_factor = 2.0;
  /// Weights for (previous, current, next).
  std::array<double, 3> smoothing_kernel{0.25, 0.5, 0.25};
  /// Longest hook, as a fraction of the stroke's arc length.
  double hook_max_fraction = 0.10;
  /// Minimum net direction change (degrees) across a hook boundary.
  double hook_min_turn = 90.0;
  /// Milliseconds between the end of one stroke and the start of the next.
  double digraph_merge_gap = 150.0;
  /// Largest endpoint distance for merging, in multiples of the median
  /// point spacing.
  double digraph_merge_distance = 1.0;

  /// Throws ConfigError when a threshold is non-positive or the kernel is
  /// not a convex combination.
  void validate() const;
};

PreprocessConfig preprocess_config_from_json(std::string_view text);
std::string preprocess_config_to_json(const PreprocessConfig& cfg);

/// Median Euclidean distance between consecutive points of the same stroke,
/// over the whole trace. Zero-length steps are ignored; returns 1.0 when the
/// trace has no usable step.
double median_point_spacing(const InkTrace& trace);

/// Fills gaps longer than cfg.gap_factor * spacing with the interior cells of
/// the Bresenham line between the two endpoints. The grid is anchored at the
/// earlier point and has a pitch of at most `spacing` per axis, stretched so
/// the later point falls on a grid corner. Timestamps are interpolated
/// linearly along the major axis. Strokes with fewer than two points come
/// back unchanged.
Stroke interpolate_gaps(const Stroke& stroke, const PreprocessConfig& cfg, double spacing);

/// Replaces each interior point by the kernel-weighted average of itself and
/// its two neighbours.
Stroke smooth_stroke(const Stroke& stroke, const PreprocessConfig& cfg);

/// 8-direction Freeman chain code of each segment, 0 = +x, counting
/// counterclockwise on screen (2 = up). Zero-length segments repeat the
/// neighbouring code.
std::vector<int> chain_codes(const Stroke& stroke);

/// Removes a hook at either end of the stroke. A hook is a prefix/suffix of
/// at most hook_max_fraction of the arc length that starts at a chain-code
/// corner and whose net direction change, measured from the adjacent body
/// segment, exceeds hook_min_turn. Among candidate corners the sharpest one
/// wins, and among equally sharp corners the longest hook. Strokes shorter
/// than four points are returned unchanged.
Stroke dehook_stroke(const Stroke& stroke, const PreprocessConfig& cfg);

/// Concatenates consecutive strokes that are close in both time and space,
/// repeated until no further merge applies.
InkTrace merge_digraph_strokes(const InkTrace& trace, const PreprocessConfig& cfg);

/// interpolate -> smooth -> dehook per stroke, then digraph merging.
InkTrace run_online_pipeline(const InkTrace& trace, const PreprocessConfig& cfg);

struct BaselineEstimate {
  int row = 0;
  /// Counterclockwise on screen; a line falling to the right is negative.
  double skew_deg = 0.0;
  double confidence = 0.0;
};

/// Baseline row from the horizontal projection and skew from a +-15 degree
/// sweep at 0.5 degree steps.
BaselineEstimate estimate_baseline(const RasterImage& image);

/// Rotates the image content by `deg` degrees clockwise on screen about the
/// image center, using nearest-neighbour sampling. The canvas grows (keeping
/// the center fixed) only as needed to hold the rotated ink.
RasterImage rotate_image(const RasterImage& image, double deg);

/// Undoes a measured skew: rotation by -skew_deg counterclockwise.
RasterImage correct_skew(const RasterImage& image, double skew_deg);

/// Applies x' = x + (y_c - y) * tan(deg) about the center row y_c; positive
/// angles lean verticals to the right. Canvas grows as needed.
RasterImage shear_image(const RasterImage& image, double deg);

/// Slant of near-vertical strokes in degrees (positive leans right): the
/// shear within +-45 degrees that best concentrates the column projection
/// of the ink. Candidates are the mode of a magnitude-weighted
/// gradient-orientation histogram and every whole degree; the winner is
/// refined to 0.1 degree.
double estimate_slant(const RasterImage& image);

/// Shears the image so that the dominant near-vertical stroke angle becomes
/// upright.
RasterImage correct_slant(const RasterImage& image);

}  // namespace inkrover

#endif  // INKROVER_PREPROCESS_H_
