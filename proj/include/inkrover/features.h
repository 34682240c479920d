// include/inkrover/features.h
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

#ifndef INKROVER_FEATURES_H_
#define INKROVER_FEATURES_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inkrover/ink.h"

namespace inkrover {

enum class FeatureSource { kOnline, kOffline };

std::string_view to_string(FeatureSource source);
FeatureSource feature_source_from_string(std::string_view name);

using FeatureVector = std::vector<double>;

/// Observation sequence fed to the HMMs.
struct FeatureSequence {
  std::vector<FeatureVector> frames;
  std::size_t dim = 0;
  FeatureSource source = FeatureSource::kOffline;

  std::size_t size() const { return frames.size(); }
  /// Throws DimensionMismatch if a frame disagrees with `dim`.
  void check() const;
};

/// Offline frame layout.
enum OfflineFeature : std::size_t {
  kInkCount = 0,
  kCenterOfGravity,
  kSecondMoment,      // central second moment of ink rows
  kTopContour,
  kBottomContour,
  kTopSlope,
  kBottomSlope,
  kInkFractionBetweenContours,
  kTransitions,
  kOfflineDim
};

/// Online frame layout.
enum OnlineFeature : std::size_t {
  kXOffset = 0,
  kYBaseline,
  kDirSin,
  kDirCos,
  kCurvature,
  kPenDown,
  kOnlineDim
};

/// Slides a window of `window_width` columns by `step` columns from left to
/// right. Windows without ink yield all-zero frames. Contour slopes are
/// central differences over the neighbouring windows that contain ink.
FeatureSequence extract_offline_windows(const RasterImage& image, int window_width = 1,
                                        int step = 1);

/// Makes the row-valued offline features (center of gravity, contours)
/// relative to `baseline_row`. Blank frames stay zero.
FeatureSequence shift_to_baseline(FeatureSequence seq, double baseline_row);

/// Resamples each stroke every `resample_distance` units of arc length and
/// bridges pen-up gaps with pen-up frames on the straight line between
/// strokes. Position features are divided by the trace height.
FeatureSequence extract_online_features(const InkTrace& trace, double resample_distance);

/// Equidistant resampling of a polyline; the first point is kept and a new
/// point is emitted every `distance` units of arc length.
std::vector<Point> resample_stroke(const Stroke& stroke, double distance);

struct NormalizerStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kStdFloor = 1e-6;

/// Population mean and standard deviation over every frame of every
/// sequence, with the deviation floored at kStdFloor.
NormalizerStats fit_normalizer(std::span<const FeatureSequence> sequences);
FeatureSequence apply_normalizer(const FeatureSequence& seq, const NormalizerStats& stats);

/// Feature dump: header `dim=<d> source=<online|offline>` then one frame per
/// line.
std::string write_feature_dump(const FeatureSequence& seq);
FeatureSequence read_feature_dump(std::string_view text);

}  // namespace inkrover

#endif  // INKROVER_FEATURES_H_
