// include/inkrover/synth.h
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

// Synthetic handwriting for the ten-letter alphabet a..j. Every letter is a
// polyline template that enters and leaves on the baseline, so letters in a
// word connect into one stroke; the pen lifts after right-joining letters and
// between words.

#ifndef INKROVER_SYNTH_H_
#define INKROVER_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "inkrover/ink.h"
#include "inkrover/recognizer.h"
#include "json.hpp"

namespace inkrover {

struct SynthConfig {
  std::size_t alphabet_size = 10;  // first letters of a..j
  double jitter_sigma = 0.0;       // per template vertex, both axes
  double hook_probability = 0.0;   // per stroke
  double hook_size = 0.05;         // fraction of the stroke's arc length
  double gap_probability = 0.0;    // per stroke
  std::size_t gap_points = 3;      // consecutive points dropped per gap
  std::size_t writers = 5;
  double max_slant_deg = 0.0;      // writer slants are uniform in +-max
  double point_spacing = 1.0;
  double ms_per_point = 10.0;
  double pen_up_ms = 200.0;
  std::size_t min_words = 1;
  std::size_t max_words = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json synth_config_to_json(const SynthConfig& cfg);

/// Alphabet::synthetic() cut to the first `size` letters.
Alphabet synth_alphabet(std::size_t size);

/// Template vertices of one letter, pen coordinates with y down and the
/// baseline at y = 0. The first vertex is (0, 0) and the last is (width, 0).
std::vector<Point> glyph_template(char letter);

/// `size` distinct words of `min_len`..`max_len` letters.
Lexicon make_lexicon(const Alphabet& alphabet, std::size_t size, std::size_t min_len, std::size_t max_len,
                     std::uint64_t seed);

/// Noise-free ink for a word sequence: templates laid out left to right,
/// resampled every cfg.point_spacing units.
InkTrace draw_line(const std::vector<std::string>& words, const SynthConfig& cfg,
                   const std::string& sample_id);

enum class DefectKind { kHook, kGap };

struct InjectedDefect {
  DefectKind kind = DefectKind::kHook;
  std::size_t line = 0;
  std::size_t stroke = 0;
  /// Gaps: index, in the damaged stroke, of the point before the gap.
  std::size_t point = 0;
  /// The stroke just before this defect was applied.
  Stroke before;
};

struct SynthStats {
  std::size_t strokes = 0;
  std::size_t hooks = 0;
  std::size_t gaps = 0;
};

struct SynthDataset {
  std::vector<InkTrace> lines;
  std::vector<std::size_t> writer;  // per line
  std::vector<double> writer_slant_deg;
  std::vector<InjectedDefect> defects;
  SynthStats stats;
};

/// Each line samples min_words..max_words words from the lexicon and a
/// writer; jitter and the writer's slant are applied to the template
/// vertices, then gaps and hooks are injected per stroke. Sample ids are
/// "line0000", "line0001", ...
SynthDataset synth_dataset(const SynthConfig& cfg, const Lexicon& lexicon, std::size_t n_lines);

}  // namespace inkrover

#endif  // INKROVER_SYNTH_H_
