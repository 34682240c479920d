// src/synth.cc
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

#include "inkrover/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "inkrover/error.h"
#include "inkrover/features.h"

namespace inkrover {

void SynthConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(hook_probability, "hook_probability");
  prob(gap_probability, "gap_probability");
  if (!(hook_size > 0.0 && hook_size < 0.1)) throw ConfigError("hook_size must lie in (0, 0.1)");
  if (!(jitter_sigma >= 0.0)) throw ConfigError("jitter_sigma must be non-negative");
  if (alphabet_size < 1 || alphabet_size > 10) throw ConfigError("alphabet_size must lie in [1, 10]");
  if (gap_points < 1) throw ConfigError("gap_points must be positive");
  if (writers < 1) throw ConfigError("writers must be positive");
  if (!(max_slant_deg >= 0.0 && max_slant_deg < 45.0)) throw ConfigError("max_slant_deg must lie in [0, 45)");
  if (!(point_spacing > 0.0)) throw ConfigError("point_spacing must be positive");
  if (!(ms_per_point > 0.0) || !(pen_up_ms >= 0.0)) throw ConfigError("timing must be positive");
  if (min_words < 1 || max_words < min_words) throw ConfigError("need 1 <= min_words <= max_words");
}

#define INKROVER_SYNTH_FIELDS(X)                                                                     \
  X(alphabet_size) X(jitter_sigma) X(hook_probability) X(hook_size) X(gap_probability) X(gap_points) \
  X(writers) X(max_slant_deg) X(point_spacing) X(ms_per_point) X(pen_up_ms) X(min_words) X(max_words) X(seed)

SynthConfig synth_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("synth config must be an object");
  SynthConfig cfg;
  static const std::set<std::string> known{
#define X(f) #f,
      INKROVER_SYNTH_FIELDS(X)
#undef X
  };
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) throw ConfigError("unknown synth key '" + key + "'");
  try {
#define X(f) \
  if (doc.contains(#f)) doc.at(#f).get_to(cfg.f);
    INKROVER_SYNTH_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json synth_config_to_json(const SynthConfig& cfg) {
  nlohmann::ordered_json doc;
#define X(f) doc[#f] = cfg.f;
  INKROVER_SYNTH_FIELDS(X)
#undef X
  return doc;
}

Alphabet synth_alphabet(std::size_t size) {
  const auto full = Alphabet::synthetic();
  if (size < 1 || size > full.size()) throw ConfigError("alphabet size must lie in [1, 10]");
  std::vector<std::string> chars(full.chars().begin(), full.chars().begin() + static_cast<std::ptrdiff_t>(size));
  std::vector<JoiningClass> classes;
  for (const auto& c : chars) classes.push_back(full.joining(c));
  return Alphabet(chars, classes);
}

std::vector<Point> glyph_template(char letter) {
  // (x, height above baseline)
  static const std::vector<std::vector<std::pair<double, double>>> shapes{
      {{0, 0}, {3, 2}, {6, 0}, {9, 2}, {12, 0}},
      {{0, 0}, {3, 0}, {3, 13}, {5, 13}, {5, 0}, {10, 0}},
      {{0, 0}, {3, 0}, {3, -7}, {7, -7}, {7, 0}, {10, 0}},
      {{0, 0}, {2, 0}, {7, 4}, {12, 0}, {14, 0}},
      {{0, 0}, {6, 0}, {6, 6}, {2, 6}, {2, 3}, {9, 3}, {10, 0}},
      {{0, 0}, {2, 0}, {2, 10}, {5, 10}, {5, 5}, {9, 5}, {9, 0}, {11, 0}},
      {{0, 0}, {7, 9}, {7, 0}, {10, 0}},
      {{0, 0}, {2, 0}, {2, 8}, {8, 8}, {8, 0}, {10, 0}},
      {{0, 0}, {4, -3}, {8, 0}, {12, -3}, {14, 0}},
      {{0, 0}, {5, 0}, {5, 11}, {8, 4}, {10, 0}},
  };
  if (letter < 'a' || letter > 'j') throw UnknownCharacter(std::string("no template for '") + letter + "'");
  std::vector<Point> out;
  for (const auto& [x, h] : shapes[static_cast<std::size_t>(letter - 'a')]) out.push_back({x, -h, 0.0});
  return out;
}

Lexicon make_lexicon(const Alphabet& alphabet, std::size_t size, std::size_t min_len, std::size_t max_len,
                     std::uint64_t seed) {
  if (min_len < 1 || max_len < min_len) throw ConfigError("need 1 <= min_len <= max_len");
  double space = 0.0;
  for (std::size_t len = min_len; len <= max_len; ++len)
    space += std::pow(static_cast<double>(alphabet.size()), static_cast<double>(len));
  if (static_cast<double>(size) > space) throw ConfigError("lexicon larger than the word space");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len), ch(0, alphabet.size() - 1);
  Lexicon lexicon;
  std::set<std::string> seen;
  while (lexicon.size() < size) {
    std::string w;
    for (std::size_t n = len_dist(rng); n > 0; --n) w += alphabet.chars()[ch(rng)];
    if (seen.insert(w).second) lexicon.push_back(w);
  }
  return lexicon;
}

namespace {

constexpr double kWordGap = 8.0;
constexpr double kPieceGap = 3.0;

// Template vertices of every pen-down piece of the line.
std::vector<std::vector<Point>> layout(const std::vector<std::string>& words, const Alphabet& alphabet) {
  std::vector<std::vector<Point>> pieces;
  double x = 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0) x += kWordGap;
    const auto chars = alphabet.split(words[w]);
    bool open = false;
    for (const auto& c : chars) {
      const auto glyph = glyph_template(c[0]);
      if (!open) {
        pieces.emplace_back();
        pieces.back().push_back({x + glyph.front().x, glyph.front().y, 0.0});
        open = true;
      }
      for (std::size_t k = 1; k < glyph.size(); ++k) pieces.back().push_back({x + glyph[k].x, glyph[k].y, 0.0});
      x += glyph.back().x;
      if (alphabet.joining(c) == JoiningClass::kRight) {
        open = false;
        x += kPieceGap;
      }
    }
  }
  return pieces;
}

Stroke resample_piece(const std::vector<Point>& vertices, double spacing) {
  auto pts = resample_stroke(Stroke{vertices}, spacing);
  const Point& end = vertices.back();
  if (std::hypot(pts.back().x - end.x, pts.back().y - end.y) > 1e-9) pts.push_back(end);
  return Stroke{std::move(pts)};
}

void stamp_times(InkTrace& trace, const SynthConfig& cfg) {
  double t = 0.0;
  for (std::size_t s = 0; s < trace.strokes.size(); ++s) {
    if (s > 0) t += cfg.pen_up_ms;
    for (std::size_t i = 0; i < trace.strokes[s].points.size(); ++i) {
      if (i > 0) t += cfg.ms_per_point;
      trace.strokes[s].points[i].t = t;
    }
  }
}

double arc_length(const Stroke& s) {
  double total = 0.0;
  for (std::size_t i = 1; i < s.points.size(); ++i)
    total += std::hypot(s.points[i].x - s.points[i - 1].x, s.points[i].y - s.points[i - 1].y);
  return total;
}

// A short tail that turns back by 150-170 degrees.
void add_hook(Stroke& s, const SynthConfig& cfg, std::mt19937_64& rng) {
  const auto& p = s.points;
  const Point a = p[p.size() - 2], b = p.back();
  const double heading = std::atan2(b.y - a.y, b.x - a.x);
  std::uniform_real_distribution<double> turn_deg(150.0, 170.0);
  const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
  const double dir = heading + sign * turn_deg(rng) * std::numbers::pi / 180.0;
  const double len = cfg.hook_size * arc_length(s);
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(len / cfg.point_spacing)));
  for (std::size_t k = 1; k <= n; ++k) {
    const double r = len * static_cast<double>(k) / static_cast<double>(n);
    s.points.push_back({b.x + r * std::cos(dir), b.y + r * std::sin(dir), 0.0});
  }
}

}  // namespace

InkTrace draw_line(const std::vector<std::string>& words, const SynthConfig& cfg, const std::string& sample_id) {
  cfg.validate();
  const auto alphabet = synth_alphabet(cfg.alphabet_size);
  InkTrace trace;
  trace.sample_id = sample_id;
  trace.transcript = words;
  for (const auto& piece : layout(words, alphabet)) trace.strokes.push_back(resample_piece(piece, cfg.point_spacing));
  stamp_times(trace, cfg);
  return trace;
}

SynthDataset synth_dataset(const SynthConfig& cfg, const Lexicon& lexicon, std::size_t n_lines) {
  cfg.validate();
  if (lexicon.empty()) throw EmptyLexicon("synth_dataset needs a non-empty lexicon");
  const auto alphabet = synth_alphabet(cfg.alphabet_size);
  for (const auto& w : lexicon) alphabet.split(w);

  std::mt19937_64 rng(cfg.seed);
  SynthDataset data;
  std::uniform_real_distribution<double> slant(-cfg.max_slant_deg, cfg.max_slant_deg);
  for (std::size_t w = 0; w < cfg.writers; ++w) data.writer_slant_deg.push_back(cfg.max_slant_deg > 0 ? slant(rng) : 0.0);

  std::uniform_int_distribution<std::size_t> n_words(cfg.min_words, cfg.max_words);
  std::uniform_int_distribution<std::size_t> pick_word(0, lexicon.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_writer(0, cfg.writers - 1);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::bernoulli_distribution hook(cfg.hook_probability), gap(cfg.gap_probability);

  for (std::size_t line = 0; line < n_lines; ++line) {
    std::vector<std::string> words;
    for (std::size_t n = n_words(rng); n > 0; --n) words.push_back(lexicon[pick_word(rng)]);
    const std::size_t writer = pick_writer(rng);
    const double shear = std::tan(data.writer_slant_deg[writer] * std::numbers::pi / 180.0);

    char id[32];
    std::snprintf(id, sizeof id, "line%04zu", line);
    InkTrace trace;
    trace.sample_id = id;
    trace.transcript = words;
    for (auto piece : layout(words, alphabet)) {
      for (auto& v : piece) {
        if (cfg.jitter_sigma > 0) {
          v.x += cfg.jitter_sigma * jitter(rng);
          v.y += cfg.jitter_sigma * jitter(rng);
        }
        v.x -= v.y * shear;  // y is negative above the baseline
      }
      Stroke s = resample_piece(piece, cfg.point_spacing);
      const std::size_t index = trace.strokes.size();
      ++data.stats.strokes;
      // Drops stay two points clear of either end.
      if (gap(rng) && s.points.size() >= cfg.gap_points + 4) {
        // Only spans whose chord stays long enough to read as a gap.
        std::vector<std::size_t> starts;
        for (std::size_t f = 2; f + cfg.gap_points + 2 <= s.points.size(); ++f) {
          const Point& a = s.points[f - 1];
          const Point& b = s.points[f + cfg.gap_points];
          if (std::hypot(b.x - a.x, b.y - a.y) >= 0.75 * static_cast<double>(cfg.gap_points + 1) * cfg.point_spacing)
            starts.push_back(f);
        }
        if (starts.empty()) starts.push_back(2);
        const std::size_t first = starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];
        InjectedDefect d{DefectKind::kGap, line, index, first - 1, s};
        s.points.erase(s.points.begin() + static_cast<std::ptrdiff_t>(first),
                       s.points.begin() + static_cast<std::ptrdiff_t>(first + cfg.gap_points));
        data.defects.push_back(std::move(d));
        ++data.stats.gaps;
      }
      if (hook(rng)) {
        InjectedDefect d{DefectKind::kHook, line, index, s.points.size() - 1, s};
        add_hook(s, cfg, rng);
        data.defects.push_back(std::move(d));
        ++data.stats.hooks;
      }
      trace.strokes.push_back(std::move(s));
    }
    stamp_times(trace, cfg);
    for (auto& d : data.defects)
      if (d.line == line) {
        // Keep the recorded stroke on the same clock as the damaged one.
        const Stroke& now = trace.strokes[d.stroke];
        for (std::size_t i = 0; i < d.before.points.size(); ++i)
          d.before.points[i].t = i < now.points.size() ? now.points[i].t : now.points.back().t;
      }
    data.lines.push_back(std::move(trace));
    data.writer.push_back(writer);
  }
  return data;
}

}  // namespace inkrover
