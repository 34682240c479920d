// include/inkrover/experiment.h
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

#ifndef INKROVER_EXPERIMENT_H_
#define INKROVER_EXPERIMENT_H_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "inkrover/features.h"
#include "inkrover/preprocess.h"
#include "inkrover/recognizer.h"
#include "inkrover/rover.h"
#include "inkrover/scoring.h"
#include "inkrover/synth.h"
#include "json.hpp"

namespace inkrover {

/// How one recognizer turns ink into features.
struct VariantConfig {
  std::string name;
  FeatureSource source = FeatureSource::kOnline;
  // online
  bool preprocess = true;
  PreprocessConfig preprocessing;
  double resample_distance = 1.0;
  // offline
  double scale = 1.0;
  int pen_width = 2;
  int margin = 4;
  bool correct_skew = true;
  bool correct_slant = true;
  int window_width = 1;
  int window_step = 1;

  void validate() const;
};

VariantConfig variant_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json variant_config_to_json(const VariantConfig& cfg);

/// Feature sequence of one line, before normalization.
FeatureSequence extract_variant_features(const InkTrace& trace, const VariantConfig& cfg);

struct ExperimentConfig {
  std::uint64_t seed = 1;
  SynthConfig synth;
  std::size_t lexicon_size = 12;
  std::size_t word_min_length = 2;
  std::size_t word_max_length = 4;
  std::size_t lines = 120;
  std::array<double, 4> split_ratios = kDefaultSplitRatios;
  RecognizerConfig recognizer;
  std::vector<VariantConfig> variants;
  AlignmentParams alignment;
  /// Threads for per-line work; 0 uses the hardware concurrency.
  std::size_t workers = 0;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::string& path);

struct SystemResult {
  std::string name;
  ScoreReport validation;
  ScoreReport test;
  std::vector<HypothesisTranscript> test_hypotheses;
  std::size_t skipped_training_samples = 0;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  DatasetSplit split;
  std::vector<SystemResult> systems;
  /// Systems ordered by validation_meta recognition rate.
  SystemRanking ranking;
  std::string best_system;  // best on the test stage
  ScoreReport best;
  ScoreReport combined;
  std::vector<HypothesisTranscript> combined_hypotheses;

  double delta_rate() const { return combined.recognition_rate - best.recognition_rate; }
  double delta_accuracy() const { return combined.accuracy - best.accuracy; }
};

struct ExperimentData {
  Alphabet alphabet;
  Lexicon lexicon;
  SynthDataset data;
};

/// Lexicon and lines for cfg.seed, as used by run_experiment.
ExperimentData synthesize_experiment_data(const ExperimentConfig& cfg);

/// Synthesizes the data for cfg.seed, trains and decodes every variant,
/// ranks them on validation_meta and combines their test output with ROVER.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

std::string format_experiment_markdown(const ExperimentReport& report);
nlohmann::ordered_json experiment_report_to_json(const ExperimentReport& report);

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace inkrover

#endif  // INKROVER_EXPERIMENT_H_
