// include/inkrover/scoring.h
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

#ifndef INKROVER_SCORING_H_
#define INKROVER_SCORING_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace inkrover {

/// train / validation_meta / validation_lm / test.
struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation_meta;
  std::vector<std::string> validation_lm;
  std::vector<std::string> test;

  std::size_t size() const;
  /// Throws InvariantError unless the stages are disjoint and non-empty.
  void validate() const;
};

inline constexpr std::array<double, 4> kDefaultSplitRatios{0.6, 0.15, 0.1, 0.15};

/// Seeded shuffle, then stage sizes by largest remainder. A stage left empty
/// by rounding takes one id from the currently largest stage.
DatasetSplit split_four_stages(std::vector<std::string> sample_ids,
                               const std::array<double, 4>& ratios = kDefaultSplitRatios,
                               std::uint64_t seed = 0);

nlohmann::ordered_json split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const nlohmann::json& doc);

struct ScoreReport {
  std::size_t n_ref_words = 0;
  std::size_t n_correct = 0;
  std::size_t n_substitutions = 0;
  std::size_t n_deletions = 0;
  std::size_t n_insertions = 0;
  double recognition_rate = 0.0;  // percent
  double accuracy = 0.0;          // percent, clamped at -100

  /// Sums the counts and recomputes both rates.
  ScoreReport& operator+=(const ScoreReport& other);
};

/// Word-level edit-distance alignment with unit costs. Among equally cheap
/// alignments the backtrace prefers match/substitution, then deletion.
ScoreReport recognition_rate(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

/// "68.4%".
std::string format_percent(double value);

nlohmann::ordered_json score_to_json(const ScoreReport& report);

struct SystemScore {
  std::string name;
  ScoreReport report;
};

/// One row per system with recognition rate and precision columns.
std::string format_system_table(const std::string& title, const std::vector<SystemScore>& systems);

/// Best single system against the combination, plus the change in both rates.
std::string format_combination_table(const std::string& title, const SystemScore& best,
                                     const SystemScore& combined);

}  // namespace inkrover

#endif  // INKROVER_SCORING_H_
