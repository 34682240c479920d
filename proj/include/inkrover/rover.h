// include/inkrover/rover.h
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

#ifndef INKROVER_ROVER_H_
#define INKROVER_ROVER_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "inkrover/recognizer.h"

namespace inkrover {

enum class TimeMode { kOff, kStrict };

struct AlignmentParams {
  double match_cost = 0.0;
  double substitution_cost = 1.0;
  double insertion_cost = 1.0;
  double deletion_cost = 1.0;
  TimeMode time_mode = TimeMode::kOff;
  /// Minimum overlap, as a fraction of the shorter extent, for a word to
  /// match a slot entry in strict mode.
  double time_overlap_min = 0.0;

  static AlignmentParams strict();
  void validate() const;
};

/// {"time_mode": "off"|"strict", "time_overlap_min": f, "costs": {...}}
AlignmentParams alignment_params_from_json(const nlohmann::json& doc);
nlohmann::ordered_json alignment_params_to_json(const AlignmentParams& params);

/// One alternative in a slot; an empty `word` is the NULL arc.
struct SlotEntry {
  std::optional<std::string> word;
  std::size_t count = 0;
  std::vector<std::string> systems;
  std::size_t t_start = 0;  // merged extent, meaningful for words only
  std::size_t t_end = 0;
};

struct Slot {
  std::vector<SlotEntry> entries;

  std::size_t total() const;
  const SlotEntry* find(const std::optional<std::string>& word) const;
};

struct WordTransitionNetwork {
  std::string sample_id;
  std::vector<Slot> slots;
  std::vector<std::string> systems;  // in alignment order
  /// DP cost of each alignment, parallel to `systems`.
  std::vector<double> costs;
};

/// Aligns one more transcript against the network by edit-distance DP and
/// applies the optimal path. Equal-cost paths prefer match, then
/// substitution, then deletion, then insertion, decided from the end of both
/// sequences backwards.
WordTransitionNetwork align_hypothesis(WordTransitionNetwork wtn, const HypothesisTranscript& hyp,
                                       const AlignmentParams& params);

/// Ordered system ids, best first.
using SystemRanking = std::vector<std::string>;

SystemRanking parse_ranking(std::string_view text);
std::string format_ranking(const SystemRanking& ranking);

/// Majority vote per slot. Count ties go to the entry whose contributors
/// include the best-ranked system. NULL winners emit nothing. Output
/// confidence is the winning share of the votes; extents are the winner's
/// merged extent, clipped so that words stay ordered and disjoint.
HypothesisTranscript vote(const WordTransitionNetwork& wtn, const SystemRanking& ranking,
                          const std::string& system_id = "rover");

/// Aligns the transcripts in ranking order, best first, then votes.
HypothesisTranscript combine(const std::vector<HypothesisTranscript>& hyps, const AlignmentParams& params,
                             const SystemRanking& ranking, const std::string& system_id = "rover");

}  // namespace inkrover

#endif  // INKROVER_ROVER_H_
