// tests/rover_check.h
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

// Compares the library's network and vote against the grid oracle for
// transcripts over a small integer vocabulary.

#ifndef INKROVER_TESTS_ROVER_CHECK_H_
#define INKROVER_TESTS_ROVER_CHECK_H_

#include <string>
#include <vector>

#include "inkrover/rover.h"
#include "rover_oracle.h"

namespace rover_check {

inline std::string word_name(int w) { return "w" + std::to_string(w); }
inline std::string system_name(int s) { return "s" + std::to_string(s); }

inline inkrover::HypothesisTranscript transcript(const std::vector<int>& words, int system) {
  inkrover::HypothesisTranscript h;
  h.sample_id = "x";
  h.system_id = system_name(system);
  std::size_t t = 0;
  for (int w : words) {
    h.words.push_back({word_name(w), t, t + 1, 1.0});
    ++t;
  }
  return h;
}

/// All sequences of length 0..max_len over `vocab` words, shortest first.
inline std::vector<std::vector<int>> all_sequences(int vocab, int max_len) {
  std::vector<std::vector<int>> out{{}};
  for (std::size_t start = 0; start < out.size(); ++start) {
    if (static_cast<int>(out[start].size()) == max_len) continue;
    for (int w = 0; w < vocab; ++w) {
      auto s = out[start];
      s.push_back(w);
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Empty string when the network matches the grid; otherwise what differs.
inline std::string compare(const inkrover::WordTransitionNetwork& wtn, const oracle::Grid& g) {
  if (wtn.slots.size() != g.columns.size()) return "slot count";
  if (wtn.systems.size() != static_cast<std::size_t>(g.systems)) return "system count";
  for (std::size_t k = 0; k < wtn.costs.size(); ++k)
    if (wtn.costs[k] != g.costs[k]) return "alignment cost of system " + std::to_string(k);
  for (std::size_t i = 0; i < wtn.slots.size(); ++i) {
    const auto& slot = wtn.slots[i];
    const auto& col = g.columns[i];
    if (slot.total() != static_cast<std::size_t>(g.systems)) return "slot total";
    std::size_t distinct = 0;
    for (int s = 0; s < g.systems; ++s) {
      bool first = true;
      for (int r = 0; r < s; ++r) first &= col[static_cast<std::size_t>(r)] != col[static_cast<std::size_t>(s)];
      distinct += first;
    }
    if (slot.entries.size() != distinct) return "entry count in slot " + std::to_string(i);
    for (const auto& e : slot.entries) {
      const int id = e.word ? std::stoi(e.word->substr(1)) : oracle::kNull;
      if (e.count != static_cast<std::size_t>(oracle::count_of(col, g.systems, id)))
        return "count in slot " + std::to_string(i);
      for (const auto& sys : e.systems)
        if (col[static_cast<std::size_t>(std::stoi(sys.substr(1)))] != id) return "contributors in slot " + std::to_string(i);
    }
  }
  return {};
}

inline std::string compare_vote(const inkrover::HypothesisTranscript& out, const oracle::Grid& g) {
  std::vector<std::string> want;
  for (int w : oracle::winners(g))
    if (w != oracle::kNull) want.push_back(word_name(w));
  return out.word_strings() == want ? std::string() : std::string("vote winners");
}

/// True when the first occurrences of word ids across the sequences come in
/// the order 0, 1, 2, ...; every triple is a relabelling of exactly one such
/// canonical triple.
inline bool canonical(const std::vector<const std::vector<int>*>& seqs) {
  int next = 0;
  std::vector<bool> seen(8, false);
  for (const auto* s : seqs)
    for (int w : *s) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      if (w != next) return false;
      seen[static_cast<std::size_t>(w)] = true;
      ++next;
    }
  return true;
}

}  // namespace rover_check

#endif  // INKROVER_TESTS_ROVER_CHECK_H_
