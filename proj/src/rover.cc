// src/rover.cc
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

#include "inkrover/rover.h"

#include <algorithm>
#include <limits>
#include <sstream>

#include "inkrover/error.h"

namespace inkrover {

AlignmentParams AlignmentParams::strict() {
  AlignmentParams p;
  p.time_mode = TimeMode::kStrict;
  p.time_overlap_min = 0.1;
  return p;
}

void AlignmentParams::validate() const {
  if (match_cost < 0 || substitution_cost < 0 || insertion_cost < 0 || deletion_cost < 0)
    throw ConfigError("alignment costs must be non-negative");
  if (time_overlap_min < 0 || time_overlap_min > 1) throw ConfigError("time_overlap_min must lie in [0, 1]");
}

AlignmentParams alignment_params_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("alignment settings must be an object");
  AlignmentParams p;
  for (const auto& [key, value] : doc.items())
    if (key != "time_mode" && key != "time_overlap_min" && key != "costs")
      throw ConfigError("unknown alignment setting '" + key + "'");
  try {
    if (doc.contains("time_mode")) {
      const auto mode = doc["time_mode"].get<std::string>();
      if (mode == "off") {
        p.time_mode = TimeMode::kOff;
      } else if (mode == "strict") {
        p = AlignmentParams::strict();
      } else {
        throw ConfigError("time_mode must be off or strict");
      }
    }
    p.time_overlap_min = doc.value("time_overlap_min", p.time_overlap_min);
    if (doc.contains("costs")) {
      const auto& c = doc["costs"];
      for (const auto& [key, value] : c.items())
        if (key != "match" && key != "substitution" && key != "insertion" && key != "deletion")
          throw ConfigError("unknown alignment cost '" + key + "'");
      p.match_cost = c.value("match", p.match_cost);
      p.substitution_cost = c.value("substitution", p.substitution_cost);
      p.insertion_cost = c.value("insertion", p.insertion_cost);
      p.deletion_cost = c.value("deletion", p.deletion_cost);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("alignment settings: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::ordered_json alignment_params_to_json(const AlignmentParams& p) {
  nlohmann::ordered_json doc;
  doc["time_mode"] = p.time_mode == TimeMode::kOff ? "off" : "strict";
  doc["time_overlap_min"] = p.time_overlap_min;
  doc["costs"] = {{"match", p.match_cost},
                  {"substitution", p.substitution_cost},
                  {"insertion", p.insertion_cost},
                  {"deletion", p.deletion_cost}};
  return doc;
}

std::size_t Slot::total() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.count;
  return n;
}

const SlotEntry* Slot::find(const std::optional<std::string>& word) const {
  for (const auto& e : entries)
    if (e.word == word) return &e;
  return nullptr;
}

namespace {

bool overlaps(const SlotEntry& e, const HypothesisWord& w, double min_fraction) {
  const double lo = static_cast<double>(std::max(e.t_start, w.t_start));
  const double hi = static_cast<double>(std::min(e.t_end, w.t_end));
  const double shorter =
      static_cast<double>(std::min(e.t_end - e.t_start, w.t_end - w.t_start));
  return std::max(0.0, hi - lo) >= min_fraction * shorter;
}

bool slot_matches(const Slot& slot, const HypothesisWord& w, const AlignmentParams& params) {
  for (const auto& e : slot.entries) {
    if (!e.word || *e.word != w.word) continue;
    if (params.time_mode == TimeMode::kOff || overlaps(e, w, params.time_overlap_min)) return true;
  }
  return false;
}

void add_vote(Slot& slot, const std::optional<std::string>& word, const std::string& system,
              const HypothesisWord* w) {
  auto it = std::find_if(slot.entries.begin(), slot.entries.end(), [&](const SlotEntry& e) { return e.word == word; });
  if (it == slot.entries.end()) {
    SlotEntry e;
    e.word = word;
    if (w) {
      e.t_start = w->t_start;
      e.t_end = w->t_end;
    }
    slot.entries.push_back(std::move(e));
    it = slot.entries.end() - 1;
  } else if (w) {
    it->t_start = std::min(it->t_start, w->t_start);
    it->t_end = std::max(it->t_end, w->t_end);
  }
  ++it->count;
  it->systems.push_back(system);
}

enum class Op { kMatch, kSubstitute, kDelete, kInsert };

}  // namespace

WordTransitionNetwork align_hypothesis(WordTransitionNetwork wtn, const HypothesisTranscript& hyp,
                                       const AlignmentParams& params) {
  params.validate();
  if (std::find(wtn.systems.begin(), wtn.systems.end(), hyp.system_id) != wtn.systems.end())
    throw DuplicateSystem("system '" + hyp.system_id + "' is already aligned");
  if (wtn.systems.empty()) wtn.sample_id = hyp.sample_id;
  const std::size_t rows = wtn.slots.size(), cols = hyp.words.size();
  const std::size_t stride = cols + 1;
  std::vector<double> cost((rows + 1) * stride, 0.0);
  std::vector<std::uint8_t> match((rows + 1) * stride, 0);
  for (std::size_t i = 1; i <= rows; ++i) cost[i * stride] = cost[(i - 1) * stride] + params.deletion_cost;
  for (std::size_t j = 1; j <= cols; ++j) cost[j] = cost[j - 1] + params.insertion_cost;
  for (std::size_t i = 1; i <= rows; ++i) {
    for (std::size_t j = 1; j <= cols; ++j) {
      const bool m = slot_matches(wtn.slots[i - 1], hyp.words[j - 1], params);
      match[i * stride + j] = m;
      const double diag = cost[(i - 1) * stride + j - 1] + (m ? params.match_cost : params.substitution_cost);
      const double del = cost[(i - 1) * stride + j] + params.deletion_cost;
      const double ins = cost[i * stride + j - 1] + params.insertion_cost;
      cost[i * stride + j] = std::min({diag, del, ins});
    }
  }

  std::vector<Op> ops;
  for (std::size_t i = rows, j = cols; i > 0 || j > 0;) {
    const double here = cost[i * stride + j];
    if (i > 0 && j > 0) {
      const bool m = match[i * stride + j];
      const double diag = cost[(i - 1) * stride + j - 1] + (m ? params.match_cost : params.substitution_cost);
      if (diag == here) {
        ops.push_back(m ? Op::kMatch : Op::kSubstitute);
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[(i - 1) * stride + j] + params.deletion_cost == here) {
      ops.push_back(Op::kDelete);
      --i;
      continue;
    }
    ops.push_back(Op::kInsert);
    --j;
  }
  std::reverse(ops.begin(), ops.end());

  const std::vector<std::string> prior = wtn.systems;
  std::vector<Slot> slots;
  slots.reserve(rows + cols);
  std::size_t i = 0, j = 0;
  for (Op op : ops) {
    switch (op) {
      case Op::kMatch:
      case Op::kSubstitute:
        slots.push_back(std::move(wtn.slots[i++]));
        add_vote(slots.back(), hyp.words[j].word, hyp.system_id, &hyp.words[j]);
        ++j;
        break;
      case Op::kDelete:
        slots.push_back(std::move(wtn.slots[i++]));
        add_vote(slots.back(), std::nullopt, hyp.system_id, nullptr);
        break;
      case Op::kInsert: {
        Slot s;
        if (!prior.empty()) s.entries.push_back({std::nullopt, prior.size(), prior, 0, 0});
        add_vote(s, hyp.words[j].word, hyp.system_id, &hyp.words[j]);
        ++j;
        slots.push_back(std::move(s));
        break;
      }
    }
  }
  wtn.slots = std::move(slots);
  wtn.systems.push_back(hyp.system_id);
  wtn.costs.push_back(cost[rows * stride + cols]);
  return wtn;
}

SystemRanking parse_ranking(std::string_view text) {
  SystemRanking out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id) || id[0] == '#') continue;
    if (std::find(out.begin(), out.end(), id) != out.end()) throw DuplicateSystem("ranking lists '" + id + "' twice");
    out.push_back(id);
  }
  return out;
}

std::string format_ranking(const SystemRanking& ranking) {
  std::string out;
  for (const auto& id : ranking) out += id + "\n";
  return out;
}

HypothesisTranscript vote(const WordTransitionNetwork& wtn, const SystemRanking& ranking,
                          const std::string& system_id) {
  if (wtn.systems.empty()) throw IncompleteRanking("no system has been aligned");
  auto rank = [&](const std::string& id) {
    const auto it = std::find(ranking.begin(), ranking.end(), id);
    if (it == ranking.end()) throw IncompleteRanking("ranking does not list system '" + id + "'");
    return static_cast<std::size_t>(it - ranking.begin());
  };
  for (const auto& id : wtn.systems) rank(id);

  HypothesisTranscript out;
  out.sample_id = wtn.sample_id;
  out.system_id = system_id;
  const double k = static_cast<double>(wtn.systems.size());
  for (const auto& slot : wtn.slots) {
    const SlotEntry* best = nullptr;
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (const auto& e : slot.entries) {
      std::size_t r = std::numeric_limits<std::size_t>::max();
      for (const auto& id : e.systems) r = std::min(r, rank(id));
      if (!best || e.count > best->count || (e.count == best->count && r < best_rank)) {
        best = &e;
        best_rank = r;
      }
    }
    if (!best || !best->word) continue;
    HypothesisWord w{*best->word, best->t_start, best->t_end, static_cast<double>(best->count) / k};
    if (!out.words.empty()) w.t_start = std::max(w.t_start, out.words.back().t_end);
    w.t_end = std::max(w.t_end, w.t_start + 1);
    out.words.push_back(std::move(w));
  }
  return out;
}

HypothesisTranscript combine(const std::vector<HypothesisTranscript>& hyps, const AlignmentParams& params,
                             const SystemRanking& ranking, const std::string& system_id) {
  if (hyps.size() < 2) throw InvariantError("combination needs at least two transcripts");
  std::vector<const HypothesisTranscript*> order;
  for (const auto& h : hyps) {
    if (h.sample_id != hyps.front().sample_id)
      throw MismatchedSample("transcripts for '" + hyps.front().sample_id + "' and '" + h.sample_id + "' cannot be combined");
    for (const auto* o : order)
      if (o->system_id == h.system_id) throw DuplicateSystem("system '" + h.system_id + "' appears twice");
    if (std::find(ranking.begin(), ranking.end(), h.system_id) == ranking.end())
      throw IncompleteRanking("ranking does not list system '" + h.system_id + "'");
    order.push_back(&h);
  }
  auto pos = [&](const HypothesisTranscript* h) { return std::find(ranking.begin(), ranking.end(), h->system_id) - ranking.begin(); };
  std::sort(order.begin(), order.end(), [&](auto* a, auto* b) { return pos(a) < pos(b); });
  WordTransitionNetwork wtn;
  for (const auto* h : order) wtn = align_hypothesis(std::move(wtn), *h, params);
  return vote(wtn, ranking, system_id);
}

}  // namespace inkrover
