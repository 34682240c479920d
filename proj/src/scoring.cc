// src/scoring.cc
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

#include "inkrover/scoring.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "inkrover/error.h"

namespace inkrover {

std::size_t DatasetSplit::size() const {
  return train.size() + validation_meta.size() + validation_lm.size() + test.size();
}

void DatasetSplit::validate() const {
  std::set<std::string> seen;
  for (const auto* stage : {&train, &validation_meta, &validation_lm, &test}) {
    if (stage->empty()) throw InvariantError("split has an empty stage");
    for (const auto& id : *stage)
      if (!seen.insert(id).second) throw InvariantError("sample '" + id + "' appears in two stages");
  }
}

DatasetSplit split_four_stages(std::vector<std::string> sample_ids, const std::array<double, 4>& ratios,
                               std::uint64_t seed) {
  if (sample_ids.size() < 4) throw TooFewSamples("a four-stage split needs at least 4 samples");
  {
    std::set<std::string> unique(sample_ids.begin(), sample_ids.end());
    if (unique.size() != sample_ids.size()) throw InvariantError("duplicate sample id");
  }
  const double total = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  for (double r : ratios)
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  std::sort(sample_ids.begin(), sample_ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = sample_ids.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(sample_ids[i - 1], sample_ids[pick(rng)]);
  }

  const std::size_t n = sample_ids.size();
  std::array<std::size_t, 4> sizes{};
  std::array<double, 4> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double quota = static_cast<double>(n) * ratios[k];
    sizes[k] = static_cast<std::size_t>(std::floor(quota));
    remainder[k] = quota - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 4]];
  for (std::size_t k = 0; k < 4; ++k) {
    if (sizes[k] > 0) continue;
    const auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    --sizes[largest];
    sizes[k] = 1;
  }

  DatasetSplit split;
  auto next = sample_ids.begin();
  for (auto [k, stage] : {std::pair{0, &split.train}, {1, &split.validation_meta}, {2, &split.validation_lm},
                          {3, &split.test}}) {
    stage->assign(next, next + static_cast<std::ptrdiff_t>(sizes[static_cast<std::size_t>(k)]));
    next += static_cast<std::ptrdiff_t>(sizes[static_cast<std::size_t>(k)]);
  }
  return split;
}

nlohmann::ordered_json split_to_json(const DatasetSplit& split) {
  nlohmann::ordered_json doc;
  doc["train"] = split.train;
  doc["validation_meta"] = split.validation_meta;
  doc["validation_lm"] = split.validation_lm;
  doc["test"] = split.test;
  return doc;
}

DatasetSplit split_from_json(const nlohmann::json& doc) {
  DatasetSplit split;
  try {
    split.train = doc.at("train").get<std::vector<std::string>>();
    split.validation_meta = doc.at("validation_meta").get<std::vector<std::string>>();
    split.validation_lm = doc.at("validation_lm").get<std::vector<std::string>>();
    split.test = doc.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("split: ") + e.what());
  }
  split.validate();
  return split;
}

namespace {

void update_rates(ScoreReport& r) {
  if (r.n_ref_words == 0) {
    r.recognition_rate = r.n_insertions == 0 ? 100.0 : 0.0;
    r.accuracy = r.n_insertions == 0 ? 100.0 : -100.0;
    return;
  }
  const double n = static_cast<double>(r.n_ref_words);
  r.recognition_rate = 100.0 * static_cast<double>(r.n_correct) / n;
  r.accuracy = std::max(-100.0, 100.0 * (static_cast<double>(r.n_correct) - static_cast<double>(r.n_insertions)) / n);
}

}  // namespace

ScoreReport& ScoreReport::operator+=(const ScoreReport& other) {
  n_ref_words += other.n_ref_words;
  n_correct += other.n_correct;
  n_substitutions += other.n_substitutions;
  n_deletions += other.n_deletions;
  n_insertions += other.n_insertions;
  update_rates(*this);
  return *this;
}

ScoreReport recognition_rate(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  const std::size_t rows = ref.size(), cols = hyp.size(), stride = cols + 1;
  std::vector<std::size_t> d((rows + 1) * stride);
  for (std::size_t i = 0; i <= rows; ++i) d[i * stride] = i;
  for (std::size_t j = 0; j <= cols; ++j) d[j] = j;
  for (std::size_t i = 1; i <= rows; ++i)
    for (std::size_t j = 1; j <= cols; ++j)
      d[i * stride + j] = std::min({d[(i - 1) * stride + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0u : 1u),
                                    d[(i - 1) * stride + j] + 1, d[i * stride + j - 1] + 1});

  ScoreReport r;
  r.n_ref_words = rows;
  for (std::size_t i = rows, j = cols; i > 0 || j > 0;) {
    const std::size_t here = d[i * stride + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (d[(i - 1) * stride + j - 1] + (same ? 0 : 1) == here) {
        ++(same ? r.n_correct : r.n_substitutions);
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[(i - 1) * stride + j] + 1 == here) {
      ++r.n_deletions;
      --i;
      continue;
    }
    ++r.n_insertions;
    --j;
  }
  update_rates(r);
  return r;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", value);
  std::string s = buf;
  if (s == "-0.0%") s = "0.0%";
  return s;
}

nlohmann::ordered_json score_to_json(const ScoreReport& r) {
  nlohmann::ordered_json doc;
  doc["n_ref_words"] = r.n_ref_words;
  doc["n_correct"] = r.n_correct;
  doc["n_substitutions"] = r.n_substitutions;
  doc["n_deletions"] = r.n_deletions;
  doc["n_insertions"] = r.n_insertions;
  doc["recognition_rate"] = r.recognition_rate;
  doc["accuracy"] = r.accuracy;
  return doc;
}

std::string format_system_table(const std::string& title, const std::vector<SystemScore>& systems) {
  std::string out = title + "\n\n| System | Recognition Rate | Precision |\n|---|---|---|\n";
  for (const auto& s : systems)
    out += "| " + s.name + " | " + format_percent(s.report.recognition_rate) + " | " +
           format_percent(s.report.accuracy) + " |\n";
  return out;
}

namespace {

std::string signed_points(double delta) {
  const std::string p = format_percent(delta);
  return p[0] == '-' || p == "0.0%" ? p : "+" + p;
}

}  // namespace

std::string format_combination_table(const std::string& title, const SystemScore& best,
                                     const SystemScore& combined) {
  std::string out = title + "\n\n| System | Recognition Rate | Precision |\n|---|---|---|\n";
  out += "| Highest Single System (" + best.name + ") | " + format_percent(best.report.recognition_rate) +
         " | " + format_percent(best.report.accuracy) + " |\n";
  out += "| " + combined.name + " | " + format_percent(combined.report.recognition_rate) + " | " +
         format_percent(combined.report.accuracy) + " |\n";
  out += "| Change | " + signed_points(combined.report.recognition_rate - best.report.recognition_rate) + " | " +
         signed_points(combined.report.accuracy - best.report.accuracy) + " |\n";
  return out;
}

}  // namespace inkrover
