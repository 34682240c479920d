// tests/rover_oracle.h
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

// Test-only reference for word alignment and voting. A network is a grid of
// columns (slots) by systems holding a word id or -1 for NULL; counts and
// winners are derived from the grid, not stored.

#ifndef INKROVER_TESTS_ROVER_ORACLE_H_
#define INKROVER_TESTS_ROVER_ORACLE_H_

#include <algorithm>
#include <array>
#include <vector>

namespace oracle {

constexpr int kNull = -1;
constexpr int kMaxSystems = 4;

using Column = std::array<int, kMaxSystems>;

struct Grid {
  int systems = 0;
  std::vector<Column> columns;
  std::vector<int> costs;  // DP cost of each alignment
};

/// Plain Levenshtein distance between two word sequences.
inline int edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline bool column_has(const Column& c, int systems, int word) {
  for (int s = 0; s < systems; ++s)
    if (c[static_cast<std::size_t>(s)] == word) return true;
  return false;
}

/// Adds one system. Among optimal paths, the walk back from the end takes a
/// diagonal step first, then a column without this system, then a new column.
inline void align(Grid& g, const std::vector<int>& words) {
  const std::size_t n = g.columns.size(), m = words.size();
  std::vector<std::vector<int>> pre(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; j <= m; ++j) {
      if (i == 0 && j == 0) continue;
      int best = 1 << 29;
      if (i > 0 && j > 0) best = std::min(best, pre[i - 1][j - 1] + (column_has(g.columns[i - 1], g.systems, words[j - 1]) ? 0 : 1));
      if (i > 0) best = std::min(best, pre[i - 1][j] + 1);
      if (j > 0) best = std::min(best, pre[i][j - 1] + 1);
      pre[i][j] = best;
    }
  std::vector<Column> out;
  std::size_t i = n, j = m;
  const int me = g.systems;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        pre[i - 1][j - 1] + (column_has(g.columns[i - 1], g.systems, words[j - 1]) ? 0 : 1) == pre[i][j]) {
      Column c = g.columns[i - 1];
      c[static_cast<std::size_t>(me)] = words[j - 1];
      out.push_back(c);
      --i;
      --j;
    } else if (i > 0 && pre[i - 1][j] + 1 == pre[i][j]) {
      Column c = g.columns[i - 1];
      c[static_cast<std::size_t>(me)] = kNull;
      out.push_back(c);
      --i;
    } else {
      Column c;
      c.fill(kNull);
      c[static_cast<std::size_t>(me)] = words[j - 1];
      out.push_back(c);
      --j;
    }
  }
  std::reverse(out.begin(), out.end());
  g.columns = std::move(out);
  g.costs.push_back(pre[n][m]);
  ++g.systems;
}

/// Vote with systems ranked in their alignment order (system 0 best).
/// Returns the winning word id per column, kNull when NULL wins.
inline std::vector<int> winners(const Grid& g) {
  std::vector<int> out;
  for (const auto& c : g.columns) {
    int best_value = kNull, best_count = -1, best_rank = kMaxSystems;
    for (int s = 0; s < g.systems; ++s) {
      const int v = c[static_cast<std::size_t>(s)];
      int count = 0, first = kMaxSystems;
      for (int r = 0; r < g.systems; ++r) {
        if (c[static_cast<std::size_t>(r)] == v) {
          ++count;
          first = std::min(first, r);
        }
      }
      if (count > best_count || (count == best_count && first < best_rank)) {
        best_value = v;
        best_count = count;
        best_rank = first;
      }
    }
    out.push_back(best_value);
  }
  return out;
}

inline int count_of(const Column& c, int systems, int word) {
  int n = 0;
  for (int s = 0; s < systems; ++s) n += c[static_cast<std::size_t>(s)] == word;
  return n;
}

}  // namespace oracle

#endif  // INKROVER_TESTS_ROVER_ORACLE_H_
