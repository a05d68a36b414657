// Copyright 2026-present the lider authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "lider/common.hpp"

namespace lider {

/// Global top-k of several rank-ordered hit lists. A heap holds the current
/// head of each list, so the merge costs O(lists + k log lists).
inline std::vector<ScoredHit> merge_topk(std::span<const std::vector<ScoredHit>> lists,
                                         std::size_t k) {
  using Head = std::pair<std::size_t, std::size_t>;  // (list, position)
  auto worse = [&](const Head &a, const Head &b) {
    return ranks_before(lists[b.first][b.second], lists[a.first][a.second]);
  };
  std::priority_queue<Head, std::vector<Head>, decltype(worse)> heap(worse);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (!lists[i].empty()) heap.emplace(i, 0);
  }
  std::vector<ScoredHit> out;
  out.reserve(k);
  while (out.size() < k && !heap.empty()) {
    auto [list, pos] = heap.top();
    heap.pop();
    out.push_back(lists[list][pos]);
    if (pos + 1 < lists[list].size()) heap.emplace(list, pos + 1);
  }
  return out;
}

}  // namespace lider
