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
//
// Core model: H compound hash functions, H sorted hashkey arrays and one
// RMI per array. A search hashes the query once per array, lets the RMI
// predict where its key would sit, scans a fixed-width window around that
// position on every array independently, and verifies the union of the
// windows with exact cosine similarity.
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lider/common.hpp"
#include "lider/hashkey.hpp"
#include "lider/lsh.hpp"
#include "lider/rmi.hpp"
#include "lider/serialize.hpp"
#include "lider/vectorstore.hpp"

namespace lider {

struct CoreModelParams {
  std::size_t h_count = 10;       // H: sorted arrays
  std::size_t key_length = 0;     // M: hashkey bits, 0 = ceil(log2 |members|)
  std::size_t min_key_length = 1; // floor applied when key_length is derived
  std::uint32_t window_bits = 3;  // B
  std::size_t r0 = 5;             // R = r0 * k_m
  std::size_t rmi_width = 5;      // W: leaf models per RMI
  std::uint64_t seed = 1;
  bool rescale_keys = true;  // min-max key normalization; off only for audits

  friend bool operator==(const CoreModelParams &, const CoreModelParams &) = default;
};

struct CoreSearchStats {
  std::size_t window_entries = 0;     // sum of window sizes over all arrays
  std::size_t unique_candidates = 0;  // after cross-array deduplication
};

/// Contiguous run [start, start + length) of array positions.
struct ExpansionWindow {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t predicted = 0;
};

/// Window of min(R, L) positions around `predicted`: nominally
/// predicted - ceil(R/2) + 1 .. predicted + floor(R/2), shifted (never
/// shrunk) to fit inside the array.
inline ExpansionWindow place_window(std::size_t predicted, std::size_t range,
                                    std::size_t array_length) {
  ExpansionWindow w;
  w.predicted = predicted;
  w.length = std::min(range, array_length);
  const auto lo = static_cast<long long>(predicted) - static_cast<long long>((range + 1) / 2) + 1;
  const auto max_start = static_cast<long long>(array_length - w.length);
  w.start = static_cast<std::size_t>(std::clamp(lo, 0LL, max_start));
  return w;
}

class CoreModel {
 public:
  CoreModel() = default;

  /// Builds over `ids` (indices into `vectors`). Deterministic for a seed.
  static CoreModel build(const VectorCollection &vectors, std::span<const VectorId> ids,
                         CoreModelParams params, WorkerPool *pool = nullptr) {
    if (ids.empty()) throw InvalidArgument("core model needs at least one member");
    if (params.h_count == 0) throw InvalidArgument("H must be >= 1");
    if (params.r0 == 0) throw InvalidArgument("r0 must be >= 1");
    if (params.rmi_width == 0) throw InvalidArgument("RMI width must be >= 1");
    detail::require_window_bits(params.window_bits);
    for (VectorId id : ids) {
      if (id >= vectors.size()) {
        throw InvalidArgument("member id " + std::to_string(id) + " is out of range");
      }
    }
    if (params.key_length == 0) {
      params.key_length = default_key_length(ids.size(), std::max<std::size_t>(params.min_key_length, 1));
    }
    CoreModel m;
    m.params_ = params;
    m.dim_ = vectors.dim();
    m.members_.assign(ids.begin(), ids.end());
    std::sort(m.members_.begin(), m.members_.end());
    m.funcs_ = make_compound_functions(params.h_count, params.key_length, vectors.dim(), params.seed);
    m.arrays_.resize(params.h_count);
    m.rmis_.resize(params.h_count);
    std::vector<VectorId> member_ids(ids.begin(), ids.end());
    auto build_one = [&](std::size_t h) {
      const auto &f = m.funcs_[h];
      const std::size_t wpk = words_for_bits(params.key_length);
      std::vector<std::uint64_t> words(member_ids.size() * wpk);
      for (std::size_t i = 0; i < member_ids.size(); ++i) {
        f.hash_into(vectors.row(member_ids[i]), words.data() + i * wpk);
      }
      m.arrays_[h] = build_sorted_array_packed(static_cast<std::uint32_t>(h), params.key_length,
                                               words, member_ids);
      m.rmis_[h] = train_array_rmi(m.arrays_[h], params.rmi_width, params.rescale_keys);
    };
    if (pool) {
      pool->parallel_for(params.h_count, build_one);
    } else {
      for (std::size_t h = 0; h < params.h_count; ++h) build_one(h);
    }
    m.index_locals();
    return m;
  }

  /// Fits the rescaler on the array, then trains on (RMI key, position).
  static RmiModel train_array_rmi(const SortedHashkeyArray &array, std::size_t width,
                                  bool rescale_keys) {
    KeyRescaler rescaler = KeyRescaler::fit(array, rescale_keys);
    std::vector<std::pair<double, std::size_t>> pairs(array.size());
    for (std::size_t i = 0; i < array.size(); ++i) pairs[i] = {rescaler(array.key(i)), i};
    RmiModel rmi = train_rmi(pairs, width, array.size());
    rmi.set_rescaler(std::move(rescaler));
    return rmi;
  }

  const CoreModelParams &params() const { return params_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return members_.size(); }
  const std::vector<VectorId> &member_ids() const { return members_; }
  const std::vector<CompoundHashFunction> &functions() const { return funcs_; }
  const std::vector<SortedHashkeyArray> &arrays() const { return arrays_; }
  const std::vector<RmiModel> &rmis() const { return rmis_; }

  /// Window that a query key would scan on array h with range R.
  ExpansionWindow window(std::size_t h, const HashkeyView &query_key, std::size_t range) const {
    if (range == 0) throw InvalidArgument("expansion range must be >= 1");
    const std::size_t p = rmis_[h].predict_key(query_key);
    return place_window(p, range, arrays_[h].size());
  }

  /// Ids in the window on array h, closest first by dist_e to the query key
  /// (ties by array position).
  std::vector<VectorId> expansion_search(std::size_t h, const HashkeyView &query_key,
                                         std::size_t range) const {
    const ExpansionWindow w = window(h, query_key, range);
    const SortedHashkeyArray &a = arrays_[h];
    std::vector<std::pair<std::uint64_t, std::size_t>> order(w.length);
    for (std::size_t i = 0; i < w.length; ++i) {
      const std::size_t pos = w.start + i;
      order[i] = {detail::key_distance(a.key_ptr(pos), query_key.words.data(), a.words_per_key(),
                                       a.key_length(), params_.window_bits)
                      .code(),
                  pos};
    }
    std::sort(order.begin(), order.end());
    std::vector<VectorId> ids(w.length);
    for (std::size_t i = 0; i < w.length; ++i) ids[i] = a.id(order[i].second);
    return ids;
  }

  /// Top-k_m members by exact cosine similarity among the union of the H
  /// windows, with R = r0 * k_m (or r0_override * k_m).
  std::vector<ScoredHit> search(const VectorCollection &vectors, std::span<const float> query,
                                std::size_t k_m, CoreSearchStats *stats = nullptr,
                                std::size_t r0_override = 0) const {
    if (k_m == 0) throw InvalidArgument("k_m must be >= 1");
    if (query.size() != dim_) throw DimensionMismatch(dim_, query.size());
    const PreparedQuery q(query);
    const std::size_t range = (r0_override ? r0_override : params_.r0) * k_m;
    const std::size_t wpk = words_for_bits(params_.key_length);
    std::vector<std::uint64_t> key(wpk);
    // Dedup by member slot: one flag per member beats sorting the windows.
    std::vector<char> seen(members_.size(), 0);
    std::size_t entries = 0;
    for (std::size_t h = 0; h < funcs_.size(); ++h) {
      funcs_[h].hash_into(query, key.data());
      const ExpansionWindow w = window(h, HashkeyView{key, params_.key_length}, range);
      const std::uint32_t *slots = locals_[h].data() + w.start;
      for (std::size_t i = 0; i < w.length; ++i) seen[slots[i]] = 1;
      entries += w.length;
    }
    // Walking the flags in slot order yields ascending ids, so rows are
    // read in address order.
    std::vector<ScoredHit> hits;
    hits.reserve(std::min(entries, members_.size()));
    for (std::size_t s = 0; s < seen.size(); ++s) {
      if (seen[s]) hits.push_back({members_[s], 0.0f});
    }
    if (stats) {
      stats->window_entries += entries;
      stats->unique_candidates += hits.size();
    }
    score_hits(q, vectors, hits);
    keep_top(hits, k_m);
    return hits;
  }

  void write(ByteWriter &w) const {
    w.u32(static_cast<std::uint32_t>(params_.h_count));
    w.u32(static_cast<std::uint32_t>(params_.key_length));
    w.u32(static_cast<std::uint32_t>(params_.min_key_length));
    w.u32(params_.window_bits);
    w.u32(static_cast<std::uint32_t>(params_.r0));
    w.u32(static_cast<std::uint32_t>(params_.rmi_width));
    w.u8(params_.rescale_keys ? 1 : 0);
    w.u64(params_.seed);
    w.u32(static_cast<std::uint32_t>(dim_));
    w.u32(static_cast<std::uint32_t>(members_.size()));
    for (std::size_t h = 0; h < arrays_.size(); ++h) {
      write_array(w, arrays_[h]);
      write_rmi(w, rmis_[h]);
    }
  }

  static CoreModel read(ByteReader &r) {
    CoreModel m;
    m.params_.h_count = r.u32();
    m.params_.key_length = r.u32();
    m.params_.min_key_length = r.u32();
    m.params_.window_bits = r.u32();
    m.params_.r0 = r.u32();
    m.params_.rmi_width = r.u32();
    m.params_.rescale_keys = r.u8() != 0;
    m.params_.seed = r.u64();
    m.dim_ = r.u32();
    const std::size_t n = r.u32();
    if (m.params_.h_count == 0 || m.params_.key_length == 0 || m.dim_ == 0 || n == 0 ||
        m.params_.window_bits < 1 || m.params_.window_bits > 8 || m.params_.r0 == 0) {
      r.fail("invalid core model parameters");
    }
    try {
      m.funcs_ = make_compound_functions(m.params_.h_count, m.params_.key_length, m.dim_,
                                         m.params_.seed);
      for (std::size_t h = 0; h < m.params_.h_count; ++h) {
        m.arrays_.push_back(read_array(r, m.params_.key_length, n));
        if (m.arrays_.back().func_id() != h) r.fail("array function id out of order");
        m.rmis_.push_back(read_rmi(r, m.params_.key_length, n));
      }
    } catch (const LoadError &) {
      throw;
    } catch (const Error &e) {
      r.fail(e.what());
    }
    m.members_ = m.arrays_.front().ids();
    std::sort(m.members_.begin(), m.members_.end());
    try {
      m.index_locals();
    } catch (const Error &e) {
      r.fail(e.what());
    }
    return m;
  }

  static void write_array(ByteWriter &w, const SortedHashkeyArray &a) {
    w.u32(a.func_id());
    w.array(a.words());
    w.array(a.ids());
  }

  static SortedHashkeyArray read_array(ByteReader &r, std::size_t key_length, std::size_t n) {
    const std::uint32_t func_id = r.u32();
    auto words = r.array<std::uint64_t>(n * words_for_bits(key_length));
    auto ids = r.array<VectorId>(n);
    return SortedHashkeyArray(func_id, key_length, std::move(words), std::move(ids));
  }

  static void write_rmi(ByteWriter &w, const RmiModel &rmi) {
    const KeyRescaler &s = rmi.rescaler();
    w.array(s.x_min().words());
    w.array(s.x_max().words());
    w.f64(s.a());
    w.f64(s.b());
    w.u8(s.normalizes() ? 1 : 0);
    w.f64(rmi.root().slope);
    w.f64(rmi.root().intercept);
    w.u32(static_cast<std::uint32_t>(rmi.width()));
    for (const auto &leaf : rmi.leaves()) {
      w.f64(leaf.slope);
      w.f64(leaf.intercept);
    }
    w.u64(rmi.length());
  }

  static RmiModel read_rmi(ByteReader &r, std::size_t key_length, std::size_t n) {
    const std::size_t wpk = words_for_bits(key_length);
    Hashkey x_min(r.array<std::uint64_t>(wpk), key_length);
    Hashkey x_max(r.array<std::uint64_t>(wpk), key_length);
    const double a = r.f64();
    const double b = r.f64();
    const bool normalize = r.u8() != 0;
    LinearModel root{r.f64(), r.f64()};
    const std::size_t width = r.u32();
    if (width == 0 || width > n + 1000000) r.fail("invalid RMI width");
    std::vector<LinearModel> leaves(width);
    for (auto &leaf : leaves) leaf = {r.f64(), r.f64()};
    const std::size_t length = r.u64();
    if (length != n) r.fail("RMI length does not match its array");
    return RmiModel(root, std::move(leaves), length,
                    KeyRescaler(std::move(x_min), std::move(x_max), a, b, normalize));
  }

 private:
  /// Maps each array entry to its slot in the sorted member list, and checks
  /// that every array holds exactly the member set.
  void index_locals() {
    locals_.assign(arrays_.size(), {});
    for (std::size_t h = 0; h < arrays_.size(); ++h) {
      const auto &ids = arrays_[h].ids();
      if (ids.size() != members_.size()) throw Error("array sizes differ within a core model");
      auto &loc = locals_[h];
      loc.resize(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = std::lower_bound(members_.begin(), members_.end(), ids[i]);
        if (it == members_.end() || *it != ids[i]) {
          throw Error("array " + std::to_string(h) + " holds id " + std::to_string(ids[i]) +
                      " that is not a member");
        }
        loc[i] = static_cast<std::uint32_t>(it - members_.begin());
      }
    }
  }

  CoreModelParams params_;
  std::size_t dim_ = 0;
  std::vector<VectorId> members_;
  std::vector<CompoundHashFunction> funcs_;
  std::vector<SortedHashkeyArray> arrays_;
  std::vector<RmiModel> rmis_;
  std::vector<std::vector<std::uint32_t>> locals_;  // array entry -> member slot
};

}  // namespace lider
