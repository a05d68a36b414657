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
// Comparison mode reproducing the original sortable-key LSH search: the
// query's position on each array is found by binary search, and one global
// frontier repeatedly takes the closest unvisited neighbour over all arrays
// under the one-bit element distance.
#pragma once

#include <memory>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "lider/common.hpp"
#include "lider/core_model.hpp"
#include "lider/hashkey.hpp"
#include "lider/lsh.hpp"
#include "lider/serialize.hpp"
#include "lider/vectorstore.hpp"

namespace lider {

struct SkLshParams {
  std::size_t h = 10;
  std::size_t key_length = 0;  // 0 = ceil(log2 N)
  std::uint64_t seed = 1;
};

/// One step of the global expansion, in pop order.
struct SkLshCandidate {
  VectorId id = 0;
  std::uint32_t array = 0;
  std::size_t position = 0;
  KeyDistance distance;
};

class SkLshIndex {
 public:
  /// The one-bit element distance of the original scheme: with binary keys
  /// KD is the single next bit, so it is dist_e with B = 1 (C = 2).
  static constexpr std::uint32_t kWindowBits = 1;

  SkLshIndex() = default;

  static SkLshIndex build(std::shared_ptr<const VectorCollection> vectors, SkLshParams p,
                          WorkerPool *pool = nullptr) {
    if (!vectors || vectors->empty()) throw InvalidArgument("no vectors to index");
    if (p.h == 0) throw InvalidArgument("H must be >= 1");
    if (p.key_length == 0) p.key_length = default_key_length(vectors->size());
    SkLshIndex idx;
    idx.params_ = p;
    idx.vectors_ = vectors;
    idx.digest_ = content_digest(*vectors);
    idx.funcs_ = make_compound_functions(p.h, p.key_length, vectors->dim(), p.seed);
    idx.arrays_.resize(p.h);
    std::vector<VectorId> ids(vectors->size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<VectorId>(i);
    const std::size_t wpk = words_for_bits(p.key_length);
    auto build_one = [&](std::size_t h) {
      std::vector<std::uint64_t> words(ids.size() * wpk);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        idx.funcs_[h].hash_into(vectors->row(ids[i]), words.data() + i * wpk);
      }
      idx.arrays_[h] = build_sorted_array_packed(static_cast<std::uint32_t>(h), p.key_length,
                                                 words, ids);
    };
    if (pool) {
      pool->parallel_for(p.h, build_one);
    } else {
      for (std::size_t h = 0; h < p.h; ++h) build_one(h);
    }
    return idx;
  }

  const SkLshParams &params() const { return params_; }
  std::size_t dim() const { return vectors_ ? vectors_->dim() : 0; }
  std::size_t size() const { return vectors_ ? vectors_->size() : 0; }
  const std::vector<CompoundHashFunction> &functions() const { return funcs_; }
  const std::vector<SortedHashkeyArray> &arrays() const { return arrays_; }
  std::size_t array_count() const { return arrays_.size(); }

  /// Pops up to `budget` entries in non-decreasing distance order across
  /// all arrays. Ties go to the lower array index, then the lower position.
  std::vector<SkLshCandidate> expand(std::span<const float> query, std::size_t budget) const {
    if (query.size() != dim()) throw DimensionMismatch(dim(), query.size());
    const std::size_t len = params_.key_length;
    const std::size_t wpk = words_for_bits(len);
    std::vector<std::vector<std::uint64_t>> keys(arrays_.size(), std::vector<std::uint64_t>(wpk));
    // (distance code, array, position, direction: 0 = left, 1 = right)
    using Entry = std::tuple<std::uint64_t, std::uint32_t, std::size_t, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> frontier;
    auto push = [&](std::uint32_t h, std::size_t pos, int dir) {
      const auto &a = arrays_[h];
      auto d = detail::key_distance(a.key_ptr(pos), keys[h].data(), wpk, len, kWindowBits);
      frontier.emplace(d.code(), h, pos, dir);
    };
    for (std::uint32_t h = 0; h < arrays_.size(); ++h) {
      funcs_[h].hash_into(query, keys[h].data());
      const std::size_t start = arrays_[h].lower_bound(HashkeyView{keys[h], len});
      if (start > 0) push(h, start - 1, 0);
      if (start < arrays_[h].size()) push(h, start, 1);
    }
    std::vector<SkLshCandidate> out;
    out.reserve(budget);
    while (out.size() < budget && !frontier.empty()) {
      auto [code, h, pos, dir] = frontier.top();
      frontier.pop();
      SkLshCandidate c;
      c.id = arrays_[h].id(pos);
      c.array = h;
      c.position = pos;
      c.distance.kl = code >> kWindowBits;
      c.distance.kd = code & ((1u << kWindowBits) - 1);
      c.distance.window_bits = kWindowBits;
      out.push_back(c);
      if (dir == 0 && pos > 0) push(h, pos - 1, 0);
      if (dir == 1 && pos + 1 < arrays_[h].size()) push(h, pos + 1, 1);
    }
    return out;
  }

  std::vector<ScoredHit> search(std::span<const float> query, std::size_t k, std::size_t budget,
                                std::size_t *verified = nullptr) const {
    if (k == 0) throw InvalidArgument("k must be >= 1");
    if (budget < k) throw InvalidArgument("candidate budget must be >= k");
    const PreparedQuery q(query);
    const auto popped = expand(query, budget);
    std::vector<VectorId> ids(popped.size());
    for (std::size_t i = 0; i < popped.size(); ++i) ids[i] = popped[i].id;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (verified) *verified = ids.size();
    std::vector<ScoredHit> hits(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) hits[i] = {ids[i], score(q, *vectors_, ids[i])};
    keep_top(hits, k);
    return hits;
  }

  std::string serialize() const {
    ByteWriter file;
    write_preamble(file);
    ByteWriter body;
    body.u32(kKindSkLsh);
    body.u32(static_cast<std::uint32_t>(params_.h));
    body.u32(static_cast<std::uint32_t>(params_.key_length));
    body.u64(params_.seed);
    body.u32(static_cast<std::uint32_t>(dim()));
    body.u64(size());
    body.u64(digest_);
    for (const auto &a : arrays_) CoreModel::write_array(body, a);
    file.section("SKLH", body);
    return file.take();
  }

  void save(const std::string &path) const { write_file(path, serialize()); }

  static SkLshIndex deserialize(std::string_view bytes,
                                std::shared_ptr<const VectorCollection> vectors) {
    if (!vectors) throw InvalidArgument("index load needs the indexed vectors");
    ByteReader file(bytes, "header");
    read_preamble(file);
    ByteReader r = file.section("SKLH", "sk-lsh arrays");
    if (r.u32() != kKindSkLsh) r.fail("file does not hold an SK-LSH index");
    SkLshIndex idx;
    idx.params_.h = r.u32();
    idx.params_.key_length = r.u32();
    idx.params_.seed = r.u64();
    const std::size_t dim = r.u32();
    const std::size_t n = r.u64();
    idx.digest_ = r.u64();
    if (idx.params_.h == 0 || idx.params_.key_length == 0) r.fail("invalid parameters");
    if (dim != vectors->dim() || n != vectors->size() || idx.digest_ != content_digest(*vectors)) {
      throw LoadError("vector content digest does not match the index");
    }
    try {
      idx.funcs_ = make_compound_functions(idx.params_.h, idx.params_.key_length, dim,
                                           idx.params_.seed);
      for (std::size_t h = 0; h < idx.params_.h; ++h) {
        idx.arrays_.push_back(CoreModel::read_array(r, idx.params_.key_length, n));
      }
    } catch (const LoadError &) {
      throw;
    } catch (const Error &e) {
      r.fail(e.what());
    }
    r.expect_end();
    idx.vectors_ = std::move(vectors);
    return idx;
  }

  static SkLshIndex load(const std::string &path, std::shared_ptr<const VectorCollection> vectors) {
    std::string bytes = detail::read_file(path);
    return deserialize(bytes, std::move(vectors));
  }

  static constexpr std::uint32_t kKindSkLsh = 2;

 private:
  SkLshParams params_;
  std::shared_ptr<const VectorCollection> vectors_;
  std::uint64_t digest_ = 0;
  std::vector<CompoundHashFunction> funcs_;
  std::vector<SortedHashkeyArray> arrays_;
};

/// Reports which kind of index a file holds without fully decoding it.
enum class IndexKind { kLider, kSkLsh };

inline IndexKind peek_index_kind(std::string_view bytes) {
  ByteReader file(bytes, "header");
  read_preamble(file);
  if (bytes.size() < 8 + 4) throw LoadError("index file: truncated header");
  std::string_view tag = bytes.substr(8, 4);
  if (tag == "PARM") return IndexKind::kLider;
  if (tag == "SKLH") return IndexKind::kSkLsh;
  throw LoadError("index file: unknown leading section '" + std::string(tag) + "'");
}

}  // namespace lider
