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
// Bit-packed hashkeys and the sortable-key distance.
//
// A hashkey of M bits is stored most-significant-first in 64-bit words:
// bit i lives in word i / 64 at position 63 - i % 64, and unused trailing
// bits are zero. Lexicographic order of the bit strings is then the
// element-wise unsigned order of the word sequences.
#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lider/common.hpp"

namespace lider {

inline std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

/// Non-owning view of a packed hashkey.
struct HashkeyView {
  std::span<const std::uint64_t> words;
  std::size_t length = 0;

  bool bit(std::size_t i) const { return (words[i / 64] >> (63 - i % 64)) & 1u; }
};

class Hashkey {
 public:
  Hashkey() = default;
  explicit Hashkey(std::size_t length) : words_(words_for_bits(length), 0), length_(length) {}
  Hashkey(std::vector<std::uint64_t> words, std::size_t length)
      : words_(std::move(words)), length_(length) {
    if (words_.size() != words_for_bits(length)) {
      throw InvalidArgument("hashkey word count does not match its length");
    }
  }

  /// Parses a string of '0'/'1' characters, first character most significant.
  static Hashkey from_string(std::string_view bits) {
    Hashkey k(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == '1') {
        k.set(i, true);
      } else if (bits[i] != '0') {
        throw InvalidArgument("hashkey string may only contain '0' and '1'");
      }
    }
    return k;
  }

  std::size_t length() const { return length_; }
  bool bit(std::size_t i) const { return view().bit(i); }
  void set(std::size_t i, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (63 - i % 64);
    if (value) {
      words_[i / 64] |= mask;
    } else {
      words_[i / 64] &= ~mask;
    }
  }

  const std::vector<std::uint64_t> &words() const { return words_; }
  HashkeyView view() const { return {words_, length_}; }
  operator HashkeyView() const { return view(); }

  std::string to_string() const {
    std::string s(length_, '0');
    for (std::size_t i = 0; i < length_; ++i) s[i] = bit(i) ? '1' : '0';
    return s;
  }

  friend bool operator==(const Hashkey &, const Hashkey &) = default;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t length_ = 0;
};

namespace detail {

inline void require_same_length(const HashkeyView &a, const HashkeyView &b) {
  if (a.length != b.length) {
    throw InvalidArgument("hashkey length mismatch: " + std::to_string(a.length) + " vs " +
                          std::to_string(b.length));
  }
}

inline void require_window_bits(std::size_t window_bits) {
  if (window_bits < 1 || window_bits > 8) {
    throw InvalidArgument("window bits B must be in 1..8, got " + std::to_string(window_bits));
  }
}

/// Unchecked lexicographic comparison of equal-length packed keys.
inline std::strong_ordering compare_words(const std::uint64_t *a, const std::uint64_t *b,
                                          std::size_t n_words) {
  for (std::size_t w = 0; w < n_words; ++w) {
    if (a[w] != b[w]) return a[w] < b[w] ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  return std::strong_ordering::equal;
}

inline std::size_t common_prefix_words(const std::uint64_t *a, const std::uint64_t *b,
                                       std::size_t n_words, std::size_t length) {
  for (std::size_t w = 0; w < n_words; ++w) {
    std::uint64_t x = a[w] ^ b[w];
    if (x != 0) return std::min(length, w * 64 + static_cast<std::size_t>(std::countl_zero(x)));
  }
  return length;
}

/// Reads `count` (<= 64) bits starting at bit `start` as an unsigned integer.
inline std::uint64_t read_bits(const std::uint64_t *words, std::size_t start, std::size_t count) {
  if (count == 0) return 0;
  const std::size_t w = start / 64;
  const std::size_t off = start % 64;
  std::uint64_t hi = words[w] << off;
  if (off + count > 64) hi |= words[w + 1] >> (64 - off);
  return hi >> (64 - count);
}

}  // namespace detail

/// Lexicographic order from the most significant bit.
inline std::strong_ordering compare(const HashkeyView &a, const HashkeyView &b) {
  detail::require_same_length(a, b);
  return detail::compare_words(a.words.data(), b.words.data(), a.words.size());
}

inline std::size_t common_prefix_length(const HashkeyView &a, const HashkeyView &b) {
  detail::require_same_length(a, b);
  return detail::common_prefix_words(a.words.data(), b.words.data(), a.words.size(), a.length);
}

/// KL: number of bits after the longest common prefix.
inline std::size_t non_prefix_length(const HashkeyView &a, const HashkeyView &b) {
  return a.length - common_prefix_length(a, b);
}

/// Reads bits [start, start + count) of a key as an unsigned integer.
inline std::uint64_t window_value(const HashkeyView &k, std::size_t start, std::size_t count) {
  if (count > 64 || start + count > k.length) {
    throw InvalidArgument("bit window out of range");
  }
  return detail::read_bits(k.words.data(), start, count);
}

/// Distance between two hashkeys: KL plus the B-bit window difference right
/// after the common prefix, scaled by 2^B. Stored as the exact integer
/// code KL * 2^B + KD_e so comparisons never round.
struct KeyDistance {
  std::uint64_t kl = 0;
  std::uint64_t kd = 0;
  std::uint32_t window_bits = 3;

  std::uint64_t code() const { return (kl << window_bits) | kd; }
  double value() const {
    return static_cast<double>(kl) +
           static_cast<double>(kd) / static_cast<double>(std::uint64_t{1} << window_bits);
  }

  friend bool operator==(const KeyDistance &a, const KeyDistance &b) { return a.code() == b.code(); }
  friend auto operator<=>(const KeyDistance &a, const KeyDistance &b) { return a.code() <=> b.code(); }
};

namespace detail {

/// Unchecked distance over raw packed words. When fewer than B bits remain
/// after the prefix the window shrinks to what is left; the scale stays 2^B.
inline KeyDistance key_distance(const std::uint64_t *a, const std::uint64_t *b,
                                std::size_t n_words, std::size_t length,
                                std::uint32_t window_bits) {
  const std::size_t prefix = common_prefix_words(a, b, n_words, length);
  KeyDistance d;
  d.window_bits = window_bits;
  d.kl = length - prefix;
  if (d.kl == 0) return d;
  const std::size_t width = std::min<std::size_t>(window_bits, d.kl);
  const std::uint64_t wa = read_bits(a, prefix, width);
  const std::uint64_t wb = read_bits(b, prefix, width);
  d.kd = wa > wb ? wa - wb : wb - wa;
  return d;
}

}  // namespace detail

/// KD_e: absolute difference of the B-bit windows after the common prefix.
inline std::uint64_t extended_element_distance(const HashkeyView &a, const HashkeyView &b,
                                               std::size_t window_bits) {
  detail::require_same_length(a, b);
  detail::require_window_bits(window_bits);
  return detail::key_distance(a.words.data(), b.words.data(), a.words.size(), a.length,
                              static_cast<std::uint32_t>(window_bits))
      .kd;
}

/// dist_e = KL + KD_e / 2^B.
inline KeyDistance extended_distance(const HashkeyView &a, const HashkeyView &b,
                                     std::size_t window_bits) {
  detail::require_same_length(a, b);
  detail::require_window_bits(window_bits);
  return detail::key_distance(a.words.data(), b.words.data(), a.words.size(), a.length,
                              static_cast<std::uint32_t>(window_bits));
}

/// All hashkeys of one compound function, sorted lexicographically with
/// equal keys ordered by embedding id. Keys are stored flat.
class SortedHashkeyArray {
 public:
  SortedHashkeyArray() = default;

  /// Adopts already sorted storage; used by the index loader. Throws if the
  /// order invariant does not hold.
  SortedHashkeyArray(std::uint32_t func_id, std::size_t key_length,
                     std::vector<std::uint64_t> words, std::vector<VectorId> ids)
      : func_id_(func_id),
        key_length_(key_length),
        words_per_key_(words_for_bits(key_length)),
        words_(std::move(words)),
        ids_(std::move(ids)) {
    if (key_length_ == 0) throw InvalidArgument("hashkey length must be >= 1");
    if (words_.size() != ids_.size() * words_per_key_) {
      throw InvalidArgument("sorted array storage size mismatch");
    }
    for (std::size_t i = 1; i < ids_.size(); ++i) {
      auto c = detail::compare_words(key_ptr(i - 1), key_ptr(i), words_per_key_);
      if (c > 0 || (c == 0 && ids_[i - 1] >= ids_[i])) {
        throw InvalidArgument("sorted array entries out of order at position " +
                              std::to_string(i));
      }
    }
  }

  std::uint32_t func_id() const { return func_id_; }
  std::size_t key_length() const { return key_length_; }
  std::size_t words_per_key() const { return words_per_key_; }
  std::size_t size() const { return ids_.size(); }

  HashkeyView key(std::size_t pos) const { return {{key_ptr(pos), words_per_key_}, key_length_}; }
  VectorId id(std::size_t pos) const { return ids_[pos]; }
  const std::uint64_t *key_ptr(std::size_t pos) const { return words_.data() + pos * words_per_key_; }
  const std::vector<std::uint64_t> &words() const { return words_; }
  const std::vector<VectorId> &ids() const { return ids_; }

  /// First position whose key is not less than `query`.
  std::size_t lower_bound(const HashkeyView &query) const {
    if (query.length != key_length_) {
      throw InvalidArgument("query key length does not match the array");
    }
    std::size_t lo = 0;
    std::size_t hi = size();
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo) / 2;
      if (detail::compare_words(key_ptr(mid), query.words.data(), words_per_key_) < 0) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  friend bool operator==(const SortedHashkeyArray &, const SortedHashkeyArray &) = default;

 private:
  std::uint32_t func_id_ = 0;
  std::size_t key_length_ = 0;
  std::size_t words_per_key_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<VectorId> ids_;
};

/// Sorts packed keys (n * words_per_key words, one key per id) into an array.
inline SortedHashkeyArray build_sorted_array_packed(std::uint32_t func_id, std::size_t key_length,
                                                    const std::vector<std::uint64_t> &words,
                                                    const std::vector<VectorId> &ids) {
  const std::size_t wpk = words_for_bits(key_length);
  const std::size_t n = ids.size();
  if (words.size() != n * wpk) throw InvalidArgument("packed key storage size mismatch");
  {
    std::vector<VectorId> check(ids);
    std::sort(check.begin(), check.end());
    auto dup = std::adjacent_find(check.begin(), check.end());
    if (dup != check.end()) throw InvalidArgument("duplicate embedding id " + std::to_string(*dup));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    auto c = detail::compare_words(words.data() + x * wpk, words.data() + y * wpk, wpk);
    if (c != 0) return c < 0;
    return ids[x] < ids[y];
  });
  std::vector<std::uint64_t> sorted_words(words.size());
  std::vector<VectorId> sorted_ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(words.data() + order[i] * wpk, wpk, sorted_words.data() + i * wpk);
    sorted_ids[i] = ids[order[i]];
  }
  return SortedHashkeyArray(func_id, key_length, std::move(sorted_words), std::move(sorted_ids));
}

inline SortedHashkeyArray build_sorted_array(const std::vector<std::pair<Hashkey, VectorId>> &keys,
                                             std::uint32_t func_id) {
  if (keys.empty()) throw InvalidArgument("cannot build a sorted array from no keys");
  const std::size_t length = keys.front().first.length();
  std::vector<std::uint64_t> words;
  std::vector<VectorId> ids;
  words.reserve(keys.size() * words_for_bits(length));
  ids.reserve(keys.size());
  for (const auto &[key, id] : keys) {
    if (key.length() != length) throw InvalidArgument("hashkeys of one array must share a length");
    words.insert(words.end(), key.words().begin(), key.words().end());
    ids.push_back(id);
  }
  return build_sorted_array_packed(func_id, length, words, ids);
}

}  // namespace lider
