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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "lider/common.hpp"
#include "lider/hashkey.hpp"
#include "lider/random.hpp"
#include "lider/vectorstore.hpp"

namespace lider {

/// Random-hyperplane compound hash G = (h_1, ..., h_M) for cosine similarity.
/// Bit i is 1 when the projection onto hyperplane i is >= 0. Plane
/// coordinates are i.i.d. standard normal, drawn from a stream keyed by
/// (seed, function id, plane index), so a function is fully determined by
/// those four numbers and can be regenerated instead of stored.
class CompoundHashFunction {
 public:
  CompoundHashFunction() = default;

  CompoundHashFunction(std::uint32_t id, std::size_t key_length, std::size_t dim,
                       std::uint64_t seed)
      : id_(id), key_length_(key_length), dim_(dim), seed_(seed) {
    if (key_length == 0 || dim == 0) {
      throw InvalidArgument("compound hash function needs M >= 1 and d >= 1");
    }
    planes_.resize(key_length * dim);
    for (std::size_t p = 0; p < key_length; ++p) {
      StreamRng rng(derive_key(seed, id, p));
      float *plane = planes_.data() + p * dim;
      for (std::size_t j = 0; j < dim; ++j) plane[j] = static_cast<float>(rng.normal());
    }
  }

  std::uint32_t id() const { return id_; }
  std::size_t key_length() const { return key_length_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const float> plane(std::size_t i) const { return {planes_.data() + i * dim_, dim_}; }

  /// Writes the packed key of `v` into words_for_bits(M) words at `out`.
  void hash_into(std::span<const float> v, std::uint64_t *out) const {
    if (v.size() != dim_) throw DimensionMismatch(dim_, v.size());
    const std::size_t n_words = words_for_bits(key_length_);
    for (std::size_t w = 0; w < n_words; ++w) out[w] = 0;
    for (std::size_t i = 0; i < key_length_; ++i) {
      if (dot(plane(i), v) >= 0.0) out[i / 64] |= std::uint64_t{1} << (63 - i % 64);
    }
  }

  Hashkey hash(std::span<const float> v) const {
    std::vector<std::uint64_t> words(words_for_bits(key_length_));
    hash_into(v, words.data());
    return Hashkey(std::move(words), key_length_);
  }

  friend bool operator==(const CompoundHashFunction &, const CompoundHashFunction &) = default;

 private:
  std::uint32_t id_ = 0;
  std::size_t key_length_ = 0;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<float> planes_;
};

inline std::vector<CompoundHashFunction> make_compound_functions(std::size_t h_count,
                                                                 std::size_t key_length,
                                                                 std::size_t dim,
                                                                 std::uint64_t seed) {
  if (h_count == 0) throw InvalidArgument("need at least one compound hash function");
  std::vector<CompoundHashFunction> funcs;
  funcs.reserve(h_count);
  for (std::size_t h = 0; h < h_count; ++h) {
    funcs.emplace_back(static_cast<std::uint32_t>(h), key_length, dim, seed);
  }
  return funcs;
}

/// Default hashkey length for an indexed set of n items: ceil(log2 n),
/// never below `floor_bits`.
inline std::size_t default_key_length(std::size_t n, std::size_t floor_bits = 1) {
  return std::max(ceil_log2(n), floor_bits);
}

/// Writes two unit vectors of dimension `dim` (>= 2) at exact angle theta,
/// oriented uniformly at random.
inline void random_pair_at_angle(StreamRng &rng, double theta, std::vector<float> &a,
                                 std::vector<float> &b) {
  const std::size_t dim = a.size();
  std::vector<double> u(dim), w(dim);
  double nu = 0.0;
  do {
    nu = 0.0;
    for (auto &x : u) {
      x = rng.normal();
      nu += x * x;
    }
  } while (nu == 0.0);
  nu = std::sqrt(nu);
  for (auto &x : u) x /= nu;
  double nw = 0.0;
  do {
    for (auto &x : w) x = rng.normal();
    double proj = 0.0;
    for (std::size_t j = 0; j < dim; ++j) proj += w[j] * u[j];
    nw = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      w[j] -= proj * u[j];
      nw += w[j] * w[j];
    }
  } while (nw < 1e-12);
  nw = std::sqrt(nw);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (std::size_t j = 0; j < dim; ++j) {
    a[j] = static_cast<float>(u[j]);
    b[j] = static_cast<float>(c * u[j] + s * w[j] / nw);
  }
}

/// Monte Carlo frequency of dist(G(p1), G(p2)) < M - l + 1 for random unit
/// pairs at angle theta, drawing a fresh compound function per trial.
inline double collision_law_check(double theta, std::size_t prefix_len, std::size_t trials,
                                  std::uint64_t seed, std::size_t key_length = 16,
                                  std::size_t dim = 3) {
  if (!(theta > 0.0 && theta < std::numbers::pi)) throw InvalidArgument("theta must lie in (0, pi)");
  if (prefix_len > key_length) throw InvalidArgument("l must not exceed M");
  if (trials == 0) throw InvalidArgument("trials must be >= 1");
  if (dim < 2) throw InvalidArgument("dim must be >= 2");
  const double bound = static_cast<double>(key_length - prefix_len + 1);
  std::vector<float> a(dim), b(dim);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    StreamRng rng(derive_key(splitmix64(~seed), t));
    random_pair_at_angle(rng, theta, a, b);
    CompoundHashFunction g(static_cast<std::uint32_t>(t), key_length, dim, seed);
    Hashkey ka = g.hash(a);
    Hashkey kb = g.hash(b);
    if (extended_distance(ka, kb, 3).value() < bound) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace lider
