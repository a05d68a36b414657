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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lider/common.hpp"
#include "lider/random.hpp"

namespace lider {

/// Dot product of two float spans with a 64-bit accumulator. Four
/// independent lanes, summed in a fixed order, keep results reproducible.
inline double dot(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = a.size();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double l2_norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

/// Cosine similarity of two non-zero vectors of equal dimension.
inline float cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw InvalidArgument("cosine similarity is undefined for a zero vector");
  }
  return static_cast<float>(dot(a, b) / (na * nb));
}

/// Dense, immutable collection of equal-dimension float vectors with ids
/// 0..N-1 in storage order. Norms are cached so every scorer in the library
/// computes the same cosine value bit-for-bit.
class VectorCollection {
 public:
  VectorCollection() = default;

  VectorCollection(std::size_t dim, std::vector<float> data, bool normalized = false)
      : dim_(dim), data_(std::move(data)), normalized_(normalized) {
    if (dim_ == 0) throw InvalidArgument("vector dimension must be >= 1");
    if (data_.empty() || data_.size() % dim_ != 0) {
      throw InvalidArgument("vector data must hold a positive multiple of dim floats");
    }
    if (data_.size() / dim_ > UINT32_MAX) {
      throw InvalidArgument("collection exceeds 2^32 vectors");
    }
    norms_.resize(size());
    for (std::size_t i = 0; i < size(); ++i) norms_[i] = l2_norm(row(static_cast<VectorId>(i)));
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return data_.empty(); }
  bool normalized() const { return normalized_; }

  std::span<const float> row(VectorId id) const {
    return {data_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }
  double norm(VectorId id) const { return norms_[id]; }
  const std::vector<float> &data() const { return data_; }

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<double> norms_;
  bool normalized_ = false;
};

/// A query prepared for repeated scoring against one collection.
struct PreparedQuery {
  std::span<const float> values;
  double norm = 0.0;

  explicit PreparedQuery(std::span<const float> v) : values(v), norm(l2_norm(v)) {
    if (norm == 0.0) throw InvalidArgument("query is a zero vector");
  }
};

/// Cosine similarity between a prepared query and a stored vector. This is
/// the single scoring routine shared by the oracle and every index.
inline float score(const PreparedQuery &q, const VectorCollection &c, VectorId id) {
  return static_cast<float>(dot(q.values, c.row(id)) / (q.norm * c.norm(id)));
}

/// Fills in the score of every hit. Rows are prefetched a few hits ahead,
/// since candidate ids are scattered across the collection.
inline void score_hits(const PreparedQuery &q, const VectorCollection &c,
                       std::span<ScoredHit> hits) {
  constexpr std::size_t kAhead = 8;
  const std::size_t row_bytes = c.dim() * sizeof(float);
  auto prefetch = [&](VectorId id) {
    const char *p = reinterpret_cast<const char *>(c.row(id).data());
    for (std::size_t off = 0; off < row_bytes; off += 64) __builtin_prefetch(p + off);
  };
  for (std::size_t i = 0; i < std::min(kAhead, hits.size()); ++i) prefetch(hits[i].id);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (i + kAhead < hits.size()) prefetch(hits[i + kAhead].id);
    hits[i].score = score(q, c, hits[i].id);
  }
}

namespace detail {

inline std::uint32_t read_u32_le(const unsigned char *p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  return v;
}

inline void append_u32_le(std::string &out, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  out.append(reinterpret_cast<const char *>(&v), 4);
}

inline std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Parses an in-memory vector file: records of a little-endian u32 dimension
/// followed by that many little-endian f32 values.
inline VectorCollection parse_vectors(std::string_view bytes,
                                      std::optional<std::size_t> limit = std::nullopt) {
  const auto *p = reinterpret_cast<const unsigned char *>(bytes.data());
  const std::size_t size = bytes.size();
  std::size_t offset = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::size_t count = 0;
  auto fail = [](std::size_t at, const std::string &what) {
    throw LoadError("vector file: " + what + " at byte offset " + std::to_string(at));
  };
  while (offset < size && (!limit || count < *limit)) {
    if (size - offset < 4) fail(offset, "truncated record header");
    std::uint32_t d = detail::read_u32_le(p + offset);
    if (d == 0) fail(offset, "record declares dimension 0");
    if (dim == 0) {
      dim = d;
    } else if (d != dim) {
      fail(offset, "record " + std::to_string(count) + " declares d=" + std::to_string(d) +
                       " in a d=" + std::to_string(dim) + " file");
    }
    const std::size_t body = static_cast<std::size_t>(d) * 4;
    if (size - offset - 4 < body) fail(offset, "truncated record " + std::to_string(count));
    bool nonzero = false;
    for (std::uint32_t j = 0; j < d; ++j) {
      const std::size_t at = offset + 4 + static_cast<std::size_t>(j) * 4;
      float f = std::bit_cast<float>(detail::read_u32_le(p + at));
      if (!std::isfinite(f)) fail(at, "non-finite value in record " + std::to_string(count));
      nonzero = nonzero || f != 0.0f;
      data.push_back(f);
    }
    if (!nonzero) fail(offset, "zero vector (id " + std::to_string(count) + ")");
    offset += 4 + body;
    ++count;
  }
  if (count == 0) throw LoadError("vector file: no records");
  return VectorCollection(dim, std::move(data));
}

inline VectorCollection load_vectors(const std::string &path,
                                     std::optional<std::size_t> limit = std::nullopt) {
  std::string bytes = detail::read_file(path);
  try {
    return parse_vectors(bytes, limit);
  } catch (const LoadError &e) {
    throw LoadError(path + ": " + e.what());
  }
}

inline std::string serialize_vectors(const VectorCollection &c) {
  std::string out;
  out.reserve(c.size() * (4 + 4 * c.dim()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    detail::append_u32_le(out, static_cast<std::uint32_t>(c.dim()));
    for (float f : c.row(static_cast<VectorId>(i))) {
      detail::append_u32_le(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

inline void write_vectors(const std::string &path, const VectorCollection &c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  std::string bytes = serialize_vectors(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path + "' failed");
}

/// Scales every vector to unit Euclidean norm.
inline VectorCollection normalize(const VectorCollection &c) {
  std::vector<float> data(c.data());
  for (std::size_t i = 0; i < c.size(); ++i) {
    double n = c.norm(static_cast<VectorId>(i));
    if (n == 0.0) {
      throw InvalidArgument("cannot normalize zero vector (id " + std::to_string(i) + ")");
    }
    float *row = data.data() + i * c.dim();
    for (std::size_t j = 0; j < c.dim(); ++j) {
      row[j] = static_cast<float>(row[j] / n);
    }
  }
  return VectorCollection(c.dim(), std::move(data), true);
}

/// 64-bit FNV-1a over the dimension and the raw float bytes.
inline std::uint64_t content_digest(const VectorCollection &c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint32_t word) {
    for (int b = 0; b < 4; ++b) {
      h ^= (word >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint32_t>(c.dim()));
  for (float f : c.data()) mix(std::bit_cast<std::uint32_t>(f));
  return h;
}

/// Brute-force exact top-k by cosine similarity. Ties go to the smaller id.
inline std::vector<ScoredHit> exact_topk(const VectorCollection &c,
                                         std::span<const float> query, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  if (query.size() != c.dim()) throw DimensionMismatch(c.dim(), query.size());
  PreparedQuery q(query);
  std::vector<ScoredHit> hits(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    hits[i] = {static_cast<VectorId>(i), score(q, c, static_cast<VectorId>(i))};
  }
  keep_top(hits, k);
  return hits;
}

/// Normalized Gaussian mixture: unit-length random centers, each point a
/// center plus isotropic noise of the given per-coordinate deviation.
class SyntheticMixture {
 public:
  SyntheticMixture(std::size_t dim, std::size_t n_centers, double spread, std::uint64_t seed)
      : dim_(dim), n_centers_(n_centers), spread_(spread), seed_(seed) {
    if (dim == 0 || n_centers == 0) {
      throw InvalidArgument("synthetic data needs dim >= 1 and n_centers >= 1");
    }
    if (!(spread >= 0.0) || !std::isfinite(spread)) {
      throw InvalidArgument("spread must be finite and >= 0");
    }
    centers_.resize(dim * n_centers);
    for (std::size_t c = 0; c < n_centers; ++c) {
      StreamRng rng(derive_key(seed, 0, c));
      double norm = 0.0;
      float *center = centers_.data() + c * dim;
      for (std::size_t j = 0; j < dim; ++j) {
        double v = rng.normal();
        center[j] = static_cast<float>(v);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < dim; ++j) center[j] = static_cast<float>(center[j] / norm);
    }
  }

  /// Draws n points from stream `stream`; distinct streams are independent.
  VectorCollection sample(std::size_t n, std::uint64_t stream,
                          std::vector<std::uint32_t> *labels = nullptr) const {
    if (n == 0) throw InvalidArgument("synthetic data needs n >= 1");
    std::vector<float> data(n * dim_);
    if (labels) labels->resize(n);
    std::vector<double> point(dim_);
    for (std::size_t i = 0; i < n; ++i) {
      StreamRng rng(derive_key(seed_, stream + 1, i));
      auto label = static_cast<std::uint32_t>(rng.below(n_centers_));
      if (labels) (*labels)[i] = label;
      const float *center = centers_.data() + label * dim_;
      double norm = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        point[j] = center[j] + spread_ * rng.normal();
        norm += point[j] * point[j];
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) throw Error("synthetic point " + std::to_string(i) + " is zero");
      float *row = data.data() + i * dim_;
      for (std::size_t j = 0; j < dim_; ++j) row[j] = static_cast<float>(point[j] / norm);
    }
    return VectorCollection(dim_, std::move(data), true);
  }

 private:
  std::size_t dim_;
  std::size_t n_centers_;
  double spread_;
  std::uint64_t seed_;
  std::vector<float> centers_;
};

/// Base-set sample (stream 0) of a seeded Gaussian mixture.
inline VectorCollection generate_synthetic(std::size_t n, std::size_t dim,
                                           std::size_t n_centers, double spread,
                                           std::uint64_t seed) {
  return SyntheticMixture(dim, n_centers, spread, seed).sample(n, 0);
}

/// Query sample from the same mixture, drawn from an independent stream.
inline VectorCollection generate_synthetic_queries(std::size_t n, std::size_t dim,
                                                   std::size_t n_centers, double spread,
                                                   std::uint64_t seed) {
  return SyntheticMixture(dim, n_centers, spread, seed).sample(n, 1);
}

}  // namespace lider
