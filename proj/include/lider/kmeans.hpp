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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lider/common.hpp"
#include "lider/random.hpp"
#include "lider/vectorstore.hpp"

namespace lider {

struct Clustering {
  VectorCollection centroids;             // c unit vectors
  std::vector<std::uint32_t> assignment;  // id -> cluster
  std::vector<std::size_t> sizes;
  std::size_t iterations = 0;

  std::size_t count() const { return sizes.size(); }

  /// Member ids of each cluster, ascending.
  std::vector<std::vector<VectorId>> members() const {
    std::vector<std::vector<VectorId>> out(sizes.size());
    for (std::size_t c = 0; c < sizes.size(); ++c) out[c].reserve(sizes[c]);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      out[assignment[i]].push_back(static_cast<VectorId>(i));
    }
    return out;
  }
};

namespace detail {

/// Eight-lane float dot product; only used where bit-exact agreement with
/// the scorer is not needed.
inline float dot_fast(const float *a, const float *b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void normalize_in_place(std::vector<float> &v) {
  double n = 0.0;
  for (float x : v) n += static_cast<double>(x) * x;
  n = std::sqrt(n);
  for (float &x : v) x = static_cast<float>(x / n);
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding, using Euclidean distance on unit
/// vectors. Centroids are re-normalized after every update. A cluster left
/// empty takes the point of the largest cluster farthest from that
/// cluster's centroid. Stops at `max_iters` or once assignments stop
/// changing.
inline Clustering kmeans(const VectorCollection &data, std::size_t c, std::size_t max_iters,
                         std::uint64_t seed, WorkerPool *pool = nullptr) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  if (c == 0) throw InvalidArgument("cluster count must be >= 1");
  if (c > n) {
    throw InvalidArgument("cluster count " + std::to_string(c) + " exceeds point count " +
                          std::to_string(n));
  }
  const float *x = data.data().data();
  std::vector<float> centroids(c * d);
  std::vector<double> sq_norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double nrm = data.norm(static_cast<VectorId>(i));
    sq_norm[i] = nrm * nrm;
  }

  auto for_each_chunk = [&](std::size_t total, const std::function<void(std::size_t, std::size_t)> &fn) {
    const std::size_t chunk = 4096;
    const std::size_t chunks = (total + chunk - 1) / chunk;
    auto body = [&](std::size_t ci) { fn(ci * chunk, std::min(total, (ci + 1) * chunk)); };
    if (pool) {
      pool->parallel_for(chunks, body);
    } else {
      for (std::size_t ci = 0; ci < chunks; ++ci) body(ci);
    }
  };

  // k-means++ seeding.
  StreamRng rng(derive_key(seed, 0x6b6d));
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, 0.0);
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  chosen[first] = 1;
  std::copy_n(x + first * d, d, centroids.data());
  auto update_d2 = [&](std::size_t center, bool init) {
    const float *cv = centroids.data() + center * d;
    double cn = 0.0;
    for (std::size_t j = 0; j < d; ++j) cn += static_cast<double>(cv[j]) * cv[j];
    for_each_chunk(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        double dist = std::max(0.0, sq_norm[i] + cn - 2.0 * detail::dot_fast(x + i * d, cv, d));
        if (chosen[i]) dist = 0.0;
        d2[i] = init ? dist : std::min(d2[i], dist);
      }
    });
  };
  update_d2(0, true);
  for (std::size_t k = 1; k < c; ++k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0.0) continue;
        pick = i;
        r -= d2[i];
        if (r < 0.0) break;
      }
    }
    if (pick == n) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = 1;
    std::copy_n(x + pick * d, d, centroids.data() + k * d);
    update_d2(k, false);
  }
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<float> cv(centroids.begin() + k * d, centroids.begin() + (k + 1) * d);
    detail::normalize_in_place(cv);
    std::copy(cv.begin(), cv.end(), centroids.begin() + k * d);
  }

  Clustering out;
  std::vector<std::uint32_t> assign(n, 0);
  std::vector<float> best_sim(n, 0.0f);
  std::vector<std::size_t> sizes(c, 0);
  std::vector<std::uint32_t> previous;
  const std::size_t rounds = std::max<std::size_t>(max_iters, 1);
  std::size_t it = 0;
  for (; it < rounds; ++it) {
    // Unit centroids: nearest in Euclidean distance == largest dot product.
    for_each_chunk(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        float best = -std::numeric_limits<float>::infinity();
        std::uint32_t arg = 0;
        for (std::size_t k = 0; k < c; ++k) {
          float s = detail::dot_fast(x + i * d, centroids.data() + k * d, d);
          if (s > best) {
            best = s;
            arg = static_cast<std::uint32_t>(k);
          }
        }
        assign[i] = arg;
        best_sim[i] = best;
      }
    });
    std::fill(sizes.begin(), sizes.end(), 0);
    for (auto a : assign) ++sizes[a];
    for (std::size_t e = 0; e < c; ++e) {
      if (sizes[e] != 0) continue;
      std::size_t largest = static_cast<std::size_t>(
          std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == largest && (far == n || best_sim[i] < best_sim[far])) far = i;
      }
      assign[far] = static_cast<std::uint32_t>(e);
      best_sim[far] = 1.0f;
      --sizes[largest];
      ++sizes[e];
      std::vector<float> cv(x + far * d, x + (far + 1) * d);
      detail::normalize_in_place(cv);
      std::copy(cv.begin(), cv.end(), centroids.begin() + e * d);
    }
    const bool stable = assign == previous;
    previous = assign;
    // Mean of members, re-normalized; a zero mean keeps the old centroid.
    std::vector<double> sums(c * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double *s = sums.data() + assign[i] * d;
      const float *xi = x + i * d;
      for (std::size_t j = 0; j < d; ++j) s[j] += xi[j];
    }
    for (std::size_t k = 0; k < c; ++k) {
      const double *s = sums.data() + k * d;
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) norm += s[j] * s[j];
      norm = std::sqrt(norm);
      if (norm == 0.0 || !std::isfinite(norm)) continue;
      for (std::size_t j = 0; j < d; ++j) centroids[k * d + j] = static_cast<float>(s[j] / norm);
    }
    if (stable) {
      ++it;
      break;
    }
  }
  out.centroids = VectorCollection(d, std::move(centroids), true);
  out.assignment = std::move(assign);
  out.sizes = std::move(sizes);
  out.iterations = it;
  return out;
}

}  // namespace lider
