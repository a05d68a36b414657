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
// Shared test helpers: seeded generators and reference implementations
// written independently of the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "lider/common.hpp"
#include "lider/hashkey.hpp"
#include "lider/vectorstore.hpp"

namespace testutil {

using lider::ScoredHit;
using lider::VectorCollection;
using lider::VectorId;

/// Random bit string of length m.
inline std::string random_bits(std::mt19937_64 &rng, std::size_t m) {
  std::string s(m, '0');
  for (auto &ch : s) ch = (rng() & 1) ? '1' : '0';
  return s;
}

/// Random unit vectors with i.i.d. normal coordinates.
inline VectorCollection random_unit_vectors(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<float> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    std::vector<double> v(dim);
    for (auto &x : v) {
      x = nd(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < dim; ++j) data[i * dim + j] = static_cast<float>(v[j] / norm);
  }
  return VectorCollection(dim, std::move(data), true);
}

/// Reference key comparison on '0'/'1' strings.
inline int ref_compare(const std::string &a, const std::string &b) { return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1); }

/// Reference KL: length minus longest common prefix.
inline std::size_t ref_kl(const std::string &a, const std::string &b) {
  std::size_t p = 0;
  while (p < a.size() && a[p] == b[p]) ++p;
  return a.size() - p;
}

/// Reference KD_e: |value(a window) - value(b window)| with the window of
/// min(B, remaining) bits right after the common prefix.
inline std::uint64_t ref_kd(const std::string &a, const std::string &b, std::size_t B) {
  const std::size_t p = a.size() - ref_kl(a, b);
  const std::size_t w = std::min(B, a.size() - p);
  std::uint64_t va = 0, vb = 0;
  for (std::size_t i = 0; i < w; ++i) {
    va = va * 2 + (a[p + i] - '0');
    vb = vb * 2 + (b[p + i] - '0');
  }
  return va > vb ? va - vb : vb - va;
}

/// Reference dist_e as an exact rational value in long double.
inline long double ref_dist(const std::string &a, const std::string &b, std::size_t B) {
  return static_cast<long double>(ref_kl(a, b)) +
         static_cast<long double>(ref_kd(a, b, B)) / static_cast<long double>(1ull << B);
}

/// Brute-force top-k in long double arithmetic.
inline std::vector<ScoredHit> ref_topk(const VectorCollection &c, std::span<const float> q,
                                       std::size_t k) {
  std::vector<std::pair<long double, VectorId>> all;
  long double qn = 0;
  for (float x : q) qn += static_cast<long double>(x) * x;
  qn = std::sqrt(qn);
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto r = c.row(static_cast<VectorId>(i));
    long double d = 0, vn = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      d += static_cast<long double>(q[j]) * r[j];
      vn += static_cast<long double>(r[j]) * r[j];
    }
    all.emplace_back(d / (qn * std::sqrt(vn)), static_cast<VectorId>(i));
  }
  std::sort(all.begin(), all.end(), [](const auto &x, const auto &y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  all.resize(std::min(k, all.size()));
  std::vector<ScoredHit> out;
  for (auto &[s, id] : all) out.push_back({id, static_cast<float>(s)});
  return out;
}

inline std::vector<VectorId> ids_of(const std::vector<ScoredHit> &hits) {
  std::vector<VectorId> out;
  for (const auto &h : hits) out.push_back(h.id);
  return out;
}

/// Fraction of the reference top-k ids present in `got`.
inline double recall(const std::vector<ScoredHit> &got, const std::vector<ScoredHit> &truth) {
  std::vector<VectorId> a = ids_of(got), b = ids_of(truth);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<VectorId> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return truth.empty() ? 1.0 : static_cast<double>(both.size()) / static_cast<double>(truth.size());
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "lider_test_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string &name) const { return (path_ / name).string(); }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Vector-file bytes assembled by hand, independent of the library writer.
inline std::string vector_file_bytes(const std::vector<std::vector<float>> &records) {
  std::string out;
  for (const auto &r : records) {
    std::uint32_t d = static_cast<std::uint32_t>(r.size());
    char buf[4];
    std::memcpy(buf, &d, 4);
    out.append(buf, 4);
    for (float x : r) {
      std::memcpy(buf, &x, 4);
      out.append(buf, 4);
    }
  }
  return out;
}

}  // namespace testutil
