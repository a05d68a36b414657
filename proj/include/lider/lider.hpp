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
// Two-layer clustered index. Layer one is a core model over the k-means
// centroids (the centroids retriever); layer two is one core model per
// cluster (the in-cluster retrievers). A query asks the centroids
// retriever for c0 clusters, searches each of them for its own top-k, and
// merges the c0 ranked lists with a heap.
#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lider/common.hpp"
#include "lider/core_model.hpp"
#include "lider/kmeans.hpp"
#include "lider/merge.hpp"
#include "lider/serialize.hpp"
#include "lider/vectorstore.hpp"

namespace lider {

struct LiderParams {
  std::size_t c = 100;   // clusters
  std::size_t c0 = 10;   // clusters probed per query
  std::size_t h = 10;    // sorted arrays per core model
  std::size_t wc = 10;   // RMI width, centroids retriever
  std::size_t wi = 5;    // RMI width, in-cluster retrievers
  std::uint32_t b = 3;   // dist_e window bits
  std::size_t r0 = 5;    // R = r0 * k_m
  std::size_t kmeans_iters = 20;
  std::uint64_t seed = 1;

  friend bool operator==(const LiderParams &, const LiderParams &) = default;
};

/// Smallest hashkey length an in-cluster retriever may use.
inline constexpr std::size_t kMinClusterKeyBits = 4;

struct QueryOptions {
  std::optional<std::size_t> c0;  // overrides the stored c0
  std::optional<std::size_t> r0;  // overrides the stored r0 on both layers
};

struct QueryStats {
  double centroid_seconds = 0.0;
  double in_cluster_seconds = 0.0;
  double merge_seconds = 0.0;
  std::size_t clusters_probed = 0;
  std::size_t centroid_candidates = 0;     // window entries, layer one
  std::size_t in_cluster_candidates = 0;   // window entries, layer two
  std::size_t verified = 0;                // exact similarities computed
  std::size_t max_core_candidates = 0;     // largest window total of one core model
};

struct QueryResult {
  std::vector<ScoredHit> hits;
  QueryStats stats;
  std::vector<std::uint32_t> clusters;  // clusters probed, in rank order
};

class LiderIndex {
 public:
  LiderIndex() = default;

  static LiderIndex build(std::shared_ptr<const VectorCollection> vectors, const LiderParams &p,
                          WorkerPool *pool = nullptr) {
    if (!vectors || vectors->empty()) throw InvalidArgument("no vectors to index");
    if (!vectors->normalized()) throw InvalidArgument("vectors must be normalized before indexing");
    const std::size_t n = vectors->size();
    if (p.c == 0 || p.c > n) {
      throw InvalidArgument("cluster count c must satisfy 1 <= c <= N (c=" + std::to_string(p.c) +
                            ", N=" + std::to_string(n) + ")");
    }
    if (p.c0 == 0 || p.c0 > p.c) throw InvalidArgument("c0 must satisfy 1 <= c0 <= c");
    if (p.h == 0) throw InvalidArgument("H must be >= 1");
    if (p.wc == 0 || p.wi == 0) throw InvalidArgument("RMI widths must be >= 1");
    if (p.r0 == 0) throw InvalidArgument("r0 must be >= 1");
    detail::require_window_bits(p.b);

    LiderIndex idx;
    idx.params_ = p;
    idx.vectors_ = vectors;
    idx.digest_ = content_digest(*vectors);
    idx.clustering_ = kmeans(*vectors, p.c, p.kmeans_iters, derive_key(p.seed, 0x6b6d65616e73),
                             pool);

    CoreModelParams cp;
    cp.h_count = p.h;
    cp.window_bits = p.b;
    cp.r0 = p.r0;
    cp.rmi_width = p.wc;
    cp.min_key_length = 1;
    cp.seed = derive_key(p.seed, 0);
    std::vector<VectorId> centroid_ids(p.c);
    for (std::size_t j = 0; j < p.c; ++j) centroid_ids[j] = static_cast<VectorId>(j);
    idx.centroids_retriever_ = CoreModel::build(idx.clustering_.centroids, centroid_ids, cp);

    const auto members = idx.clustering_.members();
    idx.in_cluster_.resize(p.c);
    auto build_cluster = [&](std::size_t j) {
      CoreModelParams ip = cp;
      ip.rmi_width = p.wi;
      ip.min_key_length = kMinClusterKeyBits;
      ip.seed = derive_key(p.seed, j + 1);
      idx.in_cluster_[j] = CoreModel::build(*vectors, members[j], ip);
    };
    if (pool) {
      pool->parallel_for(p.c, build_cluster);
    } else {
      for (std::size_t j = 0; j < p.c; ++j) build_cluster(j);
    }
    idx.collect_warnings();
    return idx;
  }

  QueryResult query(std::span<const float> q, std::size_t k, const QueryOptions &opts = {},
                    WorkerPool *pool = nullptr) const {
    if (k == 0) throw InvalidArgument("k must be >= 1");
    if (q.size() != dim()) throw DimensionMismatch(dim(), q.size());
    const std::size_t c0 = opts.c0.value_or(params_.c0);
    if (c0 == 0 || c0 > params_.c) throw InvalidArgument("c0 must satisfy 1 <= c0 <= c");
    const std::size_t r0 = opts.r0.value_or(params_.r0);
    if (r0 == 0) throw InvalidArgument("r0 must be >= 1");

    QueryResult out;
    auto t0 = Clock::now();
    CoreSearchStats cs;
    const auto centroid_hits =
        centroids_retriever_.search(clustering_.centroids, q, c0, &cs, r0);
    out.stats.centroid_seconds = seconds_since(t0);
    out.stats.centroid_candidates = cs.window_entries;
    out.stats.verified = cs.unique_candidates;
    out.stats.max_core_candidates = cs.window_entries;
    out.clusters.reserve(centroid_hits.size());
    for (const auto &h : centroid_hits) out.clusters.push_back(h.id);
    out.stats.clusters_probed = out.clusters.size();

    auto t1 = Clock::now();
    std::vector<std::vector<ScoredHit>> lists(out.clusters.size());
    std::vector<CoreSearchStats> per(out.clusters.size());
    auto search_cluster = [&](std::size_t i) {
      lists[i] = in_cluster_[out.clusters[i]].search(*vectors_, q, k, &per[i], r0);
    };
    if (pool) {
      pool->parallel_for(out.clusters.size(), search_cluster);
    } else {
      for (std::size_t i = 0; i < out.clusters.size(); ++i) search_cluster(i);
    }
    out.stats.in_cluster_seconds = seconds_since(t1);
    for (const auto &s : per) {
      out.stats.in_cluster_candidates += s.window_entries;
      out.stats.verified += s.unique_candidates;
      out.stats.max_core_candidates = std::max(out.stats.max_core_candidates, s.window_entries);
    }

    auto t2 = Clock::now();
    out.hits = merge_topk(lists, k);
    out.stats.merge_seconds = seconds_since(t2);
    return out;
  }

  const LiderParams &params() const { return params_; }
  std::size_t dim() const { return vectors_ ? vectors_->dim() : 0; }
  std::size_t size() const { return vectors_ ? vectors_->size() : 0; }
  std::uint64_t vector_digest() const { return digest_; }
  const VectorCollection &vectors() const { return *vectors_; }
  const Clustering &clustering() const { return clustering_; }
  const CoreModel &centroids_retriever() const { return centroids_retriever_; }
  const std::vector<CoreModel> &in_cluster() const { return in_cluster_; }
  std::size_t array_count() const { return params_.h * (in_cluster_.size() + 1); }
  /// Advisory messages about parameter choices (never errors).
  const std::vector<std::string> &warnings() const { return warnings_; }

  std::string serialize() const {
    ByteWriter file;
    write_preamble(file);
    ByteWriter parm;
    parm.u32(kKindLider);
    parm.u32(static_cast<std::uint32_t>(params_.c));
    parm.u32(static_cast<std::uint32_t>(params_.c0));
    parm.u32(static_cast<std::uint32_t>(params_.h));
    parm.u32(static_cast<std::uint32_t>(params_.wc));
    parm.u32(static_cast<std::uint32_t>(params_.wi));
    parm.u32(params_.b);
    parm.u32(static_cast<std::uint32_t>(params_.r0));
    parm.u32(static_cast<std::uint32_t>(params_.kmeans_iters));
    parm.u64(params_.seed);
    parm.u32(static_cast<std::uint32_t>(dim()));
    parm.u64(size());
    parm.u64(digest_);
    file.section("PARM", parm);

    ByteWriter clus;
    clus.u32(static_cast<std::uint32_t>(clustering_.count()));
    clus.u32(static_cast<std::uint32_t>(clustering_.iterations));
    clus.f32_array(clustering_.centroids.data());
    clus.array(clustering_.assignment);
    file.section("CLUS", clus);

    ByteWriter cret;
    centroids_retriever_.write(cret);
    file.section("CRET", cret);
    for (const auto &m : in_cluster_) {
      ByteWriter core;
      m.write(core);
      file.section("CORE", core);
    }
    return file.take();
  }

  void save(const std::string &path) const { write_file(path, serialize()); }

  /// Rebuilds an index from its file image and re-attaches the vectors it
  /// was built on; the vectors' content digest must match.
  static LiderIndex deserialize(std::string_view bytes,
                                std::shared_ptr<const VectorCollection> vectors) {
    if (!vectors) throw InvalidArgument("index load needs the indexed vectors");
    ByteReader file(bytes, "header");
    read_preamble(file);
    LiderIndex idx;
    {
      ByteReader r = file.section("PARM", "parameters");
      if (r.u32() != kKindLider) r.fail("file does not hold a clustered index");
      LiderParams &p = idx.params_;
      p.c = r.u32();
      p.c0 = r.u32();
      p.h = r.u32();
      p.wc = r.u32();
      p.wi = r.u32();
      p.b = r.u32();
      p.r0 = r.u32();
      p.kmeans_iters = r.u32();
      p.seed = r.u64();
      const std::size_t dim = r.u32();
      const std::size_t n = r.u64();
      idx.digest_ = r.u64();
      if (p.c == 0 || p.c0 == 0 || p.c0 > p.c || p.c > n || p.h == 0) r.fail("invalid parameters");
      if (dim != vectors->dim() || n != vectors->size()) {
        throw LoadError("index was built on " + std::to_string(n) + " vectors of dim " +
                        std::to_string(dim) + ", got " + std::to_string(vectors->size()) +
                        " of dim " + std::to_string(vectors->dim()));
      }
      if (idx.digest_ != content_digest(*vectors)) {
        throw LoadError("vector content digest does not match the index");
      }
    }
    const std::size_t n = vectors->size();
    const std::size_t dim = vectors->dim();
    {
      ByteReader r = file.section("CLUS", "clustering");
      const std::size_t c = r.u32();
      if (c != idx.params_.c) r.fail("cluster count mismatch");
      idx.clustering_.iterations = r.u32();
      idx.clustering_.centroids = VectorCollection(dim, r.f32_array(c * dim), true);
      idx.clustering_.assignment = r.array<std::uint32_t>(n);
      idx.clustering_.sizes.assign(c, 0);
      for (auto a : idx.clustering_.assignment) {
        if (a >= c) r.fail("assignment out of range");
        ++idx.clustering_.sizes[a];
      }
      r.expect_end();
    }
    {
      ByteReader r = file.section("CRET", "centroids retriever");
      idx.centroids_retriever_ = CoreModel::read(r);
      r.expect_end();
      if (idx.centroids_retriever_.size() != idx.params_.c) r.fail("member count mismatch");
    }
    idx.in_cluster_.reserve(idx.params_.c);
    for (std::size_t j = 0; j < idx.params_.c; ++j) {
      ByteReader r = file.section("CORE", "in-cluster[" + std::to_string(j) + "]");
      idx.in_cluster_.push_back(CoreModel::read(r));
      r.expect_end();
      if (idx.in_cluster_.back().size() != idx.clustering_.sizes[j]) r.fail("member count mismatch");
      if (idx.in_cluster_.back().dim() != dim) r.fail("dimension mismatch");
    }
    idx.vectors_ = std::move(vectors);
    idx.collect_warnings();
    return idx;
  }

  static LiderIndex load(const std::string &path, std::shared_ptr<const VectorCollection> vectors) {
    std::string bytes = detail::read_file(path);
    return deserialize(bytes, std::move(vectors));
  }

  static constexpr std::uint32_t kKindLider = 1;

 private:
  void collect_warnings() {
    warnings_.clear();
    const double avg = static_cast<double>(size()) / static_cast<double>(params_.c);
    if (avg < 10000.0 || avg > 50000.0) {
      warnings_.push_back("average cluster size " + std::to_string(static_cast<long long>(avg)) +
                          " is outside the recommended 10k-50k range");
    }
    const double lo = static_cast<double>(params_.c) / 100.0;
    const double hi = static_cast<double>(params_.c) / 50.0;
    const auto c0 = static_cast<double>(params_.c0);
    if (c0 < std::floor(lo) || c0 > std::ceil(hi)) {
      warnings_.push_back("c0=" + std::to_string(params_.c0) +
                          " is outside the recommended c/100..c/50 range");
    }
  }

  LiderParams params_;
  std::shared_ptr<const VectorCollection> vectors_;
  std::uint64_t digest_ = 0;
  Clustering clustering_;
  CoreModel centroids_retriever_;
  std::vector<CoreModel> in_cluster_;
  std::vector<std::string> warnings_;
};

}  // namespace lider
