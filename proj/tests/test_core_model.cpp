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

#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "lider/core_model.hpp"
#include "test_util.hpp"

using namespace lider;

namespace {

std::string bytes_of(const CoreModel &m) {
  ByteWriter w;
  m.write(w);
  return w.str();
}

std::string key_string(const HashkeyView &v) {
  return Hashkey(std::vector<std::uint64_t>(v.words.begin(), v.words.end()), v.length).to_string();
}

std::vector<VectorId> iota_ids(std::size_t n) {
  std::vector<VectorId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

// Independent window rule: the length-min(R, L) window whose start is
// nearest the nominal start p - ceil(R/2) + 1.
std::pair<std::size_t, std::size_t> ref_window(std::size_t p, std::size_t r, std::size_t l) {
  const std::size_t len = std::min(r, l);
  const long long nominal = static_cast<long long>(p) - static_cast<long long>((r + 1) / 2) + 1;
  std::size_t best = 0;
  long long best_gap = -1;
  for (std::size_t s = 0; s + len <= l; ++s) {
    const long long gap = std::llabs(static_cast<long long>(s) - nominal);
    if (best_gap < 0 || gap < best_gap) {
      best = s;
      best_gap = gap;
    }
  }
  return {best, len};
}

// Exact top-k restricted to a member subset.
std::vector<ScoredHit> ref_member_topk(const VectorCollection &vs, std::span<const VectorId> ids,
                                       std::span<const float> q, std::size_t k) {
  std::vector<ScoredHit> hits;
  PreparedQuery pq(q);
  for (VectorId id : ids) hits.push_back({id, score(pq, vs, id)});
  keep_top(hits, k);
  return hits;
}

}  // namespace

TEST(PlaceWindow, Examples) {
  auto w = place_window(50, 10, 100);
  EXPECT_EQ(w.start, 46u);
  EXPECT_EQ(w.length, 10u);
  w = place_window(0, 10, 100);
  EXPECT_EQ(w.start, 0u);
  w = place_window(99, 10, 100);
  EXPECT_EQ(w.start, 90u);
  w = place_window(3, 200, 100);
  EXPECT_EQ(w.start, 0u);
  EXPECT_EQ(w.length, 100u);
  w = place_window(7, 1, 100);
  EXPECT_EQ(w.start, 7u);
  w = place_window(7, 4, 100);  // positions 6..9
  EXPECT_EQ(w.start, 6u);
}

TEST(PlaceWindow, MatchesReference) {
  for (std::size_t l = 1; l <= 40; ++l) {
    for (std::size_t r = 1; r <= 50; ++r) {
      for (std::size_t p = 0; p < l; ++p) {
        auto w = place_window(p, r, l);
        auto [s, len] = ref_window(p, r, l);
        ASSERT_EQ(w.start, s) << p << " " << r << " " << l;
        ASSERT_EQ(w.length, len);
        if (r <= l) {
          EXPECT_GE(p, w.start);
          EXPECT_LT(p, w.start + w.length);
        }
      }
    }
  }
}

TEST(CoreModel, SingletonMember) {
  auto vs = testutil::random_unit_vectors(5, 6, 1);
  std::vector<VectorId> ids{3};
  CoreModelParams p;
  p.h_count = 3;
  auto m = CoreModel::build(vs, ids, p);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.params().key_length, 1u);
  for (VectorId q = 0; q < 5; ++q) {
    auto hits = m.search(vs, vs.row(q), 4);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, 3u);
  }
}

TEST(CoreModel, DeterministicBytesAndParallelBuild) {
  auto vs = generate_synthetic(3000, 16, 10, 0.2, 4);
  auto ids = iota_ids(vs.size());
  CoreModelParams p;
  p.h_count = 6;
  p.seed = 77;
  auto a = CoreModel::build(vs, ids, p);
  auto b = CoreModel::build(vs, ids, p);
  WorkerPool pool(4);
  auto c = CoreModel::build(vs, ids, p, &pool);
  EXPECT_EQ(bytes_of(a), bytes_of(b));
  EXPECT_EQ(bytes_of(a), bytes_of(c));
  p.seed = 78;
  EXPECT_NE(bytes_of(a), bytes_of(CoreModel::build(vs, ids, p)));
}

TEST(CoreModel, ArraysHoldEveryMemberUnderItsOwnKey) {
  auto vs = generate_synthetic(10000, 24, 30, 0.1, 9);
  std::mt19937_64 rng(3);
  std::vector<VectorId> ids;
  for (VectorId i = 0; i < vs.size(); ++i) {
    if (rng() % 3 != 0) ids.push_back(i);
  }
  CoreModelParams p;
  p.h_count = 4;
  auto m = CoreModel::build(vs, ids, p);
  EXPECT_EQ(m.params().key_length, default_key_length(ids.size()));
  ASSERT_EQ(m.arrays().size(), 4u);
  EXPECT_EQ(m.member_ids(), ids);
  for (std::size_t h = 0; h < 4; ++h) {
    const auto &a = m.arrays()[h];
    std::vector<VectorId> got = a.ids();
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, ids);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string k = key_string(a.key(i));
      ASSERT_EQ(k, m.functions()[h].hash(vs.row(a.id(i))).to_string());
      if (i > 0) {
        ASSERT_LE(key_string(a.key(i - 1)), k);
      }
    }
  }
}

TEST(CoreModel, WindowFollowsRmiPrediction) {
  auto vs = generate_synthetic(1000, 16, 5, 0.2, 10);
  auto ids = iota_ids(vs.size());
  CoreModelParams p;
  p.h_count = 2;
  auto m = CoreModel::build(vs, ids, p);
  auto qs = generate_synthetic_queries(200, 16, 5, 0.2, 10);
  for (VectorId qi = 0; qi < qs.size(); ++qi) {
    for (std::size_t h = 0; h < 2; ++h) {
      Hashkey key = m.functions()[h].hash(qs.row(qi));
      const auto &a = m.arrays()[h];
      // Rescale by hand from the array's own ends, then predict.
      const auto &rmi = m.rmis()[h];
      EXPECT_EQ(rmi.rescaler().x_min().to_string(), key_string(a.key(0)));
      EXPECT_EQ(rmi.rescaler().x_max().to_string(), key_string(a.key(a.size() - 1)));
      const std::size_t pred = rmi.predict(rmi.rescaler()(key));
      auto w = m.window(h, key, 32);
      auto [s, len] = ref_window(pred, 32, a.size());
      EXPECT_EQ(w.predicted, pred);
      EXPECT_EQ(w.start, s);
      EXPECT_EQ(w.length, len);
      auto ids_h = m.expansion_search(h, key, 32);
      std::set<VectorId> want, got(ids_h.begin(), ids_h.end());
      for (std::size_t i = s; i < s + len; ++i) want.insert(a.id(i));
      EXPECT_EQ(got, want);
    }
  }
  EXPECT_THROW(m.window(0, m.functions()[0].hash(qs.row(0)), 0), InvalidArgument);
}

TEST(CoreModel, ExpansionSearchOrderedByExtendedDistance) {
  auto vs = generate_synthetic(2000, 16, 8, 0.2, 12);
  auto ids = iota_ids(vs.size());
  CoreModelParams p;
  p.h_count = 3;
  p.window_bits = 4;
  auto m = CoreModel::build(vs, ids, p);
  auto qs = generate_synthetic_queries(50, 16, 8, 0.2, 12);
  for (VectorId qi = 0; qi < qs.size(); ++qi) {
    for (std::size_t h = 0; h < 3; ++h) {
      Hashkey key = m.functions()[h].hash(qs.row(qi));
      const std::string ks = key.to_string();
      auto order = m.expansion_search(h, key, 100);
      ASSERT_EQ(order.size(), 100u);
      long double prev = -1;
      for (VectorId id : order) {
        long double d = testutil::ref_dist(m.functions()[h].hash(vs.row(id)).to_string(), ks, 4);
        EXPECT_GE(d, prev);
        prev = d;
      }
    }
  }
}

TEST(CoreModel, FullWindowIsExact) {
  auto vs = generate_synthetic(3000, 20, 12, 0.15, 13);
  std::vector<VectorId> ids;
  for (VectorId i = 0; i < vs.size(); i += 2) ids.push_back(i);
  CoreModelParams p;
  p.h_count = 2;
  p.r0 = ids.size();  // R = r0 * k >= L
  auto m = CoreModel::build(vs, ids, p);
  auto qs = generate_synthetic_queries(30, 20, 12, 0.15, 13);
  for (VectorId qi = 0; qi < qs.size(); ++qi) {
    CoreSearchStats st;
    auto hits = m.search(vs, qs.row(qi), 10, &st);
    EXPECT_EQ(hits, ref_member_topk(vs, ids, qs.row(qi), 10));
    EXPECT_EQ(st.unique_candidates, ids.size());
    EXPECT_EQ(st.window_entries, 2 * ids.size());
  }
  // A member query finds itself first.
  for (VectorId id : {ids[0], ids[100], ids.back()}) {
    auto hits = m.search(vs, vs.row(id), 1);
    EXPECT_EQ(hits[0].id, id);
  }
}

TEST(CoreModel, MoreArraysOrWiderWindowsNeverHurt) {
  auto vs = generate_synthetic(20000, 32, 40, 0.1, 14);
  auto ids = iota_ids(vs.size());
  auto qs = generate_synthetic_queries(100, 32, 40, 0.1, 14);
  CoreModelParams p;
  p.seed = 5;
  std::vector<CoreModel> by_h;
  for (std::size_t h : {1u, 2u, 4u, 10u}) {
    p.h_count = h;
    by_h.push_back(CoreModel::build(vs, ids, p));
  }
  const std::size_t k = 10;
  std::vector<double> recall(by_h.size(), 0.0);
  for (VectorId qi = 0; qi < qs.size(); ++qi) {
    auto truth = testutil::ref_topk(vs, qs.row(qi), k);
    std::vector<std::vector<ScoredHit>> results;
    for (std::size_t i = 0; i < by_h.size(); ++i) {
      CoreSearchStats st;
      results.push_back(by_h[i].search(vs, qs.row(qi), k, &st));
      const std::size_t h = by_h[i].params().h_count;
      EXPECT_EQ(st.window_entries, h * 5 * k);
      EXPECT_LE(st.unique_candidates, h * 5 * k);
      recall[i] += testutil::recall(results.back(), truth);
    }
    // Nested families: the i-th best score can only rise with H.
    for (std::size_t i = 1; i < results.size(); ++i) {
      ASSERT_EQ(results[i].size(), k);
      for (std::size_t j = 0; j < k; ++j) EXPECT_GE(results[i][j].score, results[i - 1][j].score);
    }
    // Same for a wider window on one model.
    auto narrow = by_h[2].search(vs, qs.row(qi), k, nullptr, 2);
    auto wide = by_h[2].search(vs, qs.row(qi), k, nullptr, 8);
    for (std::size_t j = 0; j < k; ++j) EXPECT_GE(wide[j].score, narrow[j].score);
  }
  EXPECT_GE(recall.back(), recall.front());
  EXPECT_GT(recall.back(), recall.front()) << recall.front() / qs.size() << " -> " << recall.back() / qs.size();
}

TEST(CoreModel, SerializationRoundTrip) {
  auto vs = generate_synthetic(2000, 12, 6, 0.2, 15);
  auto ids = iota_ids(vs.size());
  CoreModelParams p;
  p.h_count = 3;
  auto m = CoreModel::build(vs, ids, p);
  const std::string b = bytes_of(m);
  ByteReader r(b, "core");
  auto back = CoreModel::read(r);
  EXPECT_TRUE(r.at_end());
  EXPECT_EQ(bytes_of(back), b);
  EXPECT_EQ(back.params(), m.params());
  auto qs = generate_synthetic_queries(20, 12, 6, 0.2, 15);
  for (VectorId qi = 0; qi < qs.size(); ++qi) {
    EXPECT_EQ(back.search(vs, qs.row(qi), 7), m.search(vs, qs.row(qi), 7));
  }
  ByteReader cut(std::string_view(b).substr(0, b.size() - 3), "core");
  EXPECT_THROW(CoreModel::read(cut), LoadError);
}

TEST(CoreModel, Errors) {
  auto vs = testutil::random_unit_vectors(10, 4, 2);
  auto ids = iota_ids(10);
  CoreModelParams p;
  EXPECT_THROW(CoreModel::build(vs, std::vector<VectorId>{}, p), InvalidArgument);
  EXPECT_THROW(CoreModel::build(vs, std::vector<VectorId>{10}, p), InvalidArgument);
  auto bad = p;
  bad.h_count = 0;
  EXPECT_THROW(CoreModel::build(vs, ids, bad), InvalidArgument);
  bad = p;
  bad.r0 = 0;
  EXPECT_THROW(CoreModel::build(vs, ids, bad), InvalidArgument);
  bad = p;
  bad.rmi_width = 0;
  EXPECT_THROW(CoreModel::build(vs, ids, bad), InvalidArgument);
  bad = p;
  bad.window_bits = 9;
  EXPECT_THROW(CoreModel::build(vs, ids, bad), InvalidArgument);
  auto m = CoreModel::build(vs, ids, p);
  EXPECT_THROW(m.search(vs, vs.row(0), 0), InvalidArgument);
  EXPECT_THROW(m.search(vs, std::vector<float>{1, 0, 0}, 1), DimensionMismatch);
}
