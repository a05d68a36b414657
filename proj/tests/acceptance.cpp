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
// Acceptance run: prints one PASS/FAIL line per criterion with the measured
// numbers, and exits non-zero if any criterion fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "lider/bench.hpp"
#include "lider/lider.hpp"
#include "lider/merge.hpp"
#include "lider/sklsh.hpp"
#include "test_util.hpp"

using namespace lider;

namespace {

using Vectors = std::shared_ptr<const VectorCollection>;

int failures = 0;

void report(int id, const char *name, bool pass, const std::string &detail) {
  std::printf("criterion %d %s: %s (%s)\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

template <typename... Args>
std::string fmt(const char *f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// The shared 100k x 128 synthetic collection and its query stream.
const VectorCollection &base100k() {
  static const VectorCollection v = generate_synthetic(100000, 128, 200, 0.05, 1);
  return v;
}
Vectors base100k_ptr() {
  static const Vectors p = std::make_shared<VectorCollection>(base100k());
  return p;
}
VectorCollection queries128(std::size_t n) { return generate_synthetic_queries(n, 128, 200, 0.05, 1); }

// Smallest per-pass mean over several passes: the least disturbed estimate
// of per-query time on a shared machine.
double min_pass_mean(std::size_t passes, std::size_t n, const std::function<void(std::size_t)> &one) {
  double best = 1e300;
  for (std::size_t p = 0; p < passes; ++p) {
    auto t = Clock::now();
    for (std::size_t i = 0; i < n; ++i) one(i);
    best = std::min(best, seconds_since(t) / static_cast<double>(n));
  }
  return best;
}

void oracle_exactness() {
  auto t0 = Clock::now();
  auto vs = std::make_shared<VectorCollection>(generate_synthetic(10000, 64, 50, 0.1, 2));
  auto qs = generate_synthetic_queries(200, 64, 50, 0.1, 2);
  LiderParams p;
  p.c = 10;
  p.c0 = 10;
  p.h = 4;
  auto probe = LiderIndex::build(vs, p);
  const std::size_t k = 100;
  const auto &sizes = probe.clustering().sizes;
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  QueryOptions o;
  o.r0 = std::max<std::size_t>((largest + k - 1) / k, 1);
  std::size_t id_mismatch = 0;
  double worst = 0.0;
  for (VectorId q = 0; q < qs.size(); ++q) {
    auto got = probe.query(qs.row(q), k, o).hits;
    auto want = exact_topk(*vs, qs.row(q), k);
    if (testutil::ids_of(got) != testutil::ids_of(want)) ++id_mismatch;
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(got[i].score - want[i].score)));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "oracle exactness", id_mismatch == 0 && worst <= 1e-6 && secs < 120,
         fmt("200 queries, r0=%zu, id mismatches=%zu, max score diff=%.3g, %.1fs", *o.r0,
             id_mismatch, worst, secs));
}

void collision_law() {
  const std::size_t trials = 100000;
  bool ok = true;
  std::ostringstream worst;
  double worst_z = 0.0;
  for (double theta : {std::numbers::pi / 6, std::numbers::pi / 3, std::numbers::pi / 2}) {
    for (std::size_t l : {0u, 1u, 2u, 4u}) {
      const double expected = std::pow(1.0 - theta / std::numbers::pi, static_cast<double>(l));
      const double got = collision_law_check(theta, l, trials, 1000 + l, 16);
      const double se = std::sqrt(expected * (1.0 - expected) / trials);
      const double dev = std::abs(got - expected);
      const bool pass = se == 0.0 ? dev == 0.0 : dev <= 3.0 * se;
      ok = ok && pass;
      const double z = se == 0.0 ? (dev == 0.0 ? 0.0 : 1e9) : dev / se;
      if (z >= worst_z) {
        worst_z = z;
        worst.str("");
        worst << "theta=" << theta << " l=" << l << " est=" << got << " law=" << expected;
      }
    }
  }
  report(2, "collision law", ok,
         fmt("12 settings x 1e5 trials, M=16, worst |z|=%.2f at %s", worst_z, worst.str().c_str()));
}

void worked_example() {
  auto d1 = extended_distance(Hashkey::from_string("000000"), Hashkey::from_string("111111"), 3);
  auto d2 = extended_distance(Hashkey::from_string("000000"), Hashkey::from_string("100000"), 3);
  const bool ok = d1.value() == 6.0 + 7.0 / 8.0 && d2.value() == 6.0 + 4.0 / 8.0;
  report(3, "dist_e worked example", ok, fmt("%.6f and %.6f", d1.value(), d2.value()));
}

void sorted_monotonicity() {
  std::mt19937_64 rng(4);
  std::size_t violations = 0, checks = 0;
  for (int arr = 0; arr < 10000; ++arr) {
    const std::size_t m = 1 + rng() % 20;
    const std::size_t n = 3 + rng() % 60;
    std::vector<std::pair<Hashkey, VectorId>> keys;
    for (std::size_t i = 0; i < n; ++i) {
      keys.emplace_back(Hashkey::from_string(testutil::random_bits(rng, m)), static_cast<VectorId>(i));
    }
    auto a = build_sorted_array(keys, 0);
    auto key = [&](std::size_t i) { return a.key(i); };
    for (int t = 0; t < 20; ++t) {
      std::size_t p[3] = {rng() % n, rng() % n, rng() % n};
      std::sort(p, p + 3);
      // K1 < K2 < K: the nearer key is at least as close, and the mirror.
      violations += extended_distance(key(p[1]), key(p[2]), 3) > extended_distance(key(p[0]), key(p[2]), 3);
      violations += extended_distance(key(p[1]), key(p[0]), 3) > extended_distance(key(p[2]), key(p[0]), 3);
      checks += 2;
    }
  }
  report(4, "sorted-array monotonicity", violations == 0,
         fmt("1e4 arrays, %zu ordered checks, %zu violations", checks, violations));
}

void rescale_audit() {
  const auto &vs = base100k();
  auto qs = queries128(5000);
  std::vector<VectorId> ids(vs.size());
  std::iota(ids.begin(), ids.end(), 0);
  PredictionAudit audit[2];
  for (int raw = 0; raw < 2; ++raw) {
    CoreModelParams p;
    p.h_count = 1;
    p.rescale_keys = raw == 0;
    auto m = CoreModel::build(vs, ids, p);
    const auto &a = m.arrays()[0];
    const auto &rmi = m.rmis()[0];
    std::vector<std::pair<double, std::size_t>> truth;
    for (VectorId q = 0; q < qs.size(); ++q) {
      Hashkey key = m.functions()[0].hash(qs.row(q));
      truth.emplace_back(rmi.rescaler()(key), std::min(a.lower_bound(key), a.size() - 1));
    }
    audit[raw] = prediction_audit(rmi, truth);
  }
  const auto &on = audit[0], &off = audit[1];
  const bool ok = on.out_of_range * 1000 <= 5000 && on.overlap == 0 &&
                  off.out_of_range >= 10 * on.out_of_range;
  report(5, "key rescaling audit", ok,
         fmt("5000 predictions, rescaled OOR=%zu LE=%zu overlap=%zu; raw OOR=%zu LE=%zu overlap=%zu",
             on.out_of_range, on.large_error, on.overlap, off.out_of_range, off.large_error,
             off.overlap));
}

void monotonicity_sweeps() {
  auto vs = base100k_ptr();
  auto qs = queries128(200);
  const std::size_t k = 100;
  WorkerPool pool;
  auto oracle = bench::ids_of(bench::compute_oracle(*vs, qs, k, &pool));
  bool ok = true;
  bool within_budget = true;
  auto recall_of = [&](const LiderIndex &idx, const QueryOptions &o) {
    bench::IdLists got(qs.size());
    for (VectorId q = 0; q < qs.size(); ++q) {
      auto r = idx.query(qs.row(q), k, o);
      const std::size_t r0 = o.r0.value_or(idx.params().r0);
      const std::size_t c0 = o.c0.value_or(idx.params().c0);
      // per core model: layer one uses R = r0*c0, layer two R = r0*k
      within_budget = within_budget && r.stats.centroid_candidates <= r0 * c0 * idx.params().h &&
                      r.stats.max_core_candidates <= r0 * std::max(k, c0) * idx.params().h;
      got[q] = testutil::ids_of(r.hits);
    }
    return bench::recall_at_k(got, oracle, k);
  };
  LiderParams p;
  auto idx = LiderIndex::build(vs, p, &pool);
  std::string c0_row, h_row;
  double prev = -1.0;
  for (std::size_t c0 : {1u, 5u, 10u, 20u}) {
    QueryOptions o;
    o.c0 = c0;
    const double r = recall_of(idx, o);
    ok = ok && r >= prev;
    prev = r;
    c0_row += fmt("%s%zu:%.4f", c0_row.empty() ? "" : " ", c0, r);
  }
  prev = -1.0;
  for (std::size_t h : {2u, 4u, 8u}) {
    auto q = p;
    q.h = h;
    const double r = recall_of(LiderIndex::build(vs, q, &pool), {});
    ok = ok && r >= prev;
    prev = r;
    h_row += fmt("%s%zu:%.4f", h_row.empty() ? "" : " ", h, r);
  }
  report(6, "monotonicity sweeps", ok && within_budget,
         fmt("recall@100 by c0 {%s}, by H {%s}, candidates within R*H: %s", c0_row.c_str(),
             h_row.c_str(), within_budget ? "yes" : "no"));
}

void scaling_trend() {
  // Clusters large enough that windows, not cluster sizes, bound the work.
  LiderParams p;
  p.c = 10;
  p.c0 = 1;
  p.h = 10;
  p.r0 = 5;
  const std::size_t k = 100;
  WorkerPool pool(1);
  const std::size_t sizes[3] = {50000, 100000, 200000};
  std::vector<std::shared_ptr<const VectorCollection>> data;
  std::vector<LiderIndex> indexes;
  for (std::size_t n : sizes) {
    data.push_back(std::make_shared<VectorCollection>(generate_synthetic(n, 128, 200, 0.05, 1)));
    indexes.push_back(LiderIndex::build(data.back(), p, &pool));
  }
  auto qs = queries128(300);
  // Rounds rotate over the sizes so a slow stretch of the machine cannot
  // land on a single size. Within a round one size is warmed and timed
  // back to back, giving its steady-state cost; each size keeps its best.
  std::vector<double> lider_t(3, 1e300), flat_t(3, 1e300);
  for (std::size_t round = 0; round < 3; ++round) {
    for (std::size_t s = 0; s < 3; ++s) {
      for (VectorId q = 0; q < 20; ++q) indexes[s].query(qs.row(q), k);  // warm-up
      lider_t[s] = std::min(lider_t[s], min_pass_mean(3, qs.size(), [&](std::size_t q) {
                              indexes[s].query(qs.row(static_cast<VectorId>(q)), k);
                            }));
      flat_t[s] = std::min(flat_t[s], min_pass_mean(1, 100, [&](std::size_t q) {
                             exact_topk(*data[s], qs.row(static_cast<VectorId>(q)), k);
                           }));
    }
  }
  std::string row;
  for (std::size_t s = 0; s < 3; ++s) {
    row += fmt("%sN=%zu lider=%.3fms flat=%.3fms", row.empty() ? "" : ", ", sizes[s], lider_t[s] * 1e3,
               flat_t[s] * 1e3);
  }
  const double g1 = lider_t[1] / lider_t[0], g2 = lider_t[2] / lider_t[1];
  const double f1 = flat_t[1] / flat_t[0], f2 = flat_t[2] / flat_t[1];
  const bool ok = g1 <= 1.5 && g2 <= 1.5 && f1 >= 1.8 && f2 >= 1.8;
  report(7, "scaling trend", ok,
         fmt("%s; lider growth %.2f, %.2f; flat growth %.2f, %.2f", row.c_str(), g1, g2, f1, f2));
}

void sklsh_comparison() {
  auto vs = base100k_ptr();
  auto qs = queries128(300);
  const std::size_t k = 100;
  LiderParams p;
  WorkerPool pool(1);
  auto idx = LiderIndex::build(vs, p, &pool);
  SkLshParams sp;
  sp.h = p.h;
  sp.seed = p.seed;
  auto sk = SkLshIndex::build(vs, sp, &pool);
  // Equal candidate budget: SK-LSH may pop as many entries as LIDER scans.
  double entries = 0.0;
  for (VectorId q = 0; q < qs.size(); ++q) {
    auto r = idx.query(qs.row(q), k);
    entries += static_cast<double>(r.stats.centroid_candidates + r.stats.in_cluster_candidates);
  }
  const auto budget = static_cast<std::size_t>(entries / static_cast<double>(qs.size()));
  const double tl = min_pass_mean(3, qs.size(), [&](std::size_t q) {
    idx.query(qs.row(static_cast<VectorId>(q)), k);
  });
  const double ts = min_pass_mean(3, qs.size(), [&](std::size_t q) {
    sk.search(qs.row(static_cast<VectorId>(q)), k, budget);
  });
  // Quality at that budget is reported alongside, not asserted.
  WorkerPool oracle_pool;
  auto oracle = bench::ids_of(bench::compute_oracle(*vs, qs, k, &oracle_pool));
  bench::IdLists lider_ids(qs.size()), sk_ids(qs.size());
  for (VectorId q = 0; q < qs.size(); ++q) {
    lider_ids[q] = testutil::ids_of(idx.query(qs.row(q), k).hits);
    sk_ids[q] = testutil::ids_of(sk.search(qs.row(q), k, budget));
  }
  const double rl = bench::recall_at_k(lider_ids, oracle, k);
  const double rs = bench::recall_at_k(sk_ids, oracle, k);
  const double lb = static_cast<double>(idx.serialize().size()) / static_cast<double>(idx.array_count());
  const double sb = static_cast<double>(sk.serialize().size()) / static_cast<double>(sk.array_count());
  report(8, "SK-LSH comparison", tl <= ts && lb <= sb,
         fmt("budget %zu entries, H=%zu; AQT lider=%.3fms sklsh=%.3fms; bytes/array lider=%.0f "
             "sklsh=%.0f; recall@100 lider=%.4f sklsh=%.4f (reported)",
             budget, p.h, tl * 1e3, ts * 1e3, lb, sb, rl, rs));
}

void determinism() {
  auto vs = base100k_ptr();
  auto qs = queries128(100);
  LiderParams p;
  p.seed = 2024;
  WorkerPool pool;
  auto a = LiderIndex::build(vs, p, &pool);
  auto b = LiderIndex::build(vs, p);
  testutil::TempDir dir;
  a.save(dir.file("a.lider"));
  b.save(dir.file("b.lider"));
  const bool same_files = detail::read_file(dir.file("a.lider")) == detail::read_file(dir.file("b.lider"));
  auto back = LiderIndex::load(dir.file("a.lider"), vs);
  std::size_t differing = 0;
  for (VectorId q = 0; q < qs.size(); ++q) differing += back.query(qs.row(q), 100).hits != a.query(qs.row(q), 100).hits;
  report(9, "determinism and persistence", same_files && differing == 0,
         fmt("files identical: %s, %zu bytes; %zu of 100 reloaded queries differ",
             same_files ? "yes" : "no", a.serialize().size(), differing));
}

void merge_equivalence() {
  std::mt19937_64 rng(10);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::vector<ScoredHit>> lists(1 + rng() % 16);
    std::vector<ScoredHit> all;
    for (auto &l : lists) {
      const std::size_t len = rng() % 40;
      for (std::size_t i = 0; i < len; ++i) {
        l.push_back({static_cast<VectorId>(rng() % 5000), static_cast<float>(rng() % 50) / 50.0f});
      }
      std::sort(l.begin(), l.end(), ranks_before);
      all.insert(all.end(), l.begin(), l.end());
    }
    std::stable_sort(all.begin(), all.end(), ranks_before);
    const std::size_t k = 1 + rng() % 100;
    all.resize(std::min(k, all.size()));
    mismatches += merge_topk(lists, k) != all;
  }
  report(10, "merge oracle equivalence", mismatches == 0,
         fmt("1000 instances, %zu mismatches", mismatches));
}

}  // namespace

int main() {
  const std::pair<const char *, void (*)()> steps[] = {
      {"1", oracle_exactness},  {"2", collision_law},  {"3", worked_example},
      {"4", sorted_monotonicity}, {"5", rescale_audit}, {"6", monotonicity_sweeps},
      {"7", scaling_trend},     {"8", sklsh_comparison}, {"9", determinism},
      {"10", merge_equivalence}};
  for (const auto &[id, fn] : steps) {
    try {
      fn();
    } catch (const std::exception &e) {
      std::printf("criterion %s: FAIL (error: %s)\n", id, e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
