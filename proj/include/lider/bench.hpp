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
// Evaluation harness: quality metrics, result and relevance files, the
// cached brute-force oracle, timed query runs and parameter sweeps.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "lider/common.hpp"
#include "lider/lider.hpp"
#include "lider/sklsh.hpp"
#include "lider/vectorstore.hpp"

namespace lider::bench {

using IdLists = std::vector<std::vector<VectorId>>;
using HitLists = std::vector<std::vector<ScoredHit>>;

inline IdLists ids_of(const HitLists &hits) {
  IdLists out(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    for (const auto &h : hits[i]) out[i].push_back(h.id);
  }
  return out;
}

/// Mean over queries of |approx top-k ∩ oracle top-k| / min(k, |oracle|).
inline double recall_at_k(const IdLists &approx, const IdLists &oracle, std::size_t k) {
  if (approx.size() != oracle.size()) {
    throw InvalidArgument("recall: " + std::to_string(approx.size()) + " result lists vs " +
                          std::to_string(oracle.size()) + " oracle lists");
  }
  if (k == 0) throw InvalidArgument("recall: k must be >= 1");
  if (approx.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t q = 0; q < approx.size(); ++q) {
    const std::size_t denom = std::min(k, oracle[q].size());
    if (denom == 0) throw InvalidArgument("recall: empty oracle list for query " + std::to_string(q));
    std::set<VectorId> truth(oracle[q].begin(), oracle[q].begin() + static_cast<std::ptrdiff_t>(denom));
    std::size_t found = 0;
    const std::size_t take = std::min(k, approx[q].size());
    for (std::size_t i = 0; i < take; ++i) found += truth.count(approx[q][i]);
    total += static_cast<double>(found) / static_cast<double>(denom);
  }
  return total / static_cast<double>(approx.size());
}

/// Relevance judgments: query index -> relevant passage ids.
using Qrels = std::map<std::size_t, std::set<VectorId>>;

/// Parses tab-separated `query_index passage_id relevance` lines.
inline Qrels parse_qrels(std::istream &in) {
  Qrels q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    auto fail = [&](const std::string &why) {
      throw LoadError("qrels line " + std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 3) fail("expected 3 tab-separated fields");
    auto parse_uint = [&](const std::string &s, const char *what) -> unsigned long long {
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        fail(std::string("invalid ") + what + " '" + s + "'");
      }
      return std::stoull(s);
    };
    const auto qi = parse_uint(fields[0], "query index");
    const auto pid = parse_uint(fields[1], "passage id");
    const auto rel = parse_uint(fields[2], "relevance");
    if (rel == 0) fail("relevance must be a positive integer");
    if (pid > UINT32_MAX) fail("passage id out of range");
    q[qi].insert(static_cast<VectorId>(pid));
  }
  return q;
}

inline Qrels load_qrels(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open qrels file '" + path + "'");
  return parse_qrels(in);
}

/// Mean reciprocal rank of the first relevant id within the top 10, over
/// the queries that have judgments.
inline double mrr_at_10(const IdLists &ranked, const Qrels &qrels) {
  if (qrels.empty()) return 0.0;
  double total = 0.0;
  for (const auto &[qi, relevant] : qrels) {
    if (qi >= ranked.size()) {
      throw InvalidArgument("qrels reference query " + std::to_string(qi) + " but only " +
                            std::to_string(ranked.size()) + " queries were ranked");
    }
    const auto &list = ranked[qi];
    for (std::size_t r = 0; r < std::min<std::size_t>(10, list.size()); ++r) {
      if (relevant.count(list[r])) {
        total += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
  }
  return total / static_cast<double>(qrels.size());
}

/// One line per hit: `query_index <TAB> id <TAB> score`, in rank order.
inline void write_results(std::ostream &out, const HitLists &hits) {
  char buf[64];
  for (std::size_t q = 0; q < hits.size(); ++q) {
    for (const auto &h : hits[q]) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(h.score));
      out << q << '\t' << h.id << '\t' << buf << '\n';
    }
  }
}

inline void write_results(const std::string &path, const HitLists &hits) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_results(out, hits);
}

inline HitLists read_results(std::istream &in) {
  HitLists hits;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t q = 0;
    unsigned long long id = 0;
    float s = 0.0f;
    if (!(ss >> q >> id >> s)) throw LoadError("results line " + std::to_string(lineno) + ": malformed");
    if (q >= hits.size()) hits.resize(q + 1);
    hits[q].push_back({static_cast<VectorId>(id), s});
  }
  return hits;
}

inline HitLists read_results(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open results file '" + path + "'");
  return read_results(in);
}

inline HitLists compute_oracle(const VectorCollection &vectors, const VectorCollection &queries,
                               std::size_t k, WorkerPool *pool = nullptr) {
  if (queries.dim() != vectors.dim()) throw DimensionMismatch(vectors.dim(), queries.dim());
  HitLists out(queries.size());
  auto one = [&](std::size_t q) {
    out[q] = exact_topk(vectors, queries.row(static_cast<VectorId>(q)), k);
  };
  if (pool) {
    pool->parallel_for(queries.size(), one);
  } else {
    for (std::size_t q = 0; q < queries.size(); ++q) one(q);
  }
  return out;
}

/// On-disk oracle cache keyed by (vector digest, query digest, k).
class OracleCache {
 public:
  explicit OracleCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path_for(std::uint64_t vdigest, std::uint64_t qdigest, std::size_t k) const {
    char name[96];
    std::snprintf(name, sizeof name, "oracle_%016llx_%016llx_k%zu.tsv",
                  static_cast<unsigned long long>(vdigest), static_cast<unsigned long long>(qdigest), k);
    return dir_ / name;
  }

  HitLists get(const VectorCollection &vectors, const VectorCollection &queries, std::size_t k,
               bool allow_build, WorkerPool *pool = nullptr, bool *was_cached = nullptr) const {
    const auto path = path_for(content_digest(vectors), content_digest(queries), k);
    if (std::filesystem::exists(path)) {
      if (was_cached) *was_cached = true;
      auto hits = read_results(path.string());
      hits.resize(queries.size());
      return hits;
    }
    if (!allow_build) {
      throw Error("no cached oracle at '" + path.string() + "' and oracle building is disabled");
    }
    if (was_cached) *was_cached = false;
    auto hits = compute_oracle(vectors, queries, k, pool);
    std::filesystem::create_directories(dir_);
    write_results(path.string(), hits);
    return hits;
  }

 private:
  std::filesystem::path dir_;
};

/// Resident set size of this process in bytes (0 if unavailable).
inline std::size_t resident_bytes() {
  std::ifstream in("/proc/self/statm");
  std::size_t pages_total = 0, pages_resident = 0;
  if (!(in >> pages_total >> pages_resident)) return 0;
  return pages_resident * static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
}

struct StageMillis {
  double centroid = 0.0;
  double in_cluster = 0.0;
  double merge = 0.0;

  friend bool operator==(const StageMillis &, const StageMillis &) = default;
};

struct EvalReport {
  std::string index_kind = "lider";
  std::size_t k = 0;
  std::size_t queries = 0;
  std::size_t workers = 1;
  double recall_at_k = 0.0;
  std::optional<double> mrr_at_10;
  double aqt_seconds = 0.0;
  StageMillis per_stage_ms;
  double candidate_mean = 0.0;
  double build_seconds = 0.0;
  std::size_t index_bytes = 0;
  std::size_t resident_delta_bytes = 0;
  std::map<std::string, std::string> config;

  friend bool operator==(const EvalReport &, const EvalReport &) = default;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["index_kind"] = index_kind;
    j["k"] = k;
    j["queries"] = queries;
    j["workers"] = workers;
    j["recall_at_k"] = recall_at_k;
    j["mrr_at_10"] = mrr_at_10 ? nlohmann::json(*mrr_at_10) : nlohmann::json(nullptr);
    j["aqt_seconds"] = aqt_seconds;
    j["per_stage_ms"] = {{"centroid", per_stage_ms.centroid},
                         {"in_cluster", per_stage_ms.in_cluster},
                         {"merge", per_stage_ms.merge}};
    j["candidate_mean"] = candidate_mean;
    j["build_seconds"] = build_seconds;
    j["index_bytes"] = index_bytes;
    j["resident_delta_bytes"] = resident_delta_bytes;
    j["config"] = config;
    return j;
  }

  static EvalReport from_json(const nlohmann::json &j) {
    EvalReport r;
    r.index_kind = j.at("index_kind").get<std::string>();
    r.k = j.at("k").get<std::size_t>();
    r.queries = j.at("queries").get<std::size_t>();
    r.workers = j.at("workers").get<std::size_t>();
    r.recall_at_k = j.at("recall_at_k").get<double>();
    if (!j.at("mrr_at_10").is_null()) r.mrr_at_10 = j.at("mrr_at_10").get<double>();
    r.aqt_seconds = j.at("aqt_seconds").get<double>();
    const auto &s = j.at("per_stage_ms");
    r.per_stage_ms = {s.at("centroid").get<double>(), s.at("in_cluster").get<double>(),
                      s.at("merge").get<double>()};
    r.candidate_mean = j.at("candidate_mean").get<double>();
    r.build_seconds = j.at("build_seconds").get<double>();
    r.index_bytes = j.at("index_bytes").get<std::size_t>();
    r.resident_delta_bytes = j.at("resident_delta_bytes").get<std::size_t>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    return r;
  }

  /// Human-readable key = value lines followed by a JSON block.
  std::string to_text() const {
    std::ostringstream out;
    out << std::setprecision(6);
    out << "index_kind = " << index_kind << '\n'
        << "k = " << k << '\n'
        << "queries = " << queries << '\n'
        << "workers = " << workers << '\n'
        << "recall_at_k = " << recall_at_k << '\n'
        << "mrr_at_10 = " << (mrr_at_10 ? std::to_string(*mrr_at_10) : std::string("n/a")) << '\n'
        << "aqt_seconds = " << aqt_seconds << '\n'
        << "per_stage_ms.centroid = " << per_stage_ms.centroid << '\n'
        << "per_stage_ms.in_cluster = " << per_stage_ms.in_cluster << '\n'
        << "per_stage_ms.merge = " << per_stage_ms.merge << '\n'
        << "candidate_mean = " << candidate_mean << '\n'
        << "build_seconds = " << build_seconds << '\n'
        << "index_bytes = " << index_bytes << '\n'
        << "resident_delta_bytes = " << resident_delta_bytes << '\n';
    for (const auto &[key, value] : config) out << "config." << key << " = " << value << '\n';
    out << kJsonMarker << '\n' << to_json().dump(2) << '\n';
    return out.str();
  }

  static EvalReport from_text(const std::string &text) {
    const auto at = text.find(kJsonMarker);
    if (at == std::string::npos) throw LoadError("report has no JSON block");
    return from_json(nlohmann::json::parse(text.substr(at + std::string(kJsonMarker).size())));
  }

  static constexpr const char *kJsonMarker = "--- json ---";
};

/// Either kind of index, queried through one interface.
class AnyIndex {
 public:
  AnyIndex(LiderIndex idx) : lider_(std::make_shared<LiderIndex>(std::move(idx))) {}
  AnyIndex(SkLshIndex idx) : sklsh_(std::make_shared<SkLshIndex>(std::move(idx))) {}

  static AnyIndex load(const std::string &path, std::shared_ptr<const VectorCollection> vectors) {
    std::string bytes = detail::read_file(path);
    if (peek_index_kind(bytes) == IndexKind::kSkLsh) return SkLshIndex::deserialize(bytes, vectors);
    return LiderIndex::deserialize(bytes, vectors);
  }

  bool is_lider() const { return lider_ != nullptr; }
  const LiderIndex &lider() const { return *lider_; }
  const SkLshIndex &sklsh() const { return *sklsh_; }
  std::string serialize() const { return lider_ ? lider_->serialize() : sklsh_->serialize(); }
  std::size_t dim() const { return lider_ ? lider_->dim() : sklsh_->dim(); }

 private:
  std::shared_ptr<LiderIndex> lider_;
  std::shared_ptr<SkLshIndex> sklsh_;
};

struct RunOptions {
  std::size_t k = 100;
  QueryOptions query;
  std::size_t sklsh_budget = 0;  // 0 = r0 * k * H
  std::size_t warmup = 10;
};

struct TimedRun {
  HitLists hits;
  double aqt_seconds = 0.0;
  StageMillis per_stage_ms;
  double candidate_mean = 0.0;
};

/// Runs every query sequentially; each query may fan out inside the pool.
/// The first `warmup` queries are run once untimed.
inline TimedRun run_queries(const AnyIndex &index, const VectorCollection &queries,
                            const RunOptions &opt, WorkerPool *pool = nullptr) {
  if (queries.dim() != index.dim()) throw DimensionMismatch(index.dim(), queries.dim());
  TimedRun run;
  run.hits.resize(queries.size());
  auto one = [&](std::size_t q, QueryStats *st) -> std::vector<ScoredHit> {
    auto v = queries.row(static_cast<VectorId>(q));
    if (index.is_lider()) {
      auto r = index.lider().query(v, opt.k, opt.query, pool);
      if (st) *st = r.stats;
      return std::move(r.hits);
    }
    const auto &sk = index.sklsh();
    const std::size_t r0 = opt.query.r0.value_or(5);
    const std::size_t budget = opt.sklsh_budget ? opt.sklsh_budget : r0 * opt.k * sk.params().h;
    std::size_t verified = 0;
    auto hits = sk.search(v, opt.k, std::max(budget, opt.k), &verified);
    if (st) {
      st->in_cluster_candidates = std::min(std::max(budget, opt.k), sk.size() * sk.params().h);
      st->verified = verified;
    }
    return hits;
  };
  for (std::size_t q = 0; q < std::min(opt.warmup, queries.size()); ++q) one(q, nullptr);
  double total = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    QueryStats st;
    auto t = Clock::now();
    run.hits[q] = one(q, &st);
    total += seconds_since(t);
    run.per_stage_ms.centroid += st.centroid_seconds * 1e3;
    run.per_stage_ms.in_cluster += st.in_cluster_seconds * 1e3;
    run.per_stage_ms.merge += st.merge_seconds * 1e3;
    run.candidate_mean += static_cast<double>(st.centroid_candidates + st.in_cluster_candidates);
  }
  const double nq = static_cast<double>(std::max<std::size_t>(queries.size(), 1));
  run.aqt_seconds = total / nq;
  run.per_stage_ms.centroid /= nq;
  run.per_stage_ms.in_cluster /= nq;
  run.per_stage_ms.merge /= nq;
  run.candidate_mean /= nq;
  return run;
}

struct ExperimentConfig {
  std::string vectors_path;
  std::string queries_path;
  std::string index_path;             // load this index if set
  std::optional<LiderParams> build;   // otherwise build with these
  bool sklsh_baseline = false;
  std::string oracle_path;            // explicit oracle file
  std::string qrels_path;
  std::string cache_dir = ".lider_cache";
  bool no_oracle_build = false;
  RunOptions run;
  std::size_t workers = 0;            // 0 = default budget
};

inline std::shared_ptr<const VectorCollection> load_normalized(const std::string &path) {
  return std::make_shared<const VectorCollection>(normalize(load_vectors(path)));
}

/// Scores a run against an oracle and optional judgments.
inline EvalReport make_report(const TimedRun &run, const HitLists &oracle, std::size_t k,
                              const Qrels *qrels) {
  EvalReport r;
  r.k = k;
  r.queries = run.hits.size();
  r.recall_at_k = recall_at_k(ids_of(run.hits), ids_of(oracle), k);
  if (qrels) r.mrr_at_10 = mrr_at_10(ids_of(run.hits), *qrels);
  r.aqt_seconds = run.aqt_seconds;
  r.per_stage_ms = run.per_stage_ms;
  r.candidate_mean = run.candidate_mean;
  return r;
}

inline EvalReport run_experiment(const ExperimentConfig &cfg) {
  if (cfg.vectors_path.empty() || cfg.queries_path.empty()) {
    throw InvalidArgument("experiment needs --vectors and --queries");
  }
  WorkerPool pool(cfg.workers ? cfg.workers : default_worker_budget());
  auto vectors = load_normalized(cfg.vectors_path);
  auto queries = normalize(load_vectors(cfg.queries_path));

  HitLists oracle;
  if (!cfg.oracle_path.empty()) {
    oracle = read_results(cfg.oracle_path);
    oracle.resize(queries.size());
  } else {
    oracle = OracleCache(cfg.cache_dir).get(*vectors, queries, cfg.run.k, !cfg.no_oracle_build, &pool);
  }

  double build_seconds = 0.0;
  std::size_t resident_delta = 0;
  std::optional<AnyIndex> index;
  const std::size_t rss0 = resident_bytes();
  auto t = Clock::now();
  if (!cfg.index_path.empty()) {
    index = AnyIndex::load(cfg.index_path, vectors);
  } else if (cfg.sklsh_baseline) {
    SkLshParams sp;
    const LiderParams bp = cfg.build.value_or(LiderParams{});
    sp.h = bp.h;
    sp.seed = bp.seed;
    index = AnyIndex(SkLshIndex::build(vectors, sp, &pool));
  } else {
    index = AnyIndex(LiderIndex::build(vectors, cfg.build.value_or(LiderParams{}), &pool));
  }
  build_seconds = seconds_since(t);
  const std::size_t rss1 = resident_bytes();
  resident_delta = rss1 > rss0 ? rss1 - rss0 : 0;

  const auto run = run_queries(*index, queries, cfg.run, &pool);
  std::optional<Qrels> qrels;
  if (!cfg.qrels_path.empty()) qrels = load_qrels(cfg.qrels_path);
  EvalReport r = make_report(run, oracle, cfg.run.k, qrels ? &*qrels : nullptr);
  r.index_kind = index->is_lider() ? "lider" : "sklsh";
  r.workers = pool.budget();
  r.build_seconds = cfg.index_path.empty() ? build_seconds : 0.0;
  r.index_bytes = index->serialize().size();
  r.resident_delta_bytes = resident_delta;
  r.config["vectors"] = cfg.vectors_path;
  r.config["queries"] = cfg.queries_path;
  if (!cfg.index_path.empty()) r.config["index"] = cfg.index_path;
  if (index->is_lider()) {
    const auto &p = index->lider().params();
    r.config["c"] = std::to_string(p.c);
    r.config["c0"] = std::to_string(cfg.run.query.c0.value_or(p.c0));
    r.config["h"] = std::to_string(p.h);
    r.config["r0"] = std::to_string(cfg.run.query.r0.value_or(p.r0));
    r.config["wc"] = std::to_string(p.wc);
    r.config["wi"] = std::to_string(p.wi);
    r.config["b"] = std::to_string(p.b);
    r.config["seed"] = std::to_string(p.seed);
  } else {
    r.config["h"] = std::to_string(index->sklsh().params().h);
    r.config["m"] = std::to_string(index->sklsh().params().key_length);
  }
  return r;
}

/// Sweeps one parameter. c0 and r0 are query-time settings evaluated on a
/// single index; c and h rebuild the index for every value.
inline std::vector<std::pair<std::size_t, EvalReport>> run_sweep(ExperimentConfig cfg,
                                                                 const std::string &param,
                                                                 const std::vector<std::size_t> &values) {
  if (param != "c0" && param != "c" && param != "h" && param != "r0") {
    throw InvalidArgument("sweep parameter must be one of c0, c, h, r0");
  }
  if (values.empty()) throw InvalidArgument("sweep needs at least one value");
  std::vector<std::pair<std::size_t, EvalReport>> rows;
  if (param == "c0" || param == "r0") {
    WorkerPool pool(cfg.workers ? cfg.workers : default_worker_budget());
    auto vectors = load_normalized(cfg.vectors_path);
    auto queries = normalize(load_vectors(cfg.queries_path));
    HitLists oracle = cfg.oracle_path.empty()
                          ? OracleCache(cfg.cache_dir).get(*vectors, queries, cfg.run.k,
                                                           !cfg.no_oracle_build, &pool)
                          : read_results(cfg.oracle_path);
    oracle.resize(queries.size());
    auto t = Clock::now();
    AnyIndex index = cfg.index_path.empty()
                         ? AnyIndex(LiderIndex::build(vectors, cfg.build.value_or(LiderParams{}), &pool))
                         : AnyIndex::load(cfg.index_path, vectors);
    const double build_seconds = seconds_since(t);
    if (!index.is_lider()) throw InvalidArgument("c0/r0 sweeps need a clustered index");
    const std::size_t bytes = index.serialize().size();
    std::optional<Qrels> qrels;
    if (!cfg.qrels_path.empty()) qrels = load_qrels(cfg.qrels_path);
    for (std::size_t v : values) {
      RunOptions ro = cfg.run;
      if (param == "c0") ro.query.c0 = v;
      if (param == "r0") ro.query.r0 = v;
      const auto run = run_queries(index, queries, ro, &pool);
      EvalReport r = make_report(run, oracle, ro.k, qrels ? &*qrels : nullptr);
      r.index_kind = "lider";
      r.workers = pool.budget();
      r.build_seconds = build_seconds;
      r.index_bytes = bytes;
      r.config[param] = std::to_string(v);
      rows.emplace_back(v, std::move(r));
    }
    return rows;
  }
  LiderParams base = cfg.build.value_or(LiderParams{});
  for (std::size_t v : values) {
    ExperimentConfig c = cfg;
    c.index_path.clear();
    LiderParams p = base;
    if (param == "c") p.c = v;
    if (param == "h") p.h = v;
    p.c0 = std::min(p.c0, p.c);
    c.build = p;
    rows.emplace_back(v, run_experiment(c));
  }
  return rows;
}

}  // namespace lider::bench
