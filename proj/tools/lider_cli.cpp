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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lider/bench.hpp"
#include "lider/lider.hpp"
#include "lider/sklsh.hpp"
#include "lider/vectorstore.hpp"

namespace {

using namespace lider;

struct BuildFlags {
  std::size_t c = 100, c0 = 10, h = 10, wc = 10, wi = 5, b = 3, r0 = 5, kmeans_iters = 20;
  std::uint64_t seed = 1;

  void add_to(CLI::App *cmd) {
    cmd->add_option("--c", c, "cluster count")->capture_default_str();
    cmd->add_option("--c0", c0, "clusters probed per query")->capture_default_str();
    cmd->add_option("--h", h, "sorted arrays per core model")->capture_default_str();
    cmd->add_option("--wc", wc, "centroid retriever RMI width")->capture_default_str();
    cmd->add_option("--wi", wi, "in-cluster RMI width")->capture_default_str();
    cmd->add_option("--b", b, "window bits of the element distance")->capture_default_str();
    cmd->add_option("--r0", r0, "expansion factor, R = r0 * k")->capture_default_str();
    cmd->add_option("--kmeans-iters", kmeans_iters, "k-means iteration cap")->capture_default_str();
    cmd->add_option("--seed", seed, "random seed")->capture_default_str();
  }

  LiderParams params() const {
    LiderParams p;
    p.c = c;
    p.c0 = c0;
    p.h = h;
    p.wc = wc;
    p.wi = wi;
    p.b = static_cast<std::uint32_t>(b);
    p.r0 = r0;
    p.kmeans_iters = kmeans_iters;
    p.seed = seed;
    return p;
  }
};

std::vector<std::size_t> parse_values(const std::string &csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw InvalidArgument("--values expects a comma-separated list of positive integers, got '" +
                            csv + "'");
    }
    out.push_back(std::stoull(item));
  }
  return out;
}

void write_report(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Clustered learned-index ANN search over dense embeddings"};
  app.set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  app.require_subcommand(1);

  // synth
  std::size_t n = 0, dim = 0, centers = 0, nq = 0;
  double spread = 0.05;
  std::uint64_t synth_seed = 1;
  std::string synth_out, synth_queries_out;
  auto *synth = app.add_subcommand("synth", "generate a normalized Gaussian-mixture vector file");
  synth->add_option("--n", n, "vector count")->required();
  synth->add_option("--dim", dim, "dimension")->required();
  synth->add_option("--centers", centers, "mixture components")->required();
  synth->add_option("--spread", spread, "per-coordinate standard deviation")->capture_default_str();
  synth->add_option("--seed", synth_seed, "random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output vector file")->required();
  synth->add_option("--queries-out", synth_queries_out,
                    "also write queries drawn from the same mixture");
  synth->add_option("--nq", nq, "query count for --queries-out")->default_val(1000);

  // build
  BuildFlags bf;
  std::string build_vectors, build_out;
  bool sklsh_baseline = false;
  auto *build = app.add_subcommand("build", "build and save an index");
  build->add_option("--vectors", build_vectors, "vector file")->required();
  build->add_option("--out-index", build_out, "index file to write")->required();
  bf.add_to(build);
  build->add_flag("--sklsh-baseline", sklsh_baseline,
                  "build the unclustered SK-LSH comparison index instead");

  // query
  std::string q_index, q_vectors, q_queries, q_out;
  std::size_t q_k = 100, q_budget = 0;
  std::size_t q_c0 = 0, q_r0 = 0;
  auto *query = app.add_subcommand("query", "answer a query file with a saved index");
  query->add_option("--index", q_index, "index file")->required();
  query->add_option("--vectors", q_vectors, "the indexed vector file")->required();
  query->add_option("--queries", q_queries, "query vector file")->required();
  query->add_option("--k", q_k, "results per query")->capture_default_str();
  query->add_option("--out", q_out, "results file")->required();
  query->add_option("--c0", q_c0, "override clusters probed");
  query->add_option("--r0", q_r0, "override expansion factor");
  query->add_option("--budget", q_budget, "SK-LSH candidate budget (default r0 * k * H)");

  // oracle
  std::string o_vectors, o_queries, o_out;
  std::size_t o_k = 100;
  auto *oracle = app.add_subcommand("oracle", "exact brute-force top-k");
  oracle->add_option("--vectors", o_vectors, "vector file")->required();
  oracle->add_option("--queries", o_queries, "query vector file")->required();
  oracle->add_option("--k", o_k, "results per query")->capture_default_str();
  oracle->add_option("--out", o_out, "results file")->required();

  // eval and sweep share experiment flags
  bench::ExperimentConfig cfg;
  std::string report_out;
  bool eval_sklsh = false;
  std::size_t e_c0 = 0, e_r0 = 0;
  auto add_experiment_flags = [&](CLI::App *cmd, bool index_required) {
    auto *idx = cmd->add_option("--index", cfg.index_path, "index file (built on the fly if absent)");
    if (index_required) idx->required();
    cmd->add_option("--vectors", cfg.vectors_path, "vector file")->required();
    cmd->add_option("--queries", cfg.queries_path, "query vector file")->required();
    cmd->add_option("--k", cfg.run.k, "results per query")->capture_default_str();
    cmd->add_option("--oracle", cfg.oracle_path, "precomputed oracle results file");
    cmd->add_option("--qrels", cfg.qrels_path, "relevance judgments for MRR@10");
    cmd->add_option("--report", report_out, "report file ('-' for stdout)")->required();
    cmd->add_option("--cache-dir", cfg.cache_dir, "oracle cache directory")->capture_default_str();
    cmd->add_flag("--no-oracle-build", cfg.no_oracle_build, "fail instead of computing a missing oracle");
    cmd->add_option("--workers", cfg.workers, "worker budget (default LIDER_WORKERS or hardware)");
    cmd->add_option("--budget", cfg.run.sklsh_budget, "SK-LSH candidate budget (default r0 * k * H)");
  };
  auto *eval = app.add_subcommand("eval", "run queries and score them against the oracle");
  add_experiment_flags(eval, true);
  eval->add_option("--c0", e_c0, "override clusters probed");
  eval->add_option("--r0", e_r0, "override expansion factor");

  std::string sweep_param, sweep_values;
  BuildFlags sf;
  auto *sweep = app.add_subcommand("sweep", "evaluate one parameter over several values");
  add_experiment_flags(sweep, false);
  sweep->add_option("--param", sweep_param, "parameter to vary")
      ->required()
      ->check(CLI::IsMember({"c0", "c", "h", "r0"}));
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sf.add_to(sweep);
  sweep->add_flag("--sklsh-baseline", eval_sklsh, "sweep the SK-LSH comparison index");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SyntheticMixture mix(dim, centers, spread, synth_seed);
      write_vectors(synth_out, mix.sample(n, 0));
      if (!synth_queries_out.empty()) write_vectors(synth_queries_out, mix.sample(nq, 1));
      return 0;
    }

    if (*build) {
      WorkerPool pool(default_worker_budget());
      auto vectors = bench::load_normalized(build_vectors);
      auto t = Clock::now();
      if (sklsh_baseline) {
        SkLshParams sp;
        sp.h = bf.h;
        sp.seed = bf.seed;
        auto idx = SkLshIndex::build(vectors, sp, &pool);
        idx.save(build_out);
      } else {
        auto idx = LiderIndex::build(vectors, bf.params(), &pool);
        for (const auto &w : idx.warnings()) std::cerr << "warning: " << w << '\n';
        idx.save(build_out);
      }
      std::cerr << "built in " << seconds_since(t) << " s\n";
      return 0;
    }

    if (*query) {
      WorkerPool pool(default_worker_budget());
      auto vectors = bench::load_normalized(q_vectors);
      auto queries = normalize(load_vectors(q_queries));
      auto index = bench::AnyIndex::load(q_index, vectors);
      bench::RunOptions ro;
      ro.k = q_k;
      ro.warmup = 0;
      ro.sklsh_budget = q_budget;
      if (q_c0) ro.query.c0 = q_c0;
      if (q_r0) ro.query.r0 = q_r0;
      auto run = bench::run_queries(index, queries, ro, &pool);
      bench::write_results(q_out, run.hits);
      return 0;
    }

    if (*oracle) {
      WorkerPool pool(default_worker_budget());
      auto vectors = normalize(load_vectors(o_vectors));
      auto queries = normalize(load_vectors(o_queries));
      bench::write_results(o_out, bench::compute_oracle(vectors, queries, o_k, &pool));
      return 0;
    }

    if (*eval) {
      if (e_c0) cfg.run.query.c0 = e_c0;
      if (e_r0) cfg.run.query.r0 = e_r0;
      write_report(report_out, bench::run_experiment(cfg).to_text());
      return 0;
    }

    if (*sweep) {
      cfg.build = sf.params();
      cfg.sklsh_baseline = eval_sklsh;
      if (eval_sklsh && sweep_param != "h") {
        throw InvalidArgument("the SK-LSH comparison index only supports sweeping h");
      }
      const auto rows = bench::run_sweep(cfg, sweep_param, parse_values(sweep_values));
      std::ostringstream text;
      text << sweep_param << "\trecall_at_k\taqt_seconds\tcandidate_mean\tindex_bytes\n";
      nlohmann::json all = nlohmann::json::array();
      for (const auto &[value, r] : rows) {
        text << value << '\t' << r.recall_at_k << '\t' << r.aqt_seconds << '\t' << r.candidate_mean
             << '\t' << r.index_bytes << '\n';
        all.push_back({{"value", value}, {"report", r.to_json()}});
      }
      text << bench::EvalReport::kJsonMarker << '\n' << all.dump(2) << '\n';
      write_report(report_out, text.str());
      return 0;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
