// Copyright 2026 The CoFuse Authors. All rights reserved.
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
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cofuse/analyzer.hpp"
#include "cofuse/config.hpp"
#include "cofuse/evolve.hpp"
#include "cofuse/fastpath.hpp"
#include "cofuse/store.hpp"
#include "cofuse/util.hpp"

namespace {

using namespace cofuse;
namespace fs = std::filesystem;

nlohmann::ordered_json transcript_to_json(const AgentProvider &provider) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto &entry : provider.transcript()) {
    nlohmann::ordered_json tags = nlohmann::ordered_json::object();
    for (const auto &[k, v] : entry.request.tags) tags[k] = v;
    entries.push_back({{"role", entry.request.role},
                       {"temperature", entry.request.temperature},
                       {"tags", tags},
                       {"prompt", entry.request.prompt},
                       {"response", entry.response},
                       {"failed", entry.failed}});
  }
  return entries;
}

void write_json(const std::string &path, const nlohmann::ordered_json &doc) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file(path, doc.dump(2) + "\n");
}

int cmd_analyze(const std::string &source_path, const std::string &json_out) {
  std::string source = read_file(source_path);
  CommGraph graph = build_comm_graph(scan_source(source));
  std::cout << render_graph(graph);
  if (!json_out.empty()) write_json(json_out, graph_to_json(graph));
  return kExitSuccess;
}

int cmd_fastpath(const std::string &config_path, const std::string &source_path,
                 const std::string &seed_out, const std::string &transcript_out) {
  RunConfig config = load_run_config(config_path);
  std::unique_ptr<AgentProvider> provider = make_provider(config);
  std::unique_ptr<EvalHarness> harness = make_harness(config);
  AgentContext ctx = assemble_context(config.backend,
                                      hardware_from_config(config),
                                      config.kb_dir);
  FastpathOptions options;
  options.topology = config.topology;
  options.iteration_cap = config.iteration_cap;
  options.retry = config.retry;

  std::string source = read_file(source_path);
  try {
    AnnotatedSeed seed = run_fastpath(source, config.backend, ctx, *harness,
                                      *provider, options);
    write_json(seed_out, seed_to_json(seed));
    if (!transcript_out.empty())
      write_json(transcript_out, {{"status", "converged"},
                                  {"exchanges", transcript_to_json(*provider)}});
    std::cout << "seed written to " << seed_out << "\n";
    return kExitSuccess;
  } catch (const StageExhausted &e) {
    if (!transcript_out.empty())
      write_json(transcript_out,
                 {{"status", "exhausted"},
                  {"failed_stage", to_string(e.stage)},
                  {"iterations", e.record.iterations.size()},
                  {"exchanges", transcript_to_json(*provider)}});
    std::cerr << e.what() << "\n";
    return kExitPipeline;
  }
}

int cmd_evolve(const std::string &config_path,
               const std::vector<std::string> &seed_paths,
               const std::string &run_dir_flag) {
  RunConfig config = load_run_config(config_path);
  if (!run_dir_flag.empty()) config.run_dir = run_dir_flag;
  if (config.run_dir.empty())
    throw Error(ErrorCode::ConfigError,
                "no run directory (config run_dir or --run-dir)");
  fs::create_directories(config.run_dir);

  std::unique_ptr<AgentProvider> provider = make_provider(config);
  std::unique_ptr<EvalHarness> harness = make_harness(config);
  AgentContext ctx = assemble_context(config.backend,
                                      hardware_from_config(config),
                                      config.kb_dir);
  if (!config.store_path.empty() && fs::path(config.store_path).has_parent_path())
    fs::create_directories(fs::path(config.store_path).parent_path());
  CandidateStore store(config.store_path);
  HashingEmbedder embedder(config.embedding_dim);

  std::vector<AnnotatedSeed> seeds;
  for (const auto &path : seed_paths)
    seeds.push_back(seed_from_json(
        nlohmann::ordered_json::parse(read_file(path))));

  EvolutionConfig evo;
  evo.params = config.params;
  evo.topology = config.topology;
  evo.reps = config.reps;
  evo.rng_seed = config.rng_seed;
  evo.run_dir = config.run_dir;
  evo.retry = config.retry;
  evo.use_meta = config.use_meta;

  EvolutionResult result =
      run_evolution(seeds, evo, *harness, *provider, embedder, store, ctx);

  std::string report;
  report += "run " + result.run_id + "\n";
  report += "generation | best score\n";
  for (size_t g = 0; g < result.best_series.size(); ++g) {
    char line[64];
    std::snprintf(line, sizeof(line), "%10zu | %10.4f\n", g,
                  result.best_series[g]);
    report += line;
  }
  char best_line[128];
  std::snprintf(best_line, sizeof(best_line), "best %s score %.4f level %s\n",
                result.best.id.c_str(), result.best.result.score,
                to_string(result.best.result.level_reached));
  report += best_line;
  if (result.no_viable) report += "note: " + result.diagnostics + "\n";
  write_file(config.run_dir + "/report.txt", report);
  std::cout << report;
  return kExitSuccess;
}

int cmd_inspect(const std::string &store_path, const std::string &id,
                const std::string &knn_file, int k, int dim,
                const MetaQuery &query, bool any_filter) {
  CandidateStore store(store_path);
  if (!id.empty()) {
    const CandidateRecord *record = store.find(id);
    if (record == nullptr) {
      std::cerr << "no record with id " << id << "\n";
      return kExitPipeline;
    }
    std::cout << record_to_json(*record).dump(2) << "\n";
    return kExitSuccess;
  }
  if (!knn_file.empty()) {
    HashingEmbedder embedder(dim);
    std::vector<float> query_vec = embedder.embed(read_file(knn_file));
    for (const auto &n : store.knn(query_vec, k)) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-40s similarity %.4f score %.4f\n",
                    n.record->id.c_str(), n.similarity, n.record->result.score);
      std::cout << line;
    }
    return kExitSuccess;
  }
  if (any_filter) {
    for (const CandidateRecord *record : store.query_meta(query)) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-40s g%-3d i%-2d %-11s %.4f\n",
                    record->id.c_str(), record->generation, record->island,
                    to_string(record->result.level_reached),
                    record->result.score);
      std::cout << line;
    }
    return kExitSuccess;
  }
  std::cout << store.size() << " records in " << store_path << "\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"compute/communication co-design pipeline"};
  app.require_subcommand(1);

  std::string source_path, json_out, config_path, seed_out, transcript_out;
  std::string run_dir_flag, store_path, id, knn_file;
  std::vector<std::string> seed_paths;
  int k = 5, dim = 256;
  MetaQuery query;
  double min_score = 0.0;
  int gen_min = 0, gen_max = 0;
  std::string keyword;

  auto *analyze = app.add_subcommand("analyze", "scan a program and print its communication graph");
  analyze->add_option("source", source_path, "program to scan")->required();
  analyze->add_option("--json", json_out, "write the graph as JSON");

  auto *fastpath = app.add_subcommand("fastpath", "transform a host-driven program into an annotated seed");
  fastpath->add_option("--config", config_path, "run configuration file")->required();
  fastpath->add_option("--source", source_path, "program to transform")->required();
  fastpath->add_option("--out", seed_out, "seed output file")->required();
  fastpath->add_option("--transcript", transcript_out, "write the provider transcript");

  auto *evolve = app.add_subcommand("evolve", "run the evolutionary search from one or more seeds");
  evolve->add_option("--config", config_path, "run configuration file")->required();
  evolve->add_option("--seed", seed_paths, "seed file(s)")->required();
  evolve->add_option("--run-dir", run_dir_flag, "run directory (overrides config)");

  auto *inspect = app.add_subcommand("inspect", "query a candidate store");
  inspect->add_option("--store", store_path, "store directory or records file")->required();
  inspect->add_option("--id", id, "print one record in full");
  inspect->add_option("--knn", knn_file, "file whose nearest stored candidates to list");
  inspect->add_option("--k", k, "neighbor count for --knn");
  inspect->add_option("--dim", dim, "embedding dimension for --knn");
  auto *min_score_opt = inspect->add_option("--min-score", min_score, "filter: minimum score");
  auto *gen_min_opt = inspect->add_option("--generation-min", gen_min, "filter: first generation");
  auto *gen_max_opt = inspect->add_option("--generation-max", gen_max, "filter: last generation");
  auto *keyword_opt = inspect->add_option("--keyword", keyword, "filter: keyword in source or feedback");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return cmd_analyze(source_path, json_out);
    if (fastpath->parsed())
      return cmd_fastpath(config_path, source_path, seed_out, transcript_out);
    if (evolve->parsed())
      return cmd_evolve(config_path, seed_paths, run_dir_flag);
    if (inspect->parsed()) {
      bool any_filter = false;
      if (min_score_opt->count() > 0) { query.min_score = min_score; any_filter = true; }
      if (gen_min_opt->count() > 0) { query.generation_min = gen_min; any_filter = true; }
      if (gen_max_opt->count() > 0) { query.generation_max = gen_max; any_filter = true; }
      if (keyword_opt->count() > 0) { query.keyword = keyword; any_filter = true; }
      return cmd_inspect(store_path, id, knn_file, k, dim, query, any_filter);
    }
  } catch (const Error &e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception &e) {
    std::cerr << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitConfig;
}
