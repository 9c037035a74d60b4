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

#ifndef COFUSE_EVOLVE_HPP_
#define COFUSE_EVOLVE_HPP_

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cofuse/cascade.hpp"
#include "cofuse/seed.hpp"
#include "cofuse/store.hpp"

namespace cofuse {

enum class Phase { Explore, Exploit };

struct FormWeights {
  double diff = 0.0;
  double rewrite = 0.0;
  double crossover = 0.0;
};

struct SearchParams {
  int k = 2;
  int G = 6;
  double alpha = 0.4;
  int G_m = 3;
  int migration_k = 2;
  double beta = 1.0;
  FormWeights explore_weights{0.25, 0.6, 0.15};
  FormWeights exploit_weights{0.6, 0.25, 0.15};
  double tau_high = 1.0;
  double tau_low = 0.2;
  double novelty_threshold = 0.95;
  int capacity = 16;

  // Throws InvalidWeights for weight problems, ConfigError otherwise.
  void validate() const;
};

struct Island {
  int index = 0;
  std::vector<std::string> population;  // persisted candidate ids, score > 0
  int capacity = 16;
  std::string seed_id;
};

// Deterministic keyword classification into the principal strategy shapes;
// the judge's summary is consulted only when the source itself is silent.
std::string classify_strategy(const std::string &source,
                              const std::string &strategy_summary);

class MapElitesArchive {
 public:
  // Key: backend|issuer|strategy. Insert requires score > 0; keeps the
  // best-scoring candidate per cell.
  bool insert(const CandidateRecord &record);
  size_t size() const { return _cells.size(); }
  std::vector<std::string> sample(std::mt19937_64 &rng, int n) const;
  const std::map<std::string, std::string> &cells() const { return _cells; }

  static std::string cell_key(const CandidateRecord &record);

 private:
  std::map<std::string, std::string> _cells;   // cell -> candidate id
  std::map<std::string, double> _cell_scores;
};

Phase choose_phase(int g, int G, double alpha);

MutationForm sample_mutation_form(Phase phase, const SearchParams &params,
                                  std::mt19937_64 &rng);

// Samples ids with probability proportional to score^beta; when every score
// is zero the draw is uniform. Throws EmptyIsland.
const std::string &select_parent(const Island &island, double beta,
                                 const CandidateStore &store,
                                 std::mt19937_64 &rng);

struct PatchHunk {
  int first = 0;  // 1-based inclusive
  int last = 0;
  std::vector<std::string> lines;
};

// Hunk headers are "@@ first,last @@"; body lines replace that range.
std::vector<PatchHunk> parse_patch(const std::string &text);

// Applies a block-scoped patch. Throws FrozenRegionEdit when a hunk touches
// a marker or anything outside block interiors, MalformedPatch otherwise.
std::string apply_diff(const std::string &program, const std::string &patch);

struct Mutation {
  std::string source;
  OptimizationDirective directive;
  MutationForm form = MutationForm::Rewrite;
};

// Response protocol: a directive block, then "=== SOURCE ===" (full program)
// or "=== DIFF ===" (patch), optionally closed by "=== END ===".
Mutation parse_mutation_response(const std::string &response, MutationForm form,
                                 const std::string &parent_source);

struct MutateInputs {
  const CandidateRecord *parent = nullptr;
  int generation = 0;
  int island = 0;
  int attempt = 0;
  std::string meta_recommendations;
};

// Alg: pick form by phase, assemble context (parent + store neighbors +
// archive inspirations + meta recommendations), call the provider at the
// phase temperature, and validate the offspring. Throws MutationRejected.
Mutation llm_mutate(const MutateInputs &in, const MapElitesArchive &archive,
                    const CandidateStore &store, const SearchParams &params,
                    int G, AgentProvider &provider, const RetryPolicy &retry,
                    std::mt19937_64 &rng);

struct MigrationEvent {
  int source_island = 0;
  int target_island = 0;
  std::string candidate_id;
  bool applied = false;  // false: migrant scored below the worst member
};

std::vector<MigrationEvent> migrate(std::vector<Island> &islands,
                                    int migration_k,
                                    const CandidateStore &store,
                                    std::mt19937_64 &rng);

struct EvolutionConfig {
  SearchParams params;
  Topology topology{2, {}};
  int reps = 3;
  uint64_t rng_seed = 0;
  std::string run_dir;
  RetryPolicy retry;
  bool use_meta = true;
};

struct EvolutionResult {
  std::string run_id;
  CandidateRecord best;
  bool no_viable = false;  // nothing ever reached the benchmark level
  std::string diagnostics;
  std::vector<double> best_series;  // best score after each generation
};

std::string make_run_id(const EvolutionConfig &config, Backend backend);

// Runs the full search loop. Slots whose candidate id already exists in the
// store are replayed from the stored record, which makes interrupted runs
// resumable. HarnessUnavailable propagates; candidate failures never throw.
EvolutionResult run_evolution(const std::vector<AnnotatedSeed> &seeds,
                              const EvolutionConfig &config,
                              EvalHarness &harness, AgentProvider &provider,
                              EmbeddingProvider &embedder, CandidateStore &store,
                              const AgentContext &ctx);

}  // namespace cofuse

#endif  // COFUSE_EVOLVE_HPP_
