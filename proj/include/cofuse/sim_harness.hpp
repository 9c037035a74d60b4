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

#ifndef COFUSE_SIM_HARNESS_HPP_
#define COFUSE_SIM_HARNESS_HPP_

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cofuse/cascade.hpp"

namespace cofuse {

// Hardware-free cost model. Parameters are tuned only so that the ordering
// properties the search relies on hold (more overlap -> lower latency, finer
// chunks -> more sync overhead); they predict nothing about real hardware.
struct SimCostModel {
  struct PlacementClass {
    std::string name;
    std::vector<std::string> keywords;
    double overlap_efficiency = 0.0;
  };
  struct ChunkClass {
    std::string name;
    std::vector<std::string> keywords;
    int chunk_count = 1;
  };
  // kind "require": if_token present => require_token must be present.
  // kind "conflict": if_token and require_token both present => fail.
  // kind "require_any": at least one of tokens must be present.
  struct VerifyRule {
    std::string kind;
    std::string backend;  // "GIN", "LSA", or "any"
    std::string if_token;
    std::string require_token;
    std::vector<std::string> tokens;
    std::string message;
  };

  double base_compute_ms = 40.0;
  double comm_volume_ms = 60.0;
  double per_chunk_sync_overhead_ms = 0.05;
  double jitter_amplitude = 0.01;
  std::map<std::string, double> backend_factor;
  std::vector<PlacementClass> placement_classes;  // first keyword match wins
  std::vector<ChunkClass> chunk_classes;
  std::map<std::string, std::vector<std::string>> required_tokens;
  std::map<std::string, std::vector<std::string>> exclusive_tokens;
  std::vector<VerifyRule> verify_rules;

  static SimCostModel defaults();
  static SimCostModel from_json(const nlohmann::json &j);
  static SimCostModel from_file(const std::string &path);
};

// Keyword classification of the free-form intents, documented in the model
// file. Falls back to the last (default) class when nothing matches.
const SimCostModel::PlacementClass &classify_placement(const SimCostModel &model,
                                                       const std::string &intent);
const SimCostModel::ChunkClass &classify_chunks(const SimCostModel &model,
                                                const std::string &intent);

CompileOutcome sim_compile(const ProgramVariant &variant,
                           const SimCostModel &model);

// Pure deterministic latency (no jitter); requires sim_compile ok.
double sim_latency(const ProgramVariant &variant, const SimCostModel &model);

class SimHarness : public EvalHarness {
 public:
  explicit SimHarness(SimCostModel model = SimCostModel::defaults())
      : _model(std::move(model)) {}

  CompileOutcome compile(const ProgramVariant &variant) override;
  RunOutcome run_verify(const std::string &artifact,
                        const Topology &topology) override;
  BenchOutcome run_benchmark(const std::string &artifact,
                             const Topology &topology, int reps) override;

  const SimCostModel &model() const { return _model; }

 private:
  const ProgramVariant &variant_for(const std::string &artifact);

  SimCostModel _model;
  std::map<std::string, ProgramVariant> _artifacts;
  std::mutex _mutex;
};

}  // namespace cofuse

#endif  // COFUSE_SIM_HARNESS_HPP_
