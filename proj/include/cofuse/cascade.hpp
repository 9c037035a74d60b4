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

#ifndef COFUSE_CASCADE_HPP
#define COFUSE_CASCADE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cofuse/agents.hpp"
#include "cofuse/directive.hpp"
#include "cofuse/errors.hpp"

namespace cofuse {

// The unit of evaluation: candidate source plus its directive.
struct ProgramVariant {
  std::string source;
  OptimizationDirective directive;
};

struct Topology {
  int ranks = 1;
  std::vector<std::string> hosts;
};

struct CompileOutcome {
  bool ok = false;
  std::string artifact;  // opaque handle for the run stages
  std::string diagnostics;
};

struct RunOutcome {
  bool ok = false;
  bool timed_out = false;
  std::string diagnostics;
};

struct BenchOutcome {
  bool ok = false;
  bool timed_out = false;
  std::vector<double> latencies_ms;
  std::string diagnostics;
};

// Evaluation backend contract. run_verify and run_benchmark are only ever
// invoked with an artifact produced by a successful compile. Infrastructure
// failures (missing compiler, unreachable launcher) are reported by raising
// Error(HarnessUnavailable), never as a candidate failure.
class EvalHarness {
 public:
  virtual ~EvalHarness() = default;
  virtual CompileOutcome compile(const ProgramVariant &variant) = 0;
  virtual RunOutcome run_verify(const std::string &artifact,
                                const Topology &topology) = 0;
  virtual BenchOutcome run_benchmark(const std::string &artifact,
                                     const Topology &topology, int reps) = 0;
};

enum class CascadeLevel { L1Failed, L2Failed, L3Complete };

const char *to_string(CascadeLevel level);

struct CascadeResult {
  CascadeLevel level_reached = CascadeLevel::L1Failed;
  std::string diagnostics;
  std::vector<double> latencies_ms;
  std::optional<double> best_ms;
  double score = 0.0;
  std::optional<Feedback> feedback;
};

// score = 10000 / (1 + t_ms). Throws Error(NegativeLatency) for t_ms < 0.
double score_from_latency(double t_ms);

using JudgeFn = std::function<Feedback(CascadeStage, const std::string &source,
                                       const std::string &diagnostics)>;

// Runs compile -> verify -> benchmark, stopping at the first failing level.
// Failed candidates score 0 but still return diagnostics so they can be
// persisted. When a judge is supplied it is consulted once, at the level
// where evaluation terminated.
CascadeResult cascade_eval(const ProgramVariant &variant, EvalHarness &harness,
                           const Topology &topology, int reps,
                           const JudgeFn &judge_fn = nullptr);

}  // namespace cofuse

#endif  // COFUSE_CASCADE_HPP
