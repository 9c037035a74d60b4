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

#ifndef COFUSE_FASTPATH_HPP_
#define COFUSE_FASTPATH_HPP_

#include <string>
#include <utility>
#include <vector>

#include "cofuse/agents.hpp"
#include "cofuse/analyzer.hpp"
#include "cofuse/cascade.hpp"
#include "cofuse/seed.hpp"

namespace cofuse {

// A judge loop hit its iteration cap; the full stage transcript rides along.
class StageExhausted : public Error {
 public:
  StageExhausted(StageKind stage, TransformStage record)
      : Error(ErrorCode::StageExhausted,
              std::string("stage ") + to_string(stage) + " did not converge in " +
                  std::to_string(record.iteration_cap) + " iterations"),
        stage(stage),
        record(std::move(record)) {}

  StageKind stage;
  TransformStage record;
};

struct FastpathOptions {
  Topology topology{2, {}};
  int iteration_cap = 6;
  RetryPolicy retry;
  // Functions with these name prefixes are frozen: never annotated, never
  // counted as mutable regions.
  std::vector<std::string> frozen_prefixes{"verify", "check", "print", "main"};
};

// Stage gate: compilation only. Host collective tokens must survive.
std::pair<TransformStage, std::string> stage_a_setup(
    const std::string &src, const CommGraph &graph, Backend backend,
    const AgentContext &ctx, EvalHarness &harness, AgentProvider &provider,
    const FastpathOptions &options = {});

// Stage gate: compile + verify + an analyzer re-scan proving all host
// collectives are gone. New allocation calls are rejected.
std::pair<TransformStage, std::string> stage_b_replace(
    const std::string &src, const CommGraph &graph,
    const OptimizationDirective &directive, const AgentContext &ctx,
    EvalHarness &harness, AgentProvider &provider,
    const FastpathOptions &options = {});

// LLM pass with heuristic fallback; output markers are balanced and avoid
// frozen functions. Throws AnnotationInvalid only when no mutable region at
// all can be found.
std::string annotate_evolve_blocks(const std::string &src,
                                   const CommGraph &graph,
                                   AgentProvider &provider,
                                   const FastpathOptions &options = {});

AnnotatedSeed run_fastpath(const std::string &src, Backend backend,
                           const AgentContext &ctx, EvalHarness &harness,
                           AgentProvider &provider,
                           const FastpathOptions &options = {});

}  // namespace cofuse

#endif  // COFUSE_FASTPATH_HPP_
