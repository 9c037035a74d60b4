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

#include "cofuse/cascade.hpp"

#include <algorithm>

namespace cofuse {

const char *to_string(CascadeLevel level) {
  switch (level) {
    case CascadeLevel::L1Failed: return "l1_failed";
    case CascadeLevel::L2Failed: return "l2_failed";
    case CascadeLevel::L3Complete: return "l3_complete";
  }
  return "l1_failed";
}

double score_from_latency(double latency_ms) {
  if (latency_ms < 0.0)
    throw Error(ErrorCode::NegativeLatency,
                "latency " + std::to_string(latency_ms) + " ms");
  return 10000.0 / (1.0 + latency_ms);
}

CascadeResult cascade_eval(const ProgramVariant &variant, EvalHarness &harness,
                           const Topology &topology, int reps,
                           const JudgeFn &judge_fn) {
  CascadeResult result;
  result.score = 0.0;

  CompileOutcome compiled = harness.compile(variant);
  if (!compiled.ok) {
    result.level_reached = CascadeLevel::L1Failed;
    result.diagnostics = compiled.diagnostics;
    if (judge_fn)
      result.feedback =
          judge_fn(CascadeStage::Compile, variant.source, compiled.diagnostics);
    return result;
  }

  RunOutcome verified = harness.run_verify(compiled.artifact, topology);
  if (!verified.ok) {
    result.level_reached = CascadeLevel::L2Failed;
    result.diagnostics = verified.diagnostics;
    if (judge_fn)
      result.feedback =
          judge_fn(CascadeStage::Verify, variant.source, verified.diagnostics);
    return result;
  }

  BenchOutcome bench = harness.run_benchmark(compiled.artifact, topology, reps);
  if (!bench.ok || bench.latencies_ms.empty()) {
    // A benchmark that fails after a clean verify is still a verify-level
    // survivor; it keeps score 0 like any non-timed candidate.
    result.level_reached = CascadeLevel::L2Failed;
    result.diagnostics = bench.diagnostics;
    if (judge_fn)
      result.feedback =
          judge_fn(CascadeStage::Verify, variant.source, bench.diagnostics);
    return result;
  }

  result.level_reached = CascadeLevel::L3Complete;
  result.latencies_ms = bench.latencies_ms;
  result.best_ms =
      *std::min_element(bench.latencies_ms.begin(), bench.latencies_ms.end());
  result.score = score_from_latency(*result.best_ms);
  result.diagnostics = bench.diagnostics;
  if (judge_fn)
    result.feedback =
        judge_fn(CascadeStage::Benchmark, variant.source, bench.diagnostics);
  return result;
}

}  // namespace cofuse
