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

#ifndef COFUSE_SEED_HPP_
#define COFUSE_SEED_HPP_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cofuse/agents.hpp"
#include "cofuse/analyzer.hpp"
#include "cofuse/directive.hpp"

namespace cofuse {

inline constexpr const char *kEvolveStart = "EVOLVE-BLOCK-START";
inline constexpr const char *kEvolveEnd = "EVOLVE-BLOCK-END";

// 1-based line numbers of a marker pair; the mutable interior is the open
// range (start_line, end_line).
struct BlockSpan {
  int start_line = 0;
  int end_line = 0;
};

// Throws AnnotationInvalid on nested, inverted, or unClosed markers.
std::vector<BlockSpan> evolve_block_spans(const std::vector<std::string> &lines);

bool markers_balanced(const std::string &source);

// Everything except block interiors (marker lines included), used to check
// that a mutation left frozen regions byte-identical.
std::string outside_block_signature(const std::string &source);

enum class StageKind { SetupA, CommB };

const char *to_string(StageKind s);

struct StageIteration {
  std::string source;
  std::string diagnostics;
  Feedback feedback;
};

struct TransformStage {
  StageKind stage = StageKind::SetupA;
  std::vector<StageIteration> iterations;
  bool converged = false;
  int iteration_cap = 6;
};

struct AnnotatedSeed {
  std::string source;
  OptimizationDirective directive;
  CommGraph graph;
  std::vector<TransformStage> provenance;
};

// The graph is stored as its rendered report; loading re-derives structure
// from the source when a caller needs it.
nlohmann::ordered_json seed_to_json(const AnnotatedSeed &seed);
AnnotatedSeed seed_from_json(const nlohmann::ordered_json &j);

}  // namespace cofuse

#endif  // COFUSE_SEED_HPP_
