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

#include "cofuse/seed.hpp"

#include "cofuse/util.hpp"

namespace cofuse {

std::vector<BlockSpan> evolve_block_spans(const std::vector<std::string> &lines) {
  std::vector<BlockSpan> spans;
  int open_line = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    bool is_start = lines[i].find(kEvolveStart) != std::string::npos;
    // START is a substring of END's prefix-free sibling, but END contains
    // its own token; a line holding both is malformed.
    bool is_end = lines[i].find(kEvolveEnd) != std::string::npos;
    int line = static_cast<int>(i) + 1;
    if (is_start && is_end)
      throw Error(ErrorCode::AnnotationInvalid,
                  "line " + std::to_string(line) + " holds both markers");
    if (is_start) {
      if (open_line != 0)
        throw Error(ErrorCode::AnnotationInvalid,
                    "nested marker at line " + std::to_string(line));
      open_line = line;
    } else if (is_end) {
      if (open_line == 0)
        throw Error(ErrorCode::AnnotationInvalid,
                    "unmatched end marker at line " + std::to_string(line));
      spans.push_back({open_line, line});
      open_line = 0;
    }
  }
  if (open_line != 0)
    throw Error(ErrorCode::AnnotationInvalid,
                "unclosed marker opened at line " + std::to_string(open_line));
  return spans;
}

bool markers_balanced(const std::string &source) {
  try {
    evolve_block_spans(split_lines(source));
    return true;
  } catch (const Error &) {
    return false;
  }
}

std::string outside_block_signature(const std::string &source) {
  std::vector<std::string> lines = split_lines(source);
  std::vector<BlockSpan> spans = evolve_block_spans(lines);
  std::string signature;
  size_t span_idx = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    int line = static_cast<int>(i) + 1;
    while (span_idx < spans.size() && line > spans[span_idx].end_line) ++span_idx;
    bool interior = span_idx < spans.size() &&
                    line > spans[span_idx].start_line &&
                    line < spans[span_idx].end_line;
    if (!interior) signature += lines[i] + "\n";
  }
  return signature;
}

const char *to_string(StageKind s) {
  return s == StageKind::SetupA ? "setup_a" : "comm_b";
}

nlohmann::ordered_json seed_to_json(const AnnotatedSeed &seed) {
  nlohmann::ordered_json j;
  j["source"] = seed.source;
  nlohmann::ordered_json dj;
  to_json(dj, seed.directive);
  j["directive"] = std::move(dj);
  j["graph_report"] = render_graph(seed.graph);
  j["provenance"] = nlohmann::ordered_json::array();
  for (const auto &stage : seed.provenance) {
    nlohmann::ordered_json s;
    s["stage"] = to_string(stage.stage);
    s["converged"] = stage.converged;
    s["iteration_cap"] = stage.iteration_cap;
    s["iterations"] = nlohmann::ordered_json::array();
    for (const auto &it : stage.iterations) {
      nlohmann::ordered_json i;
      i["source"] = it.source;
      i["diagnostics"] = it.diagnostics;
      i["feedback"] = feedback_to_json(it.feedback);
      s["iterations"].push_back(std::move(i));
    }
    j["provenance"].push_back(std::move(s));
  }
  return j;
}

AnnotatedSeed seed_from_json(const nlohmann::ordered_json &j) {
  AnnotatedSeed seed;
  seed.source = j.at("source").get<std::string>();
  from_json(j.at("directive"), seed.directive);
  for (const auto &s : j.value("provenance", nlohmann::ordered_json::array())) {
    TransformStage stage;
    stage.stage = s.value("stage", "setup_a") == std::string("comm_b")
                      ? StageKind::CommB
                      : StageKind::SetupA;
    stage.converged = s.value("converged", false);
    stage.iteration_cap = s.value("iteration_cap", 6);
    for (const auto &i : s.value("iterations", nlohmann::ordered_json::array())) {
      StageIteration it;
      it.source = i.value("source", "");
      it.diagnostics = i.value("diagnostics", "");
      if (i.contains("feedback")) it.feedback = feedback_from_json(i["feedback"]);
      stage.iterations.push_back(std::move(it));
    }
    seed.provenance.push_back(std::move(stage));
  }
  return seed;
}

}  // namespace cofuse
