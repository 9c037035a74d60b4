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

#include "cofuse/sim_harness.hpp"

#include <algorithm>
#include <stdexcept>

#include "cofuse/directive.hpp"
#include "cofuse/util.hpp"

namespace cofuse {

SimCostModel SimCostModel::defaults() {
  SimCostModel m;
  m.backend_factor = {{"GIN", 1.0}, {"LSA", 0.9}};
  m.placement_classes = {
      {"fused", {"fused", "fuse", "persistent"}, 0.85},
      {"pipelined", {"pipelin", "per-tile", "tile"}, 0.7},
      {"overlapped", {"overlap", "interleav", "concurrent stream"}, 0.45},
      {"deferred", {"deferred", "defer"}, 0.0},
  };
  m.chunk_classes = {
      {"fine", {"fine", "per-tile", "tile"}, 64},
      {"medium", {"medium", "split", "half"}, 8},
      {"coarse", {"coarse", "bulk", "single"}, 1},
  };
  m.required_tokens = {
      {"GIN",
       {"ncclMemAlloc", "ncclDevComm", "gin.put", "gin.waitSignal",
        "gin.flush"}},
      {"LSA",
       {"ncclMemAlloc", "ncclDevComm", "ncclGetLsaPointer",
        "ncclLsaBarrierSession"}},
  };
  m.exclusive_tokens = {
      {"GIN", {"gin.put", "gin.waitSignal", "gin.flush"}},
      {"LSA", {"ncclGetLsaPointer", "ncclLsaBarrierSession", "ncclTeamLsa"}},
  };
  m.verify_rules = {
      {"require", "GIN", "gin.put", "gin.waitSignal", {},
       "put without waitSignal: remote delivery never confirmed"},
      {"require", "GIN", "gin.put", "gin.flush", {},
       "put without flush: source buffer reuse is unordered"},
      {"require", "LSA", "ncclGetLsaPointer", "ncclLsaBarrierSession", {},
       "peer access without a barrier session"},
      {"require", "LSA", "ncclLsaBarrierSession", "memory_order_release", {},
       "barrier sync missing release ordering"},
      {"conflict", "any", "cudaMalloc(", "ncclDevComm", {},
       "device communication over an unregistered allocation (use ncclMemAlloc)"},
      {"require_any", "GIN", "", "",
       {"gin.put", "gin.waitSignal", "gin.flush"},
       "no device-initiated communication call sites"},
      {"require_any", "LSA", "", "",
       {"ncclGetLsaPointer", "ncclLsaBarrierSession"},
       "no device-initiated communication call sites"},
  };
  return m;
}

SimCostModel SimCostModel::from_json(const nlohmann::json &j) {
  SimCostModel m = defaults();
  m.base_compute_ms = j.value("base_compute_ms", m.base_compute_ms);
  m.comm_volume_ms = j.value("comm_volume_ms", m.comm_volume_ms);
  m.per_chunk_sync_overhead_ms =
      j.value("per_chunk_sync_overhead_ms", m.per_chunk_sync_overhead_ms);
  m.jitter_amplitude = j.value("jitter_amplitude", m.jitter_amplitude);
  if (j.contains("backend_factor")) {
    m.backend_factor.clear();
    for (auto &[k, v] : j["backend_factor"].items())
      m.backend_factor[k] = v.get<double>();
  }
  if (j.contains("placement_classes")) {
    m.placement_classes.clear();
    for (const auto &c : j["placement_classes"])
      m.placement_classes.push_back({c.at("name").get<std::string>(),
                                     c.at("keywords").get<std::vector<std::string>>(),
                                     c.at("overlap_efficiency").get<double>()});
  }
  if (j.contains("chunk_classes")) {
    m.chunk_classes.clear();
    for (const auto &c : j["chunk_classes"])
      m.chunk_classes.push_back({c.at("name").get<std::string>(),
                                 c.at("keywords").get<std::vector<std::string>>(),
                                 c.at("chunk_count").get<int>()});
  }
  if (j.contains("required_tokens")) {
    m.required_tokens.clear();
    for (auto &[k, v] : j["required_tokens"].items())
      m.required_tokens[k] = v.get<std::vector<std::string>>();
  }
  if (j.contains("exclusive_tokens")) {
    m.exclusive_tokens.clear();
    for (auto &[k, v] : j["exclusive_tokens"].items())
      m.exclusive_tokens[k] = v.get<std::vector<std::string>>();
  }
  if (j.contains("verify_rules")) {
    m.verify_rules.clear();
    for (const auto &r : j["verify_rules"]) {
      SimCostModel::VerifyRule rule;
      rule.kind = r.at("kind").get<std::string>();
      rule.backend = r.value("backend", "any");
      rule.if_token = r.value("if_token", "");
      rule.require_token = r.value("require_token", "");
      if (r.contains("tokens"))
        rule.tokens = r["tokens"].get<std::vector<std::string>>();
      rule.message = r.value("message", "rule failed");
      m.verify_rules.push_back(std::move(rule));
    }
  }
  return m;
}

SimCostModel SimCostModel::from_file(const std::string &path) {
  return from_json(nlohmann::json::parse(read_file(path)));
}

namespace {

bool has(const std::string &source, const std::string &token) {
  return source.find(token) != std::string::npos;
}

bool matches_any(const std::string &intent,
                 const std::vector<std::string> &keywords) {
  std::string lowered = to_lower(intent);
  for (const auto &kw : keywords)
    if (lowered.find(kw) != std::string::npos) return true;
  return false;
}

std::string marker_diagnostic(const std::string &source) {
  static const std::string kStart = "EVOLVE-BLOCK-START";
  static const std::string kEnd = "EVOLVE-BLOCK-END";
  int depth = 0;
  size_t pos = 0;
  while (pos < source.size()) {
    size_t s = source.find(kStart, pos);
    size_t e = source.find(kEnd, pos);
    if (s == std::string::npos && e == std::string::npos) break;
    if (s < e) {
      if (++depth > 1) return "marker rule: nested EVOLVE-BLOCK-START";
      pos = s + kStart.size();
    } else {
      if (--depth < 0) return "marker rule: EVOLVE-BLOCK-END without START";
      pos = e + kEnd.size();
    }
  }
  if (depth != 0) return "marker rule: unbalanced EVOLVE-BLOCK markers";
  return "";
}

}  // namespace

const SimCostModel::PlacementClass &classify_placement(
    const SimCostModel &model, const std::string &intent) {
  for (const auto &c : model.placement_classes)
    if (matches_any(intent, c.keywords)) return c;
  return model.placement_classes.back();
}

const SimCostModel::ChunkClass &classify_chunks(const SimCostModel &model,
                                                const std::string &intent) {
  for (const auto &c : model.chunk_classes)
    if (matches_any(intent, c.keywords)) return c;
  return model.chunk_classes.back();
}

CompileOutcome sim_compile(const ProgramVariant &variant,
                           const SimCostModel &model) {
  CompileOutcome out;
  out.ok = false;

  std::string marker_issue = marker_diagnostic(variant.source);
  if (!marker_issue.empty()) {
    out.diagnostics = marker_issue;
    return out;
  }

  try {
    parse_directive(render_directive(variant.directive));
  } catch (const Error &e) {
    out.diagnostics = std::string("directive rule: ") + e.what();
    return out;
  }

  std::string backend = to_string(variant.directive.backend);
  for (const auto &[other, tokens] : model.exclusive_tokens) {
    if (other == backend) continue;
    for (const auto &t : tokens) {
      if (has(variant.source, t)) {
        out.diagnostics = "backend-mismatch rule: " + backend +
                          " directive but " + other + "-only token '" + t + "'";
        return out;
      }
    }
  }

  auto required = model.required_tokens.find(backend);
  if (required != model.required_tokens.end()) {
    bool any = false;
    for (const auto &t : required->second)
      if (has(variant.source, t)) any = true;
    if (!any) {
      out.diagnostics =
          "token rule: no " + backend + " call sites or setup found";
      return out;
    }
  }

  out.ok = true;
  out.artifact = "sim-" + hex64(fnv_mix(fnv1a64(variant.source),
                                        fnv1a64(render_directive(variant.directive))));
  return out;
}

double sim_latency(const ProgramVariant &variant, const SimCostModel &model) {
  double factor = 1.0;
  auto f = model.backend_factor.find(to_string(variant.directive.backend));
  if (f != model.backend_factor.end()) factor = f->second;

  const auto &placement =
      classify_placement(model, variant.directive.placement.text);
  const auto &chunks = classify_chunks(model, variant.directive.chunk_size.text);

  double latency = model.base_compute_ms +
                   model.comm_volume_ms * factor *
                       (1.0 - placement.overlap_efficiency) +
                   chunks.chunk_count * model.per_chunk_sync_overhead_ms;
  return std::max(latency, 1e-6);
}

CompileOutcome SimHarness::compile(const ProgramVariant &variant) {
  CompileOutcome out = sim_compile(variant, _model);
  if (out.ok) {
    std::lock_guard<std::mutex> lock(_mutex);
    _artifacts[out.artifact] = variant;
  }
  return out;
}

const ProgramVariant &SimHarness::variant_for(const std::string &artifact) {
  std::lock_guard<std::mutex> lock(_mutex);
  auto it = _artifacts.find(artifact);
  if (it == _artifacts.end())
    throw std::invalid_argument("unknown artifact: " + artifact);
  return it->second;
}

RunOutcome SimHarness::run_verify(const std::string &artifact,
                                  const Topology &) {
  const ProgramVariant &variant = variant_for(artifact);
  std::string backend = to_string(variant.directive.backend);

  RunOutcome out;
  out.ok = true;
  for (const auto &rule : _model.verify_rules) {
    if (rule.backend != "any" && rule.backend != backend) continue;
    bool failed = false;
    if (rule.kind == "require") {
      failed = has(variant.source, rule.if_token) &&
               !has(variant.source, rule.require_token);
    } else if (rule.kind == "conflict") {
      failed = has(variant.source, rule.if_token) &&
               has(variant.source, rule.require_token);
    } else if (rule.kind == "require_any") {
      failed = true;
      for (const auto &t : rule.tokens)
        if (has(variant.source, t)) failed = false;
    }
    if (failed) {
      out.ok = false;
      if (!out.diagnostics.empty()) out.diagnostics += "\n";
      out.diagnostics += "verify rule: " + rule.message;
    }
  }
  return out;
}

BenchOutcome SimHarness::run_benchmark(const std::string &artifact,
                                       const Topology &, int reps) {
  const ProgramVariant &variant = variant_for(artifact);
  double base = sim_latency(variant, _model);
  uint64_t h = fnv1a64(variant.source);

  BenchOutcome out;
  out.ok = true;
  for (int rep = 0; rep < std::max(1, reps); ++rep) {
    double u =
        static_cast<double>(fnv_mix(h, static_cast<uint64_t>(rep)) % 10000) /
        10000.0;
    out.latencies_ms.push_back(base * (1.0 + _model.jitter_amplitude * u));
  }
  return out;
}

}  // namespace cofuse
