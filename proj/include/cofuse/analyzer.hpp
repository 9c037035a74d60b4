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
//
// Lexical scanner for host-driven CUDA+NCCL programs. This is deliberately
// not a C++ parser: it recognizes the call shapes that matter for the
// communication graph (collectives, p2p groups, allocations, kernel
// launches, stream syncs) and ignores everything else.

#ifndef COFUSE_ANALYZER_HPP
#define COFUSE_ANALYZER_HPP

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cofuse/errors.hpp"

namespace cofuse {

enum class ConstructKind {
  CollectiveCall,
  SendRecvCall,
  Allocation,
  KernelLaunch,
  StreamSync,
};

struct SourceConstruct {
  ConstructKind kind;
  std::string name;
  // Line where the argument list closes; multi-line calls are attributed to
  // their final line in every report.
  int line = 0;
  // Line holding the name token itself.
  int name_line = 0;
  std::vector<std::string> args;
  std::string launch_config;  // kernel launches only
  bool in_group = false;      // between ncclGroupStart and ncclGroupEnd
  bool conditional = false;   // lexically inside an if/else region
  std::string enclosing_function;
};

struct ScannerConfig {
  std::vector<std::string> collective_prefixes{"nccl"};
  std::set<std::string> allocator_names{"cudaMalloc", "cudaMallocAsync",
                                        "cudaMallocManaged", "ncclMemAlloc"};
  std::set<std::string> compatible_allocators{"ncclMemAlloc"};
};

struct ScanResult {
  std::vector<SourceConstruct> constructs;
  struct FunctionSpan {
    std::string name;
    int first_line = 0;
    int last_line = 0;
  };
  std::vector<FunctionSpan> functions;
  std::vector<std::string> warnings;
};

class ScanError : public Error {
 public:
  ScanError(const std::string &name, int line)
      : Error(ErrorCode::UnbalancedCall,
              "argument list of '" + name + "' opened at line " +
                  std::to_string(line) + " never closes"),
        _line(line) {}

  int line() const { return _line; }

 private:
  int _line;
};

ScanResult scan_source(const std::string &source,
                       const ScannerConfig &config = {});

struct AllocSite {
  std::string allocator;
  int line = 0;
};

struct KernelRef {
  std::string kernel;
  int line = 0;
};

struct BufferInfo {
  std::string name;
  std::optional<AllocSite> alloc_site;
  bool needs_migration = false;
  std::vector<KernelRef> producers;  // launches before the call, in order
  std::vector<KernelRef> consumers;  // launches after the call, in order
};

struct CommNode {
  std::string op;
  int line = 0;
  std::string stream;
  std::string count_expr;
  std::string datatype;
  BufferInfo send;
  BufferInfo recv;
  std::string transform_hint;
  bool conditional = false;
  std::string function;
};

struct ExecStep {
  enum class Role { Compute, Communicate };
  std::string name;
  Role role;
  std::string function;
};

struct CommGraph {
  std::vector<CommNode> nodes;
  std::vector<ExecStep> execution_order;
  std::vector<std::pair<int, int>> ordering_edges;  // node index pairs, i < j
  std::vector<std::string> warnings;
};

CommGraph build_comm_graph(const ScanResult &scan,
                           const ScannerConfig &config = {});

// Human-readable report: the Communication Graph section followed by the
// Execution Order section. Stable output for fixed input.
std::string render_graph(const CommGraph &graph);

nlohmann::ordered_json graph_to_json(const CommGraph &graph);

}  // namespace cofuse

#endif  // COFUSE_ANALYZER_HPP
