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

#ifndef COFUSE_TOOLCHAIN_HARNESS_HPP_
#define COFUSE_TOOLCHAIN_HARNESS_HPP_

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cofuse/cascade.hpp"

namespace cofuse {

// Command templates use {source}, {output}, {artifact}, {ranks}, {hosts}
// placeholders. Benchmark latencies are parsed from launcher stdout lines of
// the form "latency_ms: <number>"; each launch contributes its last such line.
struct ToolchainConfig {
  std::string compile_template;
  std::string run_template;
  std::string bench_template;  // empty: reuse run_template
  std::vector<std::string> env_passthrough;
  std::string work_dir = ".";
  int timeout_s = 300;
  std::string device_key = "default";  // exclusive-device lease key
};

class ToolchainHarness : public EvalHarness {
 public:
  explicit ToolchainHarness(ToolchainConfig config);

  CompileOutcome compile(const ProgramVariant &variant) override;
  RunOutcome run_verify(const std::string &artifact,
                        const Topology &topology) override;
  BenchOutcome run_benchmark(const std::string &artifact,
                             const Topology &topology, int reps) override;

 private:
  struct Attempt {
    int exit_code = -1;
    bool timed_out = false;
    bool infrastructure = false;
    std::string output;
  };
  Attempt launch(const std::string &command);
  std::string expand(const std::string &tmpl,
                     const std::map<std::string, std::string> &vars) const;

  ToolchainConfig _config;
  int _compile_seq = 0;
  std::mutex _mutex;
};

}  // namespace cofuse

#endif  // COFUSE_TOOLCHAIN_HARNESS_HPP_
