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

#ifndef COFUSE_CONFIG_HPP_
#define COFUSE_CONFIG_HPP_

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "cofuse/agents.hpp"
#include "cofuse/evolve.hpp"
#include "cofuse/fastpath.hpp"
#include "cofuse/sim_harness.hpp"
#include "cofuse/toolchain_harness.hpp"

namespace cofuse {

// One structured document drives a run. Relative paths resolve against the
// config file's directory. Credentials are never part of the document: the
// remote provider reads them from `credential_env` at call time.
struct RunConfig {
  Backend backend = Backend::GIN;
  std::string kb_dir;
  std::string store_path;
  std::string run_dir;

  std::string harness_kind = "sim";  // "sim" | "toolchain"
  std::string sim_model_path;        // empty: built-in defaults
  ToolchainConfig toolchain;
  HarnessSpec harness_spec;
  std::string arch_table_path;

  std::string provider_kind = "mock";  // "mock" | "remote"
  std::string mock_table_path;
  std::string remote_endpoint;
  std::string remote_model;
  std::string credential_env = "COFUSE_API_KEY";
  int remote_timeout_s = 120;
  RetryPolicy retry;

  SearchParams params;
  Topology topology{2, {}};
  int reps = 3;
  uint64_t rng_seed = 0;
  bool use_meta = true;
  int embedding_dim = 256;
  int iteration_cap = 6;
};

// Throws Error(ConfigError) on unknown enum strings, invalid search
// parameters, or referenced input paths that do not exist.
RunConfig parse_run_config(const nlohmann::json &doc,
                           const std::string &base_dir);
RunConfig load_run_config(const std::string &path);

std::unique_ptr<AgentProvider> make_provider(const RunConfig &config);
std::unique_ptr<EvalHarness> make_harness(const RunConfig &config);
HardwareContext hardware_from_config(const RunConfig &config);

Backend backend_from_string(const std::string &name);

// 0 success, 1 candidate/pipeline failure, 2 configuration or
// infrastructure failure.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitPipeline = 1;
inline constexpr int kExitConfig = 2;

int exit_code_for(const Error &e);

}  // namespace cofuse

#endif  // COFUSE_CONFIG_HPP_
