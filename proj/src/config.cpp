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

#include "cofuse/config.hpp"

#include <filesystem>

#include "cofuse/util.hpp"

namespace cofuse {

namespace fs = std::filesystem;

Backend backend_from_string(const std::string &name) {
  std::string n = to_lower(trim(name));
  if (n == "gin") return Backend::GIN;
  if (n == "lsa") return Backend::LSA;
  throw Error(ErrorCode::ConfigError, "unknown backend '" + name + "'");
}

namespace {

std::string resolve(const std::string &base_dir, const std::string &path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

void require_exists(const std::string &path, const std::string &what) {
  if (!fs::exists(path))
    throw Error(ErrorCode::ConfigError, what + " does not exist: " + path);
}

template <typename T>
T field_or(const nlohmann::json &j, const char *key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::ConfigError,
                std::string("field '") + key + "': " + e.what());
  }
}

void parse_search(const nlohmann::json &j, RunConfig &config) {
  config.params.k = field_or(j, "islands", config.params.k);
  config.params.G = field_or(j, "generations", config.params.G);
  config.params.alpha = field_or(j, "alpha", config.params.alpha);
  config.params.G_m = field_or(j, "migration_interval", config.params.G_m);
  config.params.migration_k =
      field_or(j, "migration_k", config.params.migration_k);
  config.params.beta = field_or(j, "beta", config.params.beta);
  config.params.tau_high = field_or(j, "tau_high", config.params.tau_high);
  config.params.tau_low = field_or(j, "tau_low", config.params.tau_low);
  config.params.novelty_threshold =
      field_or(j, "novelty_threshold", config.params.novelty_threshold);
  config.params.capacity = field_or(j, "capacity", config.params.capacity);
  auto weights = [&](const char *key, FormWeights &w) {
    if (!j.contains(key)) return;
    const auto &e = j.at(key);
    w.diff = field_or(e, "diff", w.diff);
    w.rewrite = field_or(e, "rewrite", w.rewrite);
    w.crossover = field_or(e, "crossover", w.crossover);
  };
  weights("explore_weights", config.params.explore_weights);
  weights("exploit_weights", config.params.exploit_weights);
  config.reps = field_or(j, "reps", config.reps);
  config.use_meta = field_or(j, "use_meta", config.use_meta);
}

void parse_harness(const nlohmann::json &j, const std::string &base_dir,
                   RunConfig &config) {
  config.harness_kind = to_lower(field_or<std::string>(j, "kind", "sim"));
  if (config.harness_kind != "sim" && config.harness_kind != "toolchain")
    throw Error(ErrorCode::ConfigError,
                "unknown harness kind '" + config.harness_kind + "'");

  config.sim_model_path = resolve(base_dir, field_or<std::string>(j, "model", ""));

  config.toolchain.compile_template =
      field_or<std::string>(j, "compile_template", "");
  config.toolchain.run_template = field_or<std::string>(j, "run_template", "");
  config.toolchain.bench_template =
      field_or<std::string>(j, "bench_template", "");
  config.toolchain.env_passthrough = field_or<std::vector<std::string>>(
      j, "env_passthrough", {});
  config.toolchain.work_dir =
      resolve(base_dir, field_or<std::string>(j, "work_dir", "."));
  config.toolchain.timeout_s = field_or(j, "timeout_s", 300);
  config.toolchain.device_key =
      field_or<std::string>(j, "device_key", "default");

  config.topology.ranks = field_or(j, "ranks", config.topology.ranks);
  config.topology.hosts =
      field_or<std::vector<std::string>>(j, "hosts", config.topology.hosts);

  config.harness_spec.compile_flags =
      field_or<std::string>(j, "compile_flags",
                            config.toolchain.compile_template);
  config.harness_spec.ranks = config.topology.ranks;
  config.harness_spec.hosts = config.topology.hosts;
  config.harness_spec.interconnect =
      field_or<std::string>(j, "interconnect", "");
  config.harness_spec.toolchain_versions =
      field_or<std::map<std::string, std::string>>(j, "toolchain_versions", {});
  if (j.contains("placement"))
    config.harness_spec.placement_override = j.at("placement").get<std::string>();

  if (config.harness_kind == "toolchain") {
    if (config.toolchain.compile_template.empty() ||
        config.toolchain.run_template.empty())
      throw Error(ErrorCode::ConfigError,
                  "toolchain harness needs compile_template and run_template");
  }
}

void parse_provider(const nlohmann::json &j, const std::string &base_dir,
                    RunConfig &config) {
  config.provider_kind = to_lower(field_or<std::string>(j, "kind", "mock"));
  if (config.provider_kind == "mock") {
    config.mock_table_path =
        resolve(base_dir, field_or<std::string>(j, "table", ""));
    if (config.mock_table_path.empty())
      throw Error(ErrorCode::ConfigError, "mock provider needs a 'table' path");
  } else if (config.provider_kind == "remote") {
    config.remote_endpoint = field_or<std::string>(j, "endpoint", "");
    config.remote_model = field_or<std::string>(j, "model", "");
    config.credential_env =
        field_or<std::string>(j, "credential_env", config.credential_env);
    config.remote_timeout_s = field_or(j, "timeout_s", config.remote_timeout_s);
    if (config.remote_endpoint.empty() || config.remote_model.empty())
      throw Error(ErrorCode::ConfigError,
                  "remote provider needs 'endpoint' and 'model'");
    // The document may name the variable, never hold the secret itself.
    if (j.contains("credential") || j.contains("api_key") || j.contains("token"))
      throw Error(ErrorCode::ConfigError,
                  "credentials belong in the environment, not the config file");
  } else {
    throw Error(ErrorCode::ConfigError,
                "unknown provider kind '" + config.provider_kind + "'");
  }
  config.retry.attempts = field_or(j, "retry_attempts", config.retry.attempts);
  config.retry.backoff_ms = field_or(j, "retry_backoff_ms", config.retry.backoff_ms);
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json &doc,
                           const std::string &base_dir) {
  if (!doc.is_object())
    throw Error(ErrorCode::ConfigError, "config document must be an object");

  RunConfig config;
  config.backend = backend_from_string(field_or<std::string>(doc, "backend", "GIN"));
  config.kb_dir = resolve(base_dir, field_or<std::string>(doc, "kb_dir", ""));
  config.store_path =
      resolve(base_dir, field_or<std::string>(doc, "store_path", ""));
  config.run_dir = resolve(base_dir, field_or<std::string>(doc, "run_dir", ""));
  config.arch_table_path =
      resolve(base_dir, field_or<std::string>(doc, "arch_table", ""));
  config.rng_seed = field_or<uint64_t>(doc, "rng_seed", 0);
  config.embedding_dim = field_or(doc, "embedding_dim", config.embedding_dim);
  config.iteration_cap = field_or(doc, "iteration_cap", config.iteration_cap);

  if (doc.contains("harness")) parse_harness(doc.at("harness"), base_dir, config);
  if (doc.contains("provider"))
    parse_provider(doc.at("provider"), base_dir, config);
  else
    throw Error(ErrorCode::ConfigError, "config needs a 'provider' section");
  if (doc.contains("search")) parse_search(doc.at("search"), config);

  if (config.kb_dir.empty())
    throw Error(ErrorCode::ConfigError, "config needs 'kb_dir'");
  require_exists(config.kb_dir, "kb_dir");
  if (config.provider_kind == "mock")
    require_exists(config.mock_table_path, "provider table");
  if (!config.sim_model_path.empty())
    require_exists(config.sim_model_path, "sim model");
  if (!config.arch_table_path.empty())
    require_exists(config.arch_table_path, "arch table");

  try {
    config.params.validate();
  } catch (const Error &e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (config.reps < 1)
    throw Error(ErrorCode::ConfigError, "reps must be >= 1");
  if (config.embedding_dim < 1)
    throw Error(ErrorCode::ConfigError, "embedding_dim must be >= 1");
  if (config.iteration_cap < 1)
    throw Error(ErrorCode::ConfigError, "iteration_cap must be >= 1");
  return config;
}

RunConfig load_run_config(const std::string &path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::ConfigError,
                "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, fs::path(path).parent_path().string());
}

std::unique_ptr<AgentProvider> make_provider(const RunConfig &config) {
  if (config.provider_kind == "mock")
    return std::make_unique<ScriptedMockProvider>(
        nlohmann::json::parse(read_file(config.mock_table_path)));
  return std::make_unique<RemoteProvider>(config.remote_endpoint,
                                          config.remote_model,
                                          config.credential_env,
                                          config.remote_timeout_s);
}

std::unique_ptr<EvalHarness> make_harness(const RunConfig &config) {
  if (config.harness_kind == "toolchain")
    return std::make_unique<ToolchainHarness>(config.toolchain);
  SimCostModel model = config.sim_model_path.empty()
                           ? SimCostModel::defaults()
                           : SimCostModel::from_file(config.sim_model_path);
  return std::make_unique<SimHarness>(std::move(model));
}

HardwareContext hardware_from_config(const RunConfig &config) {
  return extract_hardware_context(config.harness_spec, config.arch_table_path);
}

int exit_code_for(const Error &e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::MissingKnowledge:
    case ErrorCode::HarnessUnavailable:
    case ErrorCode::IoError:
      return kExitConfig;
    default:
      return kExitPipeline;
  }
}

}  // namespace cofuse
