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

#include "cofuse/toolchain_harness.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cofuse/util.hpp"

namespace cofuse {

namespace {

// One mutex per exclusive device key; concurrent cascade_eval calls on the
// same device serialize here.
std::mutex &device_lease(const std::string &key) {
  static std::mutex registry_mutex;
  static std::map<std::string, std::unique_ptr<std::mutex>> registry;
  std::lock_guard<std::mutex> lock(registry_mutex);
  auto &slot = registry[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string join_hosts(const std::vector<std::string> &hosts) {
  std::string out;
  for (const auto &h : hosts) {
    if (!out.empty()) out += ",";
    out += h;
  }
  return out.empty() ? "localhost" : out;
}

}  // namespace

ToolchainHarness::ToolchainHarness(ToolchainConfig config)
    : _config(std::move(config)) {
  if (_config.bench_template.empty()) _config.bench_template = _config.run_template;
  std::filesystem::create_directories(_config.work_dir);
}

std::string ToolchainHarness::expand(
    const std::string &tmpl, const std::map<std::string, std::string> &vars) const {
  std::string out;
  for (const auto &name : _config.env_passthrough) {
    const char *value = std::getenv(name.c_str());
    if (value) out += name + "='" + value + "' ";
  }
  std::string body = tmpl;
  for (const auto &[key, value] : vars) {
    std::string needle = "{" + key + "}";
    size_t pos;
    while ((pos = body.find(needle)) != std::string::npos)
      body.replace(pos, needle.size(), value);
  }
  return out + body;
}

ToolchainHarness::Attempt ToolchainHarness::launch(const std::string &command) {
  Attempt attempt;
  for (int tries = 0; tries < 2; ++tries) {
    ShellResult r = run_shell(command, _config.timeout_s * 1000);
    attempt.exit_code = r.exit_code;
    attempt.timed_out = r.timed_out;
    attempt.output = r.output;
    // Exit 127 (command not found) and spawn failures are infrastructure
    // problems, not candidate failures; retry once then surface.
    attempt.infrastructure = r.spawn_failed || (!r.timed_out && r.exit_code == 127);
    if (!attempt.infrastructure) return attempt;
  }
  throw Error(ErrorCode::HarnessUnavailable,
              "toolchain command failed to launch: " + command);
}

CompileOutcome ToolchainHarness::compile(const ProgramVariant &variant) {
  std::string source_path, output_path;
  {
    std::lock_guard<std::mutex> lock(_mutex);
    int seq = _compile_seq++;
    source_path = _config.work_dir + "/candidate_" + std::to_string(seq) + ".cu";
    output_path = _config.work_dir + "/candidate_" + std::to_string(seq) + ".bin";
  }
  write_file(source_path, variant.source);

  std::string command = expand(_config.compile_template,
                               {{"source", source_path},
                                {"output", output_path}});
  Attempt attempt = launch(command);

  CompileOutcome out;
  out.ok = !attempt.timed_out && attempt.exit_code == 0;
  if (out.ok)
    out.artifact = output_path;
  else
    out.diagnostics = attempt.timed_out
                          ? "compile timeout after " +
                                std::to_string(_config.timeout_s) + " s"
                          : attempt.output;
  return out;
}

RunOutcome ToolchainHarness::run_verify(const std::string &artifact,
                                        const Topology &topology) {
  std::string command = expand(_config.run_template,
                               {{"artifact", artifact},
                                {"ranks", std::to_string(topology.ranks)},
                                {"hosts", join_hosts(topology.hosts)}});
  std::lock_guard<std::mutex> lease(device_lease(_config.device_key));
  Attempt attempt = launch(command);

  RunOutcome out;
  out.ok = !attempt.timed_out && attempt.exit_code == 0;
  out.timed_out = attempt.timed_out;
  if (!out.ok)
    out.diagnostics = attempt.timed_out
                          ? "verify timeout after " +
                                std::to_string(_config.timeout_s) +
                                " s (possible collective deadlock)"
                          : attempt.output;
  return out;
}

BenchOutcome ToolchainHarness::run_benchmark(const std::string &artifact,
                                             const Topology &topology,
                                             int reps) {
  std::string command = expand(_config.bench_template,
                               {{"artifact", artifact},
                                {"ranks", std::to_string(topology.ranks)},
                                {"hosts", join_hosts(topology.hosts)}});
  std::lock_guard<std::mutex> lease(device_lease(_config.device_key));

  BenchOutcome out;
  out.ok = true;
  for (int rep = 0; rep < std::max(1, reps); ++rep) {
    Attempt attempt = launch(command);
    if (attempt.timed_out || attempt.exit_code != 0) {
      out.ok = false;
      out.timed_out = attempt.timed_out;
      out.diagnostics = attempt.timed_out
                            ? "benchmark timeout after " +
                                  std::to_string(_config.timeout_s) + " s"
                            : attempt.output;
      return out;
    }
    // Last "latency_ms: <number>" line of this launch.
    double latency = -1.0;
    for (const std::string &line : split_lines(attempt.output)) {
      std::string l = trim(line);
      if (l.rfind("latency_ms:", 0) == 0) {
        try {
          latency = std::stod(trim(l.substr(11)));
        } catch (const std::exception &) {
        }
      }
    }
    if (latency < 0.0) {
      out.ok = false;
      out.diagnostics = "benchmark output carried no latency_ms line:\n" +
                        attempt.output;
      return out;
    }
    out.latencies_ms.push_back(latency);
  }
  return out;
}

}  // namespace cofuse
