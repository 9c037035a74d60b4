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

#ifndef COFUSE_AGENTS_HPP
#define COFUSE_AGENTS_HPP

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cofuse/directive.hpp"
#include "cofuse/errors.hpp"

namespace cofuse {

struct CompletionRequest {
  std::string role;  // stage_a, stage_b, annotate, judge, mutate, reseed,
                     // meta_digest, meta_scratchpad, meta_recommend
  std::string prompt;
  double temperature = 0.0;
  std::map<std::string, std::string> tags;  // island, generation, form, ...
};

struct TranscriptEntry {
  CompletionRequest request;
  std::string response;
  bool failed = false;
};

class AgentProvider {
 public:
  virtual ~AgentProvider() = default;

  // Records the exchange in the transcript; throws Error(ProviderError) on
  // failure.
  std::string complete(const CompletionRequest &request);

  const std::vector<TranscriptEntry> &transcript() const { return _transcript; }

 protected:
  virtual std::string do_complete(const CompletionRequest &request) = 0;

 private:
  std::vector<TranscriptEntry> _transcript;
  std::mutex _mutex;
};

// Deterministic provider replaying a configured response table. Resolution
// order per request: a keyed entry whose tags all match, then the next
// per-role sequence entry, then the per-role default. A response equal to
// "<<<PROVIDER_ERROR>>>" raises a provider failure (for retry tests).
class ScriptedMockProvider : public AgentProvider {
 public:
  ScriptedMockProvider() = default;
  explicit ScriptedMockProvider(const nlohmann::json &table);

  static ScriptedMockProvider from_file(const std::string &path);

  void set_default(const std::string &role, const std::string &response);
  void push_sequence(const std::string &role, const std::string &response);
  void add_keyed(const std::string &role,
                 const std::map<std::string, std::string> &tags,
                 const std::string &response);

 protected:
  std::string do_complete(const CompletionRequest &request) override;

 private:
  struct KeyedEntry {
    std::string role;
    std::map<std::string, std::string> tags;
    std::string response;
  };
  std::map<std::string, std::string> _defaults;
  std::map<std::string, std::vector<std::string>> _sequences;
  std::map<std::string, size_t> _cursor;
  std::vector<KeyedEntry> _keyed;
  std::mutex _mutex;
};

// Remote chat-completion endpoint. The credential is read from the named
// environment variable at call time and never stored in config files.
class RemoteProvider : public AgentProvider {
 public:
  RemoteProvider(const std::string &endpoint, const std::string &model,
                 const std::string &credential_env, int timeout_s = 120);

 protected:
  std::string do_complete(const CompletionRequest &request) override;

 private:
  std::string _endpoint;
  std::string _model;
  std::string _credential_env;
  int _timeout_s;
};

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 250;  // doubled after each failed attempt
};

std::string complete_with_retry(AgentProvider &provider,
                                const CompletionRequest &request,
                                const RetryPolicy &policy = {});

// ---------------------------------------------------------------------------
// Hardware context

struct HardwareContext {
  std::string gpu_model = "unknown";
  std::optional<int> sm_count;
  std::string hbm_bandwidth = "unknown";        // value plus units
  std::string shared_mem_capacity = "unknown";  // value plus units
  int rank_count = 1;
  enum class Placement { IntraNode, InterNode, Mixed };
  Placement placement = Placement::IntraNode;
  std::string interconnect = "unknown";
  std::map<std::string, std::string> toolchain_versions;
  std::vector<std::string> warnings;
};

const char *to_string(HardwareContext::Placement p);

// What the harness config exposes about the execution environment.
struct HarnessSpec {
  std::string compile_flags;  // scanned for an sm_XX architecture code
  int ranks = 1;
  std::vector<std::string> hosts;
  std::string interconnect;
  std::map<std::string, std::string> toolchain_versions;
  std::optional<std::string> placement_override;  // "mixed" etc.
};

// Derives the hardware context from the harness spec plus a lookup table of
// datasheet values keyed by sm architecture code. Unknown architectures
// degrade to explicit "unknown" markers with a warning; nothing is invented.
HardwareContext extract_hardware_context(const HarnessSpec &spec,
                                         const std::string &arch_table_path);

std::string render_hardware_context(const HardwareContext &hw);

// ---------------------------------------------------------------------------
// Knowledge assembly

struct DocBlob {
  std::string name;
  std::string backend_tag;  // "gin", "lsa" or "shared"
  std::string content;
};

struct AgentContext {
  Backend backend = Backend::GIN;
  std::vector<DocBlob> api_docs;  // interface + team + thread-group specs
  DocBlob strategy_knowledge;
  std::vector<std::string> correctness_rules;
  std::vector<DocBlob> headers;
  DocBlob reference_kernel;
  HardwareContext hardware;
};

// Loads the per-backend knowledge pack from `kb_dir`. Throws
// Error(MissingKnowledge) naming the first absent required file.
AgentContext assemble_context(Backend backend, const HardwareContext &hw,
                              const std::string &kb_dir);

// ---------------------------------------------------------------------------
// Judge and meta-summarizer

enum class CascadeStage { Compile, Verify, Benchmark };

const char *to_string(CascadeStage s);

struct Feedback {
  CascadeStage level = CascadeStage::Compile;
  std::string strategy_summary;
  std::string top_improvement;
  std::optional<std::string> root_cause;
};

nlohmann::ordered_json feedback_to_json(const Feedback &f);
Feedback feedback_from_json(const nlohmann::ordered_json &j);

// Asks the provider to analyze an evaluation outcome. Diagnostics must be
// nonempty for compile/verify failures.
Feedback judge(const std::string &source, const std::string &diagnostics,
               CascadeStage level, const AgentContext &ctx,
               AgentProvider &provider, const RetryPolicy &retry = {});

struct CandidateDigestEntry {
  std::string id;
  double score = 0.0;
  std::string form;
  std::string level;
  std::string strategy;
  std::string feedback_note;
};

struct MetaRecommendations {
  std::string digest;
  std::string scratchpad;
  std::vector<std::string> recommendations;  // ranked, best first
};

// Three-step pipeline: digest the recent batch, update the scratchpad,
// produce ranked recommendations. An empty batch short-circuits without
// provider calls. The scratchpad is never silently dropped: an empty update
// keeps the previous content.
MetaRecommendations meta_summarize(const std::vector<CandidateDigestEntry> &recent,
                                   const std::string &scratchpad,
                                   AgentProvider &provider,
                                   const RetryPolicy &retry = {});

}  // namespace cofuse

#endif  // COFUSE_AGENTS_HPP
