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

#include "cofuse/agents.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <thread>

#include <httplib.h>

#include "cofuse/util.hpp"

namespace cofuse {

std::string AgentProvider::complete(const CompletionRequest &request) {
  try {
    std::string response = do_complete(request);
    std::lock_guard<std::mutex> lock(_mutex);
    _transcript.push_back({request, response, false});
    return response;
  } catch (const Error &) {
    std::lock_guard<std::mutex> lock(_mutex);
    _transcript.push_back({request, "", true});
    throw;
  }
}

// ---------------------------------------------------------------------------
// Scripted mock

static const char *kErrorSentinel = "<<<PROVIDER_ERROR>>>";

ScriptedMockProvider::ScriptedMockProvider(const nlohmann::json &table) {
  if (table.contains("defaults"))
    for (auto &[role, resp] : table["defaults"].items())
      _defaults[role] = resp.get<std::string>();
  if (table.contains("sequences"))
    for (auto &[role, seq] : table["sequences"].items())
      for (const auto &resp : seq)
        _sequences[role].push_back(resp.get<std::string>());
  if (table.contains("keyed")) {
    for (const auto &entry : table["keyed"]) {
      KeyedEntry k;
      k.role = entry.at("role").get<std::string>();
      if (entry.contains("tags"))
        for (auto &[key, value] : entry["tags"].items())
          k.tags[key] = value.get<std::string>();
      k.response = entry.at("response").get<std::string>();
      _keyed.push_back(std::move(k));
    }
  }
}

ScriptedMockProvider ScriptedMockProvider::from_file(const std::string &path) {
  return ScriptedMockProvider(nlohmann::json::parse(read_file(path)));
}

void ScriptedMockProvider::set_default(const std::string &role,
                                       const std::string &response) {
  _defaults[role] = response;
}

void ScriptedMockProvider::push_sequence(const std::string &role,
                                         const std::string &response) {
  _sequences[role].push_back(response);
}

void ScriptedMockProvider::add_keyed(
    const std::string &role, const std::map<std::string, std::string> &tags,
    const std::string &response) {
  _keyed.push_back({role, tags, response});
}

std::string ScriptedMockProvider::do_complete(const CompletionRequest &request) {
  std::lock_guard<std::mutex> lock(_mutex);
  std::string response;
  bool found = false;
  for (const auto &k : _keyed) {
    if (k.role != request.role) continue;
    bool match = true;
    for (const auto &[key, value] : k.tags) {
      auto it = request.tags.find(key);
      if (it == request.tags.end() || it->second != value) {
        match = false;
        break;
      }
    }
    if (match) {
      response = k.response;
      found = true;
      break;
    }
  }
  if (!found) {
    auto seq = _sequences.find(request.role);
    if (seq != _sequences.end() && _cursor[request.role] < seq->second.size()) {
      response = seq->second[_cursor[request.role]++];
      found = true;
    }
  }
  if (!found) {
    auto def = _defaults.find(request.role);
    if (def != _defaults.end()) {
      response = def->second;
      found = true;
    }
  }
  if (!found)
    throw Error(ErrorCode::ProviderError,
                "no scripted response for role '" + request.role + "'");
  if (response == kErrorSentinel)
    throw Error(ErrorCode::ProviderError, "scripted failure");
  return response;
}

// ---------------------------------------------------------------------------
// Remote provider

RemoteProvider::RemoteProvider(const std::string &endpoint,
                               const std::string &model,
                               const std::string &credential_env, int timeout_s)
    : _endpoint(endpoint),
      _model(model),
      _credential_env(credential_env),
      _timeout_s(timeout_s) {}

std::string RemoteProvider::do_complete(const CompletionRequest &request) {
  // Split "http://host:port/path" into client base and path.
  std::string base = _endpoint;
  std::string path = "/v1/chat/completions";
  size_t scheme = base.find("://");
  size_t slash = scheme == std::string::npos
                     ? base.find('/')
                     : base.find('/', scheme + 3);
  if (slash != std::string::npos) {
    path = base.substr(slash);
    base = base.substr(0, slash);
  }

  httplib::Client client(base);
  client.set_read_timeout(_timeout_s, 0);
  client.set_connection_timeout(std::min(_timeout_s, 30), 0);

  httplib::Headers headers;
  const char *key = _credential_env.empty() ? nullptr
                                            : std::getenv(_credential_env.c_str());
  if (key) headers.emplace("Authorization", std::string("Bearer ") + key);

  nlohmann::json body = {
      {"model", _model},
      {"temperature", request.temperature},
      {"messages",
       nlohmann::json::array(
           {{{"role", "user"}, {"content", request.prompt}}})}};
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw Error(ErrorCode::ProviderError,
                "no response from " + _endpoint);
  if (res->status != 200)
    throw Error(ErrorCode::ProviderError,
                "status " + std::to_string(res->status) + " from " + _endpoint);
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
    throw Error(ErrorCode::ProviderError, "malformed completion payload");
  return j["choices"][0]["message"]["content"].get<std::string>();
}

std::string complete_with_retry(AgentProvider &provider,
                                const CompletionRequest &request,
                                const RetryPolicy &policy) {
  int backoff = policy.backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      return provider.complete(request);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::ProviderError || attempt >= policy.attempts)
        throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
}

// ---------------------------------------------------------------------------
// Hardware context

const char *to_string(HardwareContext::Placement p) {
  switch (p) {
    case HardwareContext::Placement::IntraNode: return "intra_node";
    case HardwareContext::Placement::InterNode: return "inter_node";
    case HardwareContext::Placement::Mixed: return "mixed";
  }
  return "intra_node";
}

HardwareContext extract_hardware_context(const HarnessSpec &spec,
                                         const std::string &arch_table_path) {
  HardwareContext hw;
  hw.rank_count = std::max(1, spec.ranks);
  hw.toolchain_versions = spec.toolchain_versions;
  if (!spec.interconnect.empty()) hw.interconnect = spec.interconnect;

  if (spec.placement_override) {
    std::string p = to_lower(*spec.placement_override);
    if (p == "mixed")
      hw.placement = HardwareContext::Placement::Mixed;
    else if (p == "inter_node")
      hw.placement = HardwareContext::Placement::InterNode;
    else
      hw.placement = HardwareContext::Placement::IntraNode;
  } else {
    // All ranks on one host: intra-node. Any two hosts differing: inter-node.
    bool differs = false;
    for (size_t i = 1; i < spec.hosts.size(); ++i)
      if (spec.hosts[i] != spec.hosts[0]) differs = true;
    hw.placement = differs ? HardwareContext::Placement::InterNode
                           : HardwareContext::Placement::IntraNode;
  }

  std::smatch m;
  static const std::regex arch_re("sm_([0-9]+)");
  std::string arch;
  if (std::regex_search(spec.compile_flags, m, arch_re))
    arch = m[0].str();
  else
    hw.warnings.push_back("no sm_XX architecture code in compile flags");

  if (!arch.empty()) {
    nlohmann::json table;
    try {
      table = nlohmann::json::parse(read_file(arch_table_path));
    } catch (const Error &) {
      hw.warnings.push_back("architecture table unavailable: " + arch_table_path);
      return hw;
    }
    if (table.contains(arch)) {
      const auto &row = table[arch];
      hw.gpu_model = row.value("gpu_model", "unknown");
      if (row.contains("sm_count")) hw.sm_count = row["sm_count"].get<int>();
      hw.hbm_bandwidth = row.value("hbm_bandwidth", "unknown");
      hw.shared_mem_capacity = row.value("shared_mem_capacity", "unknown");
    } else {
      // Degrade to unknown markers rather than inventing numbers.
      hw.warnings.push_back("architecture " + arch + " not in lookup table");
    }
  }
  return hw;
}

std::string render_hardware_context(const HardwareContext &hw) {
  std::string out = "Hardware context:\n";
  out += "  GPU model: " + hw.gpu_model + "\n";
  out += "  SM count: " +
         (hw.sm_count ? std::to_string(*hw.sm_count) : std::string("unknown")) +
         "\n";
  out += "  HBM bandwidth: " + hw.hbm_bandwidth + "\n";
  out += "  Shared memory per SM: " + hw.shared_mem_capacity + "\n";
  out += "  Ranks: " + std::to_string(hw.rank_count) + " (" +
         to_string(hw.placement) + ")\n";
  out += "  Interconnect: " + hw.interconnect + "\n";
  for (const auto &[tool, version] : hw.toolchain_versions)
    out += "  " + tool + ": " + version + "\n";
  for (const auto &w : hw.warnings) out += "  note: " + w + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Knowledge assembly

namespace {

std::string backend_dir(Backend b) {
  return b == Backend::GIN ? "gin" : "lsa";
}

std::string require_file(const std::string &path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::MissingKnowledge, path);
  return read_file(path);
}

}  // namespace

AgentContext assemble_context(Backend backend, const HardwareContext &hw,
                              const std::string &kb_dir) {
  AgentContext ctx;
  ctx.backend = backend;
  ctx.hardware = hw;
  std::string tag = backend_dir(backend);
  std::string bdir = kb_dir + "/" + tag;

  ctx.api_docs.push_back(
      {"interface", tag, require_file(bdir + "/interface.md")});
  ctx.api_docs.push_back(
      {"team_spec", "shared", require_file(kb_dir + "/shared/team_spec.md")});
  ctx.api_docs.push_back({"thread_group_spec", "shared",
                          require_file(kb_dir + "/shared/thread_group_spec.md")});
  ctx.strategy_knowledge = {"strategy_framework", "shared",
                            require_file(kb_dir + "/shared/strategy_framework.md")};

  for (const std::string &line :
       split_lines(require_file(bdir + "/correctness_rules.txt"))) {
    std::string rule = trim(line);
    if (!rule.empty() && rule[0] != '#') ctx.correctness_rules.push_back(rule);
  }

  std::string headers_dir = bdir + "/headers";
  if (std::filesystem::exists(headers_dir)) {
    std::vector<std::string> paths;
    for (const auto &entry : std::filesystem::directory_iterator(headers_dir))
      if (entry.path().extension() == ".h") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    for (const auto &p : paths)
      ctx.headers.push_back(
          {std::filesystem::path(p).filename().string(), tag, read_file(p)});
  }
  if (ctx.headers.empty())
    throw Error(ErrorCode::MissingKnowledge, headers_dir);

  ctx.reference_kernel = {"reference_kernel", tag,
                          require_file(bdir + "/reference_kernel.cu")};
  return ctx;
}

// ---------------------------------------------------------------------------
// Judge

const char *to_string(CascadeStage s) {
  switch (s) {
    case CascadeStage::Compile: return "compile";
    case CascadeStage::Verify: return "verify";
    case CascadeStage::Benchmark: return "benchmark";
  }
  return "compile";
}

nlohmann::ordered_json feedback_to_json(const Feedback &f) {
  nlohmann::ordered_json j;
  j["level"] = to_string(f.level);
  j["strategy_summary"] = f.strategy_summary;
  j["top_improvement"] = f.top_improvement;
  if (f.root_cause) j["root_cause"] = *f.root_cause;
  return j;
}

Feedback feedback_from_json(const nlohmann::ordered_json &j) {
  Feedback f;
  std::string level = j.value("level", "compile");
  f.level = level == "verify"    ? CascadeStage::Verify
            : level == "benchmark" ? CascadeStage::Benchmark
                                   : CascadeStage::Compile;
  f.strategy_summary = j.value("strategy_summary", "");
  f.top_improvement = j.value("top_improvement", "");
  if (j.contains("root_cause")) f.root_cause = j["root_cause"].get<std::string>();
  return f;
}

namespace {

// Pulls "key: value" out of a response line, tolerating leading list markers.
std::optional<std::string> parse_keyed_line(const std::string &line,
                                            const std::string &key) {
  std::string l = trim(line);
  while (!l.empty() && (l[0] == '-' || l[0] == '*')) l = trim(l.substr(1));
  if (to_lower(l).rfind(key + ":", 0) != 0) return std::nullopt;
  return trim(l.substr(key.size() + 1));
}

}  // namespace

Feedback judge(const std::string &source, const std::string &diagnostics,
               CascadeStage level, const AgentContext &ctx,
               AgentProvider &provider, const RetryPolicy &retry) {
  if (level != CascadeStage::Benchmark && trim(diagnostics).empty())
    throw std::invalid_argument("judge needs diagnostics for a failed level");

  std::string prompt = "An evaluation at the " +
                       std::string(to_string(level)) + " level ";
  prompt += level == CascadeStage::Benchmark ? "completed.\n" : "failed.\n";
  prompt += "\nDiagnostics:\n" + diagnostics + "\n";
  prompt += "\nCorrectness rules for " + std::string(to_string(ctx.backend)) +
            ":\n";
  for (const auto &rule : ctx.correctness_rules) prompt += "- " + rule + "\n";
  prompt += "\nCandidate source:\n" + source + "\n";
  prompt +=
      "\nRespond with exactly three lines:\n"
      "strategy: <one-line summary of the strategy the candidate attempts>\n"
      "improvement: <the single most promising next change>\n"
      "root_cause: <root cause of the failure, omit if nothing failed>\n";

  CompletionRequest request{"judge", prompt, 0.0, {}};
  std::string response = complete_with_retry(provider, request, retry);

  Feedback fb;
  fb.level = level;
  for (const std::string &line : split_lines(response)) {
    if (auto v = parse_keyed_line(line, "strategy")) fb.strategy_summary = *v;
    if (auto v = parse_keyed_line(line, "improvement")) fb.top_improvement = *v;
    if (auto v = parse_keyed_line(line, "root_cause")) {
      if (!v->empty()) fb.root_cause = *v;
    }
  }
  if (fb.strategy_summary.empty() && fb.top_improvement.empty()) {
    // Unstructured response: keep it rather than lose the signal.
    fb.strategy_summary = trim(response);
    auto lines = split_lines(response);
    if (!lines.empty()) fb.top_improvement = trim(lines.front());
  }
  return fb;
}

// ---------------------------------------------------------------------------
// Meta-summarizer

MetaRecommendations meta_summarize(const std::vector<CandidateDigestEntry> &recent,
                                   const std::string &scratchpad,
                                   AgentProvider &provider,
                                   const RetryPolicy &retry) {
  MetaRecommendations out;
  if (recent.empty()) {
    out.digest = "no candidates in this window";
    out.scratchpad = scratchpad;
    return out;
  }

  std::string batch;
  for (const auto &e : recent) {
    char line[512];
    std::snprintf(line, sizeof(line), "%s score=%.4f form=%s level=%s %s | %s\n",
                  e.id.c_str(), e.score, e.form.c_str(), e.level.c_str(),
                  e.strategy.c_str(), e.feedback_note.c_str());
    batch += line;
  }

  CompletionRequest digest_req{
      "meta_digest",
      "Summarize this batch of evaluated candidates into a short digest of "
      "what was tried and what the scores show:\n" + batch,
      0.0,
      {}};
  out.digest = complete_with_retry(provider, digest_req, retry);

  CompletionRequest pad_req{
      "meta_scratchpad",
      "Current scratchpad of attempted strategies:\n" + scratchpad +
          "\n\nNew digest:\n" + out.digest +
          "\n\nReturn the updated scratchpad. Keep prior entries; append what "
          "the new digest adds.",
      0.0,
      {}};
  std::string updated = complete_with_retry(provider, pad_req, retry);
  out.scratchpad = trim(updated).empty() ? scratchpad : updated;

  CompletionRequest rec_req{
      "meta_recommend",
      "Scratchpad:\n" + out.scratchpad + "\n\nDigest:\n" + out.digest +
          "\n\nRecommend a ranked list of concrete optimization directions "
          "for the next generation, one per line, best first.",
      0.0,
      {}};
  std::string recs = complete_with_retry(provider, rec_req, retry);
  for (const std::string &line : split_lines(recs)) {
    std::string l = trim(line);
    // Strip "1." / "-" / "*" list markers.
    while (!l.empty() && (std::isdigit(static_cast<unsigned char>(l[0])) ||
                          l[0] == '.' || l[0] == ')' || l[0] == '-' ||
                          l[0] == '*'))
      l = trim(l.substr(1));
    if (!l.empty()) out.recommendations.push_back(l);
  }
  return out;
}

}  // namespace cofuse
