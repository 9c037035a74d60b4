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

#include "cofuse/directive.hpp"

#include <map>
#include <optional>

#include "cofuse/util.hpp"

namespace cofuse {

const char *to_string(Backend b) {
  return b == Backend::GIN ? "GIN" : "LSA";
}

const char *to_string(Issuer i) {
  switch (i) {
    case Issuer::CoopThread: return "ncclCoopThread";
    case Issuer::CoopWarp: return "ncclCoopWarp";
    case Issuer::CoopCta: return "ncclCoopCta";
  }
  return "ncclCoopCta";
}

namespace {

std::optional<Backend> backend_from_token(const std::string &tok) {
  std::string t = to_lower(tok);
  if (t == "gin") return Backend::GIN;
  if (t == "lsa") return Backend::LSA;
  return std::nullopt;
}

std::optional<Issuer> issuer_from_token(const std::string &tok) {
  std::string t = to_lower(tok);
  if (t == "ncclcoopthread" || t == "coopthread") return Issuer::CoopThread;
  if (t == "ncclcoopwarp" || t == "coopwarp") return Issuer::CoopWarp;
  if (t == "ncclcoopcta" || t == "coopcta") return Issuer::CoopCta;
  return std::nullopt;
}

// Strips a single leading "intent:" tag, which the canonical rendering adds.
std::string strip_intent_tag(const std::string &value) {
  std::string v = trim(value);
  const std::string tag = "intent:";
  if (to_lower(v).rfind(tag, 0) == 0) v = trim(v.substr(tag.size()));
  return v;
}

}  // namespace

OptimizationDirective parse_directive(const std::string &text) {
  static const char *kRootKey = "optimization_directive:";
  std::map<std::string, std::string> values;

  bool in_block = false;
  for (const std::string &raw : split_lines(text)) {
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (!in_block) {
      if (line == kRootKey) in_block = true;
      continue;
    }
    size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = trim(line.substr(0, colon));
    std::string value = trim(line.substr(colon + 1));
    if (key == "backend" || key == "issuer" || key == "placement" ||
        key == "sync_scope" || key == "chunk_size") {
      if (values.count(key)) break;  // a repeated key starts a new block
      values[key] = value;
      if (values.size() == 5) break;
    }
  }

  static const char *kKeys[] = {"backend", "issuer", "placement", "sync_scope",
                                "chunk_size"};
  for (const char *key : kKeys) {
    if (!values.count(key))
      throw DirectiveError(ErrorCode::MissingKey, key, "is required");
  }

  OptimizationDirective d;
  auto backend = backend_from_token(values["backend"]);
  if (!backend)
    throw DirectiveError(ErrorCode::InvalidEnum, "backend",
                         "does not name a backend: " + values["backend"]);
  d.backend = *backend;

  auto issuer = issuer_from_token(values["issuer"]);
  if (!issuer)
    throw DirectiveError(ErrorCode::InvalidEnum, "issuer",
                         "does not name an issuer granularity: " + values["issuer"]);
  d.issuer = *issuer;

  struct { const char *key; IntentField *field; } intents[] = {
      {"placement", &d.placement},
      {"sync_scope", &d.sync_scope},
      {"chunk_size", &d.chunk_size},
  };
  for (auto &it : intents) {
    std::string v = strip_intent_tag(values[it.key]);
    if (v.empty())
      throw DirectiveError(ErrorCode::EmptyIntent, it.key, "has an empty intent");
    it.field->text = v;
  }
  return d;
}

std::string render_directive(const OptimizationDirective &d) {
  std::string out = "optimization_directive:\n";
  out += "  backend:    " + std::string(to_string(d.backend)) + "\n";
  out += "  issuer:     " + std::string(to_string(d.issuer)) + "\n";
  out += "  placement:  intent: " + d.placement.text + "\n";
  out += "  sync_scope: intent: " + d.sync_scope.text + "\n";
  out += "  chunk_size: intent: " + d.chunk_size.text + "\n";
  return out;
}

std::vector<std::pair<Backend, Issuer>> enumerate_concrete_space() {
  std::vector<std::pair<Backend, Issuer>> out;
  for (Backend b : {Backend::GIN, Backend::LSA})
    for (Issuer i : {Issuer::CoopThread, Issuer::CoopWarp, Issuer::CoopCta})
      out.emplace_back(b, i);
  return out;
}

OptimizationDirective conservative_directive(Backend b) {
  OptimizationDirective d;
  d.backend = b;
  d.issuer = Issuer::CoopCta;
  d.placement.text = "fully deferred";
  d.sync_scope.text = "global";
  d.chunk_size.text = "coarse";
  return d;
}

void to_json(nlohmann::ordered_json &j, const OptimizationDirective &d) {
  j = nlohmann::ordered_json{{"backend", to_string(d.backend)},
                             {"issuer", to_string(d.issuer)},
                             {"placement", d.placement.text},
                             {"sync_scope", d.sync_scope.text},
                             {"chunk_size", d.chunk_size.text}};
}

void from_json(const nlohmann::ordered_json &j, OptimizationDirective &d) {
  auto backend = backend_from_token(j.at("backend").get<std::string>());
  auto issuer = issuer_from_token(j.at("issuer").get<std::string>());
  if (!backend)
    throw DirectiveError(ErrorCode::InvalidEnum, "backend", "bad stored value");
  if (!issuer)
    throw DirectiveError(ErrorCode::InvalidEnum, "issuer", "bad stored value");
  d.backend = *backend;
  d.issuer = *issuer;
  d.placement.text = j.at("placement").get<std::string>();
  d.sync_scope.text = j.at("sync_scope").get<std::string>();
  d.chunk_size.text = j.at("chunk_size").get<std::string>();
}

}  // namespace cofuse
