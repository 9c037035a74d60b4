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

#ifndef COFUSE_DIRECTIVE_HPP
#define COFUSE_DIRECTIVE_HPP

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cofuse/errors.hpp"

namespace cofuse {

// The two device-initiated communication backends a candidate may target.
enum class Backend { GIN, LSA };

// Granularity of the device-side thread group that issues communication.
enum class Issuer { CoopThread, CoopWarp, CoopCta };

enum class IntentDimension { Placement, SyncScope, ChunkSize };

// Free-form natural-language setting for one intent dimension. The text is
// stored trimmed and is never canonicalized beyond that.
struct IntentField {
  IntentDimension dimension;
  std::string text;

  bool operator==(const IntentField &) const = default;
};

struct OptimizationDirective {
  Backend backend = Backend::GIN;
  Issuer issuer = Issuer::CoopCta;
  IntentField placement{IntentDimension::Placement, ""};
  IntentField sync_scope{IntentDimension::SyncScope, ""};
  IntentField chunk_size{IntentDimension::ChunkSize, ""};

  bool operator==(const OptimizationDirective &) const = default;
};

const char *to_string(Backend b);
const char *to_string(Issuer i);

class DirectiveError : public Error {
 public:
  DirectiveError(ErrorCode code, const std::string &key, const std::string &detail)
      : Error(code, "'" + key + "' " + detail), _key(key) {}

  const std::string &key() const { return _key; }

 private:
  std::string _key;
};

// Extracts and validates the first optimization_directive block found in
// `text`. Keys may appear in any order; '#' starts a comment; surrounding
// prose is ignored. Throws DirectiveError with code MissingKey, InvalidEnum
// or EmptyIntent.
OptimizationDirective parse_directive(const std::string &text);

// Renders the canonical block form. parse_directive(render_directive(d)) == d.
std::string render_directive(const OptimizationDirective &d);

// The six concrete (backend, issuer) combinations in a fixed deterministic
// order: GIN before LSA, issuers from thread to CTA.
std::vector<std::pair<Backend, Issuer>> enumerate_concrete_space();

// The maximally conservative starting point: CTA-level issue, fully deferred
// placement, global synchronization, coarse chunks.
OptimizationDirective conservative_directive(Backend b);

void to_json(nlohmann::ordered_json &j, const OptimizationDirective &d);
void from_json(const nlohmann::ordered_json &j, OptimizationDirective &d);

}  // namespace cofuse

#endif  // COFUSE_DIRECTIVE_HPP
