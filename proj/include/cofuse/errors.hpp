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

#ifndef COFUSE_ERRORS_HPP
#define COFUSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cofuse {

enum class ErrorCode {
  MissingKey,
  InvalidEnum,
  EmptyIntent,
  UnbalancedCall,
  MissingKnowledge,
  ProviderError,
  StageExhausted,
  NoCommunication,
  AnnotationInvalid,
  HarnessUnavailable,
  MutationRejected,
  FrozenRegionEdit,
  MalformedPatch,
  DuplicateId,
  EmptyStore,
  ZeroVector,
  DimensionMismatch,
  InvalidWeights,
  EmptyIsland,
  NegativeLatency,
  ConfigError,
  IoError,
};

const char *error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        _code(code) {}

  ErrorCode code() const { return _code; }

 private:
  ErrorCode _code;
};

}  // namespace cofuse

#endif  // COFUSE_ERRORS_HPP
