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

#ifndef COFUSE_UTIL_HPP
#define COFUSE_UTIL_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cofuse {

std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &content);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains_token(const std::string &text, const std::string &token);

// Splits on '\n'; a trailing newline does not produce an extra empty line.
std::vector<std::string> split_lines(const std::string &text);
std::string join_lines(const std::vector<std::string> &lines);

uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv_mix(uint64_t a, uint64_t b);

std::string hex64(uint64_t v);
std::string iso8601_now();

struct ShellResult {
  int exit_code = -1;
  bool timed_out = false;
  bool spawn_failed = false;
  std::string output;  // stdout and stderr interleaved
  double wall_ms = 0.0;
};

// Runs `cmd` under /bin/sh -c with a hard deadline; the child is killed on
// timeout.
ShellResult run_shell(const std::string &cmd, int timeout_ms);

}  // namespace cofuse

#endif  // COFUSE_UTIL_HPP
