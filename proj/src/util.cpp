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

#include "cofuse/util.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "cofuse/errors.hpp"

namespace cofuse {

const char *error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::InvalidEnum: return "InvalidEnum";
    case ErrorCode::EmptyIntent: return "EmptyIntent";
    case ErrorCode::UnbalancedCall: return "UnbalancedCall";
    case ErrorCode::MissingKnowledge: return "MissingKnowledge";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::StageExhausted: return "StageExhausted";
    case ErrorCode::NoCommunication: return "NoCommunication";
    case ErrorCode::AnnotationInvalid: return "AnnotationInvalid";
    case ErrorCode::HarnessUnavailable: return "HarnessUnavailable";
    case ErrorCode::MutationRejected: return "MutationRejected";
    case ErrorCode::FrozenRegionEdit: return "FrozenRegionEdit";
    case ErrorCode::MalformedPatch: return "MalformedPatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::EmptyIsland: return "EmptyIsland";
    case ErrorCode::NegativeLatency: return "NegativeLatency";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains_token(const std::string &text, const std::string &token) {
  return text.find(token) != std::string::npos;
}

std::vector<std::string> split_lines(const std::string &text) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string join_lines(const std::vector<std::string> &lines) {
  std::string out;
  for (const auto &l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

uint64_t fnv1a64(std::string_view data, uint64_t seed) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv_mix(uint64_t a, uint64_t b) {
  char buf[16];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((a >> (8 * i)) & 0xff);
  for (int i = 0; i < 8; ++i) buf[8 + i] = static_cast<char>((b >> (8 * i)) & 0xff);
  return fnv1a64(std::string_view(buf, 16));
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

ShellResult run_shell(const std::string &cmd, int timeout_ms) {
  ShellResult result;
  int fds[2];
  if (pipe(fds) != 0) {
    result.spawn_failed = true;
    return result;
  }
  auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    result.spawn_failed = true;
    return result;
  }
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    dup2(fds[1], STDERR_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char *>(nullptr));
    _exit(127);
  }
  close(fds[1]);

  auto deadline = start + std::chrono::milliseconds(timeout_ms);
  char buf[4096];
  bool open = true;
  while (open) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                         deadline - std::chrono::steady_clock::now())
                         .count();
    if (remaining <= 0) {
      result.timed_out = true;
      kill(pid, SIGKILL);
      remaining = 1000;  // allow the pipe to drain after the kill
    }
    struct pollfd pfd = {fds[0], POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(remaining));
    if (rc > 0) {
      ssize_t n = read(fds[0], buf, sizeof(buf));
      if (n <= 0)
        open = false;
      else
        result.output.append(buf, static_cast<size_t>(n));
    } else if (rc == 0 && result.timed_out) {
      open = false;
    }
  }
  close(fds[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  auto end = std::chrono::steady_clock::now();
  result.wall_ms = std::chrono::duration<double, std::milli>(end - start).count();
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  if (result.timed_out) result.exit_code = -1;
  return result;
}

}  // namespace cofuse
