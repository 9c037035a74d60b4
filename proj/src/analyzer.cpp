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

#include "cofuse/analyzer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "cofuse/util.hpp"

namespace cofuse {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Blanks out comments and string/char literals so the scanner only ever sees
// code. Newlines survive so line numbers stay intact.
std::string strip_noise(const std::string &src) {
  std::string out = src;
  enum { Code, LineComment, BlockComment, Str, Chr } state = Code;
  for (size_t i = 0; i < out.size(); ++i) {
    char c = out[i];
    char next = i + 1 < out.size() ? out[i + 1] : '\0';
    switch (state) {
      case Code:
        if (c == '/' && next == '/') {
          state = LineComment;
          out[i] = ' ';
        } else if (c == '/' && next == '*') {
          state = BlockComment;
          out[i] = ' ';
        } else if (c == '"') {
          state = Str;
          out[i] = ' ';
        } else if (c == '\'') {
          state = Chr;
          out[i] = ' ';
        }
        break;
      case LineComment:
        if (c == '\n')
          state = Code;
        else
          out[i] = ' ';
        break;
      case BlockComment:
        if (c == '*' && next == '/') {
          out[i] = ' ';
          out[i + 1] = ' ';
          ++i;
          state = Code;
        } else if (c != '\n') {
          out[i] = ' ';
        }
        break;
      case Str:
        if (c == '\\' && next != '\n') {
          out[i] = ' ';
          if (next != '\0') out[i + 1] = ' ';
          ++i;
        } else if (c == '"') {
          out[i] = ' ';
          state = Code;
        } else if (c != '\n') {
          out[i] = ' ';
        }
        break;
      case Chr:
        if (c == '\\' && next != '\n') {
          out[i] = ' ';
          if (next != '\0') out[i + 1] = ' ';
          ++i;
        } else if (c == '\'') {
          out[i] = ' ';
          state = Code;
        } else if (c != '\n') {
          out[i] = ' ';
        }
        break;
    }
  }
  return out;
}

std::string collapse_spaces(const std::string &s) {
  std::string out;
  bool prev_space = false;
  for (char c : s) {
    bool space = std::isspace(static_cast<unsigned char>(c));
    if (space) {
      if (!prev_space && !out.empty()) out += ' ';
    } else {
      out += c;
    }
    prev_space = space;
  }
  return trim(out);
}

const std::set<std::string> kCollectiveOps = {
    "AlltoAll", "AllGather", "AllReduce", "ReduceScatter",
    "Broadcast", "Reduce",   "Gather",    "Scatter"};

const std::set<std::string> kControlKeywords = {
    "if", "else", "for", "while", "switch", "return", "sizeof", "do"};

const std::set<std::string> kStreamSyncNames = {"cudaStreamSynchronize",
                                                "cudaDeviceSynchronize"};

struct Recognized {
  ConstructKind kind;
  std::string op;  // collective suffix, e.g. "AlltoAll"
};

std::optional<Recognized> recognize(const std::string &name,
                                    const ScannerConfig &config) {
  for (const std::string &prefix : config.collective_prefixes) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string suffix = name.substr(prefix.size());
    if (kCollectiveOps.count(suffix))
      return Recognized{ConstructKind::CollectiveCall, suffix};
    if (suffix == "Send" || suffix == "Recv")
      return Recognized{ConstructKind::SendRecvCall, suffix};
  }
  if (config.allocator_names.count(name))
    return Recognized{ConstructKind::Allocation, ""};
  if (kStreamSyncNames.count(name))
    return Recognized{ConstructKind::StreamSync, ""};
  return std::nullopt;
}

}  // namespace

ScanResult scan_source(const std::string &source, const ScannerConfig &config) {
  ScanResult result;
  std::string text = strip_noise(source);

  int line = 1;
  int brace_depth = 0;
  bool pending_if = false;
  std::vector<int> conditional_depths;  // brace depths opened by if/else

  struct OpenFunction {
    std::string name;
    int first_line;
    int entry_depth;
  };
  std::vector<OpenFunction> open_functions;

  // Group regions delimited by ncclGroupStart/ncclGroupEnd.
  bool in_group = false;

  size_t i = 0;
  const size_t n = text.size();

  auto current_function = [&]() -> std::string {
    return open_functions.empty() ? std::string() : open_functions.back().name;
  };

  // Consumes a parenthesized argument list starting at text[i] == '('.
  // Returns top-level comma-separated args; sets end_line to the line of the
  // closing paren. Throws ScanError on EOF.
  auto consume_args = [&](const std::string &name, int name_line,
                          int &end_line) {
    std::vector<std::string> args;
    std::string cur;
    int depth = 0;
    for (; i < n; ++i) {
      char c = text[i];
      if (c == '\n') {
        ++line;
        cur += ' ';
        continue;
      }
      if (c == '(') {
        ++depth;
        if (depth == 1) continue;
      } else if (c == ')') {
        --depth;
        if (depth == 0) {
          ++i;
          end_line = line;
          std::string last = collapse_spaces(cur);
          if (!last.empty() || !args.empty()) args.push_back(last);
          return args;
        }
      } else if (c == ',' && depth == 1) {
        args.push_back(collapse_spaces(cur));
        cur.clear();
        continue;
      }
      if (depth >= 1) cur += c;
    }
    throw ScanError(name, name_line);
  };

  while (i < n) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (c == '{') {
      ++brace_depth;
      if (pending_if) {
        conditional_depths.push_back(brace_depth);
        pending_if = false;
      }
      ++i;
      continue;
    }
    if (c == '}') {
      while (!conditional_depths.empty() && conditional_depths.back() == brace_depth)
        conditional_depths.pop_back();
      --brace_depth;
      while (!open_functions.empty() &&
             brace_depth <= open_functions.back().entry_depth) {
        result.functions.push_back(
            {open_functions.back().name, open_functions.back().first_line, line});
        open_functions.pop_back();
      }
      ++i;
      continue;
    }
    if (c == ';') {
      pending_if = false;
      ++i;
      continue;
    }
    if (!is_ident_start(c)) {
      ++i;
      continue;
    }

    size_t start = i;
    while (i < n && is_ident_char(text[i])) ++i;
    std::string name = text.substr(start, i - start);
    int name_line = line;

    if (name == "if" || name == "else") {
      pending_if = true;
      continue;
    }

    // Lookahead past whitespace (tracking newlines) to see what follows.
    size_t save_i = i;
    int save_line = line;
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) {
      if (text[i] == '\n') ++line;
      ++i;
    }

    bool is_launch = i + 2 < n && text[i] == '<' && text[i + 1] == '<' &&
                     text[i + 2] == '<';
    if (is_launch) {
      i += 3;
      std::string launch_cfg;
      while (i < n && !(i + 2 < n && text[i] == '>' && text[i + 1] == '>' &&
                        text[i + 2] == '>')) {
        if (text[i] == '\n') ++line;
        launch_cfg += text[i] == '\n' ? ' ' : text[i];
        ++i;
      }
      if (i >= n) throw ScanError(name, name_line);
      i += 3;
      while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) {
        if (text[i] == '\n') ++line;
        ++i;
      }
      if (i < n && text[i] == '(') {
        int end_line = name_line;
        auto args = consume_args(name, name_line, end_line);
        SourceConstruct sc;
        sc.kind = ConstructKind::KernelLaunch;
        sc.name = name;
        sc.line = end_line;
        sc.name_line = name_line;
        sc.args = std::move(args);
        sc.launch_config = collapse_spaces(launch_cfg);
        sc.in_group = in_group;
        sc.conditional = pending_if || !conditional_depths.empty();
        sc.enclosing_function = current_function();
        result.constructs.push_back(std::move(sc));
      }
      continue;
    }

    if (i < n && text[i] == '(') {
      if (name == "ncclGroupStart") {
        in_group = true;
        int end_line = name_line;
        consume_args(name, name_line, end_line);
        continue;
      }
      if (name == "ncclGroupEnd") {
        in_group = false;
        int end_line = name_line;
        consume_args(name, name_line, end_line);
        continue;
      }
      auto rec = recognize(name, config);
      if (rec) {
        int end_line = name_line;
        auto args = consume_args(name, name_line, end_line);
        SourceConstruct sc;
        sc.kind = rec->kind;
        sc.name = name;
        sc.line = end_line;
        sc.name_line = name_line;
        sc.args = std::move(args);
        sc.in_group = in_group;
        sc.conditional = pending_if || !conditional_depths.empty();
        sc.enclosing_function = current_function();
        result.constructs.push_back(std::move(sc));
        continue;
      }
      // At file scope an unrecognized call shape is a candidate function
      // definition: name(...) {
      if (brace_depth == 0 && !kControlKeywords.count(name)) {
        int end_line = name_line;
        consume_args(name, name_line, end_line);
        size_t j = i;
        int peek_line = line;
        while (j < n && std::isspace(static_cast<unsigned char>(text[j]))) {
          if (text[j] == '\n') ++peek_line;
          ++j;
        }
        if (j < n && text[j] == '{') open_functions.push_back({name, name_line, brace_depth});
      }
      continue;
    }

    // Identifier not followed by a call: rewind the whitespace lookahead so
    // '{' and '}' handling above still sees those characters.
    i = save_i;
    line = save_line;
  }

  // Any function still open at EOF closes there.
  while (!open_functions.empty()) {
    result.functions.push_back(
        {open_functions.back().name, open_functions.back().first_line, line});
    open_functions.pop_back();
  }
  return result;
}

namespace {

// "(void**)&d_x" -> "d_x"; "d_x" -> "d_x".
std::string buffer_name(const std::string &arg) {
  size_t amp = arg.rfind('&');
  std::string rest = amp == std::string::npos ? arg : arg.substr(amp + 1);
  size_t b = 0;
  while (b < rest.size() && !is_ident_start(rest[b])) ++b;
  size_t e = b;
  while (e < rest.size() && is_ident_char(rest[e])) ++e;
  return rest.substr(b, e - b);
}

bool args_reference(const std::vector<std::string> &args,
                    const std::string &buffer) {
  for (const auto &a : args) {
    size_t pos = 0;
    while ((pos = a.find(buffer, pos)) != std::string::npos) {
      bool left_ok = pos == 0 || !is_ident_char(a[pos - 1]);
      size_t end = pos + buffer.size();
      bool right_ok = end >= a.size() || !is_ident_char(a[end]);
      if (left_ok && right_ok) return true;
      pos = end;
    }
  }
  return false;
}

std::string transform_hint_for(const std::string &op) {
  if (op == "AlltoAll")
    return "AlltoAll -- rank r sends sendbuf[peer*chunk]\n"
           "to peer's recvbuf[r*chunk] + local self-copy";
  if (op == "AllGather")
    return "AllGather -- rank r writes sendbuf into every peer's\n"
           "recvbuf[r*chunk] + local self-copy";
  if (op == "AllReduce")
    return "AllReduce -- ranks exchange partials and accumulate;\n"
           "every rank ends with the fully reduced buffer";
  if (op == "ReduceScatter")
    return "ReduceScatter -- rank r accumulates incoming blocks\n"
           "and keeps slice r of the result";
  if (op == "Broadcast")
    return "Broadcast -- the root writes its sendbuf into every\n"
           "peer's recvbuf";
  if (op == "grouped-p2p")
    return "grouped p2p -- each send lowers to a one-sided put;\n"
           "each recv becomes a wait on the matching signal";
  return op + " -- lower to device-initiated puts with completion signals";
}

void fill_buffer_info(BufferInfo &info, int node_line,
                      const std::vector<const SourceConstruct *> &allocations,
                      const std::vector<const SourceConstruct *> &launches,
                      const ScannerConfig &config,
                      std::vector<std::string> &warnings) {
  if (info.name.empty()) return;
  const SourceConstruct *alloc = nullptr;
  for (const auto *a : allocations) {
    if (a->line >= node_line) break;
    if (!a->args.empty() && buffer_name(a->args[0]) == info.name) alloc = a;
  }
  if (alloc) {
    info.alloc_site = AllocSite{alloc->name, alloc->line};
    info.needs_migration = !config.compatible_allocators.count(alloc->name);
  } else {
    warnings.push_back("no allocation site found for buffer '" + info.name + "'");
  }
  for (const auto *k : launches) {
    if (!args_reference(k->args, info.name)) continue;
    if (k->line < node_line)
      info.producers.push_back({k->name, k->line});
    else
      info.consumers.push_back({k->name, k->line});
  }
}

}  // namespace

CommGraph build_comm_graph(const ScanResult &scan, const ScannerConfig &config) {
  CommGraph graph;
  graph.warnings = scan.warnings;

  std::vector<const SourceConstruct *> allocations;
  std::vector<const SourceConstruct *> launches;
  for (const auto &sc : scan.constructs) {
    if (sc.kind == ConstructKind::Allocation) allocations.push_back(&sc);
    if (sc.kind == ConstructKind::KernelLaunch) launches.push_back(&sc);
  }

  struct PendingNode {
    CommNode node;
    int order_line;
  };
  std::vector<PendingNode> pending;

  // Collectives map directly to nodes. Grouped send/recv pairs collapse into
  // one synthetic node per group region.
  const SourceConstruct *group_send = nullptr;
  const SourceConstruct *group_recv = nullptr;
  bool saw_group = false;
  int group_p2p_count = 0;

  auto flush_group = [&]() {
    if (!saw_group) return;
    if (group_send || group_recv) {
      const SourceConstruct *anchor = group_send ? group_send : group_recv;
      CommNode node;
      node.op = "grouped-p2p";
      node.line = anchor->line;
      node.function = anchor->enclosing_function;
      node.conditional = anchor->conditional;
      node.count_expr = anchor->args.size() > 1 ? anchor->args[1] : "";
      node.datatype = anchor->args.size() > 2 ? anchor->args[2] : "";
      node.stream = anchor->args.empty() ? "" : anchor->args.back();
      if (group_send && !group_send->args.empty())
        node.send.name = buffer_name(group_send->args[0]);
      if (group_recv && !group_recv->args.empty())
        node.recv.name = buffer_name(group_recv->args[0]);
      node.transform_hint = transform_hint_for(node.op);
      if (group_p2p_count > 2)
        graph.warnings.push_back(
            "group region merges " + std::to_string(group_p2p_count) +
            " p2p calls into one node");
      pending.push_back({std::move(node), anchor->line});
    }
    group_send = nullptr;
    group_recv = nullptr;
    saw_group = false;
    group_p2p_count = 0;
  };

  for (const auto &sc : scan.constructs) {
    if (sc.kind == ConstructKind::SendRecvCall && sc.in_group) {
      saw_group = true;
      ++group_p2p_count;
      bool is_send = sc.name.size() >= 4 &&
                     sc.name.compare(sc.name.size() - 4, 4, "Send") == 0;
      if (is_send && !group_send) group_send = &sc;
      if (!is_send && !group_recv) group_recv = &sc;
      continue;
    }
    if (!sc.in_group) flush_group();
    if (sc.kind == ConstructKind::CollectiveCall) {
      CommNode node;
      node.op = sc.name;
      node.line = sc.line;
      node.function = sc.enclosing_function;
      node.conditional = sc.conditional;
      if (!sc.args.empty()) node.send.name = buffer_name(sc.args[0]);
      if (sc.args.size() > 1) node.recv.name = buffer_name(sc.args[1]);
      if (sc.args.size() > 2) node.count_expr = sc.args[2];
      if (sc.args.size() > 3) node.datatype = sc.args[3];
      if (!sc.args.empty()) node.stream = sc.args.back();
      std::string suffix;
      for (const std::string &prefix : config.collective_prefixes)
        if (sc.name.rfind(prefix, 0) == 0) suffix = sc.name.substr(prefix.size());
      node.transform_hint = transform_hint_for(suffix);
      if (!node.send.name.empty() && node.send.name == node.recv.name)
        graph.warnings.push_back("send and recv buffers alias in '" + sc.name +
                                 "' at line " + std::to_string(sc.line));
      pending.push_back({std::move(node), sc.line});
    }
    if (sc.kind == ConstructKind::SendRecvCall && !sc.in_group) {
      // An ungrouped p2p call still forms a node; without the matching half
      // one side stays empty.
      CommNode node;
      node.op = sc.name;
      node.line = sc.line;
      node.function = sc.enclosing_function;
      node.conditional = sc.conditional;
      bool is_send = sc.name.size() >= 4 &&
                     sc.name.compare(sc.name.size() - 4, 4, "Send") == 0;
      if (!sc.args.empty()) {
        if (is_send)
          node.send.name = buffer_name(sc.args[0]);
        else
          node.recv.name = buffer_name(sc.args[0]);
      }
      if (sc.args.size() > 1) node.count_expr = sc.args[1];
      if (sc.args.size() > 2) node.datatype = sc.args[2];
      if (!sc.args.empty()) node.stream = sc.args.back();
      node.transform_hint = transform_hint_for("grouped-p2p");
      pending.push_back({std::move(node), sc.line});
    }
  }
  flush_group();

  for (auto &p : pending) {
    fill_buffer_info(p.node.send, p.order_line, allocations, launches, config,
                     graph.warnings);
    fill_buffer_info(p.node.recv, p.order_line, allocations, launches, config,
                     graph.warnings);
    graph.nodes.push_back(std::move(p.node));
  }

  // Execution order interleaves kernel launches and communication nodes by
  // source position.
  struct Step {
    int line;
    ExecStep step;
  };
  std::vector<Step> steps;
  for (const auto *k : launches)
    steps.push_back({k->line,
                     {k->name + "<<<...>>>", ExecStep::Role::Compute,
                      k->enclosing_function}});
  for (size_t idx = 0; idx < graph.nodes.size(); ++idx)
    steps.push_back({graph.nodes[idx].line,
                     {graph.nodes[idx].op, ExecStep::Role::Communicate,
                      graph.nodes[idx].function}});
  std::sort(steps.begin(), steps.end(),
            [](const Step &a, const Step &b) { return a.line < b.line; });
  for (auto &s : steps) graph.execution_order.push_back(std::move(s.step));

  // Chain nodes in source order; add extra edges where buffers are shared.
  for (size_t j = 1; j < graph.nodes.size(); ++j)
    graph.ordering_edges.emplace_back(static_cast<int>(j - 1),
                                      static_cast<int>(j));
  for (size_t a = 0; a + 1 < graph.nodes.size(); ++a) {
    for (size_t b = a + 1; b < graph.nodes.size(); ++b) {
      if (b == a + 1) continue;
      const auto &na = graph.nodes[a];
      const auto &nb = graph.nodes[b];
      std::set<std::string> bufs{na.send.name, na.recv.name};
      bufs.erase("");
      if (bufs.count(nb.send.name) || bufs.count(nb.recv.name))
        graph.ordering_edges.emplace_back(static_cast<int>(a),
                                          static_cast<int>(b));
    }
  }
  return graph;
}

namespace {

void render_buffer(std::string &out, const char *label, const BufferInfo &info) {
  if (info.name.empty()) return;
  out += "    ";
  out += label;
  out += ": " + info.name + "\n";
  if (info.alloc_site) {
    out += "      Allocated: " + info.alloc_site->allocator + " (line " +
           std::to_string(info.alloc_site->line) + ")";
    if (info.needs_migration) out += " [needs ncclMemAlloc]";
    out += "\n";
  } else {
    out += "      Allocated: unknown\n";
  }
  // Send buffers report the latest producing kernel; recv buffers the
  // earliest consuming one.
  if (std::string(label) == "Send buffer" && !info.producers.empty()) {
    const auto &p = info.producers.back();
    out += "      Produced by: " + p.kernel + "<<<...>>> (line " +
           std::to_string(p.line) + ")\n";
  }
  if (std::string(label) == "Recv buffer" && !info.consumers.empty()) {
    const auto &c = info.consumers.front();
    out += "      Consumed by: " + c.kernel + "<<<...>>> (line " +
           std::to_string(c.line) + ")\n";
  }
}

}  // namespace

std::string render_graph(const CommGraph &graph) {
  std::string out = "Communication Graph\n";
  for (size_t idx = 0; idx < graph.nodes.size(); ++idx) {
    const CommNode &node = graph.nodes[idx];
    out += "  Node " + std::to_string(idx + 1) + ": " + node.op + " (line " +
           std::to_string(node.line) + ")";
    if (node.conditional) out += " [conditional]";
    out += "\n";
    out += "    Stream: " + node.stream + "\n";
    out += "    Count: " + node.count_expr + ", Datatype: " + node.datatype +
           "\n\n";
    render_buffer(out, "Send buffer", node.send);
    render_buffer(out, "Recv buffer", node.recv);
    out += "\n    Device-side transformation:\n";
    auto hint_lines = split_lines(node.transform_hint);
    for (size_t h = 0; h < hint_lines.size(); ++h) {
      if (h == 0)
        out += "      Pattern: " + hint_lines[h] + "\n";
      else
        out += "               " + hint_lines[h] + "\n";
    }
    std::vector<std::string> migrate;
    if (node.send.needs_migration) migrate.push_back(node.send.name);
    if (node.recv.needs_migration) migrate.push_back(node.recv.name);
    if (!migrate.empty()) {
      out += "      Buffers needing ncclMemAlloc: ";
      for (size_t m = 0; m < migrate.size(); ++m) {
        if (m) out += ", ";
        out += migrate[m];
      }
      out += "\n";
    }
    out += "\n";
  }
  if (graph.nodes.empty()) out += "  (no communication nodes)\n\n";

  out += "Execution Order\n";
  if (graph.execution_order.empty()) {
    out += "  (empty)\n";
    return out;
  }
  std::string current_function;
  std::string indent;
  bool first_in_function = true;
  for (const auto &step : graph.execution_order) {
    if (step.function != current_function || indent.empty()) {
      current_function = step.function;
      std::string fn = current_function.empty() ? "(global)" : current_function;
      std::string prefix = "  " + fn + ": ";
      indent.assign(prefix.size(), ' ');
      out += prefix;
      first_in_function = true;
    } else {
      out += indent + "-> ";
    }
    out += step.name;
    out += step.role == ExecStep::Role::Compute ? " [compute]" : " [communicate]";
    out += "\n";
    first_in_function = false;
  }
  (void)first_in_function;
  return out;
}

nlohmann::ordered_json graph_to_json(const CommGraph &graph) {
  nlohmann::ordered_json j;
  auto buffer_json = [](const BufferInfo &info) {
    nlohmann::ordered_json b;
    b["name"] = info.name;
    if (info.alloc_site) {
      b["allocated_by"] = info.alloc_site->allocator;
      b["allocated_at_line"] = info.alloc_site->line;
    }
    b["needs_migration"] = info.needs_migration;
    auto refs = [](const std::vector<KernelRef> &v) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto &r : v) arr.push_back({{"kernel", r.kernel}, {"line", r.line}});
      return arr;
    };
    b["producers"] = refs(info.producers);
    b["consumers"] = refs(info.consumers);
    return b;
  };

  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto &node : graph.nodes) {
    nlohmann::ordered_json n;
    n["op"] = node.op;
    n["line"] = node.line;
    n["function"] = node.function;
    n["stream"] = node.stream;
    n["count"] = node.count_expr;
    n["datatype"] = node.datatype;
    n["conditional"] = node.conditional;
    n["send"] = buffer_json(node.send);
    n["recv"] = buffer_json(node.recv);
    n["transform_hint"] = node.transform_hint;
    j["nodes"].push_back(std::move(n));
  }
  j["execution_order"] = nlohmann::ordered_json::array();
  for (const auto &step : graph.execution_order) {
    j["execution_order"].push_back(
        {{"name", step.name},
         {"role", step.role == ExecStep::Role::Compute ? "compute" : "communicate"},
         {"function", step.function}});
  }
  j["ordering_edges"] = nlohmann::ordered_json::array();
  for (auto [a, b] : graph.ordering_edges)
    j["ordering_edges"].push_back({a, b});
  j["warnings"] = graph.warnings;
  return j;
}

}  // namespace cofuse
