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

#include "cofuse/store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cofuse/util.hpp"

namespace cofuse {

const char *to_string(MutationForm f) {
  switch (f) {
    case MutationForm::Diff: return "diff";
    case MutationForm::Rewrite: return "rewrite";
    case MutationForm::Crossover: return "crossover";
  }
  return "diff";
}

std::vector<float> HashingEmbedder::embed(const std::string &text) {
  std::vector<float> v(static_cast<size_t>(_dimension), 0.0f);
  size_t i = 0;
  const size_t n = text.size();
  auto bump = [&](std::string_view token) {
    v[fnv1a64(token) % static_cast<uint64_t>(_dimension)] += 1.0f;
  };
  while (i < n) {
    char c = text[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t s = i;
      while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                       text[i] == '_'))
        ++i;
      bump(std::string_view(text).substr(s, i - s));
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t s = i;
      while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                       text[i] == '.'))
        ++i;
      bump(std::string_view(text).substr(s, i - s));
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      size_t s = i;
      while (i < n && !std::isspace(static_cast<unsigned char>(text[i])) &&
             !std::isalnum(static_cast<unsigned char>(text[i])) &&
             text[i] != '_')
        ++i;
      bump(std::string_view(text).substr(s, i - s));
    } else {
      ++i;
    }
  }
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm > 0.0) {
    float inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (float &x : v) x *= inv;
  }
  return v;
}

double cosine_similarity(const std::vector<float> &u,
                         const std::vector<float> &v) {
  if (u.size() != v.size())
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
    uv += static_cast<double>(u[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0)
    throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

nlohmann::ordered_json record_to_json(const CandidateRecord &record) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["run_id"] = record.run_id;
  j["island"] = record.island;
  j["generation"] = record.generation;
  if (record.parent_id) j["parent_id"] = *record.parent_id;
  if (record.form) j["form"] = to_string(*record.form);
  j["source"] = record.source;
  nlohmann::ordered_json dir;
  to_json(dir, record.directive);
  j["directive"] = dir;
  j["result"] = {{"level", to_string(record.result.level_reached)},
                 {"diagnostics", record.result.diagnostics},
                 {"latencies_ms", record.result.latencies_ms},
                 {"score", record.result.score}};
  if (record.result.best_ms) j["result"]["best_ms"] = *record.result.best_ms;
  if (record.result.feedback)
    j["feedback"] = feedback_to_json(*record.result.feedback);
  j["embedding"] = record.embedding;
  j["created_at"] = record.created_at;
  return j;
}

namespace {

CascadeLevel level_from_string(const std::string &s) {
  if (s == "l1_failed") return CascadeLevel::L1Failed;
  if (s == "l2_failed") return CascadeLevel::L2Failed;
  return CascadeLevel::L3Complete;
}

std::optional<MutationForm> form_from_string(const std::string &s) {
  if (s == "diff") return MutationForm::Diff;
  if (s == "rewrite") return MutationForm::Rewrite;
  if (s == "crossover") return MutationForm::Crossover;
  return std::nullopt;
}

}  // namespace

CandidateRecord record_from_json(const nlohmann::ordered_json &j) {
  CandidateRecord r;
  r.id = j.at("id").get<std::string>();
  r.run_id = j.value("run_id", "");
  r.island = j.value("island", 0);
  r.generation = j.value("generation", 0);
  if (j.contains("parent_id")) r.parent_id = j["parent_id"].get<std::string>();
  if (j.contains("form"))
    r.form = form_from_string(j["form"].get<std::string>());
  r.source = j.value("source", "");
  if (j.contains("directive")) from_json(j["directive"], r.directive);
  if (j.contains("result")) {
    const auto &res = j["result"];
    r.result.level_reached =
        level_from_string(res.value("level", "l1_failed"));
    r.result.diagnostics = res.value("diagnostics", "");
    if (res.contains("latencies_ms"))
      r.result.latencies_ms = res["latencies_ms"].get<std::vector<double>>();
    if (res.contains("best_ms")) r.result.best_ms = res["best_ms"].get<double>();
    r.result.score = res.value("score", 0.0);
  }
  if (j.contains("feedback"))
    r.result.feedback = feedback_from_json(j["feedback"]);
  if (j.contains("embedding"))
    r.embedding = j["embedding"].get<std::vector<float>>();
  r.created_at = j.value("created_at", "");
  return r;
}

CandidateStore::CandidateStore(const std::string &path) : _path(path) {
  if (_path.empty()) return;
  std::filesystem::create_directories(_path);
  std::string log = _path + "/records.jsonl";
  if (!std::filesystem::exists(log)) return;
  std::ifstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::ordered_json::parse(line);
    if (j.contains("amend")) {
      // Feedback amendment for an earlier record.
      auto it = _index.find(j["amend"].get<std::string>());
      if (it != _index.end())
        _records[it->second].result.feedback = feedback_from_json(j["feedback"]);
      continue;
    }
    CandidateRecord r = record_from_json(j);
    _index[r.id] = _records.size();
    _records.push_back(std::move(r));
  }
}

void CandidateStore::append_line(const std::string &line) {
  if (_path.empty()) return;
  std::ofstream out(_path + "/records.jsonl", std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to store " + _path);
  out << line << "\n";
  out.flush();
}

void CandidateStore::insert(const CandidateRecord &record) {
  std::lock_guard<std::mutex> lock(_mutex);
  if (_index.count(record.id))
    throw Error(ErrorCode::DuplicateId, record.id);
  if (!_records.empty() &&
      record.embedding.size() != _records.front().embedding.size())
    throw Error(ErrorCode::DimensionMismatch,
                "embedding dimension changed mid-store");
  append_line(record_to_json(record).dump());
  _index[record.id] = _records.size();
  _records.push_back(record);
}

const CandidateRecord *CandidateStore::find(const std::string &id) const {
  std::lock_guard<std::mutex> lock(_mutex);
  auto it = _index.find(id);
  return it == _index.end() ? nullptr : &_records[it->second];
}

const CandidateRecord &CandidateStore::get(const std::string &id) const {
  const CandidateRecord *r = find(id);
  if (!r) throw Error(ErrorCode::IoError, "no record with id " + id);
  return *r;
}

std::vector<Neighbor> CandidateStore::knn(const std::vector<float> &query,
                                          int k) const {
  std::lock_guard<std::mutex> lock(_mutex);
  if (_records.empty())
    throw Error(ErrorCode::EmptyStore, "knn on an empty store");
  std::vector<Neighbor> all;
  all.reserve(_records.size());
  for (const auto &r : _records)
    all.push_back({&r, cosine_similarity(query, r.embedding)});
  // Newest first on equal similarity: later insertion index wins.
  std::stable_sort(all.begin(), all.end(), [this](const Neighbor &a,
                                                  const Neighbor &b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return _index.at(a.record->id) > _index.at(b.record->id);
  });
  if (static_cast<int>(all.size()) > k) all.resize(static_cast<size_t>(k));
  return all;
}

NoveltyOutcome CandidateStore::novelty_check(const std::vector<float> &embedding,
                                             double threshold) const {
  std::lock_guard<std::mutex> lock(_mutex);
  NoveltyOutcome out;
  for (const auto &r : _records) {
    bool exact = r.embedding == embedding;
    double sim = exact ? 1.0 : cosine_similarity(embedding, r.embedding);
    if (sim > out.similarity || out.nearest_id.empty()) {
      out.similarity = sim;
      out.nearest_id = r.id;
    }
    // Strictly-above-threshold rejection; exact duplicates are rejected even
    // at threshold 1.0.
    if (sim > threshold || (exact && threshold >= 1.0)) {
      out.accepted = false;
      out.similarity = sim;
      out.nearest_id = r.id;
      return out;
    }
  }
  return out;
}

std::vector<const CandidateRecord *> CandidateStore::query_meta(
    const MetaQuery &q) const {
  std::lock_guard<std::mutex> lock(_mutex);
  std::vector<const CandidateRecord *> out;
  std::string needle = q.keyword ? to_lower(*q.keyword) : "";
  for (const auto &r : _records) {
    if (q.generation_min && r.generation < *q.generation_min) continue;
    if (q.generation_max && r.generation > *q.generation_max) continue;
    if (q.min_score && r.result.score < *q.min_score) continue;
    if (!needle.empty()) {
      std::string haystack = to_lower(r.source);
      if (r.result.feedback) {
        haystack += '\n' + to_lower(r.result.feedback->strategy_summary);
        haystack += '\n' + to_lower(r.result.feedback->top_improvement);
        if (r.result.feedback->root_cause)
          haystack += '\n' + to_lower(*r.result.feedback->root_cause);
      }
      haystack += '\n' + to_lower(r.result.diagnostics);
      if (haystack.find(needle) == std::string::npos) continue;
    }
    out.push_back(&r);
  }
  return out;
}

void CandidateStore::attach_feedback(const std::string &id,
                                     const Feedback &feedback) {
  std::lock_guard<std::mutex> lock(_mutex);
  auto it = _index.find(id);
  if (it == _index.end())
    throw Error(ErrorCode::IoError, "no record with id " + id);
  CandidateRecord &r = _records[it->second];
  if (r.result.feedback)
    throw Error(ErrorCode::DuplicateId,
                "feedback already attached to " + id);
  nlohmann::ordered_json j;
  j["amend"] = id;
  j["feedback"] = feedback_to_json(feedback);
  append_line(j.dump());
  r.result.feedback = feedback;
}

}  // namespace cofuse
