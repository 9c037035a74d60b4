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

#ifndef COFUSE_STORE_HPP
#define COFUSE_STORE_HPP

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cofuse/cascade.hpp"
#include "cofuse/directive.hpp"
#include "cofuse/errors.hpp"

namespace cofuse {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<float> embed(const std::string &text) = 0;
  virtual int dimension() const = 0;
};

// Local deterministic embedder: token frequencies hashed into a fixed number
// of buckets, L2-normalized. Identical text always embeds identically.
class HashingEmbedder : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(int dimension = 256) : _dimension(dimension) {}

  std::vector<float> embed(const std::string &text) override;
  int dimension() const override { return _dimension; }

 private:
  int _dimension;
};

double cosine_similarity(const std::vector<float> &u,
                         const std::vector<float> &v);

enum class MutationForm { Diff, Rewrite, Crossover };

const char *to_string(MutationForm f);

struct CandidateRecord {
  std::string id;
  std::string run_id;
  int island = 0;
  int generation = 0;
  std::optional<std::string> parent_id;
  std::optional<MutationForm> form;
  std::string source;
  OptimizationDirective directive;
  CascadeResult result;
  std::vector<float> embedding;
  std::string created_at;
};

struct Neighbor {
  const CandidateRecord *record;
  double similarity;
};

struct NoveltyOutcome {
  bool accepted = true;
  std::string nearest_id;
  double similarity = 0.0;
};

struct MetaQuery {
  std::optional<int> generation_min;
  std::optional<int> generation_max;
  std::optional<std::string> keyword;  // matched in source and feedback text
  std::optional<double> min_score;
};

// Append-only candidate log. Each insert writes one JSON line to
// records.jsonl under the store directory; reopening a directory rebuilds
// the in-memory index from that log.
class CandidateStore {
 public:
  // path may be empty for a purely in-memory store (tests).
  explicit CandidateStore(const std::string &path = "");

  void insert(const CandidateRecord &record);  // throws DuplicateId
  const CandidateRecord *find(const std::string &id) const;
  const CandidateRecord &get(const std::string &id) const;
  size_t size() const { return _records.size(); }
  // Element references stay valid across inserts.
  const std::deque<CandidateRecord> &records() const { return _records; }

  // Exact top-k by cosine similarity; ties broken newest-first. Throws
  // EmptyStore when no records exist.
  std::vector<Neighbor> knn(const std::vector<float> &query, int k) const;

  // Accepts unless some stored embedding is more similar than `threshold`.
  // A threshold of 1.0 still rejects exact duplicates.
  NoveltyOutcome novelty_check(const std::vector<float> &embedding,
                               double threshold) const;

  std::vector<const CandidateRecord *> query_meta(const MetaQuery &q) const;

  // Feedback may be attached once to a record inserted without it; the
  // amendment is appended to the log, never rewritten in place.
  void attach_feedback(const std::string &id, const Feedback &feedback);

  const std::string &path() const { return _path; }

 private:
  void append_line(const std::string &line);

  std::string _path;
  std::deque<CandidateRecord> _records;
  std::map<std::string, size_t> _index;
  mutable std::mutex _mutex;
};

nlohmann::ordered_json record_to_json(const CandidateRecord &record);
CandidateRecord record_from_json(const nlohmann::ordered_json &j);

}  // namespace cofuse

#endif  // COFUSE_STORE_HPP
