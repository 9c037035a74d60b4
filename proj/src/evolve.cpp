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

#include "cofuse/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <regex>

#include "cofuse/util.hpp"

namespace cofuse {

void SearchParams::validate() const {
  if (k < 1) throw Error(ErrorCode::ConfigError, "island count must be >= 1");
  if (G < 1) throw Error(ErrorCode::ConfigError, "generation budget must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::ConfigError, "explore fraction must lie in (0, 1)");
  if (G_m < 1) throw Error(ErrorCode::ConfigError, "migration interval must be >= 1");
  if (migration_k < 1)
    throw Error(ErrorCode::ConfigError, "migration top-k must be >= 1");
  if (beta < 0.0)
    throw Error(ErrorCode::ConfigError, "selection pressure must be >= 0");
  if (capacity < 1)
    throw Error(ErrorCode::ConfigError, "island capacity must be >= 1");
  if (novelty_threshold <= 0.0)
    throw Error(ErrorCode::ConfigError, "novelty threshold must be positive");
  if (tau_high <= 0.0 || tau_low <= 0.0)
    throw Error(ErrorCode::ConfigError, "temperatures must be positive");

  auto check = [](const FormWeights &w, const char *phase) {
    if (w.diff < 0.0 || w.rewrite < 0.0 || w.crossover < 0.0)
      throw Error(ErrorCode::InvalidWeights,
                  std::string(phase) + " weights must be nonnegative");
    double sum = w.diff + w.rewrite + w.crossover;
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error(ErrorCode::InvalidWeights,
                  std::string(phase) + " weights must sum to 1");
  };
  check(explore_weights, "explore");
  check(exploit_weights, "exploit");
  if (!(explore_weights.rewrite > explore_weights.diff))
    throw Error(ErrorCode::InvalidWeights,
                "explore phase requires weight(rewrite) > weight(diff)");
  if (!(exploit_weights.diff > exploit_weights.rewrite))
    throw Error(ErrorCode::InvalidWeights,
                "exploit phase requires weight(diff) > weight(rewrite)");
}

// ---------------------------------------------------------------------------
// Archive

namespace {

bool contains_any(const std::string &hay,
                  std::initializer_list<const char *> needles) {
  for (const char *n : needles)
    if (hay.find(n) != std::string::npos) return true;
  return false;
}

std::string classify_one(const std::string &lowered) {
  if (contains_any(lowered, {"persistent", "warp-special", "warp special",
                             "fused"}))
    return "fused-kernel";
  if (contains_any(lowered, {"streamcreatewithpriority", "comm_stream",
                             "comm stream", "overlap"}))
    return "stream-overlap";
  if (contains_any(lowered, {"split", "pipelin", "deferred wait"}))
    return "split-put-wait";
  return "other";
}

}  // namespace

std::string classify_strategy(const std::string &source,
                              const std::string &strategy_summary) {
  std::string by_source = classify_one(to_lower(source));
  if (by_source != "other") return by_source;
  return classify_one(to_lower(strategy_summary));
}

std::string MapElitesArchive::cell_key(const CandidateRecord &record) {
  std::string summary;
  if (record.result.feedback) summary = record.result.feedback->strategy_summary;
  return std::string(to_string(record.directive.backend)) + "|" +
         to_string(record.directive.issuer) + "|" +
         classify_strategy(record.source, summary);
}

bool MapElitesArchive::insert(const CandidateRecord &record) {
  if (record.result.score <= 0.0) return false;
  std::string key = cell_key(record);
  auto it = _cell_scores.find(key);
  if (it != _cell_scores.end() && record.result.score <= it->second) return false;
  _cells[key] = record.id;
  _cell_scores[key] = record.result.score;
  return true;
}

std::vector<std::string> MapElitesArchive::sample(std::mt19937_64 &rng,
                                                  int n) const {
  std::vector<std::string> ids;
  ids.reserve(_cells.size());
  for (const auto &[key, id] : _cells) ids.push_back(id);
  size_t take = std::min<size_t>(static_cast<size_t>(std::max(0, n)), ids.size());
  for (size_t j = 0; j < take; ++j) {
    std::uniform_int_distribution<size_t> pick(j, ids.size() - 1);
    std::swap(ids[j], ids[pick(rng)]);
  }
  ids.resize(take);
  return ids;
}

// ---------------------------------------------------------------------------
// Phase, form, selection

Phase choose_phase(int g, int G, double alpha) {
  return static_cast<double>(g) <= alpha * static_cast<double>(G)
             ? Phase::Explore
             : Phase::Exploit;
}

MutationForm sample_mutation_form(Phase phase, const SearchParams &params,
                                  std::mt19937_64 &rng) {
  const FormWeights &w = phase == Phase::Explore ? params.explore_weights
                                                 : params.exploit_weights;
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < w.diff) return MutationForm::Diff;
  if (u < w.diff + w.rewrite) return MutationForm::Rewrite;
  return MutationForm::Crossover;
}

const std::string &select_parent(const Island &island, double beta,
                                 const CandidateStore &store,
                                 std::mt19937_64 &rng) {
  if (island.population.empty())
    throw Error(ErrorCode::EmptyIsland,
                "island " + std::to_string(island.index) + " has no members");

  std::vector<double> weights;
  weights.reserve(island.population.size());
  double total = 0.0;
  for (const auto &id : island.population) {
    double w = std::pow(store.get(id).result.score, beta);
    weights.push_back(w);
    total += w;
  }
  if (total <= 0.0) {
    std::uniform_int_distribution<size_t> pick(0, island.population.size() - 1);
    return island.population[pick(rng)];
  }
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return island.population[i];
  }
  return island.population.back();
}

// ---------------------------------------------------------------------------
// Patches

std::vector<PatchHunk> parse_patch(const std::string &text) {
  static const std::regex header_re(R"(^@@\s*(\d+)\s*,\s*(\d+)\s*@@$)");
  std::vector<PatchHunk> hunks;
  for (const std::string &raw : split_lines(text)) {
    std::string line = trim(raw);
    if (line.rfind("@@", 0) == 0) {
      std::smatch m;
      if (!std::regex_match(line, m, header_re))
        throw Error(ErrorCode::MalformedPatch, "bad hunk header: " + line);
      PatchHunk hunk;
      hunk.first = std::stoi(m[1].str());
      hunk.last = std::stoi(m[2].str());
      if (hunk.first < 1 || hunk.last < hunk.first)
        throw Error(ErrorCode::MalformedPatch, "bad hunk range: " + line);
      hunks.push_back(std::move(hunk));
    } else if (hunks.empty()) {
      if (!line.empty())
        throw Error(ErrorCode::MalformedPatch,
                    "patch text precedes the first hunk header");
    } else {
      hunks.back().lines.push_back(raw);
    }
  }
  for (size_t i = 1; i < hunks.size(); ++i)
    if (hunks[i].first <= hunks[i - 1].last)
      throw Error(ErrorCode::MalformedPatch, "hunks overlap or are unsorted");
  return hunks;
}

std::string apply_diff(const std::string &program, const std::string &patch) {
  std::vector<PatchHunk> hunks = parse_patch(patch);
  if (hunks.empty()) return program;

  std::vector<std::string> lines = split_lines(program);
  std::vector<BlockSpan> spans = evolve_block_spans(lines);
  auto interior = [&spans](int line) {
    for (const auto &s : spans)
      if (line > s.start_line && line < s.end_line) return true;
    return false;
  };

  for (const auto &hunk : hunks) {
    if (hunk.last > static_cast<int>(lines.size()))
      throw Error(ErrorCode::MalformedPatch,
                  "hunk range ends past line " + std::to_string(lines.size()));
    for (int line = hunk.first; line <= hunk.last; ++line)
      if (!interior(line))
        throw Error(ErrorCode::FrozenRegionEdit,
                    "line " + std::to_string(line) + " is outside evolve blocks");
    for (const auto &replacement : hunk.lines)
      if (replacement.find(kEvolveStart) != std::string::npos ||
          replacement.find(kEvolveEnd) != std::string::npos)
        throw Error(ErrorCode::FrozenRegionEdit,
                    "replacement text introduces a block marker");
  }

  for (auto it = hunks.rbegin(); it != hunks.rend(); ++it) {
    lines.erase(lines.begin() + (it->first - 1), lines.begin() + it->last);
    lines.insert(lines.begin() + (it->first - 1), it->lines.begin(),
                 it->lines.end());
  }
  return join_lines(lines);
}

// ---------------------------------------------------------------------------
// Mutation response protocol

namespace {

constexpr const char *kSourceMarker = "=== SOURCE ===";
constexpr const char *kDiffMarker = "=== DIFF ===";
constexpr const char *kEndMarker = "=== END ===";

class MutationRejected : public Error {
 public:
  MutationRejected(MutationForm form, std::string source, const std::string &why)
      : Error(ErrorCode::MutationRejected, why),
        form(form),
        source(std::move(source)) {}
  MutationForm form;
  std::string source;  // offspring text when one exists
};

std::string payload_after(const std::string &response, size_t marker_pos) {
  size_t line_end = response.find('\n', marker_pos);
  if (line_end == std::string::npos) return "";
  std::string body = response.substr(line_end + 1);
  size_t end_pos = body.find(kEndMarker);
  if (end_pos != std::string::npos) body = body.substr(0, end_pos);
  return body;
}

}  // namespace

Mutation parse_mutation_response(const std::string &response, MutationForm form,
                                 const std::string &parent_source) {
  size_t source_pos = response.find(kSourceMarker);
  size_t diff_pos = response.find(kDiffMarker);
  size_t marker_pos = std::min(source_pos, diff_pos);
  if (marker_pos == std::string::npos)
    throw MutationRejected(form, "", "response carries no payload section");
  bool diff_payload = diff_pos < source_pos;

  Mutation m;
  m.form = form;
  try {
    m.directive = parse_directive(response.substr(0, marker_pos));
  } catch (const Error &e) {
    throw MutationRejected(form, "", std::string("directive: ") + e.what());
  }

  std::string body = payload_after(response, marker_pos);
  if (form == MutationForm::Diff) {
    if (!diff_payload)
      throw MutationRejected(form, "", "diff form requires a patch payload");
    try {
      m.source = apply_diff(parent_source, body);
    } catch (const Error &e) {
      throw MutationRejected(form, "", e.what());
    }
  } else {
    if (diff_payload)
      throw MutationRejected(form, "",
                             "rewrite and crossover require a full program");
    m.source = body;
    try {
      if (outside_block_signature(m.source) !=
          outside_block_signature(parent_source))
        throw MutationRejected(form, m.source,
                               "bytes outside evolve blocks differ from parent");
    } catch (const MutationRejected &) {
      throw;
    } catch (const Error &e) {
      throw MutationRejected(form, m.source, e.what());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// LLM mutation

namespace {

std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", score);
  return buf;
}

std::string feedback_text(const CandidateRecord &record) {
  if (!record.result.feedback) return "";
  const Feedback &fb = *record.result.feedback;
  std::string out;
  if (!fb.strategy_summary.empty())
    out += "strategy: " + fb.strategy_summary + "\n";
  if (!fb.top_improvement.empty())
    out += "improvement: " + fb.top_improvement + "\n";
  if (fb.root_cause) out += "root_cause: " + *fb.root_cause + "\n";
  return out;
}

const char *form_instruction(MutationForm form) {
  switch (form) {
    case MutationForm::Diff:
      return "Make a localized refinement. Respond with the directive block, "
             "then a line '=== DIFF ===', then hunks of the form "
             "'@@ first,last @@' followed by replacement lines. Only lines "
             "inside evolve blocks may be targeted.";
    case MutationForm::Rewrite:
      return "Restructure the approach. Respond with the directive block, "
             "then a line '=== SOURCE ===', then the complete program. Bytes "
             "outside evolve blocks must be reproduced exactly.";
    case MutationForm::Crossover:
      return "Combine the strengths of the inspiration programs with the "
             "parent. Respond with the directive block, then a line "
             "'=== SOURCE ===', then the complete program. Bytes outside "
             "evolve blocks must be reproduced exactly.";
  }
  return "";
}

}  // namespace

Mutation llm_mutate(const MutateInputs &in, const MapElitesArchive &archive,
                    const CandidateStore &store, const SearchParams &params,
                    int G, AgentProvider &provider, const RetryPolicy &retry,
                    std::mt19937_64 &rng) {
  const CandidateRecord &parent = *in.parent;
  Phase phase = choose_phase(in.generation, G, params.alpha);
  MutationForm form = sample_mutation_form(phase, params, rng);

  std::vector<std::string> inspiration_ids = archive.sample(rng, 2);
  if (form == MutationForm::Crossover && inspiration_ids.size() < 2)
    form = MutationForm::Rewrite;  // not enough material to cross

  std::string prompt;
  prompt += "Parent candidate " + parent.id +
            " (score " + format_score(parent.result.score) + ", level " +
            to_string(parent.result.level_reached) + "):\n";
  prompt += render_directive(parent.directive) + "\n";
  prompt += parent.source + "\n";

  std::string fb = feedback_text(parent);
  if (!fb.empty()) prompt += "\nEvaluation feedback:\n" + fb;

  if (store.size() > 0) {
    prompt += "\nNearest stored candidates:\n";
    for (const Neighbor &n :
         store.knn(parent.embedding, std::min<int>(3, store.size())))
      prompt += "  " + n.record->id + " score " +
                format_score(n.record->result.score) + " similarity " +
                format_score(n.similarity) + "\n";
  }

  int label = 0;
  for (const auto &id : inspiration_ids) {
    const CandidateRecord &r = store.get(id);
    prompt += "\nInspiration program " + std::to_string(++label) + " (" + r.id +
              ", score " + format_score(r.result.score) + "):\n" + r.source +
              "\n";
  }

  if (!in.meta_recommendations.empty())
    prompt += "\nCurrent recommendations:\n" + in.meta_recommendations + "\n";

  prompt += "\n";
  prompt += form_instruction(form);
  prompt += "\n";

  CompletionRequest request;
  request.role = "mutate";
  request.prompt = prompt;
  request.temperature = phase == Phase::Explore ? params.tau_high : params.tau_low;
  request.tags = {{"form", to_string(form)},
                  {"phase", phase == Phase::Explore ? "explore" : "exploit"},
                  {"generation", std::to_string(in.generation)},
                  {"island", std::to_string(in.island)},
                  {"attempt", std::to_string(in.attempt)}};

  std::string response = complete_with_retry(provider, request, retry);
  return parse_mutation_response(response, form, parent.source);
}

// ---------------------------------------------------------------------------
// Migration

std::vector<MigrationEvent> migrate(std::vector<Island> &islands,
                                    int migration_k,
                                    const CandidateStore &store,
                                    std::mt19937_64 &rng) {
  std::vector<MigrationEvent> events;
  if (islands.size() < 2) return events;

  auto score_of = [&store](const std::string &id) {
    return store.get(id).result.score;
  };

  // Migrant selection works on a snapshot so earlier copies in the same
  // round cannot be re-exported by a later island.
  std::vector<std::vector<std::string>> tops(islands.size());
  for (size_t i = 0; i < islands.size(); ++i) {
    std::vector<std::string> sorted = islands[i].population;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](const std::string &a, const std::string &b) {
                       return score_of(a) > score_of(b);
                     });
    if (sorted.size() > static_cast<size_t>(migration_k))
      sorted.resize(migration_k);
    tops[i] = std::move(sorted);
  }

  for (size_t s = 0; s < islands.size(); ++s) {
    if (tops[s].empty()) continue;
    std::uniform_int_distribution<size_t> pick(0, islands.size() - 2);
    size_t t = pick(rng);
    if (t >= s) ++t;
    auto &target = islands[t].population;

    for (const auto &id : tops[s]) {
      MigrationEvent event{static_cast<int>(s), static_cast<int>(t), id, false};
      bool already = std::find(target.begin(), target.end(), id) != target.end();
      if (!already && !target.empty()) {
        size_t worst = 0;
        for (size_t j = 1; j < target.size(); ++j)
          if (score_of(target[j]) < score_of(target[worst])) worst = j;
        if (score_of(id) >= score_of(target[worst])) {
          target[worst] = id;
          event.applied = true;
        }
      }
      events.push_back(std::move(event));
    }
  }
  return events;
}

// ---------------------------------------------------------------------------
// Run loop

std::string make_run_id(const EvolutionConfig &config, Backend backend) {
  unsigned long long h = config.rng_seed;
  h = fnv_mix(h, static_cast<unsigned long long>(config.params.k));
  h = fnv_mix(h, static_cast<unsigned long long>(config.params.G));
  h = fnv_mix(h, backend == Backend::GIN ? 1ull : 2ull);
  return "r" + hex64(h);
}

namespace {

std::mt19937_64 slot_rng(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  return std::mt19937_64(fnv_mix(fnv_mix(fnv_mix(seed, a), b), c));
}

struct RunState {
  std::vector<std::string> score_lines{"generation,island,form,level,score"};
  std::vector<std::string> event_lines;
  std::vector<double> best_series;
  double best_score = -1.0;
  std::string best_id;
  bool any_l3 = false;
  int l1_count = 0;
  int l2_count = 0;

  void note(const CandidateRecord &r, const std::string &form_name) {
    char line[192];
    std::snprintf(line, sizeof(line), "%d,%d,%s,%s,%.4f", r.generation,
                  r.island, form_name.c_str(), to_string(r.result.level_reached),
                  r.result.score);
    score_lines.push_back(line);
    if (r.result.level_reached == CascadeLevel::L3Complete) {
      any_l3 = true;
      if (r.result.score > best_score) {
        best_score = r.result.score;
        best_id = r.id;
      }
    } else if (r.result.level_reached == CascadeLevel::L1Failed) {
      ++l1_count;
    } else {
      ++l2_count;
    }
  }
};

}  // namespace

EvolutionResult run_evolution(const std::vector<AnnotatedSeed> &seeds,
                              const EvolutionConfig &config,
                              EvalHarness &harness, AgentProvider &provider,
                              EmbeddingProvider &embedder, CandidateStore &store,
                              const AgentContext &ctx) {
  config.params.validate();
  if (seeds.empty())
    throw Error(ErrorCode::ConfigError, "evolution requires at least one seed");
  const SearchParams &p = config.params;
  const std::string run_id = make_run_id(config, ctx.backend);

  std::string meta_dir;
  if (!config.run_dir.empty()) {
    meta_dir = config.run_dir + "/meta";
    std::filesystem::create_directories(meta_dir);
  }

  RunState state;
  MapElitesArchive archive;
  std::vector<Island> islands;
  std::vector<std::vector<const CandidateRecord *>> per_generation(
      static_cast<size_t>(p.G) + 1);

  JudgeFn judge_fn = [&](CascadeStage stage, const std::string &source,
                         const std::string &diagnostics) -> Feedback {
    std::string diag = trim(diagnostics).empty() ? "(no diagnostics captured)"
                                                 : diagnostics;
    try {
      return judge(source, diag, stage, ctx, provider, config.retry);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::ProviderError) throw;
      state.event_lines.push_back(std::string("judge_unavailable,") + e.what());
      Feedback fallback;
      fallback.level = stage;
      return fallback;
    }
  };

  auto evaluate = [&](const std::string &id, std::string source,
                      const OptimizationDirective &directive,
                      std::optional<MutationForm> form,
                      std::optional<std::string> parent_id, int g,
                      int i) -> const CandidateRecord & {
    CandidateRecord r;
    r.id = id;
    r.run_id = run_id;
    r.island = i;
    r.generation = g;
    r.parent_id = std::move(parent_id);
    r.form = form;
    r.source = std::move(source);
    r.directive = directive;
    r.embedding = embedder.embed(r.source);
    r.result = cascade_eval({r.source, r.directive}, harness, config.topology,
                            config.reps, judge_fn);
    r.created_at = iso8601_now();
    store.insert(r);
    return store.get(id);
  };

  auto admit = [&](const CandidateRecord &r) {
    per_generation[r.generation].push_back(&r);
    if (r.result.score > 0.0) {
      archive.insert(r);
      auto &pop = islands[r.island].population;
      pop.push_back(r.id);
      if (pop.size() > static_cast<size_t>(p.capacity)) {
        size_t worst = 0;
        for (size_t j = 1; j < pop.size(); ++j)
          if (store.get(pop[j]).result.score <
              store.get(pop[worst]).result.score)
            worst = j;
        pop.erase(pop.begin() + worst);
      }
    }
  };

  // Generation 0: one seed per island; islands past the seed list are
  // re-seeded as directive variants of the first seed.
  std::string seed0_id;
  for (int i = 0; i < p.k; ++i) {
    std::string id = run_id + "-g0-i" + std::to_string(i) + "-a0";
    islands.push_back({i, {}, p.capacity, id});
    if (i == 0) seed0_id = id;

    const CandidateRecord *record = store.find(id);
    if (!record) {
      std::string source;
      OptimizationDirective directive;
      if (i < static_cast<int>(seeds.size())) {
        source = seeds[i].source;
        directive = seeds[i].directive;
      } else {
        source = seeds[0].source;
        directive = seeds[0].directive;
        bool reseeded = false;
        try {
          CompletionRequest request;
          request.role = "reseed";
          request.prompt =
              "Produce a semantically different variant of this baseline by "
              "choosing another directive configuration. " +
              std::string(form_instruction(MutationForm::Rewrite)) +
              "\n\nBaseline:\n" + render_directive(directive) + "\n" + source;
          request.temperature = p.tau_high;
          request.tags = {{"island", std::to_string(i)}};
          std::string response =
              complete_with_retry(provider, request, config.retry);
          Mutation m =
              parse_mutation_response(response, MutationForm::Rewrite, source);
          source = std::move(m.source);
          directive = m.directive;
          reseeded = true;
        } catch (const Error &e) {
          if (e.code() != ErrorCode::ProviderError &&
              e.code() != ErrorCode::MutationRejected)
            throw;
        }
        if (!reseeded) {
          // Deterministic fallback: vary the issuance granularity only;
          // switching backends would contradict the seed's call sites.
          static const Issuer kIssuers[] = {Issuer::CoopCta, Issuer::CoopThread,
                                            Issuer::CoopWarp};
          directive.issuer = kIssuers[i % 3];
          state.event_lines.push_back("reseed_fallback," + std::to_string(i));
        }
      }
      record = &evaluate(id, std::move(source), directive, std::nullopt,
                         std::nullopt, 0, i);
    }
    state.note(*record, "seed");
    admit(*record);
    if (record->result.score <= 0.0)
      state.event_lines.push_back("seed_failed," + std::to_string(i));
  }
  state.best_series.push_back(std::max(state.best_score, 0.0));

  std::string scratchpad;
  std::string meta_recommendations;

  for (int g = 1; g <= p.G; ++g) {
    // Meta pass over the previous generation, cached per run directory.
    if (config.use_meta) {
      std::string cache_path =
          meta_dir.empty() ? "" : meta_dir + "/gen_" + std::to_string(g - 1) +
                                      ".json";
      bool loaded = false;
      if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
        auto j = nlohmann::json::parse(read_file(cache_path));
        scratchpad = j.value("scratchpad", scratchpad);
        meta_recommendations = j.value("recommendations_text", "");
        loaded = true;
      }
      if (!loaded) {
        std::vector<CandidateDigestEntry> batch;
        for (const CandidateRecord *r : per_generation[g - 1]) {
          CandidateDigestEntry e;
          e.id = r->id;
          e.score = r->result.score;
          e.form = r->form ? to_string(*r->form) : "seed";
          e.level = to_string(r->result.level_reached);
          if (r->result.feedback) {
            e.strategy = r->result.feedback->strategy_summary;
            e.feedback_note = r->result.feedback->top_improvement;
          }
          batch.push_back(std::move(e));
        }
        try {
          MetaRecommendations meta =
              meta_summarize(batch, scratchpad, provider, config.retry);
          scratchpad = meta.scratchpad;
          meta_recommendations = join_lines(meta.recommendations);
          if (!cache_path.empty()) {
            nlohmann::ordered_json j;
            j["digest"] = meta.digest;
            j["scratchpad"] = meta.scratchpad;
            j["recommendations"] = meta.recommendations;
            j["recommendations_text"] = meta_recommendations;
            write_file(cache_path, j.dump(2) + "\n");
          }
        } catch (const Error &e) {
          if (e.code() != ErrorCode::ProviderError) throw;
          state.event_lines.push_back(std::string("meta_unavailable,") +
                                      e.what());
          meta_recommendations.clear();
        }
      }
    }

    for (int i = 0; i < p.k; ++i) {
      if (islands[i].population.empty()) {
        state.event_lines.push_back("skip_empty_island," + std::to_string(g) +
                                    "," + std::to_string(i));
        continue;
      }
      std::mt19937_64 parent_rng = slot_rng(config.rng_seed, g, i, 0x5052);
      const std::string &parent_id =
          select_parent(islands[i], p.beta, store, parent_rng);
      const CandidateRecord &parent = store.get(parent_id);

      for (int attempt = 0; attempt < 3; ++attempt) {
        std::string id = run_id + "-g" + std::to_string(g) + "-i" +
                         std::to_string(i) + "-a" + std::to_string(attempt);
        if (const CandidateRecord *existing = store.find(id)) {
          state.note(*existing, existing->form ? to_string(*existing->form)
                                               : "seed");
          admit(*existing);
          break;
        }

        std::mt19937_64 rng = slot_rng(config.rng_seed, g, i, attempt + 1);
        MutateInputs inputs{&parent, g, i, attempt, meta_recommendations};
        Mutation mutation;
        try {
          mutation = llm_mutate(inputs, archive, store, p, p.G, provider,
                                config.retry, rng);
        } catch (const MutationRejected &e) {
          CandidateRecord r;
          r.id = id;
          r.run_id = run_id;
          r.island = i;
          r.generation = g;
          r.parent_id = parent_id;
          r.form = e.form;
          r.source = e.source.empty() ? parent.source : e.source;
          r.directive = parent.directive;
          r.embedding = embedder.embed(r.source);
          r.result.level_reached = CascadeLevel::L1Failed;
          r.result.score = 0.0;
          r.result.diagnostics = std::string("mutation rejected: ") + e.what();
          r.created_at = iso8601_now();
          store.insert(r);
          state.note(store.get(id), to_string(e.form));
          per_generation[g].push_back(&store.get(id));
          break;
        } catch (const Error &e) {
          if (e.code() != ErrorCode::ProviderError) throw;
          state.event_lines.push_back("provider_unavailable," +
                                      std::to_string(g) + "," +
                                      std::to_string(i));
          break;
        }

        std::vector<float> embedding = embedder.embed(mutation.source);
        NoveltyOutcome novelty =
            store.novelty_check(embedding, p.novelty_threshold);
        if (!novelty.accepted) {
          char line[160];
          std::snprintf(line, sizeof(line), "novelty_reject,%d,%d,%d,%s,%.4f",
                        g, i, attempt, novelty.nearest_id.c_str(),
                        novelty.similarity);
          state.event_lines.push_back(line);
          continue;  // resample
        }

        const CandidateRecord &record =
            evaluate(id, std::move(mutation.source), mutation.directive,
                     mutation.form, parent_id, g, i);
        state.note(record, to_string(mutation.form));
        admit(record);
        break;
      }
    }

    if (g % p.G_m == 0 && p.k >= 2) {
      std::mt19937_64 mrng = slot_rng(config.rng_seed, g, 0x4d49, 0);
      for (const MigrationEvent &event :
           migrate(islands, p.migration_k, store, mrng)) {
        state.event_lines.push_back(
            "migrate," + std::to_string(g) + "," +
            std::to_string(event.source_island) + "," +
            std::to_string(event.target_island) + "," + event.candidate_id +
            "," + (event.applied ? "applied" : "skipped"));
      }
    }
    state.best_series.push_back(std::max(state.best_score, 0.0));
  }

  EvolutionResult result;
  result.run_id = run_id;
  result.best_series = state.best_series;
  if (state.any_l3) {
    result.best = store.get(state.best_id);
  } else {
    result.no_viable = true;
    result.best = store.get(seed0_id);
    result.diagnostics = "no candidate reached the benchmark level (" +
                         std::to_string(state.l1_count) + " compile failures, " +
                         std::to_string(state.l2_count) + " verify failures)";
  }

  if (!config.run_dir.empty()) {
    write_file(config.run_dir + "/score_log.csv",
               join_lines(state.score_lines));
    std::vector<std::string> series_lines{"generation,best_score"};
    for (size_t g = 0; g < state.best_series.size(); ++g) {
      char line[64];
      std::snprintf(line, sizeof(line), "%zu,%.4f", g, state.best_series[g]);
      series_lines.push_back(line);
    }
    write_file(config.run_dir + "/best_series.csv", join_lines(series_lines));
    write_file(config.run_dir + "/events.log", join_lines(state.event_lines));
    write_file(config.run_dir + "/best_program.cu", result.best.source);
    write_file(config.run_dir + "/best_record.json",
               record_to_json(result.best).dump(2) + "\n");
  }
  return result;
}

}  // namespace cofuse
