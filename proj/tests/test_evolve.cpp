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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <random>

#include "cofuse/sim_harness.hpp"
#include "cofuse/util.hpp"
#include "test_util.hpp"

using namespace cofuse;
using cofuse_test::TempDir;

namespace {

std::string seed_source() { return cofuse_test::fixture("seed_gin.cu"); }

// Every scripted offspring differs from the seed only on line 12 (the
// schedule comment inside the evolve block), so diff and rewrite responses
// produce byte-identical programs no matter which form the search draws.
std::string with_line12(const std::string &src, const std::string &text) {
  auto lines = split_lines(src);
  REQUIRE(lines.size() >= 12);
  lines[11] = text;
  return join_lines(lines);
}

OptimizationDirective gin_directive(const std::string &placement,
                                    const std::string &chunk,
                                    Issuer issuer = Issuer::CoopCta) {
  OptimizationDirective d = conservative_directive(Backend::GIN);
  d.issuer = issuer;
  d.placement.text = placement;
  d.sync_scope.text = "global scope";
  d.chunk_size.text = chunk;
  return d;
}

std::string rewrite_response(const OptimizationDirective &d,
                             const std::string &src) {
  return render_directive(d) + "=== SOURCE ===\n" + src + "=== END ===\n";
}

std::string diff_response(const OptimizationDirective &d, int line,
                          const std::string &replacement) {
  return render_directive(d) + "=== DIFF ===\n@@ " + std::to_string(line) +
         "," + std::to_string(line) + " @@\n" + replacement + "\n=== END ===\n";
}

CandidateRecord make_scored(const std::string &id, double score,
                            HashingEmbedder &emb,
                            const std::string &source_hint = "") {
  CandidateRecord r;
  r.id = id;
  r.run_id = "run";
  r.directive = conservative_directive(Backend::GIN);
  r.source = source_hint.empty() ? "kernel " + id : source_hint;
  r.result.level_reached =
      score > 0.0 ? CascadeLevel::L3Complete : CascadeLevel::L1Failed;
  r.result.score = score;
  r.embedding = emb.embed(r.source);
  r.created_at = "2026-01-01T00:00:00Z";
  return r;
}

// Scripted search: generation 1 moves to stream overlap, generation 2 to
// pipelined per-tile puts, generation 3 to a fused persistent block, and
// everything later converges on one final fused variant. Per-island suffixes
// keep both islands novel through generation 3.
void install_ladder(ScriptedMockProvider &mock, const std::string &seed) {
  struct Step {
    int g;
    std::string placement, chunk, line;
  };
  const std::vector<Step> steps = {
      {1, "overlap with the next compute phase", "single coarse slab",
       "  // schedule: comm_stream overlap with the next compute phase"},
      {2, "pipelined per tile", "fine per-tile chunks",
       "  // schedule: pipelined per-tile puts with deferred wait"},
      {3, "fused persistent kernel", "medium split batches",
       "  // schedule: persistent fused communication block"},
  };
  for (const Step &step : steps) {
    for (int i = 0; i < 2; ++i) {
      std::string line = step.line + (i == 0 ? " [alpha]" : " [beta]");
      OptimizationDirective d = gin_directive(step.placement, step.chunk);
      std::map<std::string, std::string> base = {
          {"generation", std::to_string(step.g)},
          {"island", std::to_string(i)}};
      auto tagged = [&base](const char *form) {
        auto t = base;
        t["form"] = form;
        return t;
      };
      std::string full = rewrite_response(d, with_line12(seed, line));
      mock.add_keyed("mutate", tagged("rewrite"), full);
      mock.add_keyed("mutate", tagged("crossover"), full);
      mock.add_keyed("mutate", tagged("diff"), diff_response(d, 12, line));
    }
  }

  std::string final_line = "  // schedule: persistent fused final form";
  OptimizationDirective fd =
      gin_directive("persistent fused kernel, final", "single bulk slab");
  std::string final_full = rewrite_response(fd, with_line12(seed, final_line));
  mock.add_keyed("mutate", {{"form", "rewrite"}}, final_full);
  mock.add_keyed("mutate", {{"form", "crossover"}}, final_full);
  mock.add_keyed("mutate", {{"form", "diff"}}, diff_response(fd, 12, final_line));

  OptimizationDirective rd =
      gin_directive("fully deferred", "single bulk slab", Issuer::CoopThread);
  mock.set_default(
      "reseed",
      rewrite_response(
          rd, with_line12(seed, "  // schedule: bulk exchange issued at "
                                "thread scope")));

  mock.set_default("judge",
                   "strategy: staged exchange\n"
                   "improvement: overlap communication with compute\n");
  mock.set_default("meta_digest", "scores climbed with overlap then fusion");
  mock.set_default("meta_scratchpad",
                   "tried: bulk, overlap, pipelined, fused");
  mock.set_default("meta_recommend",
                   "1. push toward persistent fused kernels\n"
                   "2. refine chunk sizes");
}

AnnotatedSeed make_seed() {
  AnnotatedSeed seed;
  seed.source = seed_source();
  seed.directive = conservative_directive(Backend::GIN);
  return seed;
}

EvolutionConfig ladder_config(const std::string &run_dir) {
  EvolutionConfig config;
  config.params.k = 2;
  config.params.G = 6;
  config.params.alpha = 0.4;
  config.params.G_m = 3;
  config.params.migration_k = 2;
  config.params.beta = 1.0;
  // Scripted offspring legitimately revisit one line; only exact duplicates
  // should be resampled.
  config.params.novelty_threshold = 1.0;
  config.reps = 3;
  config.rng_seed = 42;
  config.run_dir = run_dir;
  config.retry = RetryPolicy{3, 1};
  config.use_meta = true;
  return config;
}

AgentContext test_context() {
  HarnessSpec spec;
  spec.compile_flags = "-arch=sm_90";
  spec.ranks = 2;
  HardwareContext hw = extract_hardware_context(
      spec, cofuse_test::data_path("gpu_arch_table.json"));
  return assemble_context(Backend::GIN, hw, cofuse_test::data_path("kb"));
}

// Sim harness whose Nth compile reports the infrastructure as down.
class FlakyHarness : public EvalHarness {
 public:
  explicit FlakyHarness(int fail_at) : _fail_at(fail_at) {}

  CompileOutcome compile(const ProgramVariant &variant) override {
    if (++_compiles == _fail_at)
      throw Error(ErrorCode::HarnessUnavailable, "injected outage");
    return _inner.compile(variant);
  }
  RunOutcome run_verify(const std::string &artifact,
                        const Topology &topology) override {
    return _inner.run_verify(artifact, topology);
  }
  BenchOutcome run_benchmark(const std::string &artifact,
                             const Topology &topology, int reps) override {
    return _inner.run_benchmark(artifact, topology, reps);
  }

 private:
  SimHarness _inner;
  int _fail_at;
  int _compiles = 0;
};

}  // namespace

TEST_CASE("phase schedule") {
  CHECK(choose_phase(1, 18, 0.4) == Phase::Explore);
  CHECK(choose_phase(7, 18, 0.4) == Phase::Explore);   // 7 <= 7.2
  CHECK(choose_phase(8, 18, 0.4) == Phase::Exploit);   // 8 > 7.2
  CHECK(choose_phase(18, 18, 0.4) == Phase::Exploit);

  // Boundary generation g = alpha*G stays in Explore.
  CHECK(choose_phase(4, 10, 0.4) == Phase::Explore);
  CHECK(choose_phase(5, 10, 0.4) == Phase::Exploit);

  // Exactly floor(alpha*G) generations explore.
  int explores = 0;
  for (int g = 1; g <= 18; ++g)
    if (choose_phase(g, 18, 0.4) == Phase::Explore) ++explores;
  CHECK(explores == 7);
}

TEST_CASE("search parameter validation") {
  SearchParams p;
  CHECK_NOTHROW(p.validate());

  auto expect_code = [](SearchParams bad, ErrorCode code) {
    try {
      bad.validate();
      FAIL("expected validation error");
    } catch (const Error &e) {
      CHECK(e.code() == code);
    }
  };

  SearchParams bad = p;
  bad.explore_weights = {0.3, 0.6, 0.3};  // sums to 1.2
  expect_code(bad, ErrorCode::InvalidWeights);

  bad = p;
  bad.exploit_weights = {-0.1, 0.95, 0.15};
  expect_code(bad, ErrorCode::InvalidWeights);

  bad = p;
  bad.explore_weights = {0.6, 0.25, 0.15};  // rewrite must dominate diff
  expect_code(bad, ErrorCode::InvalidWeights);

  bad = p;
  bad.exploit_weights = {0.25, 0.6, 0.15};  // diff must dominate rewrite
  expect_code(bad, ErrorCode::InvalidWeights);

  bad = p;
  bad.alpha = 0.0;
  expect_code(bad, ErrorCode::ConfigError);
  bad.alpha = 1.0;
  expect_code(bad, ErrorCode::ConfigError);

  bad = p;
  bad.k = 0;
  expect_code(bad, ErrorCode::ConfigError);
  bad = p;
  bad.G = 0;
  expect_code(bad, ErrorCode::ConfigError);
  bad = p;
  bad.beta = -0.5;
  expect_code(bad, ErrorCode::ConfigError);
  bad = p;
  bad.capacity = 0;
  expect_code(bad, ErrorCode::ConfigError);
  bad = p;
  bad.novelty_threshold = 0.0;
  expect_code(bad, ErrorCode::ConfigError);
  bad = p;
  bad.tau_low = 0.0;
  expect_code(bad, ErrorCode::ConfigError);
}

TEST_CASE("mutation form frequencies track the phase weights") {
  SearchParams p;
  std::mt19937_64 rng(123);
  const int n = 10000;

  auto frequencies = [&](Phase phase) {
    std::map<MutationForm, int> counts;
    for (int i = 0; i < n; ++i) ++counts[sample_mutation_form(phase, p, rng)];
    return counts;
  };

  auto explore = frequencies(Phase::Explore);
  CHECK(std::abs(explore[MutationForm::Rewrite] / double(n) - 0.60) < 0.02);
  CHECK(std::abs(explore[MutationForm::Diff] / double(n) - 0.25) < 0.02);
  CHECK(std::abs(explore[MutationForm::Crossover] / double(n) - 0.15) < 0.02);

  auto exploit = frequencies(Phase::Exploit);
  CHECK(std::abs(exploit[MutationForm::Diff] / double(n) - 0.60) < 0.02);
  CHECK(std::abs(exploit[MutationForm::Rewrite] / double(n) - 0.25) < 0.02);
  CHECK(std::abs(exploit[MutationForm::Crossover] / double(n) - 0.15) < 0.02);

  // Degenerate weights are deterministic.
  p.explore_weights = {0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i)
    CHECK(sample_mutation_form(Phase::Explore, p, rng) == MutationForm::Rewrite);
}

TEST_CASE("parent selection is fitness-weighted") {
  HashingEmbedder emb(16);
  CandidateStore store;
  store.insert(make_scored("p9", 9.0, emb));
  store.insert(make_scored("p3", 3.0, emb));
  Island island{0, {"p9", "p3"}, 16, "p9"};
  std::mt19937_64 rng(2026);
  const int n = 10000;

  SUBCASE("score^beta proportionality at beta=2") {
    int nine = 0;
    for (int i = 0; i < n; ++i)
      if (select_parent(island, 2.0, store, rng) == "p9") ++nine;
    // 81 / (81 + 9) = 0.9
    CHECK(std::abs(nine / double(n) - 0.9) < 0.02);
  }
  SUBCASE("beta=0 is uniform") {
    int nine = 0;
    for (int i = 0; i < n; ++i)
      if (select_parent(island, 0.0, store, rng) == "p9") ++nine;
    CHECK(std::abs(nine / double(n) - 0.5) < 0.02);
  }
  SUBCASE("zero-score members are unselectable next to a scorer") {
    CandidateStore s2;
    s2.insert(make_scored("alive", 10.0, emb));
    s2.insert(make_scored("dead", 0.0, emb));
    Island i2{0, {"alive", "dead"}, 16, "alive"};
    for (int i = 0; i < 500; ++i)
      CHECK(select_parent(i2, 1.0, s2, rng) == "alive");
  }
  SUBCASE("all-zero scores fall back to uniform") {
    CandidateStore s2;
    s2.insert(make_scored("z1", 0.0, emb));
    s2.insert(make_scored("z2", 0.0, emb));
    Island i2{0, {"z1", "z2"}, 16, "z1"};
    int first = 0;
    for (int i = 0; i < n; ++i)
      if (select_parent(i2, 1.0, s2, rng) == "z1") ++first;
    CHECK(std::abs(first / double(n) - 0.5) < 0.02);
  }
  SUBCASE("empty island throws") {
    Island empty{3, {}, 16, ""};
    try {
      select_parent(empty, 1.0, store, rng);
      FAIL("expected EmptyIsland");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::EmptyIsland);
    }
  }
}

TEST_CASE("patch parsing") {
  auto hunks = parse_patch("@@ 3,5 @@\nfoo\nbar\n@@ 9,9 @@\nbaz\n");
  REQUIRE(hunks.size() == 2);
  CHECK(hunks[0].first == 3);
  CHECK(hunks[0].last == 5);
  CHECK(hunks[0].lines == std::vector<std::string>{"foo", "bar"});
  CHECK(hunks[1].first == 9);
  CHECK(hunks[1].lines == std::vector<std::string>{"baz"});

  CHECK(parse_patch("").empty());
  CHECK(parse_patch("  \n\n").empty());

  auto expect_malformed = [](const std::string &text) {
    try {
      parse_patch(text);
      FAIL("expected MalformedPatch for: ", text);
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::MalformedPatch);
    }
  };
  expect_malformed("@@ x,y @@\nfoo\n");
  expect_malformed("@@ 5,4 @@\nfoo\n");        // reversed range
  expect_malformed("@@ 0,2 @@\nfoo\n");        // lines are 1-based
  expect_malformed("stray text\n@@ 3,3 @@\n");  // text before first header
  expect_malformed("@@ 3,6 @@\na\n@@ 5,7 @@\nb\n");  // overlap
  expect_malformed("@@ 6,7 @@\na\n@@ 2,3 @@\nb\n");  // unsorted
}

TEST_CASE("apply_diff edits only evolve-block interiors") {
  std::string seed = seed_source();
  auto seed_lines = split_lines(seed);

  SUBCASE("single in-block line replacement") {
    std::string out =
        apply_diff(seed, "@@ 12,12 @@\n  // schedule: overlapped\n");
    auto lines = split_lines(out);
    REQUIRE(lines.size() == seed_lines.size());
    for (size_t i = 0; i < lines.size(); ++i) {
      if (i == 11)
        CHECK(lines[i] == "  // schedule: overlapped");
      else
        CHECK(lines[i] == seed_lines[i]);
    }
    CHECK(outside_block_signature(out) == outside_block_signature(seed));
  }
  SUBCASE("insertion and deletion") {
    std::string grown = apply_diff(seed, "@@ 13,13 @@\nline a\nline b\n");
    CHECK(split_lines(grown).size() == seed_lines.size() + 1);
    std::string shrunk = apply_diff(seed, "@@ 13,17 @@\n");
    CHECK(split_lines(shrunk).size() == seed_lines.size() - 5);
    CHECK(outside_block_signature(shrunk) == outside_block_signature(seed));
  }
  SUBCASE("empty patch is the identity") {
    CHECK(apply_diff(seed, "") == seed);
  }
  SUBCASE("touching a marker line is a frozen edit") {
    try {
      apply_diff(seed, "@@ 9,9 @@\nweaker marker\n");
      FAIL("expected FrozenRegionEdit");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::FrozenRegionEdit);
      CHECK(std::string(e.what()).find("line 9") != std::string::npos);
    }
  }
  SUBCASE("spanning past the end marker is a frozen edit") {
    CHECK_THROWS_AS((void)apply_diff(seed, "@@ 19,22 @@\nx\n"), Error);
  }
  SUBCASE("editing host code is a frozen edit") {
    try {
      apply_diff(seed, "@@ 28,28 @@\n  cudaMalloc(&send, 1 << 20);\n");
      FAIL("expected FrozenRegionEdit");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::FrozenRegionEdit);
      CHECK(std::string(e.what()).find("line 28") != std::string::npos);
    }
  }
  SUBCASE("replacement may not smuggle in new markers") {
    try {
      apply_diff(seed, "@@ 12,12 @@\n// EVOLVE-BLOCK-END\n");
      FAIL("expected FrozenRegionEdit");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::FrozenRegionEdit);
      CHECK(std::string(e.what()).find("marker") != std::string::npos);
    }
  }
  SUBCASE("range past the file is malformed") {
    try {
      apply_diff(seed, "@@ 12,4000 @@\nx\n");
      FAIL("expected MalformedPatch");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::MalformedPatch);
    }
  }
}

TEST_CASE("apply_diff fuzz against a splice oracle") {
  std::string seed = seed_source();
  auto seed_lines = split_lines(seed);
  std::mt19937 rng(20260815);
  // Interior of the seed's single evolve block.
  const int lo = 10, hi = 20;
  std::uniform_int_distribution<int> first_dist(lo, hi);
  std::uniform_int_distribution<int> extra(0, 3);

  for (int t = 0; t < 1000; ++t) {
    int first = first_dist(rng);
    std::uniform_int_distribution<int> last_dist(first, hi);
    int last = last_dist(rng);
    int n = extra(rng);
    std::vector<std::string> body;
    std::string patch = "@@ " + std::to_string(first) + "," +
                        std::to_string(last) + " @@\n";
    for (int j = 0; j < n; ++j) {
      body.push_back("  int fuzz_" + std::to_string(t) + "_" +
                     std::to_string(j) + " = 0;");
      patch += body.back() + "\n";
    }

    std::string got = apply_diff(seed, patch);

    std::vector<std::string> want = seed_lines;
    want.erase(want.begin() + (first - 1), want.begin() + last);
    want.insert(want.begin() + (first - 1), body.begin(), body.end());
    CHECK(got == join_lines(want));
    CHECK(outside_block_signature(got) == outside_block_signature(seed));
  }

  // Every line outside the interior is rejected.
  for (int line = 1; line <= static_cast<int>(seed_lines.size()); ++line) {
    if (line >= lo && line <= hi) continue;
    std::string patch =
        "@@ " + std::to_string(line) + "," + std::to_string(line) + " @@\nx\n";
    try {
      apply_diff(seed, patch);
      FAIL("expected FrozenRegionEdit at line ", line);
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::FrozenRegionEdit);
    }
  }
}

TEST_CASE("mutation response protocol") {
  std::string seed = seed_source();
  OptimizationDirective d =
      gin_directive("overlap with compute", "single coarse slab");
  std::string offspring = with_line12(seed, "  // schedule: overlapped");

  SUBCASE("rewrite round trip") {
    Mutation m = parse_mutation_response(rewrite_response(d, offspring),
                                         MutationForm::Rewrite, seed);
    CHECK(m.form == MutationForm::Rewrite);
    CHECK(m.source == offspring);
    CHECK(m.directive.placement.text == "overlap with compute");
    CHECK(m.directive.backend == Backend::GIN);
  }
  SUBCASE("diff applies to the parent") {
    Mutation m = parse_mutation_response(
        diff_response(d, 12, "  // schedule: overlapped"), MutationForm::Diff,
        seed);
    CHECK(m.source == offspring);
  }
  SUBCASE("the end marker truncates trailing chatter") {
    std::string response =
        rewrite_response(d, offspring) + "hope that helps!\n";
    Mutation m = parse_mutation_response(response, MutationForm::Rewrite, seed);
    CHECK(m.source == offspring);
  }

  auto expect_rejected = [&](const std::string &response, MutationForm form,
                             const std::string &needle) {
    try {
      parse_mutation_response(response, form, seed);
      FAIL("expected MutationRejected for ", needle);
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::MutationRejected);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  SUBCASE("payload type must match the form") {
    expect_rejected(rewrite_response(d, offspring), MutationForm::Diff,
                    "diff form requires a patch payload");
    expect_rejected(diff_response(d, 12, "x"), MutationForm::Rewrite,
                    "rewrite and crossover require a full program");
    expect_rejected(diff_response(d, 12, "x"), MutationForm::Crossover,
                    "rewrite and crossover require a full program");
  }
  SUBCASE("missing payload section") {
    expect_rejected(render_directive(d) + "no payload here\n",
                    MutationForm::Rewrite, "no payload section");
  }
  SUBCASE("broken directive head") {
    expect_rejected("not a directive\n=== SOURCE ===\n" + offspring,
                    MutationForm::Rewrite, "directive:");
  }
  SUBCASE("rewrite touching frozen bytes") {
    std::string tampered = offspring;
    size_t pos = tampered.find("launch_exchange");
    REQUIRE(pos != std::string::npos);
    tampered.replace(pos, 15, "launch_modified");
    expect_rejected(rewrite_response(d, tampered), MutationForm::Rewrite,
                    "outside evolve blocks");
  }
  SUBCASE("diff touching frozen lines") {
    expect_rejected(diff_response(d, 24, "void other();"), MutationForm::Diff,
                    "outside evolve blocks");
  }
}

TEST_CASE("strategy classification") {
  CHECK(classify_strategy("persistent kernel with warp-specialized roles", "") ==
        "fused-kernel");
  CHECK(classify_strategy("cudaStreamCreateWithPriority(&comm_stream, ...)",
                          "") == "stream-overlap");
  CHECK(classify_strategy("split the puts and issue a deferred wait", "") ==
        "split-put-wait");
  CHECK(classify_strategy("plain exchange", "") == "other");
  // The judge's summary is only a fallback.
  CHECK(classify_strategy("plain exchange", "uses a fused block") ==
        "fused-kernel");
  CHECK(classify_strategy("overlap in source wins", "split per judge") ==
        "stream-overlap");
  CHECK(classify_strategy(seed_source(), "") == "other");
}

TEST_CASE("map-elites archive keeps the best per cell") {
  HashingEmbedder emb(16);
  MapElitesArchive archive;

  auto rec = [&](const std::string &id, double score, Issuer issuer,
                 const std::string &src) {
    CandidateRecord r = make_scored(id, score, emb, src);
    r.directive.issuer = issuer;
    return r;
  };

  CHECK_FALSE(archive.insert(rec("dead", 0.0, Issuer::CoopCta, "fused body")));
  CHECK(archive.size() == 0);

  CHECK(archive.insert(rec("a", 100.0, Issuer::CoopCta, "fused body")));
  CHECK(archive.size() == 1);

  // Same cell, lower score: unchanged. Higher score: replaced.
  CHECK_FALSE(archive.insert(rec("b", 90.0, Issuer::CoopCta, "fused variant")));
  CHECK(archive.cells().begin()->second == "a");
  CHECK(archive.insert(rec("c", 120.0, Issuer::CoopCta, "fused rework")));
  CHECK(archive.size() == 1);
  CHECK(archive.cells().begin()->second == "c");

  // Different issuer or strategy opens a new cell.
  CHECK(archive.insert(rec("d", 50.0, Issuer::CoopWarp, "fused body")));
  CHECK(archive.insert(rec("e", 50.0, Issuer::CoopCta, "overlap body")));
  CHECK(archive.size() == 3);

  // Different backends never share a cell.
  CandidateRecord lsa = rec("f", 50.0, Issuer::CoopCta, "fused body");
  lsa.directive = conservative_directive(Backend::LSA);
  lsa.source = "fused body";
  CHECK(archive.insert(lsa));
  CHECK(archive.size() == 4);
  CHECK(MapElitesArchive::cell_key(lsa) !=
        MapElitesArchive::cell_key(rec("g", 1.0, Issuer::CoopCta, "fused body")));

  SUBCASE("sampling is bounded and deterministic") {
    std::mt19937_64 r1(7), r2(7);
    auto s1 = archive.sample(r1, 2);
    auto s2 = archive.sample(r2, 2);
    CHECK(s1.size() == 2);
    CHECK(s1 == s2);
    std::mt19937_64 r3(7);
    CHECK(archive.sample(r3, 99).size() == archive.size());
  }
}

TEST_CASE("llm_mutate assembles phased context") {
  std::string seed = seed_source();
  HashingEmbedder emb(64);
  CandidateStore store;

  CandidateRecord parent = make_scored("run-g0-i0-a0", 98.9609, emb, seed);
  Feedback fb;
  fb.level = CascadeStage::Benchmark;
  fb.strategy_summary = "conservative bulk exchange";
  fb.top_improvement = "overlap the puts with compute";
  parent.result.feedback = fb;
  store.insert(parent);

  MapElitesArchive archive;
  SearchParams params;
  params.novelty_threshold = 1.0;
  ScriptedMockProvider mock;
  OptimizationDirective d =
      gin_directive("overlap with the next compute phase", "single coarse slab");
  std::string offspring = with_line12(seed, "  // schedule: overlapped puts");
  mock.add_keyed("mutate", {{"form", "rewrite"}}, rewrite_response(d, offspring));
  mock.add_keyed("mutate", {{"form", "crossover"}},
                 rewrite_response(d, offspring));
  mock.add_keyed("mutate", {{"form", "diff"}},
                 diff_response(d, 12, "  // schedule: overlapped puts"));

  MutateInputs in{&store.get("run-g0-i0-a0"), 1, 0, 0,
                  "push toward persistent fused kernels"};
  std::mt19937_64 rng(7);
  Mutation m = llm_mutate(in, archive, store, params, 6, mock,
                          RetryPolicy{3, 1}, rng);

  // The offspring differs from the parent only inside the evolve block.
  auto parent_lines = split_lines(seed);
  auto child_lines = split_lines(m.source);
  REQUIRE(child_lines.size() == parent_lines.size());
  for (size_t i = 0; i < child_lines.size(); ++i) {
    if (i == 11)
      CHECK(child_lines[i] != parent_lines[i]);
    else
      CHECK(child_lines[i] == parent_lines[i]);
  }

  REQUIRE(mock.transcript().size() == 1);
  const CompletionRequest &request = mock.transcript()[0].request;
  CHECK(request.role == "mutate");
  // Generation 1 of 6 at alpha 0.4 is Explore, so tau_high applies.
  CHECK(request.temperature == params.tau_high);
  CHECK(request.tags.at("phase") == "explore");
  CHECK(request.tags.at("generation") == "1");
  CHECK(request.tags.at("island") == "0");
  CHECK(request.tags.at("attempt") == "0");
  CHECK(request.tags.count("form") == 1);

  CHECK(request.prompt.find("run-g0-i0-a0") != std::string::npos);
  CHECK(request.prompt.find("optimization_directive:") != std::string::npos);
  CHECK(request.prompt.find("conservative bulk exchange") != std::string::npos);
  CHECK(request.prompt.find("overlap the puts with compute") !=
        std::string::npos);
  CHECK(request.prompt.find("push toward persistent fused kernels") !=
        std::string::npos);
  CHECK(request.prompt.find("Nearest stored candidates") != std::string::npos);
}

TEST_CASE("llm_mutate uses the low temperature in exploit") {
  std::string seed = seed_source();
  HashingEmbedder emb(64);
  CandidateStore store;
  store.insert(make_scored("p", 100.0, emb, seed));

  MapElitesArchive archive;
  SearchParams params;
  ScriptedMockProvider mock;
  OptimizationDirective d = gin_directive("fully deferred", "bulk");
  std::string offspring = with_line12(seed, "  // schedule: retuned");
  mock.add_keyed("mutate", {{"form", "rewrite"}}, rewrite_response(d, offspring));
  mock.add_keyed("mutate", {{"form", "crossover"}},
                 rewrite_response(d, offspring));
  mock.add_keyed("mutate", {{"form", "diff"}},
                 diff_response(d, 12, "  // schedule: retuned"));

  MutateInputs in{&store.get("p"), 5, 1, 2, ""};
  std::mt19937_64 rng(11);
  (void)llm_mutate(in, archive, store, params, 6, mock, RetryPolicy{3, 1}, rng);
  CHECK(mock.transcript()[0].request.temperature == params.tau_low);
  CHECK(mock.transcript()[0].request.tags.at("phase") == "exploit");
}

TEST_CASE("crossover carries two inspiration programs or degrades") {
  std::string seed = seed_source();
  HashingEmbedder emb(64);
  CandidateStore store;
  store.insert(make_scored("p", 100.0, emb, seed));
  store.insert(make_scored("insp1", 120.0, emb, "persistent fused body one"));
  store.insert(make_scored("insp2", 110.0, emb, "comm_stream overlap body two"));

  SearchParams params;
  params.explore_weights = {0.0, 0.0, 1.0};  // force crossover draws

  ScriptedMockProvider mock;
  OptimizationDirective d = gin_directive("fused", "bulk");
  std::string offspring = with_line12(seed, "  // schedule: combined");
  mock.add_keyed("mutate", {{"form", "crossover"}},
                 rewrite_response(d, offspring));
  mock.add_keyed("mutate", {{"form", "rewrite"}},
                 rewrite_response(d, offspring));

  SUBCASE("with two archive cells the prompt holds both programs") {
    MapElitesArchive archive;
    REQUIRE(archive.insert(store.get("insp1")));
    REQUIRE(archive.insert(store.get("insp2")));
    MutateInputs in{&store.get("p"), 1, 0, 0, ""};
    std::mt19937_64 rng(3);
    Mutation m =
        llm_mutate(in, archive, store, params, 6, mock, RetryPolicy{3, 1}, rng);
    CHECK(m.form == MutationForm::Crossover);
    const std::string &prompt = mock.transcript()[0].request.prompt;
    CHECK(prompt.find("Inspiration program 1") != std::string::npos);
    CHECK(prompt.find("Inspiration program 2") != std::string::npos);
    CHECK(prompt.find("persistent fused body one") != std::string::npos);
    CHECK(prompt.find("comm_stream overlap body two") != std::string::npos);
  }
  SUBCASE("an empty archive degrades the draw to rewrite") {
    MapElitesArchive archive;
    MutateInputs in{&store.get("p"), 1, 0, 0, ""};
    std::mt19937_64 rng(3);
    Mutation m =
        llm_mutate(in, archive, store, params, 6, mock, RetryPolicy{3, 1}, rng);
    CHECK(m.form == MutationForm::Rewrite);
    CHECK(mock.transcript()[0].request.tags.at("form") == "rewrite");
  }
}

TEST_CASE("llm_mutate surfaces structural violations as MutationRejected") {
  std::string seed = seed_source();
  HashingEmbedder emb(64);
  CandidateStore store;
  store.insert(make_scored("p", 100.0, emb, seed));

  SearchParams params;
  params.explore_weights = {1.0, 0.0, 0.0};  // force diff draws
  ScriptedMockProvider mock;
  OptimizationDirective d = gin_directive("fused", "bulk");
  mock.add_keyed("mutate", {{"form", "diff"}},
                 diff_response(d, 24, "void tampered_host();"));

  MapElitesArchive archive;
  MutateInputs in{&store.get("p"), 1, 0, 0, ""};
  std::mt19937_64 rng(5);
  try {
    llm_mutate(in, archive, store, params, 6, mock, RetryPolicy{3, 1}, rng);
    FAIL("expected MutationRejected");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::MutationRejected);
    CHECK(std::string(e.what()).find("outside evolve blocks") !=
          std::string::npos);
  }
}

TEST_CASE("migration copies top scorers and conserves island sizes") {
  HashingEmbedder emb(16);
  CandidateStore store;
  auto add = [&](const std::string &id, double score) {
    store.insert(make_scored(id, score, emb));
  };
  add("a", 50);
  add("b", 30);
  add("c", 20);
  add("d", 10);
  add("e", 40);
  add("f", 25);
  add("g", 15);
  add("h", 5);

  SUBCASE("two islands exchange their best") {
    std::vector<Island> islands = {{0, {"a", "b", "c", "d"}, 16, "a"},
                                   {1, {"e", "f", "g", "h"}, 16, "e"}};
    std::mt19937_64 rng(1);
    auto events = migrate(islands, 1, store, rng);
    REQUIRE(events.size() == 2);
    for (const auto &event : events) CHECK(event.applied);

    CHECK(islands[0].population.size() == 4);
    CHECK(islands[1].population.size() == 4);
    // a (50) displaced h (5); e (40) displaced d (10).
    auto has = [](const std::vector<std::string> &pop, const std::string &id) {
      return std::find(pop.begin(), pop.end(), id) != pop.end();
    };
    CHECK(has(islands[1].population, "a"));
    CHECK_FALSE(has(islands[1].population, "h"));
    CHECK(has(islands[0].population, "e"));
    CHECK_FALSE(has(islands[0].population, "d"));
    // Migrants keep their home seats: copy, not move.
    CHECK(has(islands[0].population, "a"));
    CHECK(has(islands[1].population, "e"));
  }
  SUBCASE("a migrant below every member is skipped") {
    add("strong1", 90);
    add("strong2", 80);
    add("weak", 8);
    std::vector<Island> islands = {{0, {"strong1", "strong2"}, 16, "strong1"},
                                   {1, {"weak"}, 16, "weak"}};
    std::mt19937_64 rng(1);
    auto events = migrate(islands, 1, store, rng);
    REQUIRE(events.size() == 2);
    // weak (8) cannot displace anyone on island 0.
    for (const auto &event : events) {
      if (event.source_island == 1) CHECK_FALSE(event.applied);
      if (event.source_island == 0) CHECK(event.applied);
    }
    CHECK(islands[0].population ==
          std::vector<std::string>{"strong1", "strong2"});
  }
  SUBCASE("an already-present migrant is not duplicated") {
    std::vector<Island> islands = {{0, {"a", "b"}, 16, "a"},
                                   {1, {"a", "c"}, 16, "a"}};
    std::mt19937_64 rng(1);
    auto events = migrate(islands, 1, store, rng);
    int copies = 0;
    for (const auto &id : islands[1].population)
      if (id == "a") ++copies;
    CHECK(copies == 1);
    REQUIRE(!events.empty());
    CHECK_FALSE(events[0].applied);
  }
  SUBCASE("single island is a no-op") {
    std::vector<Island> islands = {{0, {"a", "b"}, 16, "a"}};
    std::mt19937_64 rng(1);
    CHECK(migrate(islands, 2, store, rng).empty());
  }
  SUBCASE("top-k snapshot ignores same-round arrivals") {
    std::vector<Island> islands = {{0, {"a", "d"}, 16, "a"},
                                   {1, {"g", "h"}, 16, "g"}};
    std::mt19937_64 rng(1);
    auto events = migrate(islands, 2, store, rng);
    // Island 1 exports its own originals (g, h), never the a/d that just
    // landed there in this round.
    for (const auto &event : events)
      if (event.source_island == 1)
        CHECK((event.candidate_id == "g" || event.candidate_id == "h"));
  }
}

TEST_CASE("run id is a pure function of the configuration") {
  EvolutionConfig config = ladder_config("");
  CHECK(make_run_id(config, Backend::GIN) == make_run_id(config, Backend::GIN));
  CHECK(make_run_id(config, Backend::GIN) != make_run_id(config, Backend::LSA));
  EvolutionConfig other = config;
  other.rng_seed = 43;
  CHECK(make_run_id(config, Backend::GIN) != make_run_id(other, Backend::GIN));
}

TEST_CASE("scripted evolution climbs the ladder deterministically") {
  TempDir dir;
  AgentContext ctx = test_context();

  auto run_once = [&](const std::string &run_dir, CandidateStore &store) {
    ScriptedMockProvider mock;
    install_ladder(mock, seed_source());
    SimHarness harness;
    HashingEmbedder embedder(64);
    EvolutionConfig config = ladder_config(run_dir);
    return run_evolution({make_seed()}, config, harness, mock, embedder, store,
                         ctx);
  };

  CandidateStore store_a;
  auto first = run_once(dir.file("run_a"), store_a);

  CHECK_FALSE(first.no_viable);
  CHECK(first.best.result.level_reached == CascadeLevel::L3Complete);
  CHECK(first.best.result.score > 190.0);
  CHECK(first.best.result.score < 200.0);
  CHECK(first.best.source.find("persistent fused") != std::string::npos);

  // Seed scores about 98.96; the ladder must strictly improve on it.
  REQUIRE(first.best_series.size() == 7);
  CHECK(first.best_series.front() > 97.0);
  CHECK(first.best_series.front() < 99.0);
  CHECK(first.best.result.score > first.best_series.front());
  for (size_t i = 1; i < first.best_series.size(); ++i)
    CHECK(first.best_series[i] >= first.best_series[i - 1]);

  // Every evaluated candidate is persisted: one store record per log row.
  std::string score_log = read_file(dir.file("run_a") + "/score_log.csv");
  auto rows = split_lines(score_log);
  REQUIRE(!rows.empty());
  CHECK(rows[0] == "generation,island,form,level,score");
  CHECK(rows.size() - 1 == store_a.size());
  CHECK(rows[1].rfind("0,0,seed,l3_complete,", 0) == 0);

  // Both gen-0 slots exist under deterministic ids, including the re-seeded
  // island with its thread-scope directive.
  std::string run_id = first.run_id;
  REQUIRE(store_a.find(run_id + "-g0-i0-a0") != nullptr);
  const CandidateRecord *reseeded = store_a.find(run_id + "-g0-i1-a0");
  REQUIRE(reseeded != nullptr);
  CHECK(reseeded->directive.issuer == Issuer::CoopThread);

  std::string events = read_file(dir.file("run_a") + "/events.log");
  CHECK(events.find("migrate,3,") != std::string::npos);
  CHECK(events.find("migrate,6,") != std::string::npos);
  CHECK(events.find("novelty_reject,") != std::string::npos);

  for (int g = 0; g < 6; ++g)
    CHECK(std::filesystem::exists(dir.file("run_a") + "/meta/gen_" +
                                  std::to_string(g) + ".json"));
  CHECK(read_file(dir.file("run_a") + "/best_program.cu") ==
        first.best.source);

  // A second fresh run is byte-identical on every timestamp-free artifact.
  CandidateStore store_b;
  auto second = run_once(dir.file("run_b"), store_b);
  CHECK(second.best.id == first.best.id);
  CHECK(second.best.result.score == first.best.result.score);
  for (const char *name :
       {"/score_log.csv", "/best_series.csv", "/events.log",
        "/best_program.cu"}) {
    CAPTURE(name);
    CHECK(read_file(dir.file("run_a") + name) ==
          read_file(dir.file("run_b") + name));
  }
}

TEST_CASE("interrupted runs resume from the store") {
  TempDir dir;
  AgentContext ctx = test_context();
  std::string store_path = dir.file("store");

  auto make_mock = [&]() {
    auto mock = std::make_unique<ScriptedMockProvider>();
    install_ladder(*mock, seed_source());
    return mock;
  };

  // First attempt dies when the infrastructure vanishes mid-generation-2.
  {
    CandidateStore store(store_path);
    FlakyHarness flaky(5);
    HashingEmbedder embedder(64);
    auto mock = make_mock();
    EvolutionConfig config = ladder_config(dir.file("run_interrupted"));
    try {
      run_evolution({make_seed()}, config, flaky, *mock, embedder, store, ctx);
      FAIL("expected HarnessUnavailable");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::HarnessUnavailable);
    }
    CHECK(store.size() == 4);  // two seeds and two gen-1 offspring persisted
  }

  // Resume against the surviving store: stored slots replay without new
  // provider mutations, the rest compute fresh.
  CandidateStore resumed(store_path);
  SimHarness harness;
  HashingEmbedder embedder(64);
  auto resume_mock = make_mock();
  EvolutionConfig config = ladder_config(dir.file("run_resumed"));
  auto resumed_result = run_evolution({make_seed()}, config, harness,
                                      *resume_mock, embedder, resumed, ctx);
  for (const auto &entry : resume_mock->transcript())
    CHECK(entry.request.role != "reseed");  // gen-0 replayed from the store

  // Control: the same configuration uninterrupted in a fresh store.
  CandidateStore fresh;
  SimHarness harness2;
  HashingEmbedder embedder2(64);
  auto control_mock = make_mock();
  EvolutionConfig control = ladder_config(dir.file("run_control"));
  auto control_result = run_evolution({make_seed()}, control, harness2,
                                      *control_mock, embedder2, fresh, ctx);

  CHECK(resumed_result.best.id == control_result.best.id);
  CHECK(resumed_result.best.result.score == control_result.best.result.score);
  CHECK(resumed_result.best_series == control_result.best_series);
  CHECK(read_file(dir.file("run_resumed") + "/score_log.csv") ==
        read_file(dir.file("run_control") + "/score_log.csv"));
}

TEST_CASE("rejected mutations are persisted as compile-level failures") {
  TempDir dir;
  AgentContext ctx = test_context();
  std::string seed = seed_source();

  ScriptedMockProvider mock;
  OptimizationDirective d = gin_directive("fused", "bulk");
  mock.add_keyed("mutate", {{"form", "diff"}},
                 diff_response(d, 24, "void tampered();"));
  std::string tampered = seed;
  tampered.replace(tampered.find("launch_exchange"), 15, "launch_tampered");
  mock.add_keyed("mutate", {{"form", "rewrite"}}, rewrite_response(d, tampered));
  mock.add_keyed("mutate", {{"form", "crossover"}},
                 rewrite_response(d, tampered));
  mock.set_default("judge", "strategy: s\nimprovement: i");

  CandidateStore store;
  SimHarness harness;
  HashingEmbedder embedder(64);
  EvolutionConfig config = ladder_config(dir.file("run"));
  config.params.k = 1;
  config.params.G = 1;
  config.use_meta = false;

  auto result = run_evolution({make_seed()}, config, harness, mock, embedder,
                              store, ctx);

  CHECK(store.size() == 2);
  const CandidateRecord *rejected =
      store.find(result.run_id + "-g1-i0-a0");
  REQUIRE(rejected != nullptr);
  CHECK(rejected->result.level_reached == CascadeLevel::L1Failed);
  CHECK(rejected->result.score == 0.0);
  CHECK(rejected->result.diagnostics.rfind("mutation rejected: ", 0) == 0);
  REQUIRE(rejected->form.has_value());
  // The slot stops after the rejection; no second attempt record exists.
  CHECK(store.find(result.run_id + "-g1-i0-a1") == nullptr);

  CHECK_FALSE(result.no_viable);
  CHECK(result.best.id == result.run_id + "-g0-i0-a0");
}

TEST_CASE("reseed falls back to issuer variation when the provider fails") {
  TempDir dir;
  AgentContext ctx = test_context();

  ScriptedMockProvider mock;  // no reseed, no mutate entries
  mock.set_default("judge", "strategy: s\nimprovement: i");

  CandidateStore store;
  SimHarness harness;
  HashingEmbedder embedder(64);
  EvolutionConfig config = ladder_config(dir.file("run"));
  config.params.k = 3;
  config.params.G = 1;
  config.use_meta = false;

  auto result = run_evolution({make_seed()}, config, harness, mock, embedder,
                              store, ctx);

  const CandidateRecord *i1 = store.find(result.run_id + "-g0-i1-a0");
  const CandidateRecord *i2 = store.find(result.run_id + "-g0-i2-a0");
  REQUIRE(i1 != nullptr);
  REQUIRE(i2 != nullptr);
  CHECK(i1->directive.issuer == Issuer::CoopThread);
  CHECK(i2->directive.issuer == Issuer::CoopWarp);
  CHECK(i1->source == seed_source());

  std::string events = read_file(dir.file("run") + "/events.log");
  CHECK(events.find("reseed_fallback,1") != std::string::npos);
  CHECK(events.find("reseed_fallback,2") != std::string::npos);
  CHECK(events.find("provider_unavailable,1,") != std::string::npos);
}

TEST_CASE("a run with no benchmark survivor reports no_viable") {
  TempDir dir;
  AgentContext ctx = test_context();

  // The seed issues puts but never flushes, so verification always fails.
  std::string broken;
  for (const auto &line : split_lines(seed_source()))
    if (line.find("gin.flush") == std::string::npos) broken += line + "\n";

  AnnotatedSeed seed;
  seed.source = broken;
  seed.directive = conservative_directive(Backend::GIN);

  ScriptedMockProvider mock;  // empty: even the judge is unavailable
  CandidateStore store;
  SimHarness harness;
  HashingEmbedder embedder(64);
  EvolutionConfig config = ladder_config(dir.file("run"));
  config.params.k = 1;
  config.params.G = 2;
  config.use_meta = false;

  auto result =
      run_evolution({seed}, config, harness, mock, embedder, store, ctx);

  CHECK(result.no_viable);
  CHECK(result.best.id == result.run_id + "-g0-i0-a0");
  CHECK(result.best.result.score == 0.0);
  CHECK(result.diagnostics.find("no candidate reached the benchmark level") !=
        std::string::npos);
  CHECK(result.diagnostics.find("1 verify failures") != std::string::npos);
  CHECK(result.best_series == std::vector<double>{0.0, 0.0, 0.0});

  std::string events = read_file(dir.file("run") + "/events.log");
  CHECK(events.find("seed_failed,0") != std::string::npos);
  CHECK(events.find("skip_empty_island,1,0") != std::string::npos);
  CHECK(events.find("judge_unavailable,") != std::string::npos);

  // The verify failure is persisted with its diagnostics.
  const CandidateRecord *rec = store.find(result.best.id);
  REQUIRE(rec != nullptr);
  CHECK(rec->result.level_reached == CascadeLevel::L2Failed);
  CHECK(rec->result.diagnostics.find("verify rule:") != std::string::npos);
}
