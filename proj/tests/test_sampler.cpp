// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <set>

#include "ctxsynth/prompt.hpp"
#include "ctxsynth/sampler.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace ctxsynth;
using namespace ctxsynth::testing;

namespace {

std::map<std::string, int> uniform_budget(const std::vector<std::string>& classes, int n) {
  std::map<std::string, int> b;
  for (const auto& c : classes) b[c] = n;
  return b;
}

PlanOptions opts(MarginalizationMode mode, std::uint64_t seed = 1) {
  PlanOptions o;
  o.mode = mode;
  o.global_seed = seed;
  o.descriptor = "aircraft";
  return o;
}

}  // namespace

TEST_CASE("parse_mode") {
  CHECK(parse_mode("none") == MarginalizationMode::none);
  CHECK(parse_mode("class") == MarginalizationMode::class_level);
  CHECK(parse_mode("dataset_level") == MarginalizationMode::dataset_level);
  CHECK(to_string(MarginalizationMode::class_level) == "class_level");
  CHECK_THROWS_AS(parse_mode("global"), ValidationError);
}

TEST_CASE("dataset-level frequencies are uniform over entries") {
  const std::vector<std::string> classes{"a", "b"};
  const auto bank = make_bank(classes, 16);
  const auto plan = build_generation_plan(bank, classes, uniform_budget(classes, 50000),
                                          opts(MarginalizationMode::dataset_level, 9));
  REQUIRE(plan.items.size() == 100000);
  std::map<AttributePair, int> freq;
  for (const auto& it : plan.items) ++freq[it.pair];
  CHECK(freq.size() == 16);
  for (const auto& [_, n] : freq) CHECK(std::abs(n / 1e5 - 1.0 / 16) <= 0.01);
  CHECK(empirical_pair_class_mi(plan) < 0.01);
}

TEST_CASE("dataset-level samples duplicates by multiplicity") {
  // Two entries share a pair, so it should appear with probability 1/2.
  CaptionBank bank = make_bank({"a"}, 3);
  bank.entries[1].pair = bank.entries[0].pair;
  Rng rng(4);
  PairSampler s(bank);
  int dup = 0;
  for (int i = 0; i < 60000; ++i) dup += s.sample(MarginalizationMode::dataset_level, "a", rng) == bank.entries[0].pair;
  CHECK(dup / 60000.0 == doctest::Approx(2.0 / 3.0).epsilon(0.02));
}

TEST_CASE("class-level support is exactly the class's own pairs") {
  const std::vector<std::string> classes{"a", "b", "c"};
  const auto bank = make_bank(classes, 12);
  const auto plan = build_generation_plan(bank, classes, uniform_budget(classes, 2000),
                                          opts(MarginalizationMode::class_level));
  std::map<std::string, std::set<AttributePair>> support, own;
  for (const auto& it : plan.items) support[it.class_label].insert(it.pair);
  for (const auto& e : bank.entries) own[e.class_label].insert(e.pair);
  CHECK(support == own);
}

TEST_CASE("mutual information oracles") {
  // Two classes, each with its own unique pair: I(class; pair) = H(class) = ln 2.
  GenerationPlan plan;
  for (std::size_t i = 0; i < 10; ++i)
    plan.items.push_back({i, i % 2 ? "a" : "b", {i % 2 ? "x" : "y", "p"}, 0, ""});
  CHECK(empirical_pair_class_mi(plan) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Pair independent of class: 0.
  plan.items.clear();
  for (std::size_t i = 0; i < 8; ++i)
    plan.items.push_back({i, i < 4 ? "a" : "b", {i % 2 ? "x" : "y", "p"}, 0, ""});
  CHECK(empirical_pair_class_mi(plan) == doctest::Approx(0.0));
  CHECK(empirical_pair_class_mi(GenerationPlan{}) == 0.0);
}

TEST_CASE("none mode cycles through the class's entries") {
  const std::vector<std::string> classes{"a", "b"};
  const auto bank = make_bank(classes, 6);  // a: entries 0,2,4
  const auto plan = build_generation_plan(bank, classes, {{"a", 7}, {"b", 0}},
                                          opts(MarginalizationMode::none));
  REQUIRE(plan.items.size() == 7);
  const int expect[] = {0, 2, 4, 0, 2, 4, 0};
  for (int i = 0; i < 7; ++i) CHECK(plan.items[static_cast<std::size_t>(i)].pair == bank.entries[static_cast<std::size_t>(expect[i])].pair);
  // Without marginalization the class determines the pair.
  const auto both = build_generation_plan(bank, classes, uniform_budget(classes, 30),
                                          opts(MarginalizationMode::none));
  CHECK(empirical_pair_class_mi(both) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("plan layout, prompts and seeds") {
  const std::vector<std::string> classes{"F/A-18", "737"};
  const auto bank = make_bank(classes, 8);
  const auto plan = build_generation_plan(bank, classes, {{"F/A-18", 3}, {"737", 2}},
                                          opts(MarginalizationMode::dataset_level, 77));
  REQUIRE(plan.items.size() == 5);
  CHECK(plan.items[0].class_label == "F/A-18");
  CHECK(plan.items[3].class_label == "737");
  for (std::size_t i = 0; i < plan.items.size(); ++i) {
    const auto& it = plan.items[i];
    CHECK(it.index == i);
    CHECK(it.prompt == render_training_caption({"aircraft", it.class_label, it.pair.background, it.pair.pose}));
  }
  CHECK(plan.items[4].seed == item_seed(77, "737", 1));
  CHECK(plan.items[0].seed != plan.items[1].seed);
  CHECK(plan_pairs_missing_from_bank(plan, bank).empty());
}

TEST_CASE("plan determinism and class independence") {
  const auto bank = make_bank({"a", "b", "c"}, 30);
  const std::vector<std::string> ab{"a", "b"}, abc{"a", "b", "c"};
  const auto p1 = build_generation_plan(bank, ab, uniform_budget(ab, 20), opts(MarginalizationMode::dataset_level, 5));
  const auto p2 = build_generation_plan(bank, ab, uniform_budget(ab, 20), opts(MarginalizationMode::dataset_level, 5));
  CHECK(p1 == p2);
  CHECK(serialize_plan(p1) == serialize_plan(p2));
  const auto p3 = build_generation_plan(bank, abc, uniform_budget(abc, 20), opts(MarginalizationMode::dataset_level, 5));
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(p3.items[i].pair == p1.items[i].pair);
    CHECK(p3.items[i].seed == p1.items[i].seed);
  }
  const auto p4 = build_generation_plan(bank, ab, uniform_budget(ab, 20), opts(MarginalizationMode::dataset_level, 6));
  CHECK(p4 != p1);
}

TEST_CASE("class-only prompts without context preservation") {
  const auto bank = make_bank({"a"}, 3);
  auto o = opts(MarginalizationMode::dataset_level);
  o.preserve_context = false;
  const std::vector<std::string> classes{"a"};
  const auto plan = build_generation_plan(bank, classes, {{"a", 2}}, o);
  for (const auto& it : plan.items) CHECK(it.prompt == "a photo of a a");
  CHECK_FALSE(parse_plan(serialize_plan(plan)).preserve_context);
}

TEST_CASE("plan errors") {
  const auto bank = make_bank({"a"}, 3);
  const std::vector<std::string> classes{"a", "b"};
  CHECK_THROWS_AS(build_generation_plan(bank, classes, {{"zzz", 1}}, opts(MarginalizationMode::none)), ValidationError);
  CHECK_THROWS_AS(build_generation_plan(bank, classes, {{"a", -1}}, opts(MarginalizationMode::none)), ValidationError);
  CHECK_THROWS_AS(build_generation_plan(bank, classes, {{"b", 1}}, opts(MarginalizationMode::class_level)),
                  ValidationError);
  CHECK_NOTHROW(build_generation_plan(bank, classes, {{"b", 1}}, opts(MarginalizationMode::dataset_level)));
  CHECK_THROWS_AS(build_generation_plan(CaptionBank{}, classes, {{"a", 1}}, opts(MarginalizationMode::dataset_level)),
                  ValidationError);
}

TEST_CASE("plan serialization round trip") {
  const std::vector<std::string> classes{"a", "F/A-18"};
  const auto bank = make_bank(classes, 10);
  auto o = opts(MarginalizationMode::class_level, 18446744073709551615ULL);
  o.bank_digest = std::string(64, 'f');
  const auto plan = build_generation_plan(bank, classes, uniform_budget(classes, 4), o);
  CHECK(parse_plan(serialize_plan(plan)) == plan);
  CHECK_THROWS_AS(parse_plan(""), ValidationError);
  auto text = serialize_plan(plan);
  text.pop_back();
  text = text.substr(0, text.rfind('\n') + 1);
  CHECK_THROWS_AS(parse_plan(text), ValidationError);
}

TEST_CASE("missing-pair detection") {
  const auto bank = make_bank({"a"}, 3);
  GenerationPlan plan;
  plan.items.push_back({0, "a", bank.entries[0].pair, 0, ""});
  plan.items.push_back({1, "a", {"bg0", "pose1"}, 0, ""});
  CHECK(plan_pairs_missing_from_bank(plan, bank) == std::vector<std::size_t>{1});
}
