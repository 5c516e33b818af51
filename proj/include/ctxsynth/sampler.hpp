// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Generation planning. Context pairs are drawn from the caption bank under
// one of three modes:
//   none           each class cycles through its own pairs (no marginalization)
//   class_level    uniform over the class's own bank entries
//   dataset_level  uniform over every bank entry regardless of class
// Drawing uniformly over entries (duplicates included) samples the bank's
// empirical context marginal, which is what removes the class/context
// dependence in dataset_level plans.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxsynth/caption_bank.hpp"
#include "ctxsynth/util.hpp"

namespace ctxsynth {

enum class MarginalizationMode { none, class_level, dataset_level };

std::string to_string(MarginalizationMode mode);
/// Accepts "none", "class", "class_level", "dataset", "dataset_level".
MarginalizationMode parse_mode(const std::string& s);

/// Stateful pair sampler over one bank. State is only the per-class cursor
/// used by `none` mode.
class PairSampler {
 public:
  explicit PairSampler(const CaptionBank& bank);

  const AttributePair& sample(MarginalizationMode mode, const std::string& class_label, Rng& rng);

  /// Bank entries of one class, in image_id order.
  std::span<const std::size_t> class_entries(const std::string& class_label) const;

 private:
  const CaptionBank& bank_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_class_;
  std::unordered_map<std::string, std::size_t> cursor_;
};

struct PlanItem {
  std::size_t index = 0;  // position in the plan
  std::string class_label;
  AttributePair pair;
  std::uint64_t seed = 0;
  std::string prompt;

  bool operator==(const PlanItem&) const = default;
};

struct GenerationPlan {
  std::vector<PlanItem> items;
  MarginalizationMode mode = MarginalizationMode::dataset_level;
  std::uint64_t global_seed = 0;
  std::string bank_digest;
  std::string descriptor;
  // false reproduces the class-name-only prompt baseline.
  bool preserve_context = true;

  bool operator==(const GenerationPlan&) const = default;
};

struct PlanOptions {
  MarginalizationMode mode = MarginalizationMode::dataset_level;
  std::uint64_t global_seed = 0;
  std::string descriptor;
  bool preserve_context = true;
  std::string bank_digest;
};

/// Item seed: stable in (global_seed, class_label, per-class ordinal), so
/// adding a class leaves every other class's images unchanged.
std::uint64_t item_seed(std::uint64_t global_seed, const std::string& class_label,
                        std::size_t ordinal);

/// Items are grouped by class in `classes` order. Each class draws from its
/// own stream derived from (global_seed, class_label).
GenerationPlan build_generation_plan(const CaptionBank& bank, std::span<const std::string> classes,
                                     const std::map<std::string, int>& per_class_budget,
                                     const PlanOptions& options);

/// Plug-in mutual information (nats) between class label and pair identity.
double empirical_pair_class_mi(const GenerationPlan& plan);

std::string serialize_plan(const GenerationPlan& plan);
GenerationPlan parse_plan(const std::string& text);

/// Pairs used by the plan that are missing from the bank (empty = closed).
std::vector<std::size_t> plan_pairs_missing_from_bank(const GenerationPlan& plan,
                                                      const CaptionBank& bank);

}  // namespace ctxsynth
