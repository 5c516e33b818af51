// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/sampler.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "ctxsynth/prompt.hpp"
#include "json.hpp"

namespace ctxsynth {

using nlohmann::ordered_json;

std::string to_string(MarginalizationMode mode) {
  switch (mode) {
    case MarginalizationMode::none: return "none";
    case MarginalizationMode::class_level: return "class_level";
    case MarginalizationMode::dataset_level: return "dataset_level";
  }
  return "none";
}

MarginalizationMode parse_mode(const std::string& s) {
  if (s == "none") return MarginalizationMode::none;
  if (s == "class" || s == "class_level") return MarginalizationMode::class_level;
  if (s == "dataset" || s == "dataset_level") return MarginalizationMode::dataset_level;
  throw ValidationError("unknown marginalization mode '" + s + "'");
}

PairSampler::PairSampler(const CaptionBank& bank) : bank_(bank) {
  for (std::size_t i = 0; i < bank.entries.size(); ++i)
    by_class_[bank.entries[i].class_label].push_back(i);
}

std::span<const std::size_t> PairSampler::class_entries(const std::string& class_label) const {
  auto it = by_class_.find(class_label);
  if (it == by_class_.end()) return {};
  return it->second;
}

const AttributePair& PairSampler::sample(MarginalizationMode mode, const std::string& class_label,
                                         Rng& rng) {
  if (bank_.entries.empty()) throw ValidationError("sample_pair: empty bank");
  if (mode == MarginalizationMode::dataset_level)
    return bank_.entries[rng.below(bank_.entries.size())].pair;

  const auto own = class_entries(class_label);
  if (own.empty()) throw ValidationError("sample_pair: no bank entries for class '" + class_label + "'");
  if (mode == MarginalizationMode::class_level) return bank_.entries[own[rng.below(own.size())]].pair;

  auto& cur = cursor_[class_label];
  const auto& pair = bank_.entries[own[cur % own.size()]].pair;
  ++cur;
  return pair;
}

std::uint64_t item_seed(std::uint64_t global_seed, const std::string& class_label,
                        std::size_t ordinal) {
  return derive_seed(global_seed, "item\x1f" + class_label, ordinal);
}

GenerationPlan build_generation_plan(const CaptionBank& bank, std::span<const std::string> classes,
                                     const std::map<std::string, int>& per_class_budget,
                                     const PlanOptions& options) {
  const std::set<std::string> known(classes.begin(), classes.end());
  for (const auto& [label, budget] : per_class_budget) {
    if (!known.count(label)) throw ValidationError("plan: unknown class '" + label + "' in budget");
    if (budget < 0) throw ValidationError("plan: negative budget for class '" + label + "'");
  }
  GenerationPlan plan;
  plan.mode = options.mode;
  plan.global_seed = options.global_seed;
  plan.bank_digest = options.bank_digest;
  plan.descriptor = options.descriptor;
  plan.preserve_context = options.preserve_context;

  PairSampler sampler(bank);
  for (const auto& label : classes) {
    auto it = per_class_budget.find(label);
    const int budget = it == per_class_budget.end() ? 0 : it->second;
    Rng rng(derive_seed(options.global_seed, "plan\x1f" + label));
    for (int k = 0; k < budget; ++k) {
      PlanItem item;
      item.index = plan.items.size();
      item.class_label = label;
      item.pair = sampler.sample(options.mode, label, rng);
      item.seed = item_seed(options.global_seed, label, static_cast<std::size_t>(k));
      item.prompt = options.preserve_context
                        ? render_training_caption(
                              {options.descriptor, label, item.pair.background, item.pair.pose})
                        : render_class_only_caption(options.descriptor, label);
      plan.items.push_back(std::move(item));
    }
  }
  return plan;
}

double empirical_pair_class_mi(const GenerationPlan& plan) {
  if (plan.items.empty()) return 0.0;
  std::map<std::string, double> pc;
  std::map<AttributePair, double> pp;
  std::map<std::pair<std::string, AttributePair>, double> joint;
  for (const auto& it : plan.items) {
    pc[it.class_label] += 1.0;
    pp[it.pair] += 1.0;
    joint[{it.class_label, it.pair}] += 1.0;
  }
  const double n = static_cast<double>(plan.items.size());
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pj = c / n;
    mi += pj * std::log(pj / ((pc[key.first] / n) * (pp[key.second] / n)));
  }
  return std::max(0.0, mi);
}

std::string serialize_plan(const GenerationPlan& plan) {
  ordered_json h;
  h["mode"] = to_string(plan.mode);
  h["global_seed"] = plan.global_seed;
  h["bank_digest"] = plan.bank_digest;
  h["descriptor"] = plan.descriptor;
  h["preserve_context"] = plan.preserve_context;
  h["count"] = plan.items.size();
  std::string out = h.dump() + "\n";
  for (const auto& it : plan.items) {
    ordered_json j;
    j["index"] = it.index;
    j["class_label"] = it.class_label;
    j["background"] = it.pair.background;
    j["pose"] = it.pair.pose;
    j["seed"] = it.seed;
    j["prompt"] = it.prompt;
    out += j.dump() + "\n";
  }
  return out;
}

GenerationPlan parse_plan(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("plan: missing header");
  GenerationPlan plan;
  std::size_t count = 0;
  try {
    const auto h = ordered_json::parse(line);
    plan.mode = parse_mode(h.at("mode").get<std::string>());
    plan.global_seed = h.at("global_seed").get<std::uint64_t>();
    plan.bank_digest = h.at("bank_digest").get<std::string>();
    plan.descriptor = h.value("descriptor", "");
    plan.preserve_context = h.value("preserve_context", true);
    count = h.at("count").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = ordered_json::parse(line);
      PlanItem it;
      it.index = j.at("index").get<std::size_t>();
      it.class_label = j.at("class_label").get<std::string>();
      it.pair.background = j.at("background").get<std::string>();
      it.pair.pose = j.at("pose").get<std::string>();
      it.seed = j.at("seed").get<std::uint64_t>();
      it.prompt = j.at("prompt").get<std::string>();
      if (it.index != plan.items.size()) throw ValidationError("plan: item indices out of order");
      plan.items.push_back(std::move(it));
    }
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("plan: malformed: ") + e.what());
  }
  if (plan.items.size() != count) throw ValidationError("plan: header count does not match items");
  return plan;
}

std::vector<std::size_t> plan_pairs_missing_from_bank(const GenerationPlan& plan,
                                                      const CaptionBank& bank) {
  std::set<AttributePair> pairs;
  for (const auto& e : bank.entries) pairs.insert(e.pair);
  std::vector<std::size_t> missing;
  for (const auto& it : plan.items)
    if (!pairs.count(it.pair)) missing.push_back(it.index);
  return missing;
}

}  // namespace ctxsynth
