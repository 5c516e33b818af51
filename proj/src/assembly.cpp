// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace ctxsynth {

using nlohmann::ordered_json;

std::string to_string(SourceKind s) { return s == SourceKind::real ? "real" : "synthetic"; }
std::string to_string(AssemblyMode m) { return m == AssemblyMode::fewshot ? "fewshot" : "longtail"; }

AssemblyMode parse_assembly_mode(const std::string& s) {
  if (s == "fewshot") return AssemblyMode::fewshot;
  if (s == "longtail") return AssemblyMode::longtail;
  throw ValidationError("unknown assembly mode '" + s + "'");
}

void BudgetConfig::validate() const {
  if (total_T < 1) throw ValidationError("budget: total_T must be positive");
  if (duplication_c < 1) throw ValidationError("budget: duplication_c must be positive");
  if (total_T < duplication_c) throw ValidationError("budget: total_T < duplication_c");
}

int replication_factor(int n_real, int n_syn) {
  if (n_real < 1) throw ValidationError("replication_factor: n_real must be >= 1");
  if (n_syn < 0) throw ValidationError("replication_factor: n_syn must be >= 0");
  int q = n_syn / n_real;
  const int r = n_syn % n_real;
  // Round half to even, exactly in integers.
  if (2 * r > n_real || (2 * r == n_real && (q % 2) == 1)) ++q;
  return std::max(1, q);
}

int longtail_synth_budget(int n_real, const BudgetConfig& budget) {
  if (n_real < 1) throw ValidationError("longtail_synth_budget: n_real must be >= 1");
  return std::max(0, budget.total_T - n_real * budget.duplication_c);
}

TrainingManifest assemble_manifest(const std::vector<LabeledRef>& real,
                                   const std::vector<LabeledRef>& synthetic, double lambda,
                                   AssemblyMode mode, const BudgetConfig& budget) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("assemble: lambda must lie in [0, 1]");
  if (mode == AssemblyMode::longtail) budget.validate();

  std::map<std::string, std::vector<const LabeledRef*>> real_by, syn_by;
  for (const auto& r : real) real_by[r.class_label].push_back(&r);
  for (const auto& s : synthetic) syn_by[s.class_label].push_back(&s);

  for (const auto& [label, _] : syn_by)
    if (!real_by.count(label))
      throw ValidationError("assemble: synthetic class '" + label + "' has no real images");

  TrainingManifest m;
  m.lambda = lambda;
  m.mode = mode;
  for (const auto& [label, reals] : real_by) {
    const auto it = syn_by.find(label);
    const std::size_t n_syn_avail = it == syn_by.end() ? 0 : it->second.size();
    const int n_real = static_cast<int>(reals.size());
    int copies = 1;
    std::size_t n_syn_take = n_syn_avail;
    if (mode == AssemblyMode::fewshot) {
      if (n_syn_avail == 0)
        throw ValidationError("assemble: synthetic set is missing class '" + label + "'");
      copies = replication_factor(n_real, static_cast<int>(n_syn_avail));
    } else {
      copies = budget.duplication_c;
      n_syn_take = static_cast<std::size_t>(longtail_synth_budget(n_real, budget));
      if (n_syn_take > n_syn_avail)
        throw ValidationError("assemble: class '" + label + "' needs " + std::to_string(n_syn_take) +
                              " synthetic images, have " + std::to_string(n_syn_avail));
    }
    for (const auto* r : reals) m.entries.push_back({r->ref, label, SourceKind::real, copies});
    for (std::size_t i = 0; i < n_syn_take; ++i)
      m.entries.push_back({it->second[i]->ref, label, SourceKind::synthetic, 1});
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.class_label, a.source, a.ref) < std::tie(b.class_label, b.source, b.ref);
  });
  return m;
}

double weighted_loss(double lambda, double ce_real, double ce_syn) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("weighted_loss: lambda must lie in [0, 1]");
  if (ce_real < 0.0 || ce_syn < 0.0) throw ValidationError("weighted_loss: negative cross-entropy");
  return lambda * ce_real + (1.0 - lambda) * ce_syn;
}

std::map<std::string, ClassWeights> manifest_class_weights(const TrainingManifest& manifest) {
  std::map<std::string, ClassWeights> w;
  for (const auto& e : manifest.entries)
    (e.source == SourceKind::real ? w[e.class_label].real : w[e.class_label].synthetic) += e.copies;
  return w;
}

std::string serialize_manifest(const TrainingManifest& m) {
  ordered_json h;
  h["lambda"] = m.lambda;
  h["mode"] = to_string(m.mode);
  h["mixup"] = m.mixup;
  h["cutmix"] = m.cutmix;
  h["upstream_digest"] = m.upstream_digest;
  h["count"] = m.entries.size();
  std::string out = h.dump() + "\n";
  for (const auto& e : m.entries) {
    ordered_json j;
    j["ref"] = e.ref;
    j["class_label"] = e.class_label;
    j["source"] = to_string(e.source);
    j["copies"] = e.copies;
    out += j.dump() + "\n";
  }
  return out;
}

TrainingManifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("manifest: missing header");
  TrainingManifest m;
  std::size_t count = 0;
  try {
    const auto h = ordered_json::parse(line);
    m.lambda = h.at("lambda").get<double>();
    m.mode = parse_assembly_mode(h.at("mode").get<std::string>());
    m.mixup = h.at("mixup").get<bool>();
    m.cutmix = h.at("cutmix").get<bool>();
    m.upstream_digest = h.value("upstream_digest", "");
    count = h.at("count").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = ordered_json::parse(line);
      ManifestEntry e;
      e.ref = j.at("ref").get<std::string>();
      e.class_label = j.at("class_label").get<std::string>();
      const auto src = j.at("source").get<std::string>();
      if (src != "real" && src != "synthetic") throw ValidationError("manifest: bad source '" + src + "'");
      e.source = src == "real" ? SourceKind::real : SourceKind::synthetic;
      e.copies = j.at("copies").get<int>();
      if (e.copies < 1) throw ValidationError("manifest: copies must be >= 1");
      m.entries.push_back(std::move(e));
    }
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("manifest: malformed: ") + e.what());
  }
  if (m.entries.size() != count) throw ValidationError("manifest: header count does not match entries");
  return m;
}

std::string synthetic_ref(const PlanItem& item) {
  char idx[32];
  std::snprintf(idx, sizeof idx, "%06zu", item.index);
  return "synthetic/" + sanitize_label(item.class_label) + "/" + idx + ".png";
}

const PlanItem& resolve_synthetic_ref(const std::string& ref, const GenerationPlan& plan) {
  const auto slash = ref.rfind('/');
  const auto dot = ref.rfind('.');
  if (slash == std::string::npos || dot == std::string::npos || dot < slash)
    throw ValidationError("unresolvable synthetic ref '" + ref + "'");
  std::size_t index = 0;
  try {
    index = std::stoul(ref.substr(slash + 1, dot - slash - 1));
  } catch (const std::exception&) {
    throw ValidationError("unresolvable synthetic ref '" + ref + "'");
  }
  if (index >= plan.items.size() || synthetic_ref(plan.items[index]) != ref)
    throw ValidationError("synthetic ref '" + ref + "' not in plan");
  return plan.items[index];
}

}  // namespace ctxsynth
