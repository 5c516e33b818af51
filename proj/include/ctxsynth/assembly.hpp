// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Downstream training manifest: real images replicated against the
// synthetic set, long-tail synthetic budgets, and the real/synthetic
// weighted cross-entropy.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctxsynth/sampler.hpp"

namespace ctxsynth {

enum class SourceKind { real, synthetic };
enum class AssemblyMode { fewshot, longtail };

std::string to_string(SourceKind s);
std::string to_string(AssemblyMode m);
AssemblyMode parse_assembly_mode(const std::string& s);

struct LabeledRef {
  std::string ref;  // image path or synthetic id
  std::string class_label;
};

struct ManifestEntry {
  std::string ref;
  std::string class_label;
  SourceKind source = SourceKind::real;
  int copies = 1;

  bool operator==(const ManifestEntry&) const = default;
};

struct TrainingManifest {
  std::vector<ManifestEntry> entries;  // sorted by (class, source, ref)
  double lambda = 0.5;
  AssemblyMode mode = AssemblyMode::fewshot;
  bool mixup = true;
  bool cutmix = true;
  std::string upstream_digest;

  bool operator==(const TrainingManifest&) const = default;
};

struct BudgetConfig {
  int total_T = 200;
  int duplication_c = 1;

  void validate() const;
};

/// max(1, round_half_even(n_syn / n_real)).
int replication_factor(int n_real, int n_syn);

/// max(0, total_T - n_real * duplication_c).
int longtail_synth_budget(int n_real, const BudgetConfig& budget);

/// fewshot: real copies = replication_factor per class, every synthetic item once.
/// longtail: real copies = c, first longtail_synth_budget items per class.
TrainingManifest assemble_manifest(const std::vector<LabeledRef>& real,
                                   const std::vector<LabeledRef>& synthetic, double lambda,
                                   AssemblyMode mode, const BudgetConfig& budget = {});

/// lambda * ce_real + (1 - lambda) * ce_syn.
double weighted_loss(double lambda, double ce_real, double ce_syn);

struct ClassWeights {
  int real = 0;  // sum of copies
  int synthetic = 0;
};

std::map<std::string, ClassWeights> manifest_class_weights(const TrainingManifest& manifest);

std::string serialize_manifest(const TrainingManifest& manifest);
TrainingManifest parse_manifest(const std::string& text);

/// "synthetic/<sanitized class>/<plan index, 6 digits>.png"
std::string synthetic_ref(const PlanItem& item);
/// Plan item a synthetic ref points at; throws ValidationError if none.
const PlanItem& resolve_synthetic_ref(const std::string& ref, const GenerationPlan& plan);

}  // namespace ctxsynth
