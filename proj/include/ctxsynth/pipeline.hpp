// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// File-based pipeline stages. Each stage reads the previous stage's
// artifacts from the output directory, checks their digests, and writes its
// own artifact carrying the digest of what it consumed.
//
//   ingest             dataset.json, catalog.jsonl
//   split              splits.json
//   extract            bank.jsonl
//   finetune-manifest  finetune_job.json
//   plan               plan.jsonl
//   generate           generated.jsonl, synthetic/<class>/<index>.png
//   assemble           manifest.jsonl, manifest-lambda-<v>.jsonl
//   fid                fid.json, fid_hist.csv[, fid_delta.csv]
//   scm-demo           scm_demo.csv

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctxsynth/assembly.hpp"
#include "ctxsynth/backend.hpp"
#include "ctxsynth/fid.hpp"
#include "ctxsynth/finetune.hpp"
#include "ctxsynth/sampler.hpp"

namespace ctxsynth {

struct RunConfig {
  std::filesystem::path dataset_config;
  std::filesystem::path catalog;
  AssemblyMode setting = AssemblyMode::fewshot;
  int shots = 5;
  // Long-tail profile, used when the dataset config has no per_class_counts.
  int longtail_n_max = 0;
  double longtail_imbalance = 1.0;
  std::optional<SplitTag> val_pool;  // default: train (fewshot), test (longtail)

  BackendConfig caption_backend;
  BackendConfig generate_backend;
  std::uint64_t global_seed = 0;
  std::filesystem::path out = "out";

  MarginalizationMode mode = MarginalizationMode::dataset_level;
  bool preserve_context = true;
  double lambda = 0.5;
  std::vector<double> lambda_sweep = {0.5, 0.8};
  int budget = 100;  // synthetic images per class (fewshot)
  bool mixup = true;
  bool cutmix = true;

  std::string base_model_id = "stable-diffusion-2-1-base";
  FineTuneHyperparams finetune;
  GenerationParams generation;

  void validate() const;
};

/// Relative paths in the file resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});

namespace artifacts {
inline constexpr const char* kDataset = "dataset.json";
inline constexpr const char* kCatalog = "catalog.jsonl";
inline constexpr const char* kSplits = "splits.json";
inline constexpr const char* kBank = "bank.jsonl";
inline constexpr const char* kJob = "finetune_job.json";
inline constexpr const char* kPlan = "plan.jsonl";
inline constexpr const char* kGenerated = "generated.jsonl";
inline constexpr const char* kManifest = "manifest.jsonl";
}  // namespace artifacts

struct Splits {
  std::string catalog_digest;
  std::string dataset_digest;
  AssemblyMode setting = AssemblyMode::fewshot;
  std::uint64_t seed = 0;
  SplitAssignment train;
  SplitAssignment val;
};

std::string serialize_splits(const Splits& s);
Splits parse_splits(const std::string& text);

struct GeneratedItem {
  std::size_t index = 0;
  std::string ref;
  bool ok = false;
  std::string payload_sha256;
  std::string error;
};

struct GeneratedSet {
  std::string plan_digest;
  std::string generator;
  std::vector<GeneratedItem> items;
};

std::string serialize_generated(const GeneratedSet& g);
GeneratedSet parse_generated(const std::string& text);

// Stages. Each throws ValidationError (incl. ProvenanceError) or TransportError.
void stage_ingest(const RunConfig& cfg, std::ostream& log);
void stage_split(const RunConfig& cfg, std::ostream& log);
void stage_extract(const RunConfig& cfg, std::ostream& log);
void stage_finetune_manifest(const RunConfig& cfg, std::ostream& log);
void stage_plan(const RunConfig& cfg, std::ostream& log);
/// With dry_run the plan is printed to `log` and no backend is contacted.
/// Returns the number of failed items.
std::size_t stage_generate(const RunConfig& cfg, bool dry_run, std::ostream& log);
void stage_assemble(const RunConfig& cfg, std::ostream& log);

struct FidStageArgs {
  std::filesystem::path real_index;
  std::filesystem::path syn_index;
  std::optional<std::filesystem::path> baseline;  // earlier fid.json for the delta histogram
  std::filesystem::path out;
  FidOptions options;
};
FidReport stage_fid(const FidStageArgs& args, std::ostream& log);

struct ScmDemoArgs {
  std::string model = "toy-confounded";
  std::optional<std::filesystem::path> scm_path;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};
std::string stage_scm_demo(const ScmDemoArgs& args, std::ostream& log);

/// Loads the bank and checks it against the splits artifact.
CaptionBank load_checked_bank(const std::filesystem::path& out_dir);
/// Loads the plan and checks its bank digest against bank.jsonl.
GenerationPlan load_checked_plan(const std::filesystem::path& out_dir);

}  // namespace ctxsynth
