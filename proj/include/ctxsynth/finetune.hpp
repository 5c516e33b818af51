// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fine-tune job description for the external text-to-image trainer: one
// (image, caption) pair per training image plus LoRA hyperparameters and
// the generation settings used afterwards.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctxsynth/backend.hpp"
#include "ctxsynth/caption_bank.hpp"
#include "ctxsynth/catalog.hpp"

namespace ctxsynth {

struct FineTuneHyperparams {
  double learning_rate = 1e-4;
  double weight_decay = 1e-2;
  int epochs = 400;
  int batch_size = 80;
  std::string scheduler = "cosine";
  int warmup_steps = 100;
  double max_grad_norm = 1.0;
  int lora_rank = 16;
  bool mixed_precision = false;
  std::vector<std::string> lora_targets = {"unet-attention", "text-encoder-attention"};

  bool operator==(const FineTuneHyperparams&) const = default;
};

struct FineTunePair {
  std::string image_id;
  std::string path;
  std::string caption;

  bool operator==(const FineTunePair&) const = default;
};

struct FineTuneJob {
  std::string base_model_id;
  FineTuneHyperparams hyperparams;
  GenerationParams generation;
  std::string generation_precision = "fp16";
  std::vector<FineTunePair> pairs;
  std::string bank_digest;

  bool operator==(const FineTuneJob&) const = default;
};

/// One pair per train image, captioned from that image's own bank entry.
FineTuneJob build_finetune_job(const DatasetCatalog& catalog, const SplitAssignment& train,
                               const CaptionBank& bank, const std::string& descriptor,
                               const FineTuneHyperparams& hyperparams,
                               const std::string& base_model_id,
                               const GenerationParams& generation = {});

std::string serialize_job(const FineTuneJob& job);
FineTuneJob parse_job(const std::string& text);

/// Builds and writes the job file.
FineTuneJob emit_finetune_job(const std::filesystem::path& out, const DatasetCatalog& catalog,
                              const SplitAssignment& train, const CaptionBank& bank,
                              const std::string& descriptor, const FineTuneHyperparams& hyperparams,
                              const std::string& base_model_id,
                              const GenerationParams& generation = {});

struct JobReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

JobReport validate_job(const FineTuneJob& job);
/// Throws ValidationError if the file cannot be read or parsed.
JobReport validate_job(const std::filesystem::path& path);

/// Every caption must re-render exactly from its image's bank entry.
JobReport check_job_against_bank(const FineTuneJob& job, const CaptionBank& bank,
                                 const std::string& descriptor);

}  // namespace ctxsynth
