// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/finetune.hpp"

#include "ctxsynth/prompt.hpp"
#include "json.hpp"

namespace ctxsynth {

using nlohmann::ordered_json;

FineTuneJob build_finetune_job(const DatasetCatalog& catalog, const SplitAssignment& train,
                               const CaptionBank& bank, const std::string& descriptor,
                               const FineTuneHyperparams& hyperparams,
                               const std::string& base_model_id,
                               const GenerationParams& generation) {
  if (base_model_id.empty()) throw ValidationError("finetune job: empty base_model_id");
  FineTuneJob job;
  job.base_model_id = base_model_id;
  job.hyperparams = hyperparams;
  job.generation = generation;
  job.pairs.reserve(train.image_ids.size());
  for (const auto& id : train.image_ids) {
    const auto* rec = catalog.find(id);
    if (!rec) throw ValidationError("finetune job: train image '" + id + "' not in catalog");
    const auto* entry = bank.find(id);
    if (!entry) throw ValidationError("finetune job: bank is missing image '" + id + "'");
    job.pairs.push_back({id, rec->path,
                         render_training_caption({descriptor, rec->class_label,
                                                  entry->pair.background, entry->pair.pose})});
  }
  return job;
}

std::string serialize_job(const FineTuneJob& job) {
  const auto& h = job.hyperparams;
  ordered_json j;
  j["base_model_id"] = job.base_model_id;
  j["bank_digest"] = job.bank_digest;
  j["hyperparams"] = {
      {"learning_rate", h.learning_rate}, {"weight_decay", h.weight_decay},
      {"epochs", h.epochs},               {"batch_size", h.batch_size},
      {"scheduler", h.scheduler},         {"warmup_steps", h.warmup_steps},
      {"max_grad_norm", h.max_grad_norm}, {"lora_rank", h.lora_rank},
      {"mixed_precision", h.mixed_precision}, {"lora_targets", h.lora_targets},
  };
  j["generation"] = {
      {"guidance_scale", job.generation.guidance_scale},
      {"num_steps", job.generation.num_steps},
      {"width", job.generation.width},
      {"height", job.generation.height},
      {"mixed_precision", job.generation_precision},
  };
  auto pairs = ordered_json::array();
  for (const auto& p : job.pairs)
    pairs.push_back({{"image_id", p.image_id}, {"path", p.path}, {"caption", p.caption}});
  j["pairs"] = std::move(pairs);
  return j.dump(2) + "\n";
}

FineTuneJob parse_job(const std::string& text) {
  FineTuneJob job;
  try {
    const auto j = ordered_json::parse(text);
    job.base_model_id = j.at("base_model_id").get<std::string>();
    job.bank_digest = j.value("bank_digest", "");
    const auto& h = j.at("hyperparams");
    auto& hp = job.hyperparams;
    hp.learning_rate = h.at("learning_rate").get<double>();
    hp.weight_decay = h.at("weight_decay").get<double>();
    hp.epochs = h.at("epochs").get<int>();
    hp.batch_size = h.at("batch_size").get<int>();
    hp.scheduler = h.at("scheduler").get<std::string>();
    hp.warmup_steps = h.at("warmup_steps").get<int>();
    hp.max_grad_norm = h.at("max_grad_norm").get<double>();
    hp.lora_rank = h.at("lora_rank").get<int>();
    hp.mixed_precision = h.at("mixed_precision").get<bool>();
    hp.lora_targets = h.at("lora_targets").get<std::vector<std::string>>();
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      job.generation.guidance_scale = g.at("guidance_scale").get<double>();
      job.generation.num_steps = g.at("num_steps").get<int>();
      job.generation.width = g.value("width", job.generation.width);
      job.generation.height = g.value("height", job.generation.height);
      job.generation_precision = g.value("mixed_precision", job.generation_precision);
    }
    for (const auto& p : j.at("pairs"))
      job.pairs.push_back({p.value("image_id", ""), p.at("path").get<std::string>(),
                           p.at("caption").get<std::string>()});
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("finetune job: malformed: ") + e.what());
  }
  return job;
}

FineTuneJob emit_finetune_job(const std::filesystem::path& out, const DatasetCatalog& catalog,
                              const SplitAssignment& train, const CaptionBank& bank,
                              const std::string& descriptor, const FineTuneHyperparams& hyperparams,
                              const std::string& base_model_id, const GenerationParams& generation) {
  auto job = build_finetune_job(catalog, train, bank, descriptor, hyperparams, base_model_id, generation);
  job.bank_digest = sha256_hex(serialize_bank(bank));
  write_file_atomic(out, serialize_job(job));
  return job;
}

JobReport validate_job(const FineTuneJob& job) {
  JobReport r;
  auto& v = r.violations;
  const auto& h = job.hyperparams;
  if (job.base_model_id.empty()) v.push_back("base_model_id is empty");
  if (!(h.learning_rate > 0.0)) v.push_back("learning_rate must be positive");
  if (!(h.weight_decay >= 0.0)) v.push_back("weight_decay must be non-negative");
  if (h.epochs < 1) v.push_back("epochs must be positive");
  if (h.batch_size < 1) v.push_back("batch_size must be positive");
  if (h.warmup_steps < 0) v.push_back("warmup_steps must be non-negative");
  if (!(h.max_grad_norm > 0.0)) v.push_back("max_grad_norm must be positive");
  if (h.lora_rank < 1) v.push_back("lora_rank must be positive");
  if (h.scheduler.empty()) v.push_back("scheduler is empty");
  if (h.lora_targets.empty()) v.push_back("lora_targets is empty");
  if (!(job.generation.guidance_scale > 0.0)) v.push_back("guidance_scale must be positive");
  if (job.generation.num_steps < 1) v.push_back("num_steps must be positive");
  if (job.pairs.empty()) v.push_back("no image-caption pairs");
  for (std::size_t i = 0; i < job.pairs.size(); ++i) {
    const auto& p = job.pairs[i];
    const std::string where = "pair " + std::to_string(i) + " (" + p.image_id + "): ";
    if (p.path.empty()) v.push_back(where + "empty path");
    if (!matches_training_template(p.caption)) v.push_back(where + "template mismatch");
  }
  return r;
}

JobReport validate_job(const std::filesystem::path& path) {
  return validate_job(parse_job(read_file(path)));
}

JobReport check_job_against_bank(const FineTuneJob& job, const CaptionBank& bank,
                                 const std::string& descriptor) {
  JobReport r;
  for (const auto& p : job.pairs) {
    const auto* e = bank.find(p.image_id);
    if (!e) {
      r.violations.push_back(p.image_id + ": not in bank");
      continue;
    }
    const auto slots = parse_training_caption(p.caption);
    const CaptionSlots expected{descriptor, e->class_label, e->pair.background, e->pair.pose};
    if (!slots || *slots != expected || render_training_caption(expected) != p.caption)
      r.violations.push_back(p.image_id + ": caption does not match bank entry");
  }
  if (job.pairs.size() != bank.entries.size())
    r.violations.push_back("pair count " + std::to_string(job.pairs.size()) + " != bank size " +
                           std::to_string(bank.entries.size()));
  return r;
}

}  // namespace ctxsynth
