// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// ctxsynth: runs one pipeline stage per invocation.
// Exit codes: 0 success, 1 validation / dependency error, 2 backend error.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ctxsynth/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<double> lambda;
  std::optional<int> budget;
  std::optional<std::string> out;
};

ctxsynth::RunConfig resolve_config(const std::string& path, const Overrides& o) {
  if (path.empty()) throw ctxsynth::ValidationError("--config is required for this subcommand");
  auto cfg = ctxsynth::load_run_config(path);
  if (o.seed) cfg.global_seed = *o.seed;
  if (o.mode) cfg.mode = ctxsynth::parse_mode(*o.mode);
  if (o.lambda) cfg.lambda = *o.lambda;
  if (o.budget) cfg.budget = *o.budget;
  if (o.out) cfg.out = *o.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-preserving, context-marginalized synthetic data pipeline"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  Overrides o;
  bool dry_run = false;
  app.add_option("--config", config_path, "Run config (JSON)");
  app.add_option("--seed", o.seed, "Global seed (u64)");
  app.add_option("--mode", o.mode, "Marginalization mode")
      ->check(CLI::IsMember({"none", "class", "dataset", "class_level", "dataset_level"}));
  app.add_option("--lambda", o.lambda, "Real/synthetic loss weight")->check(CLI::Range(0.0, 1.0));
  app.add_option("--budget", o.budget, "Synthetic images per class")->check(CLI::NonNegativeNumber);
  app.add_option("--out", o.out, "Output directory");

  auto* ingest = app.add_subcommand("ingest", "Validate the dataset config and catalog");
  auto* split = app.add_subcommand("split", "Draw train and validation splits");
  auto* extract = app.add_subcommand("extract", "Build the caption bank");
  auto* finetune = app.add_subcommand("finetune-manifest", "Emit the fine-tune job");
  auto* plan = app.add_subcommand("plan", "Build the generation plan");
  auto* generate = app.add_subcommand("generate", "Run the generation plan");
  generate->add_flag("--dry-run", dry_run, "Print the plan without contacting the backend");
  auto* assemble = app.add_subcommand("assemble", "Assemble the training manifest");

  auto* fid = app.add_subcommand("fid", "Per-class Frechet distance from feature files");
  ctxsynth::FidStageArgs fid_args;
  std::optional<std::string> baseline;
  fid->add_option("--real-index", fid_args.real_index, "Real feature index")->required();
  fid->add_option("--syn-index", fid_args.syn_index, "Synthetic feature index")->required();
  fid->add_option("--baseline", baseline, "Earlier fid.json to diff against");
  fid->add_option("--eps", fid_args.options.eps, "Covariance regularization");

  auto* scm = app.add_subcommand("scm-demo", "Marginalization check on a discrete causal model");
  ctxsynth::ScmDemoArgs scm_args;
  std::optional<std::string> scm_path;
  scm->add_option("--model", scm_args.model, "toy-confounded or toy-iid");
  scm->add_option("--scm", scm_path, "SCM spec file (JSON)");
  scm->add_option("--samples", scm_args.samples, "Pipeline samples per class");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fid) {
      fid_args.out = o.out.value_or(".");
      if (baseline) fid_args.baseline = *baseline;
      ctxsynth::stage_fid(fid_args, std::cerr);
      return 0;
    }
    if (*scm) {
      if (scm_path) scm_args.scm_path = *scm_path;
      if (o.seed) scm_args.seed = *o.seed;
      if (o.out) scm_args.out = *o.out;
      ctxsynth::stage_scm_demo(scm_args, std::cout);
      return 0;
    }

    const auto cfg = resolve_config(config_path, o);
    if (*ingest) ctxsynth::stage_ingest(cfg, std::cerr);
    else if (*split) ctxsynth::stage_split(cfg, std::cerr);
    else if (*extract) ctxsynth::stage_extract(cfg, std::cerr);
    else if (*finetune) ctxsynth::stage_finetune_manifest(cfg, std::cerr);
    else if (*plan) ctxsynth::stage_plan(cfg, std::cerr);
    else if (*generate) {
      const auto failed = ctxsynth::stage_generate(cfg, dry_run, dry_run ? std::cout : std::cerr);
      if (failed > 0) {
        std::cerr << "error: " << failed << " generation requests failed\n";
        return 2;
      }
    } else if (*assemble) ctxsynth::stage_assemble(cfg, std::cerr);
    return 0;
  } catch (const ctxsynth::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ctxsynth::TransportError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
