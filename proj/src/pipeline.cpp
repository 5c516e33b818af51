// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/pipeline.hpp"

#include <ostream>
#include <sstream>

#include "ctxsynth/caption_bank.hpp"
#include "ctxsynth/catalog.hpp"
#include "ctxsynth/dispatch.hpp"
#include "ctxsynth/scm.hpp"
#include "json.hpp"

namespace ctxsynth {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void RunConfig::validate() const {
  if (dataset_config.empty()) throw ValidationError("run config: dataset_config is required");
  if (catalog.empty()) throw ValidationError("run config: catalog is required");
  if (shots < 1) throw ValidationError("run config: shots must be >= 1");
  if (budget < 0) throw ValidationError("run config: budget must be >= 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("run config: lambda must lie in [0, 1]");
  for (double v : lambda_sweep)
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("run config: lambda_sweep values must lie in [0, 1]");
  if (out.empty()) throw ValidationError("run config: out directory is required");
  caption_backend.validate();
  generate_backend.validate();
  generation.validate();
}

RunConfig run_config_from_json(const std::string& text, const fs::path& base_dir) {
  RunConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    const auto j = json::parse(text);
    c.dataset_config = resolve(j.at("dataset_config").get<std::string>());
    c.catalog = resolve(j.at("catalog").get<std::string>());
    c.setting = parse_assembly_mode(j.value("setting", "fewshot"));
    c.shots = j.value("shots", c.shots);
    if (j.contains("longtail")) {
      c.longtail_n_max = j["longtail"].value("n_max", 0);
      c.longtail_imbalance = j["longtail"].value("imbalance_factor", 1.0);
    }
    if (j.contains("val_pool")) c.val_pool = parse_split_tag(j["val_pool"].get<std::string>());
    if (j.contains("caption_backend")) c.caption_backend = backend_config_from_json(j["caption_backend"].dump());
    if (j.contains("generate_backend")) c.generate_backend = backend_config_from_json(j["generate_backend"].dump());
    c.global_seed = j.value("global_seed", c.global_seed);
    c.out = resolve(j.value("out", std::string("out")));
    c.mode = parse_mode(j.value("mode", std::string("dataset_level")));
    c.preserve_context = j.value("preserve_context", c.preserve_context);
    c.lambda = j.value("lambda", c.lambda);
    c.lambda_sweep = j.value("lambda_sweep", c.lambda_sweep);
    c.budget = j.value("budget", c.budget);
    c.mixup = j.value("mixup", c.mixup);
    c.cutmix = j.value("cutmix", c.cutmix);
    c.base_model_id = j.value("base_model_id", c.base_model_id);
    if (j.contains("finetune")) {
      const auto& f = j["finetune"];
      auto& h = c.finetune;
      h.learning_rate = f.value("learning_rate", h.learning_rate);
      h.weight_decay = f.value("weight_decay", h.weight_decay);
      h.epochs = f.value("epochs", h.epochs);
      h.batch_size = f.value("batch_size", h.batch_size);
      h.scheduler = f.value("scheduler", h.scheduler);
      h.warmup_steps = f.value("warmup_steps", h.warmup_steps);
      h.max_grad_norm = f.value("max_grad_norm", h.max_grad_norm);
      h.lora_rank = f.value("lora_rank", h.lora_rank);
      h.mixed_precision = f.value("mixed_precision", h.mixed_precision);
      h.lora_targets = f.value("lora_targets", h.lora_targets);
    }
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      c.generation.guidance_scale = g.value("guidance_scale", c.generation.guidance_scale);
      c.generation.num_steps = g.value("num_steps", c.generation.num_steps);
      c.generation.width = g.value("width", c.generation.width);
      c.generation.height = g.value("height", c.generation.height);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config not found: " + path.string());
  return run_config_from_json(read_file(path), path.parent_path());
}

std::string serialize_splits(const Splits& s) {
  ordered_json j;
  j["catalog_digest"] = s.catalog_digest;
  j["dataset_digest"] = s.dataset_digest;
  j["setting"] = to_string(s.setting);
  j["seed"] = s.seed;
  j["train"] = s.train.image_ids;
  j["val"] = s.val.image_ids;
  return j.dump(2) + "\n";
}

Splits parse_splits(const std::string& text) {
  Splits s;
  try {
    const auto j = json::parse(text);
    s.catalog_digest = j.at("catalog_digest").get<std::string>();
    s.dataset_digest = j.at("dataset_digest").get<std::string>();
    s.setting = parse_assembly_mode(j.at("setting").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train.image_ids = j.at("train").get<std::vector<std::string>>();
    s.val.image_ids = j.at("val").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("splits: malformed: ") + e.what());
  }
  return s;
}

std::string serialize_generated(const GeneratedSet& g) {
  ordered_json h;
  h["plan_digest"] = g.plan_digest;
  h["generator"] = g.generator;
  h["count"] = g.items.size();
  std::string out = h.dump() + "\n";
  for (const auto& it : g.items) {
    ordered_json j;
    j["index"] = it.index;
    j["ref"] = it.ref;
    j["ok"] = it.ok;
    j["payload_sha256"] = it.payload_sha256;
    j["error"] = it.error;
    out += j.dump() + "\n";
  }
  return out;
}

GeneratedSet parse_generated(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("generated: missing header");
  GeneratedSet g;
  std::size_t count = 0;
  try {
    const auto h = json::parse(line);
    g.plan_digest = h.at("plan_digest").get<std::string>();
    g.generator = h.at("generator").get<std::string>();
    count = h.at("count").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      g.items.push_back({j.at("index").get<std::size_t>(), j.at("ref").get<std::string>(),
                         j.at("ok").get<bool>(), j.at("payload_sha256").get<std::string>(),
                         j.at("error").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("generated: malformed: ") + e.what());
  }
  if (g.items.size() != count) throw ValidationError("generated: header count does not match items");
  return g;
}

namespace {

fs::path artifact(const RunConfig& cfg, const char* name) { return cfg.out / name; }

void require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ValidationError(what + " not found (" + p.string() + "); run the earlier stage first");
}

struct Ingested {
  DatasetConfig dataset;
  DatasetCatalog catalog;
};

Ingested load_ingested(const fs::path& out) {
  require(out / artifacts::kCatalog, "catalog");
  require(out / artifacts::kDataset, "dataset config");
  Ingested in;
  in.dataset = load_dataset_config(out / artifacts::kDataset);
  in.catalog = load_catalog(out / artifacts::kCatalog, in.dataset.classes);
  return in;
}

Splits load_checked_splits(const fs::path& out) {
  require(out / artifacts::kSplits, "splits");
  auto s = parse_splits(read_file(out / artifacts::kSplits));
  if (s.catalog_digest != sha256_file(out / artifacts::kCatalog))
    throw ProvenanceError("splits.json was built from a different catalog; rerun split");
  if (s.dataset_digest != sha256_file(out / artifacts::kDataset))
    throw ProvenanceError("splits.json was built from a different dataset config; rerun split");
  return s;
}

std::string format_lambda(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

CaptionBank load_checked_bank(const fs::path& out) {
  require(out / artifacts::kBank, "caption bank");
  auto bank = load_bank(out / artifacts::kBank);
  require(out / artifacts::kSplits, "splits");
  if (bank.upstream_digest != sha256_file(out / artifacts::kSplits))
    throw ProvenanceError("bank.jsonl was built from different splits; rerun extract");
  return bank;
}

GenerationPlan load_checked_plan(const fs::path& out) {
  require(out / artifacts::kPlan, "plan");
  auto plan = parse_plan(read_file(out / artifacts::kPlan));
  load_checked_bank(out);
  if (plan.bank_digest != sha256_file(out / artifacts::kBank))
    throw ProvenanceError("plan.jsonl was built from a different caption bank; rerun plan");
  return plan;
}

void stage_ingest(const RunConfig& cfg, std::ostream& log) {
  const auto dataset = load_dataset_config(cfg.dataset_config);
  auto catalog = load_catalog(cfg.catalog, dataset.classes);
  // Image paths in the copied catalog no longer depend on where it lives.
  const auto base = fs::absolute(cfg.catalog).parent_path();
  for (auto& r : catalog.records)
    if (fs::path(r.path).is_relative()) r.path = (base / r.path).lexically_normal().string();
  write_file_atomic(artifact(cfg, artifacts::kDataset), dataset_config_to_json(dataset));
  write_file_atomic(artifact(cfg, artifacts::kCatalog), serialize_catalog(catalog));
  log << "ingest: " << catalog.records.size() << " records, " << catalog.classes.size() << " classes\n";
}

void stage_split(const RunConfig& cfg, std::ostream& log) {
  const auto in = load_ingested(cfg.out);
  Splits s;
  s.catalog_digest = sha256_file(artifact(cfg, artifacts::kCatalog));
  s.dataset_digest = sha256_file(artifact(cfg, artifacts::kDataset));
  s.setting = cfg.setting;
  s.seed = cfg.global_seed;
  SplitTag pool = SplitTag::train;
  if (cfg.setting == AssemblyMode::fewshot) {
    s.train = make_fewshot_split(in.catalog, cfg.shots, cfg.global_seed);
  } else {
    std::vector<int> counts;
    if (in.dataset.per_class_counts) {
      counts = *in.dataset.per_class_counts;
    } else {
      if (cfg.longtail_n_max < 1)
        throw ValidationError("split: longtail setting needs per_class_counts or longtail.n_max");
      counts = long_tail_counts(cfg.longtail_n_max, cfg.longtail_imbalance,
                                static_cast<int>(in.catalog.classes.size()))
                   .per_class_counts;
    }
    s.train = make_longtail_split(in.catalog, counts, cfg.global_seed);
    pool = SplitTag::test;
  }
  if (cfg.val_pool) pool = *cfg.val_pool;
  s.val = make_validation_split(in.catalog, in.dataset.val_per_class, cfg.global_seed, s.train, pool);
  write_file_atomic(artifact(cfg, artifacts::kSplits), serialize_splits(s));
  log << "split: " << s.train.image_ids.size() << " train, " << s.val.image_ids.size() << " val\n";
}

void stage_extract(const RunConfig& cfg, std::ostream& log) {
  const auto in = load_ingested(cfg.out);
  const auto splits = load_checked_splits(cfg.out);
  auto captioner = make_captioner(cfg.caption_backend);
  BuildBankOptions opts;
  opts.max_in_flight = cfg.caption_backend.max_in_flight;
  auto bank = build_bank(in.catalog, splits.train, in.dataset.descriptor, in.dataset.name, *captioner, opts);
  bank.upstream_digest = sha256_file(artifact(cfg, artifacts::kSplits));
  save_bank(bank, artifact(cfg, artifacts::kBank));
  const auto stats = bank_stats(bank);
  log << "extract: " << stats.total << " entries, " << stats.distinct_pairs << " distinct pairs, "
      << stats.degraded << " degraded\n";
}

void stage_finetune_manifest(const RunConfig& cfg, std::ostream& log) {
  const auto in = load_ingested(cfg.out);
  const auto splits = load_checked_splits(cfg.out);
  const auto bank = load_checked_bank(cfg.out);
  const auto job = emit_finetune_job(artifact(cfg, artifacts::kJob), in.catalog, splits.train, bank,
                                     in.dataset.descriptor, cfg.finetune, cfg.base_model_id, cfg.generation);
  const auto report = validate_job(job);
  if (!report.ok()) throw ValidationError("finetune job failed validation: " + report.violations.front());
  log << "finetune-manifest: " << job.pairs.size() << " pairs, " << job.hyperparams.epochs << " epochs\n";
}

void stage_plan(const RunConfig& cfg, std::ostream& log) {
  const auto in = load_ingested(cfg.out);
  const auto splits = load_checked_splits(cfg.out);
  const auto bank = load_checked_bank(cfg.out);

  std::map<std::string, int> budgets;
  if (cfg.setting == AssemblyMode::fewshot) {
    for (const auto& c : in.catalog.classes) budgets[c] = cfg.budget;
  } else {
    std::map<std::string, int> n_real;
    for (const auto& id : splits.train.image_ids) ++n_real[in.catalog.find(id)->class_label];
    const BudgetConfig b{in.dataset.total_budget_T, in.dataset.duplication_factor_c};
    for (const auto& c : in.catalog.classes) budgets[c] = longtail_synth_budget(n_real[c], b);
  }
  PlanOptions opts;
  opts.mode = cfg.mode;
  opts.global_seed = cfg.global_seed;
  opts.descriptor = in.dataset.descriptor;
  opts.preserve_context = cfg.preserve_context;
  opts.bank_digest = sha256_file(artifact(cfg, artifacts::kBank));
  const auto plan = build_generation_plan(bank, in.catalog.classes, budgets, opts);
  write_file_atomic(artifact(cfg, artifacts::kPlan), serialize_plan(plan));
  log << "plan: " << plan.items.size() << " items, mode " << to_string(plan.mode) << ", pair/class MI "
      << empirical_pair_class_mi(plan) << " nats\n";
}

std::size_t stage_generate(const RunConfig& cfg, bool dry_run, std::ostream& log) {
  const auto plan = load_checked_plan(cfg.out);
  if (dry_run) {
    for (const auto& it : plan.items)
      log << it.index << '\t' << it.class_label << '\t' << it.seed << '\t' << it.prompt << '\n';
    return 0;
  }
  if (plan.items.empty()) throw ValidationError("generate: plan is empty");
  auto generator = make_generator(cfg.generate_backend);
  const auto results = dispatch_plan(plan, cfg.generation, cfg.generate_backend, *generator);

  GeneratedSet g;
  g.plan_digest = sha256_file(artifact(cfg, artifacts::kPlan));
  g.generator = generator->name();
  std::size_t failed = 0;
  for (const auto& r : results) {
    GeneratedItem item;
    item.index = r.index;
    item.ref = synthetic_ref(plan.items[r.index]);
    item.ok = r.ok;
    if (r.ok) {
      write_file_atomic(cfg.out / item.ref, r.image.payload);
      item.payload_sha256 = sha256_hex(r.image.payload);
    } else {
      item.error = r.error;
      ++failed;
    }
    g.items.push_back(std::move(item));
  }
  write_file_atomic(artifact(cfg, artifacts::kGenerated), serialize_generated(g));
  log << "generate: " << (results.size() - failed) << " ok, " << failed << " failed\n";
  return failed;
}

void stage_assemble(const RunConfig& cfg, std::ostream& log) {
  const auto in = load_ingested(cfg.out);
  const auto splits = load_checked_splits(cfg.out);
  const auto plan = load_checked_plan(cfg.out);
  require(artifact(cfg, artifacts::kGenerated), "generated set");
  const auto gen = parse_generated(read_file(artifact(cfg, artifacts::kGenerated)));
  if (gen.plan_digest != sha256_file(artifact(cfg, artifacts::kPlan)))
    throw ProvenanceError("generated.jsonl was produced from a different plan; rerun generate");

  std::vector<LabeledRef> real, synthetic;
  for (const auto& id : splits.train.image_ids) {
    const auto* r = in.catalog.find(id);
    if (!r) throw ValidationError("assemble: train image '" + id + "' not in catalog");
    real.push_back({r->path, r->class_label});
  }
  for (const auto& it : gen.items) {
    if (!it.ok) continue;
    const auto& item = resolve_synthetic_ref(it.ref, plan);
    synthetic.push_back({it.ref, item.class_label});
  }
  const BudgetConfig budget{in.dataset.total_budget_T, in.dataset.duplication_factor_c};
  const std::string upstream = sha256_hex(sha256_file(artifact(cfg, artifacts::kSplits)) + "\n" +
                                          sha256_file(artifact(cfg, artifacts::kPlan)) + "\n" +
                                          sha256_file(artifact(cfg, artifacts::kGenerated)));
  auto build = [&](double lambda) {
    auto m = assemble_manifest(real, synthetic, lambda, cfg.setting, budget);
    m.mixup = cfg.mixup;
    m.cutmix = cfg.cutmix;
    m.upstream_digest = upstream;
    return m;
  };
  const auto manifest = build(cfg.lambda);
  write_file_atomic(artifact(cfg, artifacts::kManifest), serialize_manifest(manifest));
  for (double v : cfg.lambda_sweep)
    write_file_atomic(cfg.out / ("manifest-lambda-" + format_lambda(v) + ".jsonl"),
                      serialize_manifest(build(v)));
  log << "assemble: " << manifest.entries.size() << " entries, lambda " << manifest.lambda << "\n";
}

FidReport stage_fid(const FidStageArgs& args, std::ostream& log) {
  const auto real = load_feature_index(args.real_index);
  const auto syn = load_feature_index(args.syn_index);
  const auto report = per_class_fid(real, syn, args.options);
  write_file_atomic(args.out / "fid.json", fid_report_to_json(report));
  std::vector<double> values;
  for (const auto& [_, v] : report.per_class) values.push_back(v);
  write_file_atomic(args.out / "fid_hist.csv", histogram_csv(histogram(values, 1.0)));
  if (args.baseline) {
    const auto base = fid_report_from_json(read_file(*args.baseline));
    const auto delta = fid_delta(report, base);
    std::ostringstream csv;
    csv << "class_label,delta\n";
    std::vector<double> deltas;
    for (const auto& [label, d] : delta) {
      csv << label << ',' << d << '\n';
      deltas.push_back(d);
    }
    write_file_atomic(args.out / "fid_delta.csv", csv.str());
    write_file_atomic(args.out / "fid_delta_hist.csv", histogram_csv(histogram(deltas, 1.0)));
  }
  log << "fid: " << report.per_class.size() << " classes, mode " << report.mode_estimate << "\n";
  return report;
}

std::string stage_scm_demo(const ScmDemoArgs& args, std::ostream& log) {
  const auto scm = args.scm_path ? scm_from_json(read_file(*args.scm_path)) : toy_scm();
  const std::string model = args.scm_path ? "custom" : args.model;
  if (!args.scm_path && model != "toy-confounded" && model != "toy-iid")
    throw ValidationError("scm-demo: unknown model '" + model + "' (toy-confounded, toy-iid)");
  const auto csv = demo_csv(scm_demo(scm, model, args.samples, args.seed));
  if (args.out) write_file_atomic(*args.out / "scm_demo.csv", csv);
  log << csv;
  return csv;
}

}  // namespace ctxsynth
