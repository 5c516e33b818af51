// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/finetune.hpp"
#include "ctxsynth/prompt.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_helpers.hpp"

using namespace ctxsynth;
using namespace ctxsynth::testing;

namespace {

struct Fixture {
  DatasetCatalog cat = make_catalog({"737-400", "F/A-18"}, 5);
  SplitAssignment train = make_fewshot_split(cat, 5, 2);
  CaptionBank bank;
  Fixture() {
    StubCaptioner cap;
    BuildBankOptions o;
    o.loader = [](const ImageRecord& r) { return r.image_id; };
    bank = build_bank(cat, train, "aircraft", "toy", cap, o);
  }
};

}  // namespace

TEST_CASE("hyperparameter defaults") {
  const FineTuneHyperparams h;
  CHECK(h.learning_rate == 1e-4);
  CHECK(h.weight_decay == 1e-2);
  CHECK(h.epochs == 400);
  CHECK(h.batch_size == 80);
  CHECK(h.scheduler == "cosine");
  CHECK(h.warmup_steps == 100);
  CHECK(h.max_grad_norm == 1.0);
  CHECK(h.lora_rank == 16);
  CHECK_FALSE(h.mixed_precision);
  CHECK(FineTuneJob{}.generation_precision == "fp16");
}

TEST_CASE("one pair per train image, captioned from its own bank entry") {
  Fixture f;
  const auto job = build_finetune_job(f.cat, f.train, f.bank, "aircraft", {}, "sd-base");
  REQUIRE(job.pairs.size() == 10);
  for (const auto& p : job.pairs) {
    const auto* e = f.bank.find(p.image_id);
    REQUIRE(e != nullptr);
    CHECK(p.caption == render_training_caption({"aircraft", e->class_label, e->pair.background, e->pair.pose}));
    CHECK(p.path == f.cat.find(p.image_id)->path);
    const auto slots = parse_training_caption(p.caption);
    REQUIRE(slots);
    CHECK(slots->background == e->pair.background);
    CHECK(slots->pose == e->pair.pose);
  }
  CHECK(validate_job(job).ok());
  CHECK(check_job_against_bank(job, f.bank, "aircraft").ok());
}

TEST_CASE("job errors") {
  Fixture f;
  CHECK_THROWS_AS(build_finetune_job(f.cat, f.train, f.bank, "aircraft", {}, ""), ValidationError);
  auto partial = f.bank;
  const auto missing = partial.entries.front().image_id;
  partial.entries.erase(partial.entries.begin());
  const std::string expected = "bank is missing image '" + missing + "'";
  CHECK_THROWS_WITH_AS(build_finetune_job(f.cat, f.train, partial, "aircraft", {}, "m"),
                       doctest::Contains(expected.c_str()), ValidationError);
  auto bad_train = f.train;
  bad_train.image_ids.push_back("ghost");
  CHECK_THROWS_AS(build_finetune_job(f.cat, bad_train, f.bank, "aircraft", {}, "m"), ValidationError);
}

TEST_CASE("serialization round trip and generation block") {
  Fixture f;
  TempDir dir("job");
  GenerationParams g;
  const auto job = emit_finetune_job(dir.path() / "job.json", f.cat, f.train, f.bank, "aircraft", {}, "sd", g);
  CHECK(job.bank_digest == sha256_hex(serialize_bank(f.bank)));
  const auto text = read_file(dir.path() / "job.json");
  CHECK(parse_job(text) == job);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["hyperparams"]["learning_rate"].get<double>() == 1e-4);
  CHECK(j["hyperparams"]["lora_rank"] == 16);
  CHECK(j["generation"]["guidance_scale"].get<double>() == 2.0);
  CHECK(j["generation"]["num_steps"] == 50);
  CHECK(validate_job(dir.path() / "job.json").ok());
  CHECK_THROWS_AS(parse_job("{}"), ValidationError);
  CHECK_THROWS_AS(validate_job(dir.path() / "nope.json"), std::exception);
}

TEST_CASE("validate_job reports violations") {
  Fixture f;
  auto job = build_finetune_job(f.cat, f.train, f.bank, "aircraft", {}, "sd");
  job.hyperparams.epochs = 0;
  job.hyperparams.lora_rank = 0;
  job.pairs[3].caption = "a photo of a 737-400";
  const auto r = validate_job(job);
  CHECK(r.violations.size() == 3);
  CHECK_FALSE(check_job_against_bank(job, f.bank, "aircraft").ok());
}

TEST_CASE("check_job_against_bank catches swapped captions") {
  Fixture f;
  auto job = build_finetune_job(f.cat, f.train, f.bank, "aircraft", {}, "sd");
  // Find two images with different pairs and swap their captions.
  for (std::size_t i = 1; i < job.pairs.size(); ++i) {
    if (job.pairs[i].caption != job.pairs[0].caption) {
      std::swap(job.pairs[0].caption, job.pairs[i].caption);
      break;
    }
  }
  CHECK(check_job_against_bank(job, f.bank, "aircraft").violations.size() >= 1);
  CHECK_FALSE(check_job_against_bank(job, f.bank, "bird").ok());
}
