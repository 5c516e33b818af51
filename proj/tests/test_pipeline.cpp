// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>

#include "ctxsynth/pipeline.hpp"
#include "ctxsynth/prompt.hpp"
#include "ctxsynth/scm.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_helpers.hpp"

using namespace ctxsynth;
using namespace ctxsynth::testing;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args, const fs::path& dir) {
  const auto capture = dir / "cli_output.txt";
  const std::string cmd = "'" CTXSYNTH_CLI "' " + args + " > '" + capture.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = fs::exists(capture) ? read_file(capture) : "";
  return r;
}

int run_all(const fs::path& config, const fs::path& dir, const std::string& extra = "") {
  for (const char* stage : {"ingest", "split", "extract", "finetune-manifest", "plan", "generate", "assemble"}) {
    const auto r = cli("--config '" + config.string() + "' " + extra + " " + stage, dir);
    if (r.code != 0) {
      MESSAGE(stage << ": " << r.out);
      return r.code;
    }
  }
  return 0;
}

}  // namespace

TEST_CASE("run config parsing") {
  const auto c = run_config_from_json(R"({"dataset_config":"d.json","catalog":"/abs/c.jsonl","mode":"class"})", "/base");
  CHECK(c.dataset_config == fs::path("/base/d.json"));
  CHECK(c.catalog == fs::path("/abs/c.jsonl"));
  CHECK(c.mode == MarginalizationMode::class_level);
  CHECK(c.lambda == 0.5);
  CHECK(c.lambda_sweep == std::vector<double>{0.5, 0.8});
  CHECK(c.generation.guidance_scale == 2.0);
  CHECK_THROWS_AS(run_config_from_json(R"({"catalog":"x"})"), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(R"({"dataset_config":"d","catalog":"c","mode":"bogus"})"), ValidationError);
  auto bad = c;
  bad.lambda = 2;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("splits and generated artifacts round trip") {
  Splits s{"a", "b", AssemblyMode::longtail, 7, {{"x", "y"}}, {{"z"}}};
  const auto back = parse_splits(serialize_splits(s));
  CHECK(back.train == s.train);
  CHECK(back.setting == AssemblyMode::longtail);
  GeneratedSet g{"pd", "gen", {{0, "synthetic/a/000000.png", true, "h", ""}, {1, "r", false, "", "boom"}}};
  const auto gb = parse_generated(serialize_generated(g));
  CHECK(gb.items.size() == 2);
  CHECK(gb.items[1].error == "boom");
}

TEST_CASE("full stub pipeline through the CLI") {
  TempDir dir("e2e");
  const auto cfg = write_toy_project(dir.path(), {"737-400", "F/A-18"}, 5, 0, "\"shots\":5,\"budget\":20,");
  REQUIRE(run_all(cfg, dir.path()) == 0);
  const auto out = dir.path() / "out";
  for (const char* f : {"dataset.json", "catalog.jsonl", "splits.json", "bank.jsonl", "finetune_job.json", "plan.jsonl",
                        "generated.jsonl", "manifest.jsonl", "manifest-lambda-0.5.jsonl", "manifest-lambda-0.8.jsonl"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  CHECK(fs::exists(out / "synthetic" / "F-A-18" / "000039.png"));

  const auto bank = load_checked_bank(out);
  const auto plan = load_checked_plan(out);
  CHECK(plan.items.size() == 40);
  CHECK(plan_pairs_missing_from_bank(plan, bank).empty());
  const auto job = parse_job(read_file(out / "finetune_job.json"));
  CHECK(job.pairs.size() == 10);
  CHECK(check_job_against_bank(job, bank, "aircraft").ok());

  const auto m = parse_manifest(read_file(out / "manifest.jsonl"));
  const auto w = manifest_class_weights(m);
  CHECK(w.at("737-400").real == 20);
  CHECK(w.at("737-400").synthetic == 20);
  CHECK(parse_manifest(read_file(out / "manifest-lambda-0.8.jsonl")).lambda == 0.8);

  // Synthetic payloads are keyed by the plan's prompt and seed.
  const auto payload = read_file(out / "synthetic" / "737-400" / "000003.png");
  CHECK(StubGenerator::embedded_digest(payload) == StubGenerator::payload_digest(plan.items[3].prompt, plan.items[3].seed));
}

TEST_CASE("same seed, byte-identical artifacts; different seed differs") {
  TempDir dir("det");
  const auto cfg = write_toy_project(dir.path(), {"x", "y"}, 5, 0, "\"budget\":8,\"shots\":5,");
  const auto a = dir.path() / "a", b = dir.path() / "b", c = dir.path() / "c";
  REQUIRE(run_all(cfg, dir.path(), "--seed 42 --out '" + a.string() + "'") == 0);
  REQUIRE(run_all(cfg, dir.path(), "--seed 42 --out '" + b.string() + "'") == 0);
  REQUIRE(run_all(cfg, dir.path(), "--seed 43 --out '" + c.string() + "'") == 0);
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    CAPTURE(rel.string());
    CHECK(read_file(e.path()) == read_file(b / rel));
    ++compared;
  }
  CHECK(compared == 10 + 16);
  CHECK(read_file(a / "plan.jsonl") != read_file(c / "plan.jsonl"));
}

TEST_CASE("generate --dry-run prints the plan") {
  TempDir dir("dry");
  const auto cfg = write_toy_project(dir.path(), {"a", "b"}, 3, 0, "\"shots\":3,\"budget\":2,");
  for (const char* s : {"ingest", "split", "extract", "plan"})
    REQUIRE(cli("--config '" + cfg.string() + "' " + s, dir.path()).code == 0);
  const auto r = cli("--config '" + cfg.string() + "' generate --dry-run", dir.path());
  CHECK(r.code == 0);
  CHECK(r.out.find("0\ta\t") == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
  CHECK_FALSE(fs::exists(dir.path() / "out" / "generated.jsonl"));
}

TEST_CASE("CLI error handling and exit codes") {
  TempDir dir("errs");
  const auto cfg = write_toy_project(dir.path(), {"a", "b"}, 3, 0, "\"shots\":3,\"budget\":2,");
  const std::string c = "--config '" + cfg.string() + "' ";

  auto r = cli(c + "extract", dir.path());
  CHECK(r.code == 1);
  CHECK(r.out.find("not found") != std::string::npos);

  CHECK(cli("", dir.path()).code == 1);
  CHECK(cli("frobnicate", dir.path()).code == 1);
  CHECK(cli("plan", dir.path()).code == 1);
  CHECK(cli(c + "--mode bogus plan", dir.path()).code == 1);
  CHECK(cli("--config /nonexistent.json ingest", dir.path()).code == 1);

  fs::remove(dir.path() / "catalog.jsonl");
  r = cli(c + "ingest", dir.path());
  CHECK(r.code == 1);
  CHECK(r.out.find("catalog not found") != std::string::npos);
}

TEST_CASE("tampered and stale artifacts are rejected") {
  TempDir dir("tamper");
  const auto cfg = write_toy_project(dir.path(), {"a", "b"}, 4, 0, "\"shots\":4,\"budget\":3,");
  REQUIRE(run_all(cfg, dir.path()) == 0);
  const std::string c = "--config '" + cfg.string() + "' ";
  const auto bank_path = dir.path() / "out" / "bank.jsonl";
  const auto original = read_file(bank_path);

  // Edit an attribute inside the bank.
  auto text = original;
  const auto pos = text.find("\"background\":\"");
  REQUIRE(pos != std::string::npos);
  text.insert(pos + 14, "X");
  write_file_atomic(bank_path, text);
  auto r = cli(c + "plan", dir.path());
  CHECK(r.code == 1);
  CHECK(r.out.find("digest") != std::string::npos);
  CHECK_THROWS_AS(load_checked_bank(dir.path() / "out"), ProvenanceError);

  // A re-extracted bank from a different split invalidates the old plan.
  write_file_atomic(bank_path, original);
  REQUIRE(cli(c + "--seed 99 split", dir.path()).code == 0);
  CHECK(cli(c + "plan", dir.path()).code == 1);
  REQUIRE(cli(c + "--seed 99 extract", dir.path()).code == 0);
  r = cli(c + "generate", dir.path());
  CHECK(r.code == 1);
  CHECK_THROWS_AS(load_checked_plan(dir.path() / "out"), ProvenanceError);
}

TEST_CASE("generation failures exit with 2") {
  TempDir dir("genfail");
  const auto cfg = write_toy_project(dir.path(), {"a", "b"}, 2, 0,
                                     "\"shots\":2,\"budget\":2,\"generate_backend\":{\"endpoint\":\"http://127.0.0.1:1\","
                                     "\"max_retries\":0,\"timeout_ms\":500},");
  for (const char* s : {"ingest", "split", "extract", "plan"})
    REQUIRE(cli("--config '" + cfg.string() + "' " + s, dir.path()).code == 0);
  const auto r = cli("--config '" + cfg.string() + "' generate", dir.path());
  CHECK(r.code == 2);
  const auto g = parse_generated(read_file(dir.path() / "out" / "generated.jsonl"));
  CHECK(g.items.size() == 4);
  for (const auto& it : g.items) CHECK_FALSE(it.ok);
}

TEST_CASE("longtail setting") {
  TempDir dir("lt");
  const auto cfg = write_toy_project(dir.path(), {"head", "mid", "tail"}, 40, 5,
                                     "\"setting\":\"longtail\",\"longtail\":{\"n_max\":40,\"imbalance_factor\":10},",
                                     "\"duplication_factor_c\":6,\"total_budget_T\":200,\"val_per_class\":5,");
  REQUIRE(run_all(cfg, dir.path()) == 0);
  const auto out = dir.path() / "out";
  const auto splits = parse_splits(read_file(out / "splits.json"));
  CHECK(splits.train.image_ids.size() == 40 + 13 + 4);
  CHECK(splits.val.image_ids.size() == 15);
  const auto w = manifest_class_weights(parse_manifest(read_file(out / "manifest.jsonl")));
  CHECK(w.at("head").real == 240);
  CHECK(w.at("head").synthetic == 0);
  CHECK(w.at("mid").real + w.at("mid").synthetic == 200);
  CHECK(w.at("tail").synthetic == 176);
}

TEST_CASE("class-only baseline prompts") {
  TempDir dir("noctx");
  const auto cfg = write_toy_project(dir.path(), {"a"}, 2, 0, "\"shots\":2,\"budget\":2,\"preserve_context\":false,");
  REQUIRE(run_all(cfg, dir.path()) == 0);
  const auto plan = parse_plan(read_file(dir.path() / "out/plan.jsonl"));
  for (const auto& it : plan.items) CHECK(it.prompt == "a photo of a a");
}

TEST_CASE("fid subcommand") {
  TempDir dir("fidcli");
  Rng rng(2);
  auto feats = [&](double shift) {
    Eigen::MatrixXd m(20, 3);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = rng.uniform() + shift;
    return m;
  };
  write_feature_file(dir.path() / "ra.bin", feats(0));
  write_feature_file(dir.path() / "rb.bin", feats(0));
  write_feature_file(dir.path() / "sa.bin", feats(1));
  write_feature_file(dir.path() / "sb.bin", feats(3));
  write_feature_index(dir.path() / "real.tsv", {{"a", "ra.bin"}, {"b", "rb.bin"}});
  write_feature_index(dir.path() / "syn.tsv", {{"a", "sa.bin"}, {"b", "sb.bin"}});
  const auto d = dir.path().string();
  auto r = cli("--out '" + d + "' fid --real-index '" + d + "/real.tsv' --syn-index '" + d + "/syn.tsv'", dir.path());
  REQUIRE(r.code == 0);
  const auto rep = fid_report_from_json(read_file(dir.path() / "fid.json"));
  CHECK(rep.per_class.at("a") == doctest::Approx(3.0).epsilon(0.1));
  CHECK(rep.per_class.at("b") == doctest::Approx(27.0).epsilon(0.1));
  CHECK(fs::exists(dir.path() / "fid_hist.csv"));

  fs::create_directories(dir.path() / "second");
  r = cli("--out '" + d + "/second' fid --real-index '" + d + "/real.tsv' --syn-index '" + d + "/syn.tsv' --baseline '" +
              d + "/fid.json'",
          dir.path());
  REQUIRE(r.code == 0);
  CHECK(read_file(dir.path() / "second/fid_delta.csv").rfind("class_label,delta\na,0\nb,0\n", 0) == 0);

  r = cli("fid --real-index '" + d + "/missing.tsv' --syn-index '" + d + "/syn.tsv'", dir.path());
  CHECK(r.code == 1);
}

TEST_CASE("scm-demo subcommand") {
  TempDir dir("scmcli");
  auto r = cli("--out '" + dir.path().string() + "' scm-demo --samples 20000", dir.path());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("confounded,dataset_marginal,5,") != std::string::npos);
  CHECK(fs::exists(dir.path() / "scm_demo.csv"));
  write_file_atomic(dir.path() / "scm.json", scm_to_json(toy_scm()));
  r = cli("scm-demo --samples 1000 --scm '" + (dir.path() / "scm.json").string() + "'", dir.path());
  CHECK(r.code == 0);
  CHECK(cli("scm-demo --model nope", dir.path()).code == 1);
}
