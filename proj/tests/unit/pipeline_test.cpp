/* Copyright 2026 The DVG Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "dvg/binary_io.hpp"
#include "dvg/error.hpp"
#include "dvg/pipeline.hpp"

namespace dvg::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTiny = R"({
  "checkpoint_every": 10,
  "data": {"train_identities": 4, "test_identities": 3, "samples_per_identity": 6},
  "model": {"latent_dim": 4, "encoder_hidden": [16], "decoder_hidden": [16], "disc_hidden": [8],
            "recognizer_hidden": [16], "feature_dim": 8},
  "fip": {"steps": 40, "batch": 8, "gate": 0.0, "holdout_per_identity": 2},
  "dvg": {"steps": 20, "batch": 4},
  "pool": {"size": 30},
  "hfr": {"steps": 20, "batch": 8},
  "eval": {"roc_points": 5}
})";

ExperimentConfig tiny(const std::string& name) {
  ExperimentConfig c = parse_config(kTiny);
  const fs::path dir = fs::temp_directory_path() / ("dvg_pipeline_" + name);
  fs::remove_all(dir);
  c.output_dir = dir.string();
  return c;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

TEST(Pipeline, RepeatRunsGiveIdenticalMetrics) {
  const ExperimentConfig a = tiny("repeat_a"), b = tiny("repeat_b");
  run_pipeline(a);
  run_pipeline(b);
  const RunPaths pa{a.output_dir}, pb{b.output_dir};
  EXPECT_EQ(slurp(pa.metrics()), slurp(pb.metrics()));
  EXPECT_EQ(slurp(pa.roc()), slurp(pb.roc()));
  EXPECT_EQ(io::read_file(pa.hfr()), io::read_file(pb.hfr()));
  EXPECT_EQ(io::read_file(pa.pool() / "images.bin"), io::read_file(pb.pool() / "images.bin"));

  const auto m = nlohmann::json::parse(slurp(pa.metrics()));
  EXPECT_EQ(m.at("label"), "dvg");
  EXPECT_EQ(m.at("pool_size"), 30);
  for (const char* key : {"md", "md_real", "md_mismatched", "fid_n", "fid_v", "fid_mean", "rank1"}) {
    EXPECT_TRUE(m.at(key).is_number()) << key;
  }
  EXPECT_TRUE(m.contains("vr_at_far_1pct"));
  EXPECT_TRUE(m.contains("vr_at_far_0.1pct"));
  EXPECT_EQ(slurp(pa.roc()).substr(0, 7), "far,vr\n");

  for (Stage s : {Stage::kData, Stage::kFip, Stage::kDvg, Stage::kPool, Stage::kHfr, Stage::kEval}) {
    const auto log = nlohmann::json::parse(slurp(pa.log(s)));
    EXPECT_EQ(log.at("stage"), stage_name(s));
    EXPECT_TRUE(log.contains("wall_seconds"));
    EXPECT_TRUE(log.contains("config"));
  }
  const auto dvg_log = nlohmann::json::parse(slurp(pa.log(Stage::kDvg)));
  ASSERT_EQ(dvg_log.at("steps").size(), 20u);
  for (const char* key : {"rec", "kl", "adv_gen", "adv_disc", "dist", "ip_pair", "ip_rec", "div"}) {
    EXPECT_TRUE(dvg_log.at("steps")[0].contains(key)) << key;
  }
  const auto hfr_log = nlohmann::json::parse(slurp(pa.log(Stage::kHfr)));
  EXPECT_TRUE(hfr_log.at("steps")[0].contains("pair"));
  EXPECT_TRUE(hfr_log.at("summary").contains("pair_last_tenth"));
}

TEST(Pipeline, BaselineSkipsGenerator) {
  ExperimentConfig c = tiny("baseline");
  c.hfr.alpha1 = 0.0;
  run_pipeline(c);
  const RunPaths p{c.output_dir};
  EXPECT_FALSE(fs::exists(p.dvg()));
  EXPECT_FALSE(fs::exists(p.pool()));
  const auto m = nlohmann::json::parse(slurp(p.metrics()));
  EXPECT_EQ(m.at("label"), "baseline");
  EXPECT_TRUE(m.at("md").is_null());
  EXPECT_TRUE(m.at("fid_mean").is_null());
}

TEST(Pipeline, InterruptedTrainingResumesExactly) {
  const ExperimentConfig whole = tiny("whole"), split = tiny("split");
  for (const ExperimentConfig* c : {&whole, &split}) {
    synth_data(*c);
    pretrain_fip(*c);
  }
  const RunPaths pw{whole.output_dir}, ps{split.output_dir};
  train_dvg(whole);
  StageOptions stop;
  stop.stop_after = 7;
  train_dvg(split, stop);
  EXPECT_THROW(generate(split), MissingArtifactError);
  StageOptions resume;
  resume.resume = true;
  train_dvg(split, resume);
  EXPECT_EQ(io::read_file(pw.dvg()), io::read_file(ps.dvg()));

  generate(whole);
  generate(split);
  train_hfr(whole);
  stop.stop_after = 13;
  train_hfr(split, stop);
  train_hfr(split, resume);
  EXPECT_EQ(io::read_file(pw.hfr()), io::read_file(ps.hfr()));
  const auto log = nlohmann::json::parse(slurp(ps.log(Stage::kHfr)));
  EXPECT_EQ(log.at("summary").at("resumed_from"), 13);
}

TEST(Pipeline, LineageIsChecked) {
  const ExperimentConfig c = tiny("lineage");
  synth_data(c);
  pretrain_fip(c);
  ExperimentConfig other = c;
  other.seed = 99;
  EXPECT_THROW(pretrain_fip(other), LineageError);
  ExperimentConfig later = c;
  later.weights.dist = 0.0;
  EXPECT_NO_THROW(train_dvg(later));
  EXPECT_THROW(generate(c), LineageError);
  StageOptions force;
  force.force = true;
  EXPECT_NO_THROW(generate(c, force));
}

TEST(Pipeline, MissingInputsReported) {
  const ExperimentConfig c = tiny("missing");
  EXPECT_THROW(pretrain_fip(c), MissingArtifactError);
  EXPECT_THROW(evaluate(c), MissingArtifactError);
  EXPECT_THROW(report({c.output_dir}), MissingArtifactError);
}

TEST(Pipeline, ReportListsRuns) {
  const ExperimentConfig a = tiny("report_dvg");
  ExperimentConfig b = tiny("report_base");
  b.hfr.alpha1 = 0.0;
  run_pipeline(a);
  run_pipeline(b);
  const std::string table = report({a.output_dir, b.output_dir});
  EXPECT_NE(table.find("baseline"), std::string::npos);
  EXPECT_NE(table.find("dvg"), std::string::npos);
  EXPECT_NE(table.find("Rank-1"), std::string::npos);
  EXPECT_NE(table.find("report_base"), std::string::npos);
}

TEST(FeatureDump, BinaryAndSidecar) {
  const fs::path base = fs::temp_directory_path() / "dvg_dump";
  write_feature_dump(base, Tensor::matrix({{1, 2, 3}, {4, 5, 6.5}}), "probe");
  const auto bytes = io::read_file(base.string() + ".f32");
  ASSERT_EQ(bytes.size(), 24u);
  io::Reader r(bytes.data(), bytes.size(), "dump");
  EXPECT_EQ(r.f32("a"), 1.0f);
  r.raw(16, "skip");
  EXPECT_EQ(r.f32("b"), 6.5f);
  const auto side = nlohmann::json::parse(io::read_text(base.string() + ".json"));
  EXPECT_EQ(side.at("count"), 2);
  EXPECT_EQ(side.at("dim"), 3);
  EXPECT_EQ(side.at("source"), "probe");
}

TEST(MismatchedPairs, AlwaysCrossIdentity) {
  const Tensor f = Tensor::matrix({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  const std::vector<std::uint32_t> ids = {5, 5, 9, 9};
  RandomSource rng(1);
  EXPECT_NEAR(mismatched_pair_distance(f, f, ids, rng), std::sqrt(2.0), 1e-15);
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(DVG_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const ExperimentConfig c = tiny("cli");
  fs::create_directories(c.output_dir);
  const std::string cfg = (fs::path(c.output_dir) / "config.json").string();
  std::ofstream(cfg) << dump_config(c);
  const std::string bad = (fs::path(c.output_dir) / "bad.json").string();
  std::ofstream(bad) << R"({"hfr": {"alfa": 1}})";

  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("synth-data"), 2);
  EXPECT_EQ(run_cli("synth-data --config /nonexistent.json"), 3);
  EXPECT_EQ(run_cli("synth-data --config " + bad), 4);
  EXPECT_EQ(run_cli("synth-data --config " + cfg + " --set hfr.nope=1"), 4);
  EXPECT_EQ(run_cli("train-dvg --config " + cfg + " -q"), 5);
  EXPECT_EQ(run_cli("synth-data --config " + cfg + " -q"), 0);
  EXPECT_EQ(run_cli("pretrain-fip --config " + cfg + " -q --seed 5"), 6);
  EXPECT_EQ(run_cli("pretrain-fip --config " + cfg + " -q --set fip.gate=1.0"), 8);
  EXPECT_EQ(run_cli("report " + c.output_dir), 5);
}

}  // namespace
}  // namespace dvg::cli
