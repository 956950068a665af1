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

// dvg: command-line driver for the synthetic dual-generation experiment.
//
// Exit codes:
//   0  success
//   1  unexpected error
//   2  bad command line
//   3  config file missing
//   4  invalid config (unknown key, bad value)
//   5  missing upstream artifact
//   6  lineage mismatch (artifact from a different config; see --force)
//   7  corrupt or incompatible artifact
//   8  quality gate not met
//   9  numerical failure during training

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dvg/config.hpp"
#include "dvg/error.hpp"
#include "dvg/pipeline.hpp"

namespace {

enum Exit {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kNoConfig = 3,
  kBadConfig = 4,
  kMissingArtifact = 5,
  kLineage = 6,
  kFormat = 7,
  kGate = 8,
  kNumeric = 9,
};

int fail(int code, const std::string& message) {
  std::cerr << "dvg: " << message << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dvg;
  CLI::App app{"Dual variational generation experiment driver"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool resume = false;
  bool quiet = false;
  std::optional<std::size_t> stop_after;
  std::vector<std::string> runs;

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"synth-data", "Render the paired train/test datasets"},
      {"pretrain-fip", "Train the frozen identity feature extractor"},
      {"train-dvg", "Train the dual variational generator"},
      {"generate", "Sample the generated pair pool"},
      {"train-hfr", "Train the cross-modality recognizer"},
      {"evaluate", "Score the recognizer and write metrics and ROC"},
      {"run", "Every stage in order"},
  };
  for (const auto& [name, help] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--set", overrides, "Override one key, e.g. --set hfr.alpha1=0");
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_flag("--force", force, "Accept upstream artifacts from a different config");
    sub->add_flag("--resume", resume, "Continue interrupted training from its checkpoint");
    sub->add_flag("-q,--quiet", quiet, "No progress output");
    if (name == "train-dvg" || name == "train-hfr") {
      sub->add_option("--stop-after", stop_after, "Save a resumable checkpoint and stop at this step");
    }
  }
  CLI::App* rep = app.add_subcommand("report", "Compare completed runs");
  rep->add_option("runs", runs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (rep->parsed()) {
      std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
      std::cout << cli::report(dirs);
      return kOk;
    }
    if (!std::filesystem::exists(config_path)) return fail(kNoConfig, "config file not found: " + config_path);
    cli::ExperimentConfig config = cli::load_config(config_path);
    for (const std::string& o : overrides) cli::apply_override(config, o);
    if (seed) config.seed = *seed, config.data.seed = *seed;

    cli::StageOptions options;
    options.force = force;
    options.resume = resume;
    options.stop_after = stop_after;
    options.progress = quiet ? nullptr : &std::cerr;

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synth-data") cli::synth_data(config, options);
    else if (cmd == "pretrain-fip") cli::pretrain_fip(config, options);
    else if (cmd == "train-dvg") cli::train_dvg(config, options);
    else if (cmd == "generate") cli::generate(config, options);
    else if (cmd == "train-hfr") cli::train_hfr(config, options);
    else if (cmd == "evaluate") cli::evaluate(config, options);
    else cli::run_pipeline(config, options);
    return kOk;
  } catch (const ConfigError& e) {
    return fail(kBadConfig, e.what());
  } catch (const MissingArtifactError& e) {
    return fail(kMissingArtifact, e.what());
  } catch (const LineageError& e) {
    return fail(kLineage, std::string(e.what()) + " (rerun the upstream stage or pass --force)");
  } catch (const FormatError& e) {
    return fail(kFormat, e.what());
  } catch (const GateError& e) {
    return fail(kGate, e.what());
  } catch (const NumericError& e) {
    return fail(kNumeric, e.what());
  } catch (const std::exception& e) {
    return fail(kUnexpected, e.what());
  }
}
