// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "anchorflow/commands.hpp"
#include "anchorflow/version.hpp"

namespace {

anchorflow::RunConfig build_config(const std::string& config_path,
                                   const std::vector<std::string>& overrides) {
  anchorflow::RunConfig cfg;
  if (!config_path.empty()) cfg = anchorflow::RunConfig::from_file(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anchorflow: two-stage human-motion recovery on synthetic gait data"};
  app.set_version_flag("--version", anchorflow::kToolVersion);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--set", overrides, "override a config key, key=value")->take_all();

  auto* gen = app.add_subcommand("gen-data", "generate train/eval datasets");
  auto* train = app.add_subcommand("train", "train a model stage");
  std::string stage = "1";
  train->add_option("--stage", stage, "1, 2, or baseline")->required();
  auto* infer = app.add_subcommand("infer", "run two-stage inference on the eval set");
  auto* eval = app.add_subcommand("eval", "compute metrics for a prediction file");
  std::string pred_path, gt_path, fixture_path;
  eval->add_option("--pred", pred_path, "prediction dataset (default: out/pred.fmkd)");
  eval->add_option("--gt", gt_path, "ground-truth dataset (default: data.eval_path)");
  eval->add_option("--regional-fixture", fixture_path,
                   "JSON with per-dataset regional means to ingest");
  auto* ablate = app.add_subcommand("ablate-steps", "metric vs. integration steps / guidance");
  std::string steps_csv = "1,2,5,10,20,50,100";
  std::string ablate_mode = "steps";
  ablate->add_option("--steps-list", steps_csv, "comma-separated step counts");
  ablate->add_option("--mode", ablate_mode, "steps or cfg");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of all backward passes");
  bool corrupt = false;
  grad->add_flag("--corrupt", corrupt, "negative control: corrupt one backward pass");

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  try {
    const anchorflow::RunConfig cfg = build_config(config_path, overrides);
    if (gen->parsed()) return anchorflow::cmd_gen_data(cfg);
    if (train->parsed()) return anchorflow::cmd_train(stage, cfg);
    if (infer->parsed()) return anchorflow::cmd_infer(cfg);
    if (eval->parsed()) return anchorflow::cmd_eval(cfg, pred_path, gt_path, fixture_path);
    if (ablate->parsed()) {
      std::vector<int> steps_list;
      size_t pos = 0;
      while (pos < steps_csv.size()) {
        const size_t comma = steps_csv.find(',', pos);
        const std::string tok = steps_csv.substr(pos, comma - pos);
        steps_list.push_back(std::stoi(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      return anchorflow::cmd_ablate(cfg, steps_list, ablate_mode);
    }
    if (grad->parsed()) return anchorflow::cmd_gradcheck(cfg, corrupt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
