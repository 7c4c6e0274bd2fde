// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "anchorflow/config.hpp"

namespace anchorflow {

// Operator verbs. Each is deterministic given (config, inputs) and embeds the
// config hash and tool version in its outputs.

int cmd_gen_data(const RunConfig& cfg);

// stage: "1", "2", or "baseline". Stage 2 / baseline require the stage-1
// checkpoint unless train.gt_anchor is set.
int cmd_train(const std::string& stage, const RunConfig& cfg);

int cmd_infer(const RunConfig& cfg);

// Evaluates pred_path against gt_path; empty paths default to the config's
// prediction/eval locations. A non-empty fixture path additionally ingests a
// per-dataset regional summary table and prints its cross-dataset means.
int cmd_eval(const RunConfig& cfg, const std::string& pred_path, const std::string& gt_path,
             const std::string& fixture_path);

// mode "steps": one inference+eval row per integration step count;
// mode "cfg": sweep of guidance scales at the configured step count.
int cmd_ablate(const RunConfig& cfg, const std::vector<int>& steps_list, const std::string& mode);

int cmd_gradcheck(const RunConfig& cfg, bool corrupt);

}  // namespace anchorflow
