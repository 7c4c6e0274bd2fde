// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "anchorflow/losses.hpp"
#include "anchorflow/metrics.hpp"
#include "anchorflow/nn.hpp"
#include "anchorflow/synthdata.hpp"

namespace anchorflow {

// Flat key=value run configuration with dotted section keys. Every key has a
// default, so an empty file runs the whole pipeline; the hash of the
// effective key set is embedded in every output.
struct RunConfig {
  uint64_t seed = 7;

  std::string train_path = "out/train.fmkd";
  std::string eval_path = "out/eval.fmkd";
  int train_count = 64;
  int eval_count = 16;
  DatasetSpec data;

  ModelDims dims;
  int heads = 1;  // single-head attention; kept as a key for forward compat

  int epochs_stage1 = 30;
  int epochs_stage2 = 30;
  int epochs_baseline = 30;
  int batch = 1;
  double lr = 1e-3;
  double p_drop = 0.1;
  bool gt_anchor = false;

  LossWeights weights;

  int steps = 50;
  double cfg_scale = 1.5;

  MetricOptions metric_opts;

  double occlusion_override = -1.0;  // < 0 keeps the dataset's occlusion model
  std::string out_dir = "out";

  static RunConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> key_values() const;
  std::string hash() const;  // 8 hex digits over the sorted key=value dump

  // Writes a commented config with every key at its current value.
  void write_template(const std::string& path) const;
};

}  // namespace anchorflow
