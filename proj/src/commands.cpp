// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "anchorflow/checkpoint.hpp"
#include "anchorflow/dataset_io.hpp"
#include "anchorflow/errors.hpp"
#include "anchorflow/gradcheck.hpp"
#include "anchorflow/metrics.hpp"
#include "anchorflow/training.hpp"
#include "anchorflow/version.hpp"

namespace anchorflow {

namespace {

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

TrainConfig train_config(const RunConfig& cfg, int epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch = cfg.batch;
  tc.lr = cfg.lr;
  tc.p_drop = cfg.p_drop;
  tc.gt_anchor = cfg.gt_anchor;
  tc.seed = cfg.seed;
  tc.dims = cfg.dims;
  tc.weights = cfg.weights;
  tc.fps = cfg.data.fps;
  return tc;
}

void write_loss_csv(const std::string& path, const TrainCurve& curve,
                    const std::string& config_hash) {
  ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw FormatError("train: cannot open " + path + " for writing");
  f.precision(12);
  f << "# tool_version=" << kToolVersion << " config_hash=" << config_hash << "\n";
  f << "epoch,main_term,total,min_total_so_far\n";
  double best = std::numeric_limits<double>::infinity();
  for (size_t e = 0; e < curve.total.size(); ++e) {
    best = std::min(best, curve.total[e]);
    f << e << "," << curve.fm[e] << "," << curve.total[e] << "," << best << "\n";
  }
}

std::string stage1_path(const RunConfig& cfg) { return cfg.out_dir + "/stage1.fmck"; }
std::string stage2_path(const RunConfig& cfg) { return cfg.out_dir + "/stage2.fmck"; }
std::string baseline_path(const RunConfig& cfg) { return cfg.out_dir + "/baseline.fmck"; }
std::string pred_path_of(const RunConfig& cfg) { return cfg.out_dir + "/pred.fmkd"; }

std::shared_ptr<AnchorNet> load_anchor(const std::string& path) {
  const nlohmann::json header = load_checkpoint_header(path);
  if (header.at("kind").get<std::string>() != "anchor") {
    throw FormatError("checkpoint " + path + " is not a stage-1 model");
  }
  auto net = std::make_shared<AnchorNet>(dims_from_header(header));
  load_checkpoint_params(path, net->params());
  return net;
}

std::shared_ptr<VelocityNet> load_velocity(const std::string& path) {
  const nlohmann::json header = load_checkpoint_header(path);
  if (header.at("kind").get<std::string>() != "velocity") {
    throw FormatError("checkpoint " + path + " is not a stage-2 model");
  }
  auto net = std::make_shared<VelocityNet>(dims_from_header(header));
  load_checkpoint_params(path, net->params());
  return net;
}

void check_layout(const nlohmann::json& manifest, const nlohmann::json& header,
                  const std::string& what) {
  if (manifest.at("layout_hash").get<std::string>() !=
      header.at("layout_hash").get<std::string>()) {
    throw FormatError("layout hash mismatch between dataset and checkpoint (" + what + ")");
  }
}

ConditionSet record_conditions(const DatasetRecord& rec, const RunConfig& cfg, uint64_t obs_seed) {
  if (cfg.occlusion_override < 0.0) return rec.obs;
  OcclusionSpec occ = cfg.data.occlusion;
  occ.joint_dropout = cfg.occlusion_override;
  return regenerate_observations(rec, occ, cfg.data.pixel_noise, obs_seed).cond;
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg) {
  ensure_parent_dir(cfg.train_path);
  ensure_parent_dir(cfg.eval_path);
  nlohmann::json extra;
  extra["config_hash"] = cfg.hash();
  extra["spec"] = cfg.data.canonical();
  const Rng root(cfg.seed);
  const auto train_records =
      generate_dataset(Rng(cfg.seed).substream("data_train").seed(), cfg.train_count, cfg.data);
  write_dataset(cfg.train_path, train_records, cfg.data.fps, extra);
  const auto eval_records =
      generate_dataset(Rng(cfg.seed).substream("data_eval").seed(), cfg.eval_count, cfg.data);
  write_dataset(cfg.eval_path, eval_records, cfg.data.fps, extra);
  std::cout << "wrote " << train_records.size() << " train records to " << cfg.train_path
            << " and " << eval_records.size() << " eval records to " << cfg.eval_path << "\n";
  return 0;
}

int cmd_train(const std::string& stage, const RunConfig& cfg) {
  const LoadedDataset train = read_dataset(cfg.train_path);
  nlohmann::json extra;
  extra["config_hash"] = cfg.hash();
  extra["seed"] = cfg.seed;

  if (stage == "1") {
    const Stage1Result res = train_stage1(train.records, train_config(cfg, cfg.epochs_stage1));
    ensure_parent_dir(stage1_path(cfg));
    extra["epochs"] = cfg.epochs_stage1;
    save_checkpoint(stage1_path(cfg), "anchor", cfg.dims, res.net->params(), extra);
    write_loss_csv(cfg.out_dir + "/train_stage1.csv", res.curve, cfg.hash());
    std::cout << "stage 1: total " << res.curve.total.front() << " -> " << res.curve.total.back()
              << "\n";
    return 0;
  }

  std::shared_ptr<AnchorNet> anchor;
  if (!cfg.gt_anchor) {
    if (!std::filesystem::exists(stage1_path(cfg))) {
      std::cerr << "error: stage " << stage << " needs " << stage1_path(cfg)
                << " (train stage 1 first) or train.gt_anchor = true\n";
      return 2;
    }
    anchor = load_anchor(stage1_path(cfg));
  }

  if (stage == "2") {
    const Stage2Result res =
        train_stage2(train.records, anchor.get(), train_config(cfg, cfg.epochs_stage2));
    ensure_parent_dir(stage2_path(cfg));
    extra["epochs"] = cfg.epochs_stage2;
    save_checkpoint(stage2_path(cfg), "velocity", cfg.dims, res.net->params(), extra);
    write_loss_csv(cfg.out_dir + "/train_stage2.csv", res.curve, cfg.hash());
    std::cout << "stage 2: velocity term " << res.curve.fm.front() << " -> "
              << res.curve.fm.back() << "\n";
    return 0;
  }
  if (stage == "baseline") {
    const BaselineResult res =
        train_baseline(train.records, anchor.get(), train_config(cfg, cfg.epochs_baseline));
    ensure_parent_dir(baseline_path(cfg));
    extra["epochs"] = cfg.epochs_baseline;
    save_checkpoint(baseline_path(cfg), "baseline", cfg.dims, res.net->params(), extra);
    write_loss_csv(cfg.out_dir + "/train_baseline.csv", res.curve, cfg.hash());
    std::cout << "baseline: regression term " << res.curve.fm.front() << " -> "
              << res.curve.fm.back() << "\n";
    return 0;
  }
  std::cerr << "error: unknown stage '" << stage << "' (expected 1, 2, or baseline)\n";
  return 2;
}

int cmd_infer(const RunConfig& cfg) {
  const LoadedDataset eval_set = read_dataset(cfg.eval_path);
  const auto s2_header = load_checkpoint_header(stage2_path(cfg));
  check_layout(eval_set.manifest, s2_header, "stage 2");
  const auto velocity = load_velocity(stage2_path(cfg));

  std::shared_ptr<AnchorNet> anchor_net;
  if (!cfg.gt_anchor) {
    const auto s1_header = load_checkpoint_header(stage1_path(cfg));
    check_layout(eval_set.manifest, s1_header, "stage 1");
    anchor_net = load_anchor(stage1_path(cfg));
  }

  std::vector<DatasetRecord> out_records;
  out_records.reserve(eval_set.records.size());
  Rng infer_root = Rng(cfg.seed).substream("infer");
  for (size_t i = 0; i < eval_set.records.size(); ++i) {
    const DatasetRecord& rec = eval_set.records[i];
    const uint64_t rec_seed = infer_root.substream("record" + std::to_string(i)).seed();
    const ConditionSet obs = record_conditions(rec, cfg, rec_seed ^ 0x0b5ull);
    const AnchorEstimate est = anchor_net
                                   ? estimate_anchor(*anchor_net, obs)
                                   : anchor_from_gt(rec.gt, Partition::standard());
    InferOptions opts;
    opts.steps = cfg.steps;
    opts.cfg_scale = cfg.cfg_scale;
    opts.seed = rec_seed;
    const MotionSequence pred = complete_sequence(est, *velocity, obs, opts, eval_set.fps);

    DatasetRecord out;
    out.gt = pred;
    out.intrinsics = rec.intrinsics;
    out.cam_poses = rec.cam_poses;
    out.seed = rec.seed;
    out.has_obs = false;
    for (auto& s : out.gt) {
      // Storage precision, matching the dataset format.
      for (int r = 0; r < s.body_pose.rows(); ++r) {
        for (int c = 0; c < 3; ++c) s.body_pose(r, c) = static_cast<float>(s.body_pose(r, c));
      }
      for (int k = 0; k < kShapeDims; ++k) s.beta(k) = static_cast<float>(s.beta(k));
      for (int k = 0; k < 3; ++k) {
        s.gamma_c(k) = static_cast<float>(s.gamma_c(k));
        s.tau_c(k) = static_cast<float>(s.tau_c(k));
        s.gamma_w(k) = static_cast<float>(s.gamma_w(k));
        s.tau_w(k) = static_cast<float>(s.tau_w(k));
      }
    }
    out_records.push_back(std::move(out));
  }

  nlohmann::json extra;
  extra["config_hash"] = cfg.hash();
  extra["sampling"] = {{"steps", cfg.steps}, {"cfg_scale", cfg.cfg_scale}, {"seed", cfg.seed}};
  extra["source_dataset"] = cfg.eval_path;
  extra["occlusion_override"] = cfg.occlusion_override;
  ensure_parent_dir(pred_path_of(cfg));
  write_dataset(pred_path_of(cfg), out_records, eval_set.fps, extra);
  std::cout << "wrote " << out_records.size() << " predicted sequences to " << pred_path_of(cfg)
            << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& pred_path, const std::string& gt_path,
             const std::string& fixture_path) {
  if (!fixture_path.empty()) {
    const RegionalSummary s = ingest_regional_fixture(fixture_path);
    std::cout << "regional fixture: anchor_mean=" << s.anchor_mean
              << " distal_mean=" << s.distal_mean << " gap=" << s.gap << "\n";
    if (pred_path.empty() && gt_path.empty()) return 0;
  }
  const std::string pp = pred_path.empty() ? pred_path_of(cfg) : pred_path;
  const std::string gp = gt_path.empty() ? cfg.eval_path : gt_path;
  const LoadedDataset pred = read_dataset(pp);
  const LoadedDataset gt = read_dataset(gp);
  if (pred.records.size() != gt.records.size()) {
    throw FormatError("eval: sequence count mismatch between " + pp + " and " + gp);
  }
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const ProxyMesh mesh = ProxyMesh::generate(skel, 96, 0xa11ce);
  MetricOptions opts = cfg.metric_opts;
  opts.fps = gt.fps;

  std::vector<SequenceMetrics> rows;
  for (size_t i = 0; i < pred.records.size(); ++i) {
    if (pred.records[i].seed != gt.records[i].seed) {
      throw FormatError("eval: sequence id mismatch at record " + std::to_string(i));
    }
    SequenceContext ctx{&skel, &part, &mesh, gt.records[i].intrinsics};
    rows.push_back(evaluate_sequence(pred.records[i].gt, gt.records[i].gt, ctx, opts));
  }
  const SequenceMetrics agg = aggregate_metrics(rows);
  ensure_parent_dir(cfg.out_dir + "/eval.csv");
  write_metrics_csv(cfg.out_dir + "/eval.csv", rows, agg, cfg.hash());
  write_metrics_json(cfg.out_dir + "/eval.json", rows, agg, cfg.hash());
  std::cout << "aggregate: mpjpe=" << agg.mpjpe << "mm pa_mpjpe=" << agg.pa_mpjpe
            << "mm non_torso=" << agg.non_torso_mpjpe << "mm w_mpjpe=" << agg.w_mpjpe << "mm\n";
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::vector<int>& steps_list, const std::string& mode) {
  const LoadedDataset eval_set = read_dataset(cfg.eval_path);
  const auto velocity = load_velocity(stage2_path(cfg));
  std::shared_ptr<AnchorNet> anchor_net;
  if (!cfg.gt_anchor) anchor_net = load_anchor(stage1_path(cfg));

  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const ProxyMesh mesh = ProxyMesh::generate(skel, 96, 0xa11ce);
  MetricOptions mopts = cfg.metric_opts;
  mopts.fps = eval_set.fps;

  const auto evaluate_setting = [&](int steps, double scale) {
    std::vector<SequenceMetrics> rows;
    Rng infer_root = Rng(cfg.seed).substream("ablate");
    for (size_t i = 0; i < eval_set.records.size(); ++i) {
      const DatasetRecord& rec = eval_set.records[i];
      const AnchorEstimate est = anchor_net ? estimate_anchor(*anchor_net, rec.obs)
                                            : anchor_from_gt(rec.gt, part);
      InferOptions opts;
      opts.steps = steps;
      opts.cfg_scale = scale;
      opts.seed = infer_root.substream("record" + std::to_string(i)).seed();
      const MotionSequence pred = complete_sequence(est, *velocity, rec.obs, opts, eval_set.fps);
      SequenceContext ctx{&skel, &part, &mesh, rec.intrinsics};
      rows.push_back(evaluate_sequence(pred, rec.gt, ctx, mopts));
    }
    return aggregate_metrics(rows);
  };

  std::filesystem::create_directories(cfg.out_dir);
  if (mode == "steps") {
    std::ofstream f(cfg.out_dir + "/ablate_steps.csv");
    f.precision(9);
    f << "# tool_version=" << kToolVersion << " config_hash=" << cfg.hash() << "\n";
    f << "steps,cfg_scale,non_torso_mpjpe_mm,mpjpe_mm,wa_mpjpe_mm,w_mpjpe_mm\n";
    for (int steps : steps_list) {
      const SequenceMetrics m = evaluate_setting(steps, cfg.cfg_scale);
      f << steps << "," << cfg.cfg_scale << "," << m.non_torso_mpjpe << "," << m.mpjpe << ","
        << m.wa_mpjpe << "," << m.w_mpjpe << "\n";
      std::cout << "steps=" << steps << " non_torso_mpjpe=" << m.non_torso_mpjpe << "mm\n";
    }
    return 0;
  }
  if (mode == "cfg") {
    std::ofstream f(cfg.out_dir + "/ablate_cfg.csv");
    f.precision(9);
    f << "# tool_version=" << kToolVersion << " config_hash=" << cfg.hash() << "\n";
    f << "steps,cfg_scale,non_torso_mpjpe_mm,mpjpe_mm,wa_mpjpe_mm,w_mpjpe_mm\n";
    for (double scale : {1.0, 1.25, 1.5, 1.75}) {
      const SequenceMetrics m = evaluate_setting(cfg.steps, scale);
      f << cfg.steps << "," << scale << "," << m.non_torso_mpjpe << "," << m.mpjpe << ","
        << m.wa_mpjpe << "," << m.w_mpjpe << "\n";
      std::cout << "cfg_scale=" << scale << " non_torso_mpjpe=" << m.non_torso_mpjpe << "mm\n";
    }
    return 0;
  }
  std::cerr << "error: unknown ablation mode '" << mode << "'\n";
  return 2;
}

int cmd_gradcheck(const RunConfig& cfg, bool corrupt) {
  nn_testing::corrupt_dense_backward = corrupt;
  const std::vector<GradCheckResult> results = run_gradient_checks(cfg.seed);
  nn_testing::corrupt_dense_backward = false;
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.component << " max_rel_err=" << r.max_rel_err
              << " probes=" << r.probes << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace anchorflow
