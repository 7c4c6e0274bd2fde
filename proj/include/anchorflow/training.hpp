// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include "anchorflow/flowmatch.hpp"
#include "anchorflow/latent.hpp"
#include "anchorflow/losses.hpp"
#include "anchorflow/nn.hpp"
#include "anchorflow/synthdata.hpp"

namespace anchorflow {

// The low-uncertainty variables estimated deterministically: torso pose,
// shape, camera-space trajectory.
struct AnchorEstimate {
  Eigen::MatrixXd theta_torso;  // T x 24
  Vec10 beta;
  Eigen::MatrixXd gamma_c;  // T x 3
  Eigen::MatrixXd tau_c;    // T x 3
};

AnchorEstimate anchor_from_gt(const MotionSequence& gt, const Partition& part);
AnchorEstimate anchor_from_pred(const AnchorPred& pred);

// Latent with the anchored blocks filled (torso joints via the kinematic
// chain, which never depends on non-torso rotations) and generated blocks
// zeroed.
CompositeLatent anchor_latent(const AnchorEstimate& est, const Skeleton& skel,
                              const Partition& part);

// Compact anchor conditioning channel: camera-frame root orientation next to
// the torso pose.
Eigen::MatrixXd torso_condition(const AnchorEstimate& est);

// Final states: anchor fields are taken verbatim from the estimate, completed
// fields from the decoded latent.
MotionSequence assemble_states(const AnchorEstimate& est, const DecodedLatent& dec,
                               const Partition& part);

struct Stage1Objective {
  LossReport report;
  Eigen::MatrixXd d_theta;
  Vec10 d_beta = Vec10::Zero();
  Eigen::MatrixXd d_gamma, d_tau;
};

// Regression on the anchor fields plus a camera-space torso-joint term (the
// non-torso rows of the kinematic chain are taken from ground truth, so every
// term depends only on anchor predictions).
Stage1Objective stage1_objective(const AnchorEstimate& pred, const MotionSequence& gt,
                                 const SequenceContext& ctx, const LossWeights& w,
                                 bool with_grads);

struct Stage2Objective {
  LossReport report;
  Eigen::MatrixXd d_latent;  // T x 148
};

// Geometry supervision of a completed latent: pose/joint/translation
// regression, projected joints and vertices, root-relative vertices, world
// translation rolled out from the predicted root velocities, joint-bone
// consistency between the two branches, and the ramped projection term.
Stage2Objective stage2_objective(const CompositeLatent& zhat, const MotionSequence& gt,
                                 const GravityFrame& frame, const Eigen::Vector3d& tau0,
                                 double fps, const SequenceContext& ctx,
                                 const Eigen::MatrixXd& visibility, const LossWeights& w,
                                 double proj_weight, bool with_grads);

struct TrainConfig {
  int epochs = 40;
  int batch = 1;
  double lr = 1e-3;
  double p_drop = 0.1;
  bool gt_anchor = false;
  uint64_t seed = 7;
  ModelDims dims;
  LossWeights weights;
  Eigen::Vector3d gravity = kDefaultGravity;
  double fps = 30.0;
};

struct TrainCurve {
  std::vector<double> total;  // per-epoch mean weighted total
  std::vector<double> fm;     // per-epoch mean of the main generative/regression term
};

struct Stage1Result {
  std::shared_ptr<AnchorNet> net;
  TrainCurve curve;
};
Stage1Result train_stage1(const std::vector<DatasetRecord>& records, const TrainConfig& cfg);

struct Stage2Result {
  std::shared_ptr<VelocityNet> net;
  TrainCurve curve;
};
// anchor_model == nullptr trains against ground-truth anchors.
Stage2Result train_stage2(const std::vector<DatasetRecord>& records, const AnchorNet* anchor_model,
                          const TrainConfig& cfg);

struct BaselineResult {
  std::shared_ptr<BaselineNet> net;
  TrainCurve curve;
};
// Same trunk capacity and supervision, but direct regression of the
// generated coordinates with no probability path, guidance, or dropout.
BaselineResult train_baseline(const std::vector<DatasetRecord>& records,
                              const AnchorNet* anchor_model, const TrainConfig& cfg);

struct InferOptions {
  int steps = 50;
  double cfg_scale = 1.5;
  uint64_t seed = 7;
  Eigen::Vector3d gravity = kDefaultGravity;
};

AnchorEstimate estimate_anchor(const AnchorNet& net, const ConditionSet& obs);
MotionSequence complete_sequence(const AnchorEstimate& est, const VelocityNet& net,
                                 const ConditionSet& obs, const InferOptions& opts, double fps);
MotionSequence baseline_complete(const AnchorEstimate& est, const BaselineNet& net,
                                 const ConditionSet& obs, double fps,
                                 const Eigen::Vector3d& gravity);
// Identity completion: generated coordinates all zero.
MotionSequence zero_pose_complete(const AnchorEstimate& est, int frames, double fps,
                                  const Eigen::Vector3d& gravity);

// Indices of the generated coordinates, in latent column order.
std::vector<int> generated_coordinates(const KnownMask& mask);

}  // namespace anchorflow
