// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

#include "anchorflow/camera.hpp"
#include "anchorflow/skeleton.hpp"
#include "anchorflow/types.hpp"

namespace anchorflow {

struct LossWeights {
  double w_fm = 1.0;
  double w_pose = 1.0;
  double w_joints3d = 1.0;
  double w_transl = 1.0;
  double w_world_transl = 1.0;
  double w_cons = 0.5;
  double w_proj_max = 0.1;
  double w_vertices = 1.0;
  double w_kp2d = 1.0;
  double r_proj = 0.5;      // fraction of training spent ramping the projection weight
  double delta_3d = 0.05;   // Huber width, meters (also used for rotation residuals)
  double delta_px = 5.0;    // Huber width, pixels
};

struct LossReport {
  struct Term {
    std::string name;
    double value = 0.0;
    double weight = 0.0;
  };
  std::vector<Term> terms;
  double total = 0.0;

  void add(const std::string& name, double value, double weight);
  double value(const std::string& name) const;
};

// Huber penalty on the residual norm: quadratic inside delta, linear outside,
// continuous at the switch.
double robust_penalty(const Eigen::VectorXd& r, double delta);
Eigen::VectorXd robust_penalty_grad(const Eigen::VectorXd& r, double delta);

// Disagreement between an explicit joint-position branch and the joints
// implied by the rotation branch, over joint locations and parent-child bone
// vectors, averaged over frames. Both arrays must cover the same joint set;
// pair indices refer into it.
double joint_bone_consistency(const std::vector<Eigen::MatrixXd>& j_hat,
                              const std::vector<Eigen::MatrixXd>& j_fk,
                              const std::vector<std::pair<int, int>>& pairs, double delta);

// Same value; accumulates grad_scale * d/dJ into the provided buffers.
double joint_bone_consistency_backward(const std::vector<Eigen::MatrixXd>& j_hat,
                                       const std::vector<Eigen::MatrixXd>& j_fk,
                                       const std::vector<std::pair<int, int>>& pairs, double delta,
                                       double grad_scale, std::vector<Eigen::MatrixXd>* d_j_hat,
                                       std::vector<Eigen::MatrixXd>* d_j_fk);

// Robust pixel error of selected joints against 2D targets, frame-averaged.
// Joints that are invisible or behind the camera contribute zero.
double projection_loss(const std::vector<Eigen::MatrixXd>& j_cam,
                       const std::vector<Eigen::MatrixXd>& u_gt,
                       const Eigen::MatrixXd& visible, const std::vector<int>& selected,
                       const Intrinsics& k, double delta);

double projection_loss_backward(const std::vector<Eigen::MatrixXd>& j_cam,
                                const std::vector<Eigen::MatrixXd>& u_gt,
                                const Eigen::MatrixXd& visible, const std::vector<int>& selected,
                                const Intrinsics& k, double delta, double grad_scale,
                                std::vector<Eigen::MatrixXd>* d_j_cam);

// Linear ramp from zero at step 0 up to w_max at ceil(r_proj * total), then flat.
double projection_weight(int step, int total_steps, double w_max, double r_proj);

struct SequenceContext {
  const Skeleton* skel = nullptr;
  const Partition* part = nullptr;
  const ProxyMesh* mesh = nullptr;  // null skips vertex terms
  Intrinsics intrinsics;
};

// Direct regression terms between predicted and ground-truth motion states:
// pose, camera-space and root-relative joints, projected joints/vertices,
// root-relative vertices, camera translation, and world translation (the
// predicted tau_w is expected to come from the velocity rollout).
LossReport regression_losses(const MotionSequence& pred, const MotionSequence& gt,
                             const SequenceContext& ctx, const LossWeights& w);

}  // namespace anchorflow
