// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <vector>

#include "anchorflow/skeleton.hpp"

namespace anchorflow {

// Per-frame recovered motion state: local body pose, shape, and the camera-
// and world-space root trajectories. Shape is carried per frame and is
// constant across a sequence in practice.
struct MotionState {
  BodyPoseMat body_pose = BodyPoseMat::Zero();
  Vec10 beta = Vec10::Zero();
  Eigen::Vector3d gamma_c = Eigen::Vector3d::Zero();
  Eigen::Vector3d tau_c = Eigen::Vector3d::Zero();
  Eigen::Vector3d gamma_w = Eigen::Vector3d::Zero();
  Eigen::Vector3d tau_w = Eigen::Vector3d::Zero();
};

using MotionSequence = std::vector<MotionState>;

inline Pose camera_pose_of(const MotionState& s) {
  return Pose{s.body_pose, s.gamma_c, s.tau_c};
}
inline Pose world_pose_of(const MotionState& s) {
  return Pose{s.body_pose, s.gamma_w, s.tau_w};
}

inline constexpr int kBboxDim = 3;
inline constexpr int kImgFeatDim = 32;
inline constexpr int kRelCamDim = 6;
inline constexpr int kTorsoCondDim = 3 + 3 * kNumTorso;  // root orientation + torso pose

// Per-frame observation features, split into anchor-related channels (bbox,
// relative camera motion, torso-pose condition) and articulation-related
// channels (keypoint rays, image features). Rows are frames.
struct ConditionSet {
  Eigen::MatrixXd bbox;        // T x 3
  Eigen::MatrixXd kp_rays;     // T x (22 * ray_embedding_dim)
  Eigen::MatrixXd img_feat;    // T x 32
  Eigen::MatrixXd rel_cam;     // T x 6
  Eigen::MatrixXd torso_pose;  // T x 27, zero until an anchor is attached

  int frames() const { return static_cast<int>(bbox.rows()); }

  static ConditionSet zeros(int frames, int kp_width) {
    ConditionSet c;
    c.bbox = Eigen::MatrixXd::Zero(frames, kBboxDim);
    c.kp_rays = Eigen::MatrixXd::Zero(frames, kp_width);
    c.img_feat = Eigen::MatrixXd::Zero(frames, kImgFeatDim);
    c.rel_cam = Eigen::MatrixXd::Zero(frames, kRelCamDim);
    c.torso_pose = Eigen::MatrixXd::Zero(frames, kTorsoCondDim);
    return c;
  }
};

}  // namespace anchorflow
