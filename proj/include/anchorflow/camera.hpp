// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

#include "anchorflow/rng.hpp"

namespace anchorflow {

struct Intrinsics {
  double fx = 500.0, fy = 500.0;
  double cx = 320.0, cy = 240.0;
  double width = 640.0, height = 480.0;
};

// World-to-camera transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Pinhole projection, camera-space point to pixels. Throws
// std::invalid_argument when the point is not in front of the camera; the
// caller is expected to mask such joints as invisible.
Eigen::Vector2d project(const Intrinsics& k, const Eigen::Vector3d& x);

// Unit viewing ray through a pixel.
Eigen::Vector3d pixel_to_ray(const Intrinsics& k, const Eigen::Vector2d& uv);

// [sin(2^f pi x_i), cos(2^f pi x_i)] for f = 0..n_freq-1, component-major:
// out[(i*n_freq + f)*2 + {0,1}].
Eigen::VectorXd sinusoidal_embed(const Eigen::VectorXd& x, int n_freq);

inline constexpr int kRayFreqs = 4;
// Per-keypoint feature: unit ray (3), sinusoidal encoding of the ray
// (2*3*n_freq), confidence scalar. Invisible keypoints carry an all-zero
// block with confidence 0 so the layout never changes.
Eigen::VectorXd ray_embedding(const Intrinsics& k, const Eigen::Vector2d& uv, double confidence,
                              int n_freq = kRayFreqs);
inline constexpr int ray_embedding_dim(int n_freq = kRayFreqs) { return 3 + 6 * n_freq + 1; }

// Channel order: yaw, pitch, roll (radians, composed about world y, x, z as
// the camera-to-world orientation), then camera center x, y, z (meters).
struct TrajectoryBounds {
  std::array<std::array<double, 2>, 6> range{};
};

CameraPose camera_pose_from_channels(const std::array<double, 6>& channels);

// Endpoints drawn uniformly inside the bounds, cosine-eased in between.
std::vector<CameraPose> sample_trajectory(Rng& rng, int n_frames, const TrajectoryBounds& bounds);

// Frame t: axis-angle of R_t R_{t-1}^T and the translation delta expressed in
// the previous camera frame; frame 0 is zero.
Eigen::MatrixXd relative_camera_features(const std::vector<CameraPose>& poses);

}  // namespace anchorflow
