// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/camera.hpp"

#include <cmath>
#include <stdexcept>

#include "anchorflow/geometry.hpp"

namespace anchorflow {

Eigen::Vector2d project(const Intrinsics& k, const Eigen::Vector3d& x) {
  if (!x.allFinite()) throw std::invalid_argument("project: non-finite point");
  if (x.z() <= 0.0) throw std::invalid_argument("project: point behind camera");
  return {k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy};
}

Eigen::Vector3d pixel_to_ray(const Intrinsics& k, const Eigen::Vector2d& uv) {
  if (!uv.allFinite()) throw std::invalid_argument("pixel_to_ray: non-finite pixel");
  Eigen::Vector3d ray((uv.x() - k.cx) / k.fx, (uv.y() - k.cy) / k.fy, 1.0);
  return ray.normalized();
}

Eigen::VectorXd sinusoidal_embed(const Eigen::VectorXd& x, int n_freq) {
  if (n_freq < 1) throw std::invalid_argument("sinusoidal_embed: n_freq must be >= 1");
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd out(2 * d * n_freq);
  for (int i = 0; i < d; ++i) {
    double scale = M_PI;
    for (int f = 0; f < n_freq; ++f) {
      const double arg = scale * x(i);
      out((i * n_freq + f) * 2 + 0) = std::sin(arg);
      out((i * n_freq + f) * 2 + 1) = std::cos(arg);
      scale *= 2.0;
    }
  }
  return out;
}

Eigen::VectorXd ray_embedding(const Intrinsics& k, const Eigen::Vector2d& uv, double confidence,
                              int n_freq) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(ray_embedding_dim(n_freq));
  if (confidence > 0.0) {
    const Eigen::Vector3d ray = pixel_to_ray(k, uv);
    out.head<3>() = ray;
    out.segment(3, 6 * n_freq) = sinusoidal_embed(ray, n_freq);
  }
  out(out.size() - 1) = confidence;
  return out;
}

CameraPose camera_pose_from_channels(const std::array<double, 6>& ch) {
  const Eigen::Matrix3d c2w = axis_angle_to_matrix(Eigen::Vector3d(0, ch[0], 0)) *
                              axis_angle_to_matrix(Eigen::Vector3d(ch[1], 0, 0)) *
                              axis_angle_to_matrix(Eigen::Vector3d(0, 0, ch[2]));
  CameraPose pose;
  pose.rotation = c2w.transpose();
  pose.translation = -pose.rotation * Eigen::Vector3d(ch[3], ch[4], ch[5]);
  return pose;
}

std::vector<CameraPose> sample_trajectory(Rng& rng, int n_frames, const TrajectoryBounds& bounds) {
  if (n_frames < 2) throw std::invalid_argument("sample_trajectory: need at least 2 frames");
  for (const auto& r : bounds.range) {
    if (!(r[1] >= r[0])) throw std::invalid_argument("sample_trajectory: empty channel bounds");
  }
  std::array<double, 6> start{}, stop{};
  for (int c = 0; c < 6; ++c) start[c] = rng.uniform(bounds.range[c][0], bounds.range[c][1]);
  for (int c = 0; c < 6; ++c) stop[c] = rng.uniform(bounds.range[c][0], bounds.range[c][1]);

  std::vector<CameraPose> poses;
  poses.reserve(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(n_frames - 1);
    const double ease = 0.5 * (1.0 - std::cos(M_PI * s));
    std::array<double, 6> ch{};
    for (int c = 0; c < 6; ++c) ch[c] = start[c] + (stop[c] - start[c]) * ease;
    poses.push_back(camera_pose_from_channels(ch));
  }
  return poses;
}

Eigen::MatrixXd relative_camera_features(const std::vector<CameraPose>& poses) {
  if (poses.empty()) throw std::invalid_argument("relative_camera_features: empty sequence");
  const int n = static_cast<int>(poses.size());
  Eigen::MatrixXd feats = Eigen::MatrixXd::Zero(n, 6);
  for (int t = 1; t < n; ++t) {
    const Eigen::Matrix3d rel = poses[t].rotation * poses[t - 1].rotation.transpose();
    const Eigen::Vector3d delta =
        rel.transpose() * poses[t].translation - poses[t - 1].translation;
    feats.block<1, 3>(t, 0) = matrix_to_axis_angle(rel).transpose();
    feats.block<1, 3>(t, 3) = delta.transpose();
  }
  return feats;
}

}  // namespace anchorflow
