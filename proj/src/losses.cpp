// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace anchorflow {

void LossReport::add(const std::string& name, double value, double weight) {
  terms.push_back({name, value, weight});
  total += weight * value;
}

double LossReport::value(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t.value;
  }
  throw std::invalid_argument("LossReport: unknown term " + name);
}

double robust_penalty(const Eigen::VectorXd& r, double delta) {
  if (!r.allFinite()) throw std::invalid_argument("robust_penalty: non-finite residual");
  const double n = r.norm();
  if (n <= delta) return 0.5 * n * n / delta;
  return n - 0.5 * delta;
}

Eigen::VectorXd robust_penalty_grad(const Eigen::VectorXd& r, double delta) {
  const double n = r.norm();
  if (n <= delta) return r / delta;
  return r / n;
}

namespace {

// Fixed-size fast path used all over the per-frame loops.
inline double huber3(const Eigen::Vector3d& r, double delta) {
  const double n = r.norm();
  return n <= delta ? 0.5 * n * n / delta : n - 0.5 * delta;
}

inline Eigen::Vector3d huber3_grad(const Eigen::Vector3d& r, double delta) {
  const double n = r.norm();
  return n <= delta ? Eigen::Vector3d(r / delta) : Eigen::Vector3d(r / n);
}

void check_same_joint_set(const std::vector<Eigen::MatrixXd>& a,
                          const std::vector<Eigen::MatrixXd>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("joint arrays: frame count mismatch");
  for (size_t t = 0; t < a.size(); ++t) {
    if (a[t].rows() != b[t].rows() || a[t].cols() != 3 || b[t].cols() != 3) {
      throw std::invalid_argument("joint arrays: joint index set mismatch");
    }
  }
}

}  // namespace

double joint_bone_consistency(const std::vector<Eigen::MatrixXd>& j_hat,
                              const std::vector<Eigen::MatrixXd>& j_fk,
                              const std::vector<std::pair<int, int>>& pairs, double delta) {
  return joint_bone_consistency_backward(j_hat, j_fk, pairs, delta, 0.0, nullptr, nullptr);
}

double joint_bone_consistency_backward(const std::vector<Eigen::MatrixXd>& j_hat,
                                       const std::vector<Eigen::MatrixXd>& j_fk,
                                       const std::vector<std::pair<int, int>>& pairs, double delta,
                                       double grad_scale, std::vector<Eigen::MatrixXd>* d_j_hat,
                                       std::vector<Eigen::MatrixXd>* d_j_fk) {
  check_same_joint_set(j_hat, j_fk);
  const int frames = static_cast<int>(j_hat.size());
  if (frames == 0) return 0.0;
  const double frame_scale = grad_scale / frames;
  double loss = 0.0;
  for (int t = 0; t < frames; ++t) {
    const Eigen::MatrixXd& h = j_hat[t];
    const Eigen::MatrixXd& f = j_fk[t];
    for (int j = 0; j < h.rows(); ++j) {
      const Eigen::Vector3d r = (h.row(j) - f.row(j)).transpose();
      loss += huber3(r, delta);
      if (d_j_hat) {
        const Eigen::Vector3d g = frame_scale * huber3_grad(r, delta);
        (*d_j_hat)[t].row(j) += g.transpose();
        (*d_j_fk)[t].row(j) -= g.transpose();
      }
    }
    for (const auto& [j, p] : pairs) {
      const Eigen::Vector3d r =
          ((h.row(j) - h.row(p)) - (f.row(j) - f.row(p))).transpose();
      loss += huber3(r, delta);
      if (d_j_hat) {
        const Eigen::Vector3d g = frame_scale * huber3_grad(r, delta);
        (*d_j_hat)[t].row(j) += g.transpose();
        (*d_j_hat)[t].row(p) -= g.transpose();
        (*d_j_fk)[t].row(j) -= g.transpose();
        (*d_j_fk)[t].row(p) += g.transpose();
      }
    }
  }
  return loss / frames;
}

double projection_loss(const std::vector<Eigen::MatrixXd>& j_cam,
                       const std::vector<Eigen::MatrixXd>& u_gt, const Eigen::MatrixXd& visible,
                       const std::vector<int>& selected, const Intrinsics& k, double delta) {
  return projection_loss_backward(j_cam, u_gt, visible, selected, k, delta, 0.0, nullptr);
}

double projection_loss_backward(const std::vector<Eigen::MatrixXd>& j_cam,
                                const std::vector<Eigen::MatrixXd>& u_gt,
                                const Eigen::MatrixXd& visible, const std::vector<int>& selected,
                                const Intrinsics& k, double delta, double grad_scale,
                                std::vector<Eigen::MatrixXd>* d_j_cam) {
  const int frames = static_cast<int>(j_cam.size());
  if (frames == 0) return 0.0;
  const double frame_scale = grad_scale / frames;
  double loss = 0.0;
  for (int t = 0; t < frames; ++t) {
    for (int j : selected) {
      if (visible(t, j) == 0.0) continue;
      const Eigen::Vector3d x = j_cam[t].row(j).transpose();
      if (x.z() <= 0.0) continue;
      const Eigen::Vector2d u = project(k, x);
      const Eigen::Vector2d r = u - u_gt[t].row(j).transpose();
      const double n = r.norm();
      loss += n <= delta ? 0.5 * n * n / delta : n - 0.5 * delta;
      if (d_j_cam) {
        const Eigen::Vector2d gu = n <= delta ? Eigen::Vector2d(r / delta) : Eigen::Vector2d(r / n);
        Eigen::Matrix<double, 2, 3> jproj;
        jproj << k.fx / x.z(), 0, -k.fx * x.x() / (x.z() * x.z()),
                 0, k.fy / x.z(), -k.fy * x.y() / (x.z() * x.z());
        (*d_j_cam)[t].row(j) += frame_scale * (jproj.transpose() * gu).transpose();
      }
    }
  }
  return loss / frames;
}

double projection_weight(int step, int total_steps, double w_max, double r_proj) {
  if (total_steps < 1) throw std::invalid_argument("projection_weight: total_steps must be >= 1");
  const double ramp_end = std::ceil(r_proj * total_steps);
  if (ramp_end <= 0.0) return w_max;
  if (step >= ramp_end) return w_max;
  if (step <= 0) return 0.0;
  return w_max * static_cast<double>(step) / ramp_end;
}

LossReport regression_losses(const MotionSequence& pred, const MotionSequence& gt,
                             const SequenceContext& ctx, const LossWeights& w) {
  if (pred.size() != gt.size()) throw std::invalid_argument("regression_losses: length mismatch");
  if (pred.empty()) throw std::invalid_argument("regression_losses: empty sequences");
  const int frames = static_cast<int>(pred.size());
  const Skeleton& skel = *ctx.skel;

  double pose = 0, joints3d = 0, transl = 0, world = 0, verts3d = 0, kp2d = 0;
  for (int t = 0; t < frames; ++t) {
    const MotionState& p = pred[t];
    const MotionState& g = gt[t];
    for (int j = 0; j < kNumBodyJoints; ++j) {
      pose += huber3((p.body_pose.row(j) - g.body_pose.row(j)).transpose(), w.delta_3d);
    }
    pose += huber3(p.gamma_c - g.gamma_c, w.delta_3d);
    transl += huber3(p.tau_c - g.tau_c, w.delta_3d);
    world += huber3(p.tau_w - g.tau_w, w.delta_3d);

    const auto jp = forward_kinematics(camera_pose_of(p), BodyShape{p.beta}, skel);
    const auto jg = forward_kinematics(camera_pose_of(g), BodyShape{g.beta}, skel);
    for (int j = 0; j < kNumJoints; ++j) {
      joints3d += huber3(jp[j] - jg[j], w.delta_3d);
      joints3d += huber3((jp[j] - jp[0]) - (jg[j] - jg[0]), w.delta_3d);
      if (jp[j].z() > 0.0 && jg[j].z() > 0.0) {
        const Eigen::Vector2d r = project(ctx.intrinsics, jp[j]) - project(ctx.intrinsics, jg[j]);
        const double n = r.norm();
        kp2d += n <= w.delta_px ? 0.5 * n * n / w.delta_px : n - 0.5 * w.delta_px;
      }
    }
    if (ctx.mesh != nullptr) {
      const Eigen::MatrixXd vp = lbs_vertices(camera_pose_of(p), BodyShape{p.beta}, *ctx.mesh, skel);
      const Eigen::MatrixXd vg = lbs_vertices(camera_pose_of(g), BodyShape{g.beta}, *ctx.mesh, skel);
      for (int v = 0; v < vp.rows(); ++v) {
        const Eigen::Vector3d rp = vp.row(v).transpose() - jp[0];
        const Eigen::Vector3d rg = vg.row(v).transpose() - jg[0];
        verts3d += huber3(rp - rg, w.delta_3d);
        if (vp(v, 2) > 0.0 && vg(v, 2) > 0.0) {
          const Eigen::Vector2d r = project(ctx.intrinsics, vp.row(v).transpose()) -
                                    project(ctx.intrinsics, vg.row(v).transpose());
          const double n = r.norm();
          kp2d += n <= w.delta_px ? 0.5 * n * n / w.delta_px : n - 0.5 * w.delta_px;
        }
      }
    }
  }

  LossReport report;
  report.add("pose", pose / frames, w.w_pose);
  report.add("joints3d", joints3d / frames, w.w_joints3d);
  report.add("transl", transl / frames, w.w_transl);
  report.add("world_transl", world / frames, w.w_world_transl);
  report.add("vertices", verts3d / frames, w.w_vertices);
  // Pixel terms are expressed in units of the pixel Huber width so their
  // magnitudes are comparable to the metric terms.
  report.add("kp2d", kp2d / frames / w.delta_px, w.w_kp2d);
  return report;
}

}  // namespace anchorflow
