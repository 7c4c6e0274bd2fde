// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/training.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "anchorflow/errors.hpp"
#include "anchorflow/geometry.hpp"

namespace anchorflow {

namespace {

inline double huber3(const Eigen::Vector3d& r, double delta) {
  const double n = r.norm();
  return n <= delta ? 0.5 * n * n / delta : n - 0.5 * delta;
}

inline Eigen::Vector3d huber3_grad(const Eigen::Vector3d& r, double delta) {
  const double n = r.norm();
  return n <= delta ? Eigen::Vector3d(r / delta) : Eigen::Vector3d(r / n);
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Intrinsics& k, const Eigen::Vector3d& x) {
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx / x.z(), 0, -k.fx * x.x() / (x.z() * x.z()),
       0, k.fy / x.z(), -k.fy * x.y() / (x.z() * x.z());
  return j;
}

}  // namespace

AnchorEstimate anchor_from_gt(const MotionSequence& gt, const Partition& part) {
  const int frames = static_cast<int>(gt.size());
  AnchorEstimate est;
  est.theta_torso.resize(frames, 3 * kNumTorso);
  est.gamma_c.resize(frames, 3);
  est.tau_c.resize(frames, 3);
  est.beta = gt.front().beta;
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < kNumTorso; ++i) {
      est.theta_torso.row(t).segment<3>(3 * i) = gt[t].body_pose.row(part.torso_ids[i] - 1);
    }
    est.gamma_c.row(t) = gt[t].gamma_c.transpose();
    est.tau_c.row(t) = gt[t].tau_c.transpose();
  }
  return est;
}

AnchorEstimate anchor_from_pred(const AnchorPred& pred) {
  return {pred.theta_torso, pred.beta, pred.gamma_c, pred.tau_c};
}

CompositeLatent anchor_latent(const AnchorEstimate& est, const Skeleton& skel,
                              const Partition& part) {
  const LatentLayout& layout = LatentLayout::standard();
  const int frames = static_cast<int>(est.theta_torso.rows());
  CompositeLatent z;
  z.data = Eigen::MatrixXd::Zero(frames, layout.frame_width());
  const auto& tt = layout.span(Block::ThetaTorso);
  const auto& jt = layout.span(Block::JTorso);
  for (int t = 0; t < frames; ++t) {
    Pose pose;
    for (int i = 0; i < kNumTorso; ++i) {
      pose.body_pose.row(part.torso_ids[i] - 1) = est.theta_torso.row(t).segment<3>(3 * i);
    }
    pose.global_orient = est.gamma_c.row(t).transpose();
    pose.root_transl = est.tau_c.row(t).transpose();
    const auto joints = forward_kinematics(pose, BodyShape{est.beta}, skel);
    z.data.row(t).segment(tt.offset, tt.width) = est.theta_torso.row(t);
    for (int i = 0; i < kNumTorso; ++i) {
      z.data.row(t).segment<3>(jt.offset + 3 * i) = joints[part.torso_ids[i]].transpose();
    }
    z.data.row(t).segment(layout.span(Block::Beta).offset, kShapeDims) = est.beta.transpose();
    z.data.row(t).segment<3>(layout.span(Block::GammaC).offset) = est.gamma_c.row(t);
    z.data.row(t).segment<3>(layout.span(Block::TauC).offset) = est.tau_c.row(t);
  }
  return z;
}

Eigen::MatrixXd torso_condition(const AnchorEstimate& est) {
  const int frames = static_cast<int>(est.theta_torso.rows());
  Eigen::MatrixXd cond(frames, kTorsoCondDim);
  cond.leftCols(3) = est.gamma_c;
  cond.rightCols(3 * kNumTorso) = est.theta_torso;
  return cond;
}

MotionSequence assemble_states(const AnchorEstimate& est, const DecodedLatent& dec,
                               const Partition& part) {
  const int frames = static_cast<int>(dec.states.size());
  MotionSequence out(frames);
  for (int t = 0; t < frames; ++t) {
    MotionState& s = out[t];
    s = dec.states[t];
    for (int i = 0; i < kNumTorso; ++i) {
      s.body_pose.row(part.torso_ids[i] - 1) = est.theta_torso.row(t).segment<3>(3 * i);
    }
    s.beta = est.beta;
    s.gamma_c = est.gamma_c.row(t).transpose();
    s.tau_c = est.tau_c.row(t).transpose();
  }
  return out;
}

std::vector<int> generated_coordinates(const KnownMask& mask) {
  std::vector<int> idx;
  for (int c = 0; c < mask.mask.size(); ++c) {
    if (mask.mask(c) != 0.0) idx.push_back(c);
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Stage-1 objective

Stage1Objective stage1_objective(const AnchorEstimate& pred, const MotionSequence& gt,
                                 const SequenceContext& ctx, const LossWeights& w,
                                 bool with_grads) {
  const int frames = static_cast<int>(gt.size());
  const Skeleton& skel = *ctx.skel;
  const Partition& part = *ctx.part;

  Stage1Objective obj;
  obj.d_theta = Eigen::MatrixXd::Zero(frames, 3 * kNumTorso);
  obj.d_gamma = Eigen::MatrixXd::Zero(frames, 3);
  obj.d_tau = Eigen::MatrixXd::Zero(frames, 3);

  double pose = 0, shape = 0, orient = 0, transl = 0, joints3d = 0;
  const double inv_frames = 1.0 / frames;
  for (int t = 0; t < frames; ++t) {
    const MotionState& g = gt[t];
    for (int i = 0; i < kNumTorso; ++i) {
      const Eigen::Vector3d r = pred.theta_torso.row(t).segment<3>(3 * i).transpose() -
                                g.body_pose.row(part.torso_ids[i] - 1).transpose();
      pose += huber3(r, w.delta_3d);
      if (with_grads) {
        obj.d_theta.row(t).segment<3>(3 * i) +=
            (w.w_pose * inv_frames) * huber3_grad(r, w.delta_3d).transpose();
      }
    }
    const Eigen::Vector3d rg = pred.gamma_c.row(t).transpose() - g.gamma_c;
    orient += huber3(rg, w.delta_3d);
    const Eigen::Vector3d rt = pred.tau_c.row(t).transpose() - g.tau_c;
    transl += huber3(rt, w.delta_3d);
    if (with_grads) {
      obj.d_gamma.row(t) += (w.w_pose * inv_frames) * huber3_grad(rg, w.delta_3d).transpose();
      obj.d_tau.row(t) += (w.w_transl * inv_frames) * huber3_grad(rt, w.delta_3d).transpose();
    }

    // Torso-joint positions under the predicted anchor; non-torso rows come
    // from ground truth so the term depends only on anchor variables.
    Pose p;
    p.body_pose = g.body_pose;
    for (int i = 0; i < kNumTorso; ++i) {
      p.body_pose.row(part.torso_ids[i] - 1) = pred.theta_torso.row(t).segment<3>(3 * i);
    }
    p.global_orient = pred.gamma_c.row(t).transpose();
    p.root_transl = pred.tau_c.row(t).transpose();
    const BodyShape ps{pred.beta};
    const FkResult fk = forward_kinematics_full(p, ps, skel);
    const auto jg = forward_kinematics(camera_pose_of(g), BodyShape{g.beta}, skel);

    std::array<Eigen::Vector3d, kNumJoints> d_joints;
    d_joints.fill(Eigen::Vector3d::Zero());
    for (int id : part.torso_ids) {
      const Eigen::Vector3d r = fk.joints[id] - jg[id];
      joints3d += huber3(r, w.delta_3d);
      if (with_grads) {
        d_joints[id] += (w.w_joints3d * inv_frames) * huber3_grad(r, w.delta_3d);
      }
    }
    if (with_grads) {
      const FkGrads fg = fk_backward(p, ps, skel, fk, d_joints);
      for (int i = 0; i < kNumTorso; ++i) {
        obj.d_theta.row(t).segment<3>(3 * i) += fg.d_body_pose.row(part.torso_ids[i] - 1);
      }
      obj.d_gamma.row(t) += fg.d_global_orient.transpose();
      obj.d_tau.row(t) += fg.d_root_transl.transpose();
      obj.d_beta += fg.d_beta;
    }
  }
  const Eigen::Matrix<double, 10, 1> rb = pred.beta - gt.front().beta;
  shape = robust_penalty(rb, w.delta_3d);
  if (with_grads) obj.d_beta += w.w_pose * robust_penalty_grad(rb, w.delta_3d);

  obj.report.add("pose", pose / frames, w.w_pose);
  obj.report.add("shape", shape, w.w_pose);
  obj.report.add("orient", orient / frames, w.w_pose);
  obj.report.add("transl", transl / frames, w.w_transl);
  obj.report.add("joints3d", joints3d / frames, w.w_joints3d);
  return obj;
}

// ---------------------------------------------------------------------------
// Stage-2 objective

Stage2Objective stage2_objective(const CompositeLatent& zhat, const MotionSequence& gt,
                                 const GravityFrame& frame, const Eigen::Vector3d& tau0,
                                 double fps, const SequenceContext& ctx,
                                 const Eigen::MatrixXd& visibility, const LossWeights& w,
                                 double proj_weight, bool with_grads) {
  const LatentLayout& layout = LatentLayout::standard();
  const Skeleton& skel = *ctx.skel;
  const Partition& part = *ctx.part;
  const int frames = static_cast<int>(gt.size());
  if (zhat.frames() != frames) throw std::invalid_argument("stage2_objective: length mismatch");
  const double inv_frames = 1.0 / frames;

  const DecodedLatent dec = decode_latent(zhat, part, frame, tau0, fps);

  Stage2Objective obj;
  obj.d_latent = Eigen::MatrixXd::Zero(frames, layout.frame_width());
  const auto& tt = layout.span(Block::ThetaTorso);
  const auto& tn = layout.span(Block::ThetaNon);
  const auto& jt = layout.span(Block::JTorso);
  const auto& jn = layout.span(Block::JNon);
  const auto& bb = layout.span(Block::Beta);
  const auto& gc = layout.span(Block::GammaC);
  const auto& tc = layout.span(Block::TauC);
  const auto& gg = layout.span(Block::GammaGv);
  const auto& vr = layout.span(Block::VRoot);

  double pose = 0, joints3d = 0, transl = 0, world = 0, verts3d = 0, kp2d = 0;
  Vec10 d_beta_total = Vec10::Zero();

  // Joint-branch and FK-branch joints for the consistency term; the branch
  // root is the decoded camera translation.
  std::vector<Eigen::MatrixXd> j_hat(frames), j_fk(frames), u_gt(frames);
  std::vector<Eigen::MatrixXd> d_j_hat, d_j_fk;
  if (with_grads) {
    d_j_hat.assign(frames, Eigen::MatrixXd::Zero(kNumJoints, 3));
    d_j_fk.assign(frames, Eigen::MatrixXd::Zero(kNumJoints, 3));
  }
  Eigen::MatrixXd proj_visible = Eigen::MatrixXd::Zero(frames, kNumJoints);

  std::vector<FkResult> fk_cache(frames);
  std::vector<Pose> pose_cache(frames);
  const BodyShape pred_shape{dec.states.front().beta};

  for (int t = 0; t < frames; ++t) {
    const MotionState& p = dec.states[t];
    const MotionState& g = gt[t];

    // Direct pose/orientation/translation regression.
    for (int j = 0; j < kNumBodyJoints; ++j) {
      const Eigen::Vector3d r = (p.body_pose.row(j) - g.body_pose.row(j)).transpose();
      pose += huber3(r, w.delta_3d);
      if (with_grads) {
        const Eigen::RowVector3d gr =
            (w.w_pose * inv_frames) * huber3_grad(r, w.delta_3d).transpose();
        const int torso_slot = [&part, j] {
          for (int i = 0; i < kNumTorso; ++i) {
            if (part.torso_ids[i] == j + 1) return i;
          }
          return -1;
        }();
        if (torso_slot >= 0) {
          obj.d_latent.row(t).segment<3>(tt.offset + 3 * torso_slot) += gr;
        } else {
          for (int i = 0; i < kNumNonTorso; ++i) {
            if (part.non_torso_ids[i] == j + 1) {
              obj.d_latent.row(t).segment<3>(tn.offset + 3 * i) += gr;
              break;
            }
          }
        }
      }
    }
    const Eigen::Vector3d rg = p.gamma_c - g.gamma_c;
    pose += huber3(rg, w.delta_3d);
    const Eigen::Vector3d rt = p.tau_c - g.tau_c;
    transl += huber3(rt, w.delta_3d);
    if (with_grads) {
      obj.d_latent.row(t).segment<3>(gc.offset) +=
          (w.w_pose * inv_frames) * huber3_grad(rg, w.delta_3d).transpose();
      obj.d_latent.row(t).segment<3>(tc.offset) +=
          (w.w_transl * inv_frames) * huber3_grad(rt, w.delta_3d).transpose();
    }

    pose_cache[t] = camera_pose_of(p);
    fk_cache[t] = forward_kinematics_full(pose_cache[t], pred_shape, skel);
    const FkResult& fk = fk_cache[t];
    const auto jg = forward_kinematics(camera_pose_of(g), BodyShape{g.beta}, skel);

    std::array<Eigen::Vector3d, kNumJoints> d_joints;
    d_joints.fill(Eigen::Vector3d::Zero());
    std::array<Eigen::Matrix3d, kNumJoints> d_chain;
    d_chain.fill(Eigen::Matrix3d::Zero());

    // Camera-space and root-relative joint regression.
    for (int j = 0; j < kNumJoints; ++j) {
      const Eigen::Vector3d r_abs = fk.joints[j] - jg[j];
      joints3d += huber3(r_abs, w.delta_3d);
      const Eigen::Vector3d r_rel = (fk.joints[j] - fk.joints[0]) - (jg[j] - jg[0]);
      joints3d += huber3(r_rel, w.delta_3d);
      if (with_grads) {
        const double s = w.w_joints3d * inv_frames;
        d_joints[j] += s * huber3_grad(r_abs, w.delta_3d);
        const Eigen::Vector3d gr = s * huber3_grad(r_rel, w.delta_3d);
        d_joints[j] += gr;
        d_joints[0] -= gr;
      }
      // Reprojection of joints.
      if (fk.joints[j].z() > 0.0 && jg[j].z() > 0.0) {
        const Eigen::Vector2d r2 =
            project(ctx.intrinsics, fk.joints[j]) - project(ctx.intrinsics, jg[j]);
        const double n = r2.norm();
        kp2d += n <= w.delta_px ? 0.5 * n * n / w.delta_px : n - 0.5 * w.delta_px;
        if (with_grads) {
          const Eigen::Vector2d g2 =
              n <= w.delta_px ? Eigen::Vector2d(r2 / w.delta_px) : Eigen::Vector2d(r2 / n);
          d_joints[j] += (w.w_kp2d * inv_frames / w.delta_px) *
                         (projection_jacobian(ctx.intrinsics, fk.joints[j]).transpose() * g2);
        }
      }
    }

    // Vertex terms.
    if (ctx.mesh != nullptr) {
      const Eigen::MatrixXd vp = lbs_vertices(pose_cache[t], pred_shape, *ctx.mesh, skel);
      const Eigen::MatrixXd vg = lbs_vertices(camera_pose_of(g), BodyShape{g.beta}, *ctx.mesh, skel);
      Eigen::MatrixXd d_verts = Eigen::MatrixXd::Zero(vp.rows(), 3);
      for (int v = 0; v < vp.rows(); ++v) {
        const Eigen::Vector3d r =
            (vp.row(v).transpose() - fk.joints[0]) - (vg.row(v).transpose() - jg[0]);
        verts3d += huber3(r, w.delta_3d);
        if (with_grads) {
          const Eigen::Vector3d gr = (w.w_vertices * inv_frames) * huber3_grad(r, w.delta_3d);
          d_verts.row(v) += gr.transpose();
          d_joints[0] -= gr;
        }
        if (vp(v, 2) > 0.0 && vg(v, 2) > 0.0) {
          const Eigen::Vector2d r2 = project(ctx.intrinsics, vp.row(v).transpose()) -
                                     project(ctx.intrinsics, vg.row(v).transpose());
          const double n = r2.norm();
          kp2d += n <= w.delta_px ? 0.5 * n * n / w.delta_px : n - 0.5 * w.delta_px;
          if (with_grads) {
            const Eigen::Vector2d g2 =
                n <= w.delta_px ? Eigen::Vector2d(r2 / w.delta_px) : Eigen::Vector2d(r2 / n);
            d_verts.row(v) +=
                ((w.w_kp2d * inv_frames / w.delta_px) *
                 (projection_jacobian(ctx.intrinsics, vp.row(v).transpose()).transpose() * g2))
                    .transpose();
          }
        }
      }
      if (with_grads) lbs_backward(*ctx.mesh, skel, fk, d_verts, d_joints, d_chain);
    }

    if (with_grads) {
      const FkGrads fg = fk_backward(pose_cache[t], pred_shape, skel, fk, d_joints, &d_chain);
      for (int i = 0; i < kNumTorso; ++i) {
        obj.d_latent.row(t).segment<3>(tt.offset + 3 * i) +=
            fg.d_body_pose.row(part.torso_ids[i] - 1);
      }
      for (int i = 0; i < kNumNonTorso; ++i) {
        obj.d_latent.row(t).segment<3>(tn.offset + 3 * i) +=
            fg.d_body_pose.row(part.non_torso_ids[i] - 1);
      }
      obj.d_latent.row(t).segment<3>(gc.offset) += fg.d_global_orient.transpose();
      obj.d_latent.row(t).segment<3>(tc.offset) += fg.d_root_transl.transpose();
      d_beta_total += fg.d_beta;
    }

    // Assemble both branches for the consistency term.
    j_hat[t].resize(kNumJoints, 3);
    j_fk[t].resize(kNumJoints, 3);
    j_hat[t].row(0) = p.tau_c.transpose();
    j_fk[t].row(0) = fk.joints[0].transpose();
    for (int i = 0; i < kNumTorso; ++i) {
      j_hat[t].row(part.torso_ids[i]) = dec.j_torso.row(t).segment<3>(3 * i);
    }
    for (int i = 0; i < kNumNonTorso; ++i) {
      j_hat[t].row(part.non_torso_ids[i]) = dec.j_non.row(t).segment<3>(3 * i);
    }
    for (int j = 1; j < kNumJoints; ++j) j_fk[t].row(j) = fk.joints[j].transpose();

    // Exact projections of ground-truth joints as pixel targets.
    u_gt[t] = Eigen::MatrixXd::Zero(kNumJoints, 2);
    for (int j = 0; j < kNumJoints; ++j) {
      if (jg[j].z() > 0.0) {
        u_gt[t].row(j) = project(ctx.intrinsics, jg[j]).transpose();
        proj_visible(t, j) = visibility.size() > 0 ? visibility(t, j) : 1.0;
      }
    }

    // World-translation residual (value only; gradients via the rollout).
    const Eigen::Vector3d rw = p.tau_w - g.tau_w;
    world += huber3(rw, w.delta_3d);
  }

  // Joint-bone consistency across branches.
  const auto pairs = bone_pairs(skel);
  const double cons =
      joint_bone_consistency_backward(j_hat, j_fk, pairs, w.delta_3d, with_grads ? w.w_cons : 0.0,
                                      with_grads ? &d_j_hat : nullptr,
                                      with_grads ? &d_j_fk : nullptr);

  // Projection of the explicit non-torso joint branch.
  std::vector<int> selected(part.non_torso_ids.begin(), part.non_torso_ids.end());
  std::vector<Eigen::MatrixXd> d_proj;
  if (with_grads) d_proj.assign(frames, Eigen::MatrixXd::Zero(kNumJoints, 3));
  const double proj = projection_loss_backward(
                          j_hat, u_gt, proj_visible, selected, ctx.intrinsics, w.delta_px,
                          with_grads ? proj_weight / w.delta_px : 0.0,
                          with_grads ? &d_proj : nullptr) /
                      w.delta_px;

  if (with_grads) {
    for (int t = 0; t < frames; ++t) {
      // Branch gradients: root row belongs to the decoded camera translation,
      // body rows to the latent joint blocks.
      Eigen::MatrixXd d_branch = d_j_hat[t];
      if (!d_proj.empty()) d_branch += d_proj[t];
      obj.d_latent.row(t).segment<3>(tc.offset) += d_branch.row(0);
      for (int i = 0; i < kNumTorso; ++i) {
        obj.d_latent.row(t).segment<3>(jt.offset + 3 * i) += d_branch.row(part.torso_ids[i]);
      }
      for (int i = 0; i < kNumNonTorso; ++i) {
        obj.d_latent.row(t).segment<3>(jn.offset + 3 * i) += d_branch.row(part.non_torso_ids[i]);
      }
      // FK-branch gradients route through the kinematic chain.
      std::array<Eigen::Vector3d, kNumJoints> d_joints;
      for (int j = 0; j < kNumJoints; ++j) d_joints[j] = d_j_fk[t].row(j).transpose();
      const FkGrads fg = fk_backward(pose_cache[t], pred_shape, skel, fk_cache[t], d_joints);
      for (int i = 0; i < kNumTorso; ++i) {
        obj.d_latent.row(t).segment<3>(tt.offset + 3 * i) +=
            fg.d_body_pose.row(part.torso_ids[i] - 1);
      }
      for (int i = 0; i < kNumNonTorso; ++i) {
        obj.d_latent.row(t).segment<3>(tn.offset + 3 * i) +=
            fg.d_body_pose.row(part.non_torso_ids[i] - 1);
      }
      obj.d_latent.row(t).segment<3>(gc.offset) += fg.d_global_orient.transpose();
      obj.d_latent.row(t).segment<3>(tc.offset) += fg.d_root_transl.transpose();
      d_beta_total += fg.d_beta;
    }

    // World rollout: tau_w(t+1) = tau_w(t) + F^T exp(gamma_gv_t) v_root_t.
    Eigen::Vector3d suffix = Eigen::Vector3d::Zero();
    for (int t = frames - 2; t >= 0; --t) {
      const MotionState& pnext = dec.states[t + 1];
      const Eigen::Vector3d r = pnext.tau_w - gt[t + 1].tau_w;
      suffix += (w.w_world_transl * inv_frames) * huber3_grad(r, w.delta_3d);
      const Eigen::Vector3d gamma_gv = zhat.data.row(t).segment<3>(gg.offset).transpose();
      const Eigen::Vector3d v_root = zhat.data.row(t).segment<3>(vr.offset).transpose();
      const RotationJacobian jac = axis_angle_jacobian(gamma_gv);
      const Eigen::Matrix3d rw = frame.world_to_gv.transpose() * jac.rot;
      obj.d_latent.row(t).segment<3>(vr.offset) += (rw.transpose() * suffix).transpose();
      const Eigen::Matrix3d g_rot = frame.world_to_gv * (suffix * v_root.transpose());
      for (int i = 0; i < 3; ++i) {
        obj.d_latent(t, gg.offset + i) += (g_rot.array() * jac.d_rot[i].array()).sum();
      }
    }

    // Pooled shape: each frame's beta row contributes 1/T of the decoded beta.
    const Eigen::RowVectorXd d_beta_row = (d_beta_total / frames).transpose();
    for (int t = 0; t < frames; ++t) {
      obj.d_latent.row(t).segment(bb.offset, kShapeDims) += d_beta_row;
    }
  }

  obj.report.add("pose", pose / frames, w.w_pose);
  obj.report.add("joints3d", joints3d / frames, w.w_joints3d);
  obj.report.add("transl", transl / frames, w.w_transl);
  obj.report.add("world_transl", world / frames, w.w_world_transl);
  obj.report.add("vertices", verts3d / frames, w.w_vertices);
  obj.report.add("kp2d", kp2d / frames / w.delta_px, w.w_kp2d);
  obj.report.add("cons", cons, w.w_cons);
  obj.report.add("proj", proj, proj_weight);
  return obj;
}

// ---------------------------------------------------------------------------
// Training loops

namespace {

struct RecordContext {
  ConditionSet cond;  // torso condition attached
  CompositeLatent z_train;
  CompositeLatent anchor;
  GravityFrame frame;
  Eigen::Vector3d tau0;
  Eigen::MatrixXd visibility;
};

RecordContext make_record_context(const DatasetRecord& rec, const AnchorNet* anchor_model,
                                  const TrainConfig& cfg, const Skeleton& skel,
                                  const Partition& part, const KnownMask& mask) {
  RecordContext ctx;
  AnchorEstimate est;
  if (anchor_model != nullptr) {
    est = anchor_from_pred(anchor_model->apply(rec.obs));
  } else {
    est = anchor_from_gt(rec.gt, part);
  }
  ctx.cond = rec.obs;
  ctx.cond.torso_pose = torso_condition(est);
  ctx.anchor = anchor_latent(est, skel, part);
  const CompositeLatent z_gt = build_latent(rec.gt, part, skel, cfg.gravity, cfg.fps);
  ctx.z_train = z_gt;
  for (int c = 0; c < mask.mask.size(); ++c) {
    if (mask.mask(c) == 0.0) ctx.z_train.data.col(c) = ctx.anchor.data.col(c);
  }
  WorldTrajectory traj;
  traj.fps = cfg.fps;
  for (const auto& s : rec.gt) {
    traj.gamma_w.push_back(s.gamma_w);
    traj.tau_w.push_back(s.tau_w);
  }
  ctx.frame = encode_gv(traj, cfg.gravity).frame;
  ctx.tau0 = rec.gt.front().tau_w;
  ctx.visibility = rec.visibility;
  return ctx;
}

}  // namespace

Stage1Result train_stage1(const std::vector<DatasetRecord>& records, const TrainConfig& cfg) {
  if (records.empty()) throw std::invalid_argument("train_stage1: empty dataset");
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  SequenceContext sctx{&skel, &part, nullptr, records.front().intrinsics};

  Rng rng = Rng(cfg.seed).substream("train_stage1");
  Stage1Result result;
  result.net = std::make_shared<AnchorNet>(cfg.dims);
  result.net->init(rng);
  Adam adam(result.net->params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  adam.zero_grad();

  int in_batch = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& rec : records) {
      sctx.intrinsics = rec.intrinsics;
      const AnchorPred pred = result.net->forward(rec.obs);
      const Stage1Objective obj =
          stage1_objective(anchor_from_pred(pred), rec.gt, sctx, cfg.weights, true);
      result.net->backward(obj.d_theta, obj.d_beta, obj.d_gamma, obj.d_tau);
      total += obj.report.total;
      if (++in_batch >= cfg.batch) {
        adam.step();
        adam.zero_grad();
        in_batch = 0;
      }
    }
    total /= records.size();
    if (!std::isfinite(total)) {
      throw DivergenceError("train_stage1: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.curve.total.push_back(total);
    result.curve.fm.push_back(total);
  }
  return result;
}

Stage2Result train_stage2(const std::vector<DatasetRecord>& records, const AnchorNet* anchor_model,
                          const TrainConfig& cfg) {
  if (records.empty()) throw std::invalid_argument("train_stage2: empty dataset");
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const ProxyMesh mesh = ProxyMesh::generate(skel, 96, 0xa11ce);
  const LatentLayout& layout = LatentLayout::standard();
  const KnownMask mask = KnownMask::standard(layout);
  const NoiseSpec noise;
  const Eigen::VectorXd mask_row = mask.mask;

  std::vector<RecordContext> contexts;
  contexts.reserve(records.size());
  for (const auto& rec : records) {
    contexts.push_back(make_record_context(rec, anchor_model, cfg, skel, part, mask));
  }

  Rng rng = Rng(cfg.seed).substream("train_stage2");
  Stage2Result result;
  result.net = std::make_shared<VelocityNet>(cfg.dims);
  result.net->init(rng);
  Adam adam(result.net->params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  adam.zero_grad();

  const int total_steps = cfg.epochs * static_cast<int>(records.size());
  int global_step = 0;
  int in_batch = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double fm_sum = 0.0, total_sum = 0.0;
    for (size_t i = 0; i < records.size(); ++i) {
      const RecordContext& rc = contexts[i];
      SequenceContext sctx{&skel, &part, &mesh, records[i].intrinsics};
      const int frames = rc.z_train.frames();

      const double t = rng.uniform();
      const Eigen::MatrixXd eps = sample_source_noise(rng, frames, noise, layout);
      const CompositeLatent z_t = masked_path(rc.z_train, eps, mask, t);
      const ConditionSet cond = condition_dropout(rc.cond, cfg.p_drop, rng);

      const Eigen::MatrixXd v = result.net->forward(z_t.data, t, cond);
      const double fm = fm_loss(v, rc.z_train, eps, mask);
      Eigen::MatrixXd d_v = cfg.weights.w_fm * fm_loss_grad(v, rc.z_train, eps, mask);

      CompositeLatent zhat;
      zhat.data = z_t.data;
      for (int c = 0; c < mask_row.size(); ++c) {
        if (mask_row(c) != 0.0) zhat.data.col(c) += (1.0 - t) * v.col(c);
      }
      const double proj_w =
          projection_weight(global_step, total_steps, cfg.weights.w_proj_max, cfg.weights.r_proj);
      const Stage2Objective obj =
          stage2_objective(zhat, records[i].gt, rc.frame, rc.tau0, cfg.fps, sctx, rc.visibility,
                           cfg.weights, proj_w, true);
      for (int c = 0; c < mask_row.size(); ++c) {
        if (mask_row(c) != 0.0) d_v.col(c) += (1.0 - t) * obj.d_latent.col(c);
      }
      result.net->backward(d_v);
      fm_sum += fm;
      total_sum += cfg.weights.w_fm * fm + obj.report.total;
      ++global_step;
      if (++in_batch >= cfg.batch) {
        adam.step();
        adam.zero_grad();
        in_batch = 0;
      }
    }
    fm_sum /= records.size();
    total_sum /= records.size();
    if (!std::isfinite(total_sum)) {
      throw DivergenceError("train_stage2: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.curve.fm.push_back(fm_sum);
    result.curve.total.push_back(total_sum);
  }
  return result;
}

BaselineResult train_baseline(const std::vector<DatasetRecord>& records,
                              const AnchorNet* anchor_model, const TrainConfig& cfg) {
  if (records.empty()) throw std::invalid_argument("train_baseline: empty dataset");
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const ProxyMesh mesh = ProxyMesh::generate(skel, 96, 0xa11ce);
  const LatentLayout& layout = LatentLayout::standard();
  const KnownMask mask = KnownMask::standard(layout);
  const std::vector<int> gen_idx = generated_coordinates(mask);

  std::vector<RecordContext> contexts;
  contexts.reserve(records.size());
  for (const auto& rec : records) {
    contexts.push_back(make_record_context(rec, anchor_model, cfg, skel, part, mask));
  }

  Rng rng = Rng(cfg.seed).substream("train_baseline");
  BaselineResult result;
  result.net = std::make_shared<BaselineNet>(cfg.dims, static_cast<int>(gen_idx.size()));
  result.net->init(rng);
  Adam adam(result.net->params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  adam.zero_grad();

  const int total_steps = cfg.epochs * static_cast<int>(records.size());
  int global_step = 0;
  int in_batch = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double main_sum = 0.0, total_sum = 0.0;
    for (size_t i = 0; i < records.size(); ++i) {
      const RecordContext& rc = contexts[i];
      SequenceContext sctx{&skel, &part, &mesh, records[i].intrinsics};
      const int frames = rc.z_train.frames();

      const Eigen::MatrixXd out = result.net->forward(rc.cond);
      // Mean squared regression to the generated coordinates, the direct
      // analogue of the velocity-matching term.
      double mse = 0.0;
      Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(frames, out.cols());
      CompositeLatent zhat = rc.anchor;
      const double inv_count = 1.0 / (frames * static_cast<double>(gen_idx.size()));
      for (size_t k = 0; k < gen_idx.size(); ++k) {
        const int c = gen_idx[k];
        zhat.data.col(c) = out.col(static_cast<int>(k));
        const Eigen::VectorXd r = out.col(static_cast<int>(k)) - rc.z_train.data.col(c);
        mse += r.squaredNorm() * inv_count;
        d_out.col(static_cast<int>(k)) += cfg.weights.w_fm * 2.0 * inv_count * r;
      }
      const double proj_w =
          projection_weight(global_step, total_steps, cfg.weights.w_proj_max, cfg.weights.r_proj);
      const Stage2Objective obj =
          stage2_objective(zhat, records[i].gt, rc.frame, rc.tau0, cfg.fps, sctx, rc.visibility,
                           cfg.weights, proj_w, true);
      for (size_t k = 0; k < gen_idx.size(); ++k) {
        d_out.col(static_cast<int>(k)) += obj.d_latent.col(gen_idx[k]);
      }
      result.net->backward(d_out);
      main_sum += mse;
      total_sum += cfg.weights.w_fm * mse + obj.report.total;
      ++global_step;
      if (++in_batch >= cfg.batch) {
        adam.step();
        adam.zero_grad();
        in_batch = 0;
      }
    }
    main_sum /= records.size();
    total_sum /= records.size();
    if (!std::isfinite(total_sum)) {
      throw DivergenceError("train_baseline: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.curve.fm.push_back(main_sum);
    result.curve.total.push_back(total_sum);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference

AnchorEstimate estimate_anchor(const AnchorNet& net, const ConditionSet& obs) {
  return anchor_from_pred(net.apply(obs));
}

MotionSequence complete_sequence(const AnchorEstimate& est, const VelocityNet& net,
                                 const ConditionSet& obs, const InferOptions& opts, double fps) {
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  ConditionSet cond = obs;
  cond.torso_pose = torso_condition(est);
  const CompositeLatent anchor = anchor_latent(est, skel, part);
  Rng rng(opts.seed);
  const CompositeLatent z = sample(net, anchor, mask, cond,
                                   SampleOptions{opts.steps, opts.cfg_scale}, NoiseSpec{}, rng);
  const DecodedLatent dec = decode_latent(z, part, GravityFrame::canonical(opts.gravity),
                                          Eigen::Vector3d::Zero(), fps);
  return assemble_states(est, dec, part);
}

MotionSequence baseline_complete(const AnchorEstimate& est, const BaselineNet& net,
                                 const ConditionSet& obs, double fps,
                                 const Eigen::Vector3d& gravity) {
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());
  const std::vector<int> gen_idx = generated_coordinates(mask);
  ConditionSet cond = obs;
  cond.torso_pose = torso_condition(est);
  CompositeLatent z = anchor_latent(est, skel, part);
  const Eigen::MatrixXd out = net.apply(cond);
  for (size_t k = 0; k < gen_idx.size(); ++k) z.data.col(gen_idx[k]) = out.col(static_cast<int>(k));
  const DecodedLatent dec =
      decode_latent(z, part, GravityFrame::canonical(gravity), Eigen::Vector3d::Zero(), fps);
  return assemble_states(est, dec, part);
}

MotionSequence zero_pose_complete(const AnchorEstimate& est, int frames, double fps,
                                  const Eigen::Vector3d& gravity) {
  const Skeleton& skel = Skeleton::standard();
  const Partition& part = Partition::standard();
  const CompositeLatent z = anchor_latent(est, skel, part);
  (void)frames;
  const DecodedLatent dec =
      decode_latent(z, part, GravityFrame::canonical(gravity), Eigen::Vector3d::Zero(), fps);
  return assemble_states(est, dec, part);
}

}  // namespace anchorflow
