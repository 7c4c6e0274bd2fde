// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "anchorflow/training.hpp"

namespace anchorflow {

namespace {

struct ProbeTarget {
  Eigen::MatrixXd* value;
  const Eigen::MatrixXd* grad;
};

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

// Central differences on randomly chosen coordinates of the targets; the
// analytic gradients must already be populated.
double probe_targets(const std::function<double()>& loss, std::vector<ProbeTarget> targets,
                     int probes, Rng& rng) {
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const int mi = rng.uniform_int(0, static_cast<int>(targets.size()) - 1);
    Eigen::MatrixXd& m = *targets[mi].value;
    const int r = rng.uniform_int(0, static_cast<int>(m.rows()) - 1);
    const int c = rng.uniform_int(0, static_cast<int>(m.cols()) - 1);
    const double orig = m(r, c);
    m(r, c) = orig + kGradCheckStep;
    const double lp = loss();
    m(r, c) = orig - kGradCheckStep;
    const double lm = loss();
    m(r, c) = orig;
    const double fd = (lp - lm) / (2.0 * kGradCheckStep);
    worst = std::max(worst, relative_error((*targets[mi].grad)(r, c), fd));
  }
  return worst;
}

std::vector<ProbeTarget> param_targets(const std::vector<ParamRef>& params) {
  std::vector<ProbeTarget> out;
  for (const auto& p : params) out.push_back({p.value, p.grad});
  return out;
}

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

ConditionSet random_condition(Rng& rng, int frames, int kp_width) {
  ConditionSet c = ConditionSet::zeros(frames, kp_width);
  c.bbox = random_matrix(rng, frames, kBboxDim, 0.5);
  c.kp_rays = random_matrix(rng, frames, kp_width, 0.5);
  c.img_feat = random_matrix(rng, frames, kImgFeatDim, 0.5);
  c.rel_cam = random_matrix(rng, frames, kRelCamDim, 0.2);
  c.torso_pose = random_matrix(rng, frames, kTorsoCondDim, 0.3);
  return c;
}

// Small synthetic ground truth plus context shared by the objective checks.
struct ObjectiveFixture {
  MotionSequence gt;
  GravityFrame frame;
  Eigen::Vector3d tau0;
  Eigen::MatrixXd visibility;
  ProxyMesh mesh;
  SequenceContext ctx;
  LossWeights weights;
  double fps = 30.0;

  explicit ObjectiveFixture(Rng& rng, int frames)
      : mesh(ProxyMesh::generate(Skeleton::standard(), 24, 0xfeed)) {
    const Skeleton& skel = Skeleton::standard();
    gt.resize(frames);
    for (int t = 0; t < frames; ++t) {
      MotionState& s = gt[t];
      s.body_pose = random_matrix(rng, kNumBodyJoints, 3, 0.3);
      for (int i = 0; i < kShapeDims; ++i) s.beta(i) = rng.uniform(-1.0, 1.0);
      s.gamma_c = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.3;
      s.tau_c = Eigen::Vector3d(0.2 * rng.normal(), 0.2 * rng.normal(), 3.5 + 0.2 * rng.normal());
      s.gamma_w = Eigen::Vector3d(0, rng.uniform(-1.0, 1.0), 0);
      s.tau_w = Eigen::Vector3d(0.05 * t, 0.9, 0.08 * t);
    }
    frame = GravityFrame::from_gravity(kDefaultGravity, axis_angle_to_matrix(gt[0].gamma_w));
    tau0 = gt[0].tau_w;
    visibility = Eigen::MatrixXd::Ones(frames, kNumJoints);
    ctx = SequenceContext{&skel, &Partition::standard(), &mesh, Intrinsics{}};
    weights.w_proj_max = 0.1;
  }
};

GradCheckResult check(const std::string& name, double err, int probes) {
  return {name, err, probes, err < kGradCheckTolerance};
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(uint64_t seed) {
  std::vector<GradCheckResult> results;
  Rng root(seed);

  // Dense + GELU stack.
  {
    Rng rng = root.substream("dense");
    Dense d1("gc.d1", 7, 9, true);
    Dense d2("gc.d2", 9, 4, false);
    d1.init(rng);
    d2.init(rng);
    Eigen::MatrixXd x = random_matrix(rng, 5, 7, 1.0);
    const auto loss = [&] { return d2.apply(d1.apply(x)).squaredNorm(); };
    std::vector<ParamRef> params;
    d1.collect(params);
    d2.collect(params);
    for (auto& p : params) p.grad->setZero();
    Eigen::MatrixXd y = d2.forward(d1.forward(x));
    const Eigen::MatrixXd d_x = d1.backward(d2.backward(2.0 * y));
    auto targets = param_targets(params);
    Eigen::MatrixXd d_x_copy = d_x;
    targets.push_back({&x, &d_x_copy});
    results.push_back(check("dense_gelu", probe_targets(loss, targets, 140, rng), 140));
  }

  // LayerNorm.
  {
    Rng rng = root.substream("layernorm");
    LayerNorm ln("gc.ln", 11);
    Dense head("gc.lnhead", 11, 3, false);
    head.init(rng);
    Eigen::MatrixXd x = random_matrix(rng, 6, 11, 1.3);
    const auto loss = [&] { return head.apply(ln.apply(x)).squaredNorm(); };
    std::vector<ParamRef> params;
    ln.collect(params);
    head.collect(params);
    for (auto& p : params) p.grad->setZero();
    const Eigen::MatrixXd y = head.forward(ln.forward(x));
    Eigen::MatrixXd d_x = ln.backward(head.backward(2.0 * y));
    auto targets = param_targets(params);
    targets.push_back({&x, &d_x});
    results.push_back(check("layernorm", probe_targets(loss, targets, 120, rng), 120));
  }

  // RoPE attention block (attention + feed-forward + norms + residuals).
  {
    Rng rng = root.substream("attention");
    TransformerBlock block("gc.block", 16, 2, 10000.0);
    block.init(rng);
    Eigen::MatrixXd x = random_matrix(rng, 7, 16, 0.8);
    const auto loss = [&] { return block.apply(x).squaredNorm(); };
    std::vector<ParamRef> params;
    block.collect(params);
    for (auto& p : params) p.grad->setZero();
    const Eigen::MatrixXd y = block.forward(x);
    Eigen::MatrixXd d_x = block.backward(2.0 * y);
    auto targets = param_targets(params);
    targets.push_back({&x, &d_x});
    results.push_back(check("rope_attention", probe_targets(loss, targets, 160, rng), 160));
  }

  // Robust penalty, probed away from the quadratic/linear switch.
  {
    Rng rng = root.substream("huber");
    const double delta = 0.05;
    double worst = 0.0;
    int done = 0;
    while (done < 120) {
      Eigen::MatrixXd r = random_matrix(rng, 5, 1, 0.08);
      const double n = r.norm();
      if (std::abs(n - delta) < 0.1 * delta) continue;
      const Eigen::VectorXd g = robust_penalty_grad(r.col(0), delta);
      Eigen::MatrixXd gm = g;
      const auto loss = [&] { return robust_penalty(r.col(0), delta); };
      worst = std::max(worst, probe_targets(loss, {{&r, &gm}}, 3, rng));
      done += 3;
    }
    results.push_back(check("huber", worst, done));
  }

  // Kinematic chain: random linear functionals of joints and chain rotations.
  {
    Rng rng = root.substream("fk");
    Pose pose;
    pose.body_pose = random_matrix(rng, kNumBodyJoints, 3, 0.4);
    pose.global_orient = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.4;
    pose.root_transl = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    BodyShape shape;
    for (int i = 0; i < kShapeDims; ++i) shape.beta(i) = rng.uniform(-1.0, 1.0);
    const Skeleton& skel = Skeleton::standard();
    std::array<Eigen::Vector3d, kNumJoints> cj;
    std::array<Eigen::Matrix3d, kNumJoints> cr;
    for (int j = 0; j < kNumJoints; ++j) {
      cj[j] = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      cr[j] = random_matrix(rng, 3, 3, 1.0);
    }
    const auto loss = [&] {
      const FkResult fk = forward_kinematics_full(pose, shape, skel);
      double sum = 0.0;
      for (int j = 0; j < kNumJoints; ++j) {
        sum += cj[j].dot(fk.joints[j]) + (cr[j].array() * fk.chain_rot[j].array()).sum();
      }
      return sum;
    };
    const FkResult fk = forward_kinematics_full(pose, shape, skel);
    const FkGrads grads = fk_backward(pose, shape, skel, fk, cj, &cr);
    Eigen::MatrixXd bp = pose.body_pose, g_bp = grads.d_body_pose;
    Eigen::MatrixXd go = pose.global_orient, g_go = grads.d_global_orient;
    Eigen::MatrixXd rt = pose.root_transl, g_rt = grads.d_root_transl;
    Eigen::MatrixXd be = shape.beta, g_be = grads.d_beta;
    const auto sync_loss = [&] {
      pose.body_pose = bp;
      pose.global_orient = go;
      pose.root_transl = rt;
      shape.beta = be;
      return loss();
    };
    results.push_back(check(
        "forward_kinematics",
        probe_targets(sync_loss, {{&bp, &g_bp}, {&go, &g_go}, {&rt, &g_rt}, {&be, &g_be}}, 140,
                      rng),
        140));
  }

  // Skinning on top of the chain.
  {
    Rng rng = root.substream("lbs");
    const Skeleton& skel = Skeleton::standard();
    const ProxyMesh mesh = ProxyMesh::generate(skel, 20, 0xbeef);
    Pose pose;
    pose.body_pose = random_matrix(rng, kNumBodyJoints, 3, 0.4);
    pose.global_orient = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.4;
    pose.root_transl = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    BodyShape shape;
    for (int i = 0; i < kShapeDims; ++i) shape.beta(i) = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd weights_v = random_matrix(rng, 20, 3, 1.0);
    Eigen::MatrixXd bp = pose.body_pose;
    Eigen::MatrixXd go = pose.global_orient;
    Eigen::MatrixXd rt = pose.root_transl;
    Eigen::MatrixXd be = shape.beta;
    const auto loss = [&] {
      pose.body_pose = bp;
      pose.global_orient = go;
      pose.root_transl = rt;
      shape.beta = be;
      return (lbs_vertices(pose, shape, mesh, skel).array() * weights_v.array()).sum();
    };
    const FkResult fk = forward_kinematics_full(pose, shape, skel);
    std::array<Eigen::Vector3d, kNumJoints> dj;
    dj.fill(Eigen::Vector3d::Zero());
    std::array<Eigen::Matrix3d, kNumJoints> dc;
    dc.fill(Eigen::Matrix3d::Zero());
    lbs_backward(mesh, skel, fk, weights_v, dj, dc);
    const FkGrads grads = fk_backward(pose, shape, skel, fk, dj, &dc);
    Eigen::MatrixXd g_bp = grads.d_body_pose, g_go = grads.d_global_orient,
                    g_rt = grads.d_root_transl, g_be = grads.d_beta;
    results.push_back(check(
        "linear_blend_skinning",
        probe_targets(loss, {{&bp, &g_bp}, {&go, &g_go}, {&rt, &g_rt}, {&be, &g_be}}, 120, rng),
        120));
  }

  // Full completion objective w.r.t. the latent (projection, joint-bone
  // consistency, vertices, world rollout, pooled shape).
  {
    Rng rng = root.substream("objective");
    ObjectiveFixture fx(rng, 5);
    CompositeLatent z = build_latent(fx.gt, *fx.ctx.part, *fx.ctx.skel, kDefaultGravity, fx.fps);
    z.data += random_matrix(rng, z.data.rows(), z.data.cols(), 0.05);
    const Stage2Objective obj = stage2_objective(z, fx.gt, fx.frame, fx.tau0, fx.fps, fx.ctx,
                                                 fx.visibility, fx.weights, 0.07, true);
    Eigen::MatrixXd grad = obj.d_latent;
    const auto loss = [&] {
      return stage2_objective(z, fx.gt, fx.frame, fx.tau0, fx.fps, fx.ctx, fx.visibility,
                              fx.weights, 0.07, false)
          .report.total;
    };
    results.push_back(
        check("completion_objective", probe_targets(loss, {{&z.data, &grad}}, 160, rng), 160));
  }

  // One-step denoised estimate: objective as a function of the velocity.
  {
    Rng rng = root.substream("denoised");
    ObjectiveFixture fx(rng, 4);
    const LatentLayout& layout = LatentLayout::standard();
    const KnownMask mask = KnownMask::standard(layout);
    CompositeLatent z = build_latent(fx.gt, *fx.ctx.part, *fx.ctx.skel, kDefaultGravity, fx.fps);
    const Eigen::MatrixXd eps = sample_source_noise(rng, z.frames(), NoiseSpec{}, layout);
    const double t = 0.35;
    const CompositeLatent z_t = masked_path(z, eps, mask, t);
    Eigen::MatrixXd v = random_matrix(rng, z.frames(), layout.frame_width(), 0.3);
    const auto make_zhat = [&] {
      CompositeLatent zh;
      zh.data = z_t.data;
      for (int c = 0; c < mask.mask.size(); ++c) {
        if (mask.mask(c) != 0.0) zh.data.col(c) += (1.0 - t) * v.col(c);
      }
      return zh;
    };
    const auto loss = [&] {
      return stage2_objective(make_zhat(), fx.gt, fx.frame, fx.tau0, fx.fps, fx.ctx, fx.visibility,
                              fx.weights, 0.05, false)
          .report.total;
    };
    const Stage2Objective obj = stage2_objective(make_zhat(), fx.gt, fx.frame, fx.tau0, fx.fps,
                                                 fx.ctx, fx.visibility, fx.weights, 0.05, true);
    Eigen::MatrixXd d_v = Eigen::MatrixXd::Zero(v.rows(), v.cols());
    for (int c = 0; c < mask.mask.size(); ++c) {
      if (mask.mask(c) != 0.0) d_v.col(c) = (1.0 - t) * obj.d_latent.col(c);
    }
    results.push_back(
        check("one_step_estimate", probe_targets(loss, {{&v, &d_v}}, 120, rng), 120));
  }

  // Velocity network through the full training-step loss.
  {
    Rng rng = root.substream("velocity_net");
    ObjectiveFixture fx(rng, 4);
    const LatentLayout& layout = LatentLayout::standard();
    const KnownMask mask = KnownMask::standard(layout);
    ModelDims dims;
    dims.d_model = 16;
    dims.n_blocks = 1;
    dims.ff_mult = 2;
    VelocityNet net(dims);
    net.init(rng, true);
    CompositeLatent z = build_latent(fx.gt, *fx.ctx.part, *fx.ctx.skel, kDefaultGravity, fx.fps);
    const Eigen::MatrixXd eps = sample_source_noise(rng, z.frames(), NoiseSpec{}, layout);
    const double t = 0.6;
    const CompositeLatent z_t = masked_path(z, eps, mask, t);
    const ConditionSet cond = random_condition(rng, z.frames(), dims.kp_width);
    const LossWeights w = fx.weights;

    const auto loss = [&] {
      const Eigen::MatrixXd v = net.evaluate(z_t.data, t, cond);
      const double fm = fm_loss(v, z, eps, mask);
      CompositeLatent zh;
      zh.data = z_t.data;
      for (int c = 0; c < mask.mask.size(); ++c) {
        if (mask.mask(c) != 0.0) zh.data.col(c) += (1.0 - t) * v.col(c);
      }
      const Stage2Objective obj = stage2_objective(zh, fx.gt, fx.frame, fx.tau0, fx.fps, fx.ctx,
                                                   fx.visibility, w, 0.05, false);
      return w.w_fm * fm + obj.report.total;
    };

    auto params = net.params();
    for (auto& p : params) p.grad->setZero();
    const Eigen::MatrixXd v = net.forward(z_t.data, t, cond);
    Eigen::MatrixXd d_v = w.w_fm * fm_loss_grad(v, z, eps, mask);
    CompositeLatent zh;
    zh.data = z_t.data;
    for (int c = 0; c < mask.mask.size(); ++c) {
      if (mask.mask(c) != 0.0) zh.data.col(c) += (1.0 - t) * v.col(c);
    }
    const Stage2Objective obj = stage2_objective(zh, fx.gt, fx.frame, fx.tau0, fx.fps, fx.ctx,
                                                 fx.visibility, w, 0.05, true);
    for (int c = 0; c < mask.mask.size(); ++c) {
      if (mask.mask(c) != 0.0) d_v.col(c) += (1.0 - t) * obj.d_latent.col(c);
    }
    net.backward(d_v);
    results.push_back(
        check("velocity_net_step", probe_targets(loss, param_targets(params), 150, rng), 150));
  }

  // Anchor network through the stage-1 objective.
  {
    Rng rng = root.substream("anchor_net");
    ObjectiveFixture fx(rng, 4);
    ModelDims dims;
    dims.d_model = 16;
    dims.n_blocks = 1;
    dims.ff_mult = 2;
    AnchorNet net(dims);
    net.init(rng, true);
    const ConditionSet cond = random_condition(rng, 4, dims.kp_width);
    const auto loss = [&] {
      const AnchorPred pred = net.apply(cond);
      return stage1_objective(anchor_from_pred(pred), fx.gt, fx.ctx, fx.weights, false)
          .report.total;
    };
    auto params = net.params();
    for (auto& p : params) p.grad->setZero();
    const AnchorPred pred = net.forward(cond);
    const Stage1Objective obj =
        stage1_objective(anchor_from_pred(pred), fx.gt, fx.ctx, fx.weights, true);
    net.backward(obj.d_theta, obj.d_beta, obj.d_gamma, obj.d_tau);
    results.push_back(
        check("anchor_net_step", probe_targets(loss, param_targets(params), 150, rng), 150));
  }

  // Baseline head through the same completion objective.
  {
    Rng rng = root.substream("baseline_net");
    ObjectiveFixture fx(rng, 4);
    const LatentLayout& layout = LatentLayout::standard();
    const KnownMask mask = KnownMask::standard(layout);
    const std::vector<int> gen_idx = generated_coordinates(mask);
    ModelDims dims;
    dims.d_model = 16;
    dims.n_blocks = 1;
    dims.ff_mult = 2;
    BaselineNet net(dims, static_cast<int>(gen_idx.size()));
    net.init(rng, true);
    const ConditionSet cond = random_condition(rng, 4, dims.kp_width);
    CompositeLatent anchor = build_latent(fx.gt, *fx.ctx.part, *fx.ctx.skel, kDefaultGravity,
                                          fx.fps);
    const auto loss = [&] {
      const Eigen::MatrixXd out = net.apply(cond);
      CompositeLatent zh = anchor;
      for (size_t k = 0; k < gen_idx.size(); ++k) {
        zh.data.col(gen_idx[k]) = out.col(static_cast<int>(k));
      }
      return stage2_objective(zh, fx.gt, fx.frame, fx.tau0, fx.fps, fx.ctx, fx.visibility,
                              fx.weights, 0.05, false)
          .report.total;
    };
    auto params = net.params();
    for (auto& p : params) p.grad->setZero();
    const Eigen::MatrixXd out = net.forward(cond);
    CompositeLatent zh = anchor;
    for (size_t k = 0; k < gen_idx.size(); ++k) {
      zh.data.col(gen_idx[k]) = out.col(static_cast<int>(k));
    }
    const Stage2Objective obj = stage2_objective(zh, fx.gt, fx.frame, fx.tau0, fx.fps, fx.ctx,
                                                 fx.visibility, fx.weights, 0.05, true);
    Eigen::MatrixXd d_out(out.rows(), out.cols());
    for (size_t k = 0; k < gen_idx.size(); ++k) {
      d_out.col(static_cast<int>(k)) = obj.d_latent.col(gen_idx[k]);
    }
    net.backward(d_out);
    results.push_back(
        check("baseline_net_step", probe_targets(loss, param_targets(params), 120, rng), 120));
  }

  return results;
}

}  // namespace anchorflow
