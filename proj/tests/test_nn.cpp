// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "anchorflow/camera.hpp"
#include "anchorflow/checkpoint.hpp"
#include "anchorflow/errors.hpp"
#include "anchorflow/gradcheck.hpp"
#include "anchorflow/nn.hpp"

using namespace anchorflow;

TEST_CASE("rope_rotate basics") {
  Rng rng(91);
  Eigen::VectorXd v(8);
  for (int i = 0; i < 8; ++i) v(i) = rng.normal();

  CHECK((rope_rotate(v, 0.0, 10000.0) - v).cwiseAbs().maxCoeff() == 0.0);
  for (double pos : {1.0, 7.0, 123.0}) {
    CHECK(std::abs(rope_rotate(v, pos, 10000.0).norm() - v.norm()) < 1e-12);
  }
  Eigen::VectorXd odd(7);
  odd.setZero();
  CHECK_THROWS_AS(rope_rotate(odd, 1.0, 10000.0), std::invalid_argument);
}

TEST_CASE("rope dot products depend only on the relative position") {
  Rng rng(92);
  Eigen::VectorXd q(16), k(16);
  for (int i = 0; i < 16; ++i) {
    q(i) = rng.normal();
    k(i) = rng.normal();
  }
  const double a = rope_rotate(q, 3.0, 10000.0).dot(rope_rotate(k, 1.0, 10000.0));
  const double b = rope_rotate(q, 7.0, 10000.0).dot(rope_rotate(k, 5.0, 10000.0));
  CHECK(std::abs(a - b) < 1e-9);
  const double c = rope_rotate(q, 40.0, 10000.0).dot(rope_rotate(k, 38.0, 10000.0));
  CHECK(std::abs(a - c) < 1e-9);
}

TEST_CASE("zero-weight networks output zero") {
  Dense d("t.zero", 5, 3, false);
  d.init_zero();
  Eigen::MatrixXd x(2, 5);
  x.setRandom();
  CHECK(d.apply(x).cwiseAbs().maxCoeff() == 0.0);

  ModelDims dims;
  dims.d_model = 16;
  dims.n_blocks = 1;
  dims.ff_mult = 2;
  VelocityNet net(dims);
  Rng rng(93);
  net.init(rng);
  for (auto& p : net.params()) p.value->setZero();
  const ConditionSet cond = ConditionSet::zeros(3, dims.kp_width);
  Eigen::MatrixXd z(3, kFrameWidth);
  z.setRandom();
  CHECK(net.evaluate(z, 0.5, cond).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("network gradients match finite differences on a 2-block dim-32 model") {
  ModelDims dims;
  dims.d_model = 32;
  dims.n_blocks = 2;
  dims.ff_mult = 2;
  VelocityNet net(dims);
  Rng rng(94);
  net.init(rng, true);
  const ConditionSet cond = [&] {
    ConditionSet c = ConditionSet::zeros(4, dims.kp_width);
    for (auto* m : {&c.bbox, &c.kp_rays, &c.img_feat, &c.rel_cam, &c.torso_pose}) m->setRandom();
    return c;
  }();
  Eigen::MatrixXd z(4, kFrameWidth);
  z.setRandom();
  const double t = 0.4;

  const auto loss = [&] { return net.evaluate(z, t, cond).squaredNorm(); };
  auto params = net.params();
  for (auto& p : params) p.grad->setZero();
  const Eigen::MatrixXd y = net.forward(z, t, cond);
  net.backward(2.0 * y);

  const double h = 1e-5;
  Rng probe_rng(95);
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    const int mi = probe_rng.uniform_int(0, static_cast<int>(params.size()) - 1);
    Eigen::MatrixXd& m = *params[mi].value;
    const int r = probe_rng.uniform_int(0, static_cast<int>(m.rows()) - 1);
    const int c = probe_rng.uniform_int(0, static_cast<int>(m.cols()) - 1);
    const double orig = m(r, c);
    m(r, c) = orig + h;
    const double lp = loss();
    m(r, c) = orig - h;
    const double lm = loss();
    m(r, c) = orig;
    const double fd = (lp - lm) / (2 * h);
    const double an = (*params[mi].grad)(r, c);
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("masked upstream gradients route correctly through a per-frame network") {
  // With a purely per-frame network, excluding a frame from the loss zeroes
  // that frame's input gradient; attention would mix frames.
  Dense d1("t.m1", 6, 8, true);
  Dense d2("t.m2", 8, 6, false);
  Rng rng(96);
  d1.init(rng);
  d2.init(rng);
  Eigen::MatrixXd x(5, 6);
  x.setRandom();
  const int excluded = 2;

  const Eigen::MatrixXd y = d2.forward(d1.forward(x));
  Eigen::MatrixXd d_y = 2.0 * y;
  d_y.row(excluded).setZero();
  const Eigen::MatrixXd d_x = d1.backward(d2.backward(d_y));
  CHECK(d_x.row(excluded).cwiseAbs().maxCoeff() == 0.0);

  // And the masked loss still matches finite differences on other frames.
  const auto loss = [&] {
    Eigen::MatrixXd out = d2.apply(d1.apply(x));
    out.row(excluded).setZero();
    return out.squaredNorm();
  };
  const double h = 1e-5;
  for (int i = 0; i < 30; ++i) {
    const int r = rng.uniform_int(0, 4);
    const int c = rng.uniform_int(0, 5);
    const double orig = x(r, c);
    x(r, c) = orig + h;
    const double lp = loss();
    x(r, c) = orig - h;
    const double lm = loss();
    x(r, c) = orig;
    const double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - d_x(r, c)) < 1e-4 * std::max({std::abs(fd), std::abs(d_x(r, c)), 1.0}));
  }
}

TEST_CASE("condition_dropout boundaries and empirical rate") {
  ConditionSet c = ConditionSet::zeros(3, 22 * ray_embedding_dim());
  c.kp_rays.setOnes();
  c.bbox.setOnes();

  Rng rng(97);
  for (int i = 0; i < 20; ++i) {
    const ConditionSet kept = condition_dropout(c, 0.0, rng);
    CHECK((kept.kp_rays - c.kp_rays).cwiseAbs().maxCoeff() == 0.0);
    const ConditionSet dropped = condition_dropout(c, 1.0, rng);
    CHECK(dropped.kp_rays.cwiseAbs().maxCoeff() == 0.0);
    CHECK((dropped.bbox - c.bbox).cwiseAbs().maxCoeff() == 0.0);
  }

  int drops = 0;
  const int trials = 10000;
  Rng mc(98);
  for (int i = 0; i < trials; ++i) {
    if (condition_dropout(c, 0.1, mc).kp_rays.cwiseAbs().maxCoeff() == 0.0) ++drops;
  }
  const double rate = static_cast<double>(drops) / trials;
  CHECK(rate > 0.08);
  CHECK(rate < 0.12);
  CHECK_THROWS_AS(condition_dropout(c, 1.5, rng), std::invalid_argument);
}

TEST_CASE("adam basics and a reference-trace oracle") {
  // Zero gradients leave parameters untouched.
  Eigen::MatrixXd w(2, 2), g(2, 2);
  w << 1, 2, 3, 4;
  g.setZero();
  Adam adam({{"w", &w, &g}}, AdamConfig{});
  const Eigen::MatrixXd before = w;
  adam.step();
  CHECK((w - before).cwiseAbs().maxCoeff() == 0.0);

  // One step on f(x) = x^2 moves downhill.
  Eigen::MatrixXd x(1, 1), gx(1, 1);
  x(0, 0) = 1.0;
  gx(0, 0) = 2.0 * x(0, 0);
  Adam opt({{"x", &x, &gx}}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  opt.step();
  CHECK(x(0, 0) < 1.0);

  // 200 steps on a 10-d quadratic, against a plain re-implementation.
  Eigen::MatrixXd p(10, 1), gp(10, 1);
  for (int i = 0; i < 10; ++i) p(i, 0) = 0.5 + 0.1 * i;
  Eigen::VectorXd ref = p.col(0);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(10), v = Eigen::VectorXd::Zero(10);
  Adam opt10({{"p", &p, &gp}}, AdamConfig{0.05, 0.9, 0.999, 1e-8});
  for (int step = 1; step <= 200; ++step) {
    gp.col(0) = 2.0 * p.col(0);
    opt10.step();
    gp.setZero();

    const Eigen::VectorXd grad = 2.0 * ref;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(0.9, step);
    const double bc2 = 1.0 - std::pow(0.999, step);
    for (int i = 0; i < 10; ++i) {
      ref(i) -= 0.05 * (m(i) / bc1) / (std::sqrt(v(i) / bc2) + 1e-8);
    }
    CHECK((p.col(0) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(p.col(0).norm() < 1e-3);
}

TEST_CASE("velocity output on anchored coordinates is ignored end to end") {
  ModelDims dims;
  dims.d_model = 16;
  dims.n_blocks = 1;
  dims.ff_mult = 2;
  VelocityNet net(dims);
  Rng rng(99);
  net.init(rng, true);
  const KnownMask mask = KnownMask::standard(LatentLayout::standard());

  class Zeroed : public VelocityField {
   public:
    Zeroed(const VelocityNet& net, const KnownMask& mask) : net_(net), mask_(mask) {}
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& z, double t,
                             const ConditionSet& c) const override {
      Eigen::MatrixXd v = net_.evaluate(z, t, c);
      for (int col = 0; col < mask_.mask.size(); ++col) {
        if (mask_.mask(col) == 0.0) v.col(col).setZero();
      }
      return v;
    }

   private:
    const VelocityNet& net_;
    const KnownMask& mask_;
  };

  CompositeLatent anchor;
  anchor.data = Eigen::MatrixXd::Random(5, kFrameWidth);
  ConditionSet cond = ConditionSet::zeros(5, dims.kp_width);
  cond.bbox.setRandom();
  Rng r1(505), r2(505);
  const CompositeLatent a =
      sample(net, anchor, mask, cond, SampleOptions{7, 1.5}, NoiseSpec{}, r1);
  const Zeroed wrapped(net, mask);
  const CompositeLatent b =
      sample(wrapped, anchor, mask, cond, SampleOptions{7, 1.5}, NoiseSpec{}, r2);
  CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round trip and corruption detection") {
  ModelDims dims;
  dims.d_model = 16;
  dims.n_blocks = 1;
  dims.ff_mult = 2;
  AnchorNet net(dims);
  Rng rng(100);
  net.init(rng, true);

  const std::string path = std::filesystem::temp_directory_path() / "af_ckpt_test.fmck";
  save_checkpoint(path, "anchor", dims, net.params(), {{"seed", 100}});

  const nlohmann::json header = load_checkpoint_header(path);
  CHECK(header.at("kind") == "anchor");
  AnchorNet loaded(dims_from_header(header));
  load_checkpoint_params(path, loaded.params());

  auto orig = net.params();
  auto back = loaded.params();
  for (size_t i = 0; i < orig.size(); ++i) {
    for (int r = 0; r < orig[i].value->rows(); ++r) {
      for (int c = 0; c < orig[i].value->cols(); ++c) {
        CHECK(static_cast<float>((*orig[i].value)(r, c)) ==
              static_cast<float>((*back[i].value)(r, c)));
        CHECK((*back[i].value)(r, c) ==
              static_cast<double>(static_cast<float>((*orig[i].value)(r, c))));
      }
    }
  }

  // Flip one payload byte; the checksum must catch it.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(0, std::ios::end);
    const auto size = f.tellg();
    f.seekp(static_cast<std::streamoff>(size) - 8);
    char b;
    f.seekg(static_cast<std::streamoff>(size) - 8);
    f.read(&b, 1);
    b ^= 0x20;
    f.seekp(static_cast<std::streamoff>(size) - 8);
    f.write(&b, 1);
  }
  AnchorNet corrupted(dims);
  CHECK_THROWS_AS(load_checkpoint_params(path, corrupted.params()), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("gradient checker catches a deliberately corrupted backward pass") {
  nn_testing::corrupt_dense_backward = true;
  const auto results = run_gradient_checks(2024);
  nn_testing::corrupt_dense_backward = false;
  bool any_failed = false;
  for (const auto& r : results) any_failed = any_failed || !r.pass;
  CHECK(any_failed);
}
