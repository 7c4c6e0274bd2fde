// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

#include "anchorflow/flowmatch.hpp"
#include "anchorflow/rng.hpp"
#include "anchorflow/types.hpp"

namespace anchorflow {

// Named view of one parameter matrix and its gradient accumulator. The order
// in which a network collects these is its checkpoint declaration order.
struct ParamRef {
  std::string name;
  Eigen::MatrixXd* value;
  Eigen::MatrixXd* grad;
};

namespace nn_testing {
// Negative-control hook: deliberately corrupts Dense::backward so the
// gradient checker can prove it catches broken gradients.
extern bool corrupt_dense_backward;
}  // namespace nn_testing

double gelu(double x);
double gelu_grad(double x);

// Rotates consecutive pairs (x_{2i}, x_{2i+1}) by position / base^{2i/dim}.
Eigen::VectorXd rope_rotate(const Eigen::VectorXd& v, double position, double base);

class Dense {
 public:
  Dense() = default;
  Dense(std::string name, int in, int out, bool use_gelu);

  void init(Rng& rng);
  void init_zero();
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& d_out);
  void collect(std::vector<ParamRef>& out);

  int in_dim() const { return static_cast<int>(w_.cols()); }
  int out_dim() const { return static_cast<int>(w_.rows()); }

 private:
  std::string name_;
  bool gelu_ = false;
  Eigen::MatrixXd w_, gw_;  // out x in
  Eigen::MatrixXd b_, gb_;  // 1 x out
  Eigen::MatrixXd x_, pre_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(std::string name, int dim);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& d_out);
  void collect(std::vector<ParamRef>& out);

 private:
  std::string name_;
  Eigen::MatrixXd gamma_, ggamma_;
  Eigen::MatrixXd beta_, gbeta_;
  Eigen::MatrixXd xhat_;
  Eigen::VectorXd inv_std_;
};

// Single-head full attention over frames with rotary position embeddings on
// queries and keys.
class RopeAttention {
 public:
  RopeAttention() = default;
  RopeAttention(std::string name, int dim, double base);

  void init(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& d_out);
  void collect(std::vector<ParamRef>& out);

 private:
  int dim_ = 0;
  double base_ = 10000.0;
  Dense wq_, wk_, wv_, wo_;
  Eigen::MatrixXd qr_, kr_, v_, attn_;
};

// Pre-norm residual block: attention then a GELU feed-forward.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::string name, int dim, int ff_mult, double rope_base);

  void init(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& d_out);
  void collect(std::vector<ParamRef>& out);

 private:
  LayerNorm ln1_, ln2_;
  RopeAttention attn_;
  Dense ff1_, ff2_;
};

struct ModelDims {
  int d_model = 64;
  int n_blocks = 2;
  int ff_mult = 4;
  int t_freqs = 8;
  double rope_base = 10000.0;
  int kp_width = kNumJoints * 28;  // 22 * ray_embedding_dim(4)
};

// Per-modality projections summed into per-frame tokens.
class ConditionEncoder {
 public:
  ConditionEncoder() = default;
  ConditionEncoder(std::string name, const ModelDims& dims, bool use_torso);

  void init(Rng& rng);
  Eigen::MatrixXd forward(const ConditionSet& c);
  Eigen::MatrixXd apply(const ConditionSet& c) const;
  void backward(const Eigen::MatrixXd& d_tokens);
  void collect(std::vector<ParamRef>& out);

 private:
  bool use_torso_ = false;
  Dense bbox_, kp_, img_, cam_, torso_;
};

struct AnchorPred {
  Eigen::MatrixXd theta_torso;  // T x 24
  Vec10 beta;                   // pooled over frames
  Eigen::MatrixXd gamma_c;      // T x 3
  Eigen::MatrixXd tau_c;        // T x 3
};

// Deterministic regressor for the low-uncertainty subset: torso pose, shape,
// camera-space trajectory.
class AnchorNet {
 public:
  explicit AnchorNet(const ModelDims& dims);

  void init(Rng& rng, bool random_heads = false);
  AnchorPred forward(const ConditionSet& cond);
  AnchorPred apply(const ConditionSet& cond) const;
  void backward(const Eigen::MatrixXd& d_theta, const Vec10& d_beta, const Eigen::MatrixXd& d_gamma,
                const Eigen::MatrixXd& d_tau);
  std::vector<ParamRef> params();
  const ModelDims& dims() const { return dims_; }

 private:
  ModelDims dims_;
  ConditionEncoder enc_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_ln_;
  Dense head_theta_, head_beta_, head_gamma_, head_tau_;
  int cached_frames_ = 0;
};

// Velocity field over the masked latent path, conditioned on observations,
// the torso-pose condition and a sinusoidal embedding of t.
class VelocityNet : public VelocityField {
 public:
  explicit VelocityNet(const ModelDims& dims);

  void init(Rng& rng, bool random_head = false);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& z_t, double t, const ConditionSet& cond);
  // Returns the input gradient w.r.t. z_t.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& d_v);
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& z_t, double t,
                           const ConditionSet& cond) const override;
  std::vector<ParamRef> params();
  const ModelDims& dims() const { return dims_; }

 private:
  Eigen::MatrixXd assemble_input(const Eigen::MatrixXd& z_t, double t,
                                 const Eigen::MatrixXd& cond_tokens) const;
  ModelDims dims_;
  ConditionEncoder enc_;
  Dense in_proj_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_ln_;
  Dense head_;
};

// Same trunk capacity as VelocityNet but regresses the generated coordinates
// directly from the conditions; the comparison arm for occlusion studies.
class BaselineNet {
 public:
  explicit BaselineNet(const ModelDims& dims, int out_width);

  void init(Rng& rng, bool random_head = false);
  Eigen::MatrixXd forward(const ConditionSet& cond);
  Eigen::MatrixXd apply(const ConditionSet& cond) const;
  void backward(const Eigen::MatrixXd& d_out);
  std::vector<ParamRef> params();
  const ModelDims& dims() const { return dims_; }
  int out_width() const { return out_width_; }

 private:
  ModelDims dims_;
  int out_width_ = 0;
  ConditionEncoder enc_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_ln_;
  Dense head_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter set.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, const AdamConfig& cfg);

  void step();
  void zero_grad();
  int64_t steps_taken() const { return t_; }

 private:
  std::vector<ParamRef> params_;
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

// With probability p_drop the condition collapses to its anchor-only form;
// the draw is per sequence.
ConditionSet condition_dropout(const ConditionSet& c, double p_drop, Rng& rng);

}  // namespace anchorflow
