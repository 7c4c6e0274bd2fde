// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#include "anchorflow/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "anchorflow/camera.hpp"

namespace anchorflow {

namespace nn_testing {
bool corrupt_dense_backward = false;
}  // namespace nn_testing

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

Eigen::VectorXd rope_rotate(const Eigen::VectorXd& v, double position, double base) {
  const int dim = static_cast<int>(v.size());
  if (dim % 2 != 0) throw std::invalid_argument("rope_rotate: dimension must be even");
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double angle = position / std::pow(base, 2.0 * i / dim);
    const double c = std::cos(angle), s = std::sin(angle);
    out(2 * i) = c * v(2 * i) - s * v(2 * i + 1);
    out(2 * i + 1) = s * v(2 * i) + c * v(2 * i + 1);
  }
  return out;
}

namespace {

// Row t rotated by its frame index; invert = transpose rotation.
Eigen::MatrixXd rope_rows(const Eigen::MatrixXd& m, double base, bool invert) {
  const int dim = static_cast<int>(m.cols());
  Eigen::MatrixXd out(m.rows(), dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = 1.0 / std::pow(base, 2.0 * i / dim);
    for (int t = 0; t < m.rows(); ++t) {
      const double angle = t * freq;
      const double c = std::cos(angle);
      const double s = invert ? -std::sin(angle) : std::sin(angle);
      out(t, 2 * i) = c * m(t, 2 * i) - s * m(t, 2 * i + 1);
      out(t, 2 * i + 1) = s * m(t, 2 * i) + c * m(t, 2 * i + 1);
    }
  }
  return out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (int r = 0; r < s.rows(); ++r) {
    const Eigen::VectorXd e = (s.row(r).array() - s.row(r).maxCoeff()).exp();
    out.row(r) = e.transpose() / e.sum();
  }
  return out;
}

Eigen::MatrixXd softmax_backward_rows(const Eigen::MatrixXd& a, const Eigen::MatrixXd& d_a) {
  Eigen::MatrixXd out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r) {
    const double dot = a.row(r).dot(d_a.row(r));
    out.row(r) = a.row(r).array() * (d_a.row(r).array() - dot);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, int in, int out, bool use_gelu)
    : name_(std::move(name)), gelu_(use_gelu) {
  w_ = Eigen::MatrixXd::Zero(out, in);
  gw_ = Eigen::MatrixXd::Zero(out, in);
  b_ = Eigen::MatrixXd::Zero(1, out);
  gb_ = Eigen::MatrixXd::Zero(1, out);
}

void Dense::init(Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(w_.cols()));
  for (int r = 0; r < w_.rows(); ++r) {
    for (int c = 0; c < w_.cols(); ++c) w_(r, c) = scale * rng.normal();
  }
  b_.setZero();
}

void Dense::init_zero() {
  w_.setZero();
  b_.setZero();
}

Eigen::MatrixXd Dense::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = x * w_.transpose();
  z.rowwise() += b_.row(0);
  if (!gelu_) return z;
  return z.unaryExpr([](double v) { return gelu(v); });
}

Eigen::MatrixXd Dense::forward(const Eigen::MatrixXd& x) {
  x_ = x;
  Eigen::MatrixXd z = x * w_.transpose();
  z.rowwise() += b_.row(0);
  if (!gelu_) return z;
  pre_ = z;
  return z.unaryExpr([](double v) { return gelu(v); });
}

Eigen::MatrixXd Dense::backward(const Eigen::MatrixXd& d_out) {
  Eigen::MatrixXd d_z = d_out;
  if (gelu_) {
    d_z.array() *= pre_.unaryExpr([](double v) { return gelu_grad(v); }).array();
  }
  gw_ += d_z.transpose() * x_;
  gb_.row(0) += d_z.colwise().sum();
  if (nn_testing::corrupt_dense_backward) gw_(0, 0) += 0.5;
  return d_z * w_;
}

void Dense::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".w", &w_, &gw_});
  out.push_back({name_ + ".b", &b_, &gb_});
}

// ---------------------------------------------------------------------------
// LayerNorm

namespace {
constexpr double kLnEps = 1e-5;
}

LayerNorm::LayerNorm(std::string name, int dim) : name_(std::move(name)) {
  gamma_ = Eigen::MatrixXd::Ones(1, dim);
  ggamma_ = Eigen::MatrixXd::Zero(1, dim);
  beta_ = Eigen::MatrixXd::Zero(1, dim);
  gbeta_ = Eigen::MatrixXd::Zero(1, dim);
}

Eigen::MatrixXd LayerNorm::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    out.row(r) = ((x.row(r).array() - mu) * inv) * gamma_.row(0).array() + beta_.row(0).array();
  }
  return out;
}

Eigen::MatrixXd LayerNorm::forward(const Eigen::MatrixXd& x) {
  xhat_.resize(x.rows(), x.cols());
  inv_std_.resize(x.rows());
  for (int r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std_(r) = 1.0 / std::sqrt(var + kLnEps);
    xhat_.row(r) = (x.row(r).array() - mu) * inv_std_(r);
  }
  Eigen::MatrixXd out = xhat_;
  out.array().rowwise() *= gamma_.row(0).array();
  out.rowwise() += beta_.row(0);
  return out;
}

Eigen::MatrixXd LayerNorm::backward(const Eigen::MatrixXd& d_out) {
  ggamma_.row(0) += (d_out.array() * xhat_.array()).colwise().sum().matrix();
  gbeta_.row(0) += d_out.colwise().sum();
  Eigen::MatrixXd d_x(d_out.rows(), d_out.cols());
  for (int r = 0; r < d_out.rows(); ++r) {
    const Eigen::Array<double, 1, Eigen::Dynamic> dxhat =
        d_out.row(r).array() * gamma_.row(0).array();
    const Eigen::Array<double, 1, Eigen::Dynamic> xh = xhat_.row(r).array();
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = (dxhat * xh).mean();
    d_x.row(r) = (inv_std_(r) * (dxhat - mean_dxhat - xh * mean_dxhat_xhat)).matrix();
  }
  return d_x;
}

void LayerNorm::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".gamma", &gamma_, &ggamma_});
  out.push_back({name_ + ".beta", &beta_, &gbeta_});
}

// ---------------------------------------------------------------------------
// RopeAttention

RopeAttention::RopeAttention(std::string name, int dim, double base) : dim_(dim), base_(base) {
  if (dim % 2 != 0) throw std::invalid_argument("RopeAttention: dim must be even");
  wq_ = Dense(name + ".wq", dim, dim, false);
  wk_ = Dense(name + ".wk", dim, dim, false);
  wv_ = Dense(name + ".wv", dim, dim, false);
  wo_ = Dense(name + ".wo", dim, dim, false);
}

void RopeAttention::init(Rng& rng) {
  wq_.init(rng);
  wk_.init(rng);
  wv_.init(rng);
  wo_.init(rng);
}

Eigen::MatrixXd RopeAttention::apply(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd qr = rope_rows(wq_.apply(x), base_, false);
  const Eigen::MatrixXd kr = rope_rows(wk_.apply(x), base_, false);
  const Eigen::MatrixXd v = wv_.apply(x);
  const Eigen::MatrixXd a = softmax_rows(qr * kr.transpose() / std::sqrt(double(dim_)));
  return wo_.apply(a * v);
}

Eigen::MatrixXd RopeAttention::forward(const Eigen::MatrixXd& x) {
  qr_ = rope_rows(wq_.forward(x), base_, false);
  kr_ = rope_rows(wk_.forward(x), base_, false);
  v_ = wv_.forward(x);
  attn_ = softmax_rows(qr_ * kr_.transpose() / std::sqrt(double(dim_)));
  return wo_.forward(attn_ * v_);
}

Eigen::MatrixXd RopeAttention::backward(const Eigen::MatrixXd& d_out) {
  const Eigen::MatrixXd d_o = wo_.backward(d_out);
  const Eigen::MatrixXd d_attn = d_o * v_.transpose();
  const Eigen::MatrixXd d_v = attn_.transpose() * d_o;
  const Eigen::MatrixXd d_s = softmax_backward_rows(attn_, d_attn) / std::sqrt(double(dim_));
  const Eigen::MatrixXd d_q = rope_rows(d_s * kr_, base_, true);
  const Eigen::MatrixXd d_k = rope_rows(d_s.transpose() * qr_, base_, true);
  return wq_.backward(d_q) + wk_.backward(d_k) + wv_.backward(d_v);
}

void RopeAttention::collect(std::vector<ParamRef>& out) {
  wq_.collect(out);
  wk_.collect(out);
  wv_.collect(out);
  wo_.collect(out);
}

// ---------------------------------------------------------------------------
// TransformerBlock

TransformerBlock::TransformerBlock(std::string name, int dim, int ff_mult, double rope_base)
    : ln1_(name + ".ln1", dim),
      ln2_(name + ".ln2", dim),
      attn_(name + ".attn", dim, rope_base),
      ff1_(name + ".ff1", dim, dim * ff_mult, true),
      ff2_(name + ".ff2", dim * ff_mult, dim, false) {}

void TransformerBlock::init(Rng& rng) {
  attn_.init(rng);
  ff1_.init(rng);
  ff2_.init(rng);
}

Eigen::MatrixXd TransformerBlock::apply(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd h = x + attn_.apply(ln1_.apply(x));
  return h + ff2_.apply(ff1_.apply(ln2_.apply(h)));
}

Eigen::MatrixXd TransformerBlock::forward(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd h = x + attn_.forward(ln1_.forward(x));
  return h + ff2_.forward(ff1_.forward(ln2_.forward(h)));
}

Eigen::MatrixXd TransformerBlock::backward(const Eigen::MatrixXd& d_out) {
  const Eigen::MatrixXd d_h = d_out + ln2_.backward(ff1_.backward(ff2_.backward(d_out)));
  return d_h + ln1_.backward(attn_.backward(d_h));
}

void TransformerBlock::collect(std::vector<ParamRef>& out) {
  ln1_.collect(out);
  attn_.collect(out);
  ln2_.collect(out);
  ff1_.collect(out);
  ff2_.collect(out);
}

// ---------------------------------------------------------------------------
// ConditionEncoder

ConditionEncoder::ConditionEncoder(std::string name, const ModelDims& dims, bool use_torso)
    : use_torso_(use_torso) {
  bbox_ = Dense(name + ".bbox", kBboxDim, dims.d_model, false);
  kp_ = Dense(name + ".kp", dims.kp_width, dims.d_model, false);
  img_ = Dense(name + ".img", kImgFeatDim, dims.d_model, false);
  cam_ = Dense(name + ".cam", kRelCamDim, dims.d_model, false);
  if (use_torso_) torso_ = Dense(name + ".torso", kTorsoCondDim, dims.d_model, false);
}

void ConditionEncoder::init(Rng& rng) {
  bbox_.init(rng);
  kp_.init(rng);
  img_.init(rng);
  cam_.init(rng);
  if (use_torso_) torso_.init(rng);
}

Eigen::MatrixXd ConditionEncoder::apply(const ConditionSet& c) const {
  Eigen::MatrixXd tok = bbox_.apply(c.bbox) + kp_.apply(c.kp_rays) + img_.apply(c.img_feat) +
                        cam_.apply(c.rel_cam);
  if (use_torso_) tok += torso_.apply(c.torso_pose);
  return tok;
}

Eigen::MatrixXd ConditionEncoder::forward(const ConditionSet& c) {
  Eigen::MatrixXd tok = bbox_.forward(c.bbox) + kp_.forward(c.kp_rays) + img_.forward(c.img_feat) +
                        cam_.forward(c.rel_cam);
  if (use_torso_) tok += torso_.forward(c.torso_pose);
  return tok;
}

void ConditionEncoder::backward(const Eigen::MatrixXd& d_tokens) {
  bbox_.backward(d_tokens);
  kp_.backward(d_tokens);
  img_.backward(d_tokens);
  cam_.backward(d_tokens);
  if (use_torso_) torso_.backward(d_tokens);
}

void ConditionEncoder::collect(std::vector<ParamRef>& out) {
  bbox_.collect(out);
  kp_.collect(out);
  img_.collect(out);
  cam_.collect(out);
  if (use_torso_) torso_.collect(out);
}

// ---------------------------------------------------------------------------
// AnchorNet

AnchorNet::AnchorNet(const ModelDims& dims)
    : dims_(dims),
      enc_("anchor.enc", dims, false),
      final_ln_("anchor.final_ln", dims.d_model),
      head_theta_("anchor.head_theta", dims.d_model, 3 * kNumTorso, false),
      head_beta_("anchor.head_beta", dims.d_model, kShapeDims, false),
      head_gamma_("anchor.head_gamma", dims.d_model, 3, false),
      head_tau_("anchor.head_tau", dims.d_model, 3, false) {
  for (int b = 0; b < dims.n_blocks; ++b) {
    blocks_.emplace_back("anchor.block" + std::to_string(b), dims.d_model, dims.ff_mult,
                         dims.rope_base);
  }
}

void AnchorNet::init(Rng& rng, bool random_heads) {
  enc_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  if (random_heads) {
    head_theta_.init(rng);
    head_beta_.init(rng);
    head_gamma_.init(rng);
    head_tau_.init(rng);
  } else {
    head_theta_.init_zero();
    head_beta_.init_zero();
    head_gamma_.init_zero();
    head_tau_.init_zero();
  }
}

AnchorPred AnchorNet::forward(const ConditionSet& cond) {
  cached_frames_ = cond.frames();
  Eigen::MatrixXd x = enc_.forward(cond);
  for (auto& b : blocks_) x = b.forward(x);
  x = final_ln_.forward(x);
  AnchorPred out;
  out.theta_torso = head_theta_.forward(x);
  out.beta = head_beta_.forward(x).colwise().mean().transpose();
  out.gamma_c = head_gamma_.forward(x);
  out.tau_c = head_tau_.forward(x);
  return out;
}

AnchorPred AnchorNet::apply(const ConditionSet& cond) const {
  Eigen::MatrixXd x = enc_.apply(cond);
  for (const auto& b : blocks_) x = b.apply(x);
  x = final_ln_.apply(x);
  AnchorPred out;
  out.theta_torso = head_theta_.apply(x);
  out.beta = head_beta_.apply(x).colwise().mean().transpose();
  out.gamma_c = head_gamma_.apply(x);
  out.tau_c = head_tau_.apply(x);
  return out;
}

void AnchorNet::backward(const Eigen::MatrixXd& d_theta, const Vec10& d_beta,
                         const Eigen::MatrixXd& d_gamma, const Eigen::MatrixXd& d_tau) {
  Eigen::MatrixXd d_beta_rows =
      Eigen::MatrixXd::Ones(cached_frames_, 1) * (d_beta.transpose() / cached_frames_);
  Eigen::MatrixXd d_x = head_theta_.backward(d_theta) + head_beta_.backward(d_beta_rows) +
                        head_gamma_.backward(d_gamma) + head_tau_.backward(d_tau);
  d_x = final_ln_.backward(d_x);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d_x = it->backward(d_x);
  enc_.backward(d_x);
}

std::vector<ParamRef> AnchorNet::params() {
  std::vector<ParamRef> out;
  enc_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  final_ln_.collect(out);
  head_theta_.collect(out);
  head_beta_.collect(out);
  head_gamma_.collect(out);
  head_tau_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// VelocityNet

VelocityNet::VelocityNet(const ModelDims& dims)
    : dims_(dims),
      enc_("vel.enc", dims, true),
      in_proj_("vel.in_proj", kFrameWidth + 2 * dims.t_freqs + dims.d_model, dims.d_model, false),
      final_ln_("vel.final_ln", dims.d_model),
      head_("vel.head", dims.d_model, kFrameWidth, false) {
  for (int b = 0; b < dims.n_blocks; ++b) {
    blocks_.emplace_back("vel.block" + std::to_string(b), dims.d_model, dims.ff_mult,
                         dims.rope_base);
  }
}

void VelocityNet::init(Rng& rng, bool random_head) {
  enc_.init(rng);
  in_proj_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  if (random_head) {
    head_.init(rng);
  } else {
    head_.init_zero();
  }
}

Eigen::MatrixXd VelocityNet::assemble_input(const Eigen::MatrixXd& z_t, double t,
                                            const Eigen::MatrixXd& cond_tokens) const {
  const int frames = static_cast<int>(z_t.rows());
  Eigen::VectorXd t_vec(1);
  t_vec(0) = t;
  const Eigen::VectorXd temb = sinusoidal_embed(t_vec, dims_.t_freqs);
  Eigen::MatrixXd input(frames, kFrameWidth + temb.size() + dims_.d_model);
  input.leftCols(kFrameWidth) = z_t;
  input.middleCols(kFrameWidth, temb.size()).rowwise() = temb.transpose();
  input.rightCols(dims_.d_model) = cond_tokens;
  return input;
}

Eigen::MatrixXd VelocityNet::forward(const Eigen::MatrixXd& z_t, double t,
                                     const ConditionSet& cond) {
  Eigen::MatrixXd x = in_proj_.forward(assemble_input(z_t, t, enc_.forward(cond)));
  for (auto& b : blocks_) x = b.forward(x);
  x = final_ln_.forward(x);
  return head_.forward(x);
}

Eigen::MatrixXd VelocityNet::evaluate(const Eigen::MatrixXd& z_t, double t,
                                      const ConditionSet& cond) const {
  Eigen::MatrixXd x = in_proj_.apply(assemble_input(z_t, t, enc_.apply(cond)));
  for (const auto& b : blocks_) x = b.apply(x);
  x = final_ln_.apply(x);
  return head_.apply(x);
}

Eigen::MatrixXd VelocityNet::backward(const Eigen::MatrixXd& d_v) {
  Eigen::MatrixXd d_x = head_.backward(d_v);
  d_x = final_ln_.backward(d_x);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d_x = it->backward(d_x);
  const Eigen::MatrixXd d_input = in_proj_.backward(d_x);
  enc_.backward(d_input.rightCols(dims_.d_model));
  return d_input.leftCols(kFrameWidth);
}

std::vector<ParamRef> VelocityNet::params() {
  std::vector<ParamRef> out;
  enc_.collect(out);
  in_proj_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  final_ln_.collect(out);
  head_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// BaselineNet

BaselineNet::BaselineNet(const ModelDims& dims, int out_width)
    : dims_(dims),
      out_width_(out_width),
      enc_("base.enc", dims, true),
      final_ln_("base.final_ln", dims.d_model),
      head_("base.head", dims.d_model, out_width, false) {
  for (int b = 0; b < dims.n_blocks; ++b) {
    blocks_.emplace_back("base.block" + std::to_string(b), dims.d_model, dims.ff_mult,
                         dims.rope_base);
  }
}

void BaselineNet::init(Rng& rng, bool random_head) {
  enc_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  if (random_head) {
    head_.init(rng);
  } else {
    head_.init_zero();
  }
}

Eigen::MatrixXd BaselineNet::forward(const ConditionSet& cond) {
  Eigen::MatrixXd x = enc_.forward(cond);
  for (auto& b : blocks_) x = b.forward(x);
  x = final_ln_.forward(x);
  return head_.forward(x);
}

Eigen::MatrixXd BaselineNet::apply(const ConditionSet& cond) const {
  Eigen::MatrixXd x = enc_.apply(cond);
  for (const auto& b : blocks_) x = b.apply(x);
  x = final_ln_.apply(x);
  return head_.apply(x);
}

void BaselineNet::backward(const Eigen::MatrixXd& d_out) {
  Eigen::MatrixXd d_x = head_.backward(d_out);
  d_x = final_ln_.backward(d_x);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d_x = it->backward(d_x);
  enc_.backward(d_x);
}

std::vector<ParamRef> BaselineNet::params() {
  std::vector<ParamRef> out;
  enc_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  final_ln_.collect(out);
  head_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<ParamRef> params, const AdamConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    const Eigen::MatrixXd& g = *params_[i].grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.array().square().matrix();
    const Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
    const Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
    params_[i].value->array() -= cfg_.lr * m_hat / (v_hat.sqrt() + cfg_.eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.grad->setZero();
}

// ---------------------------------------------------------------------------

ConditionSet condition_dropout(const ConditionSet& c, double p_drop, Rng& rng) {
  if (p_drop < 0.0 || p_drop > 1.0) throw std::invalid_argument("condition_dropout: bad p_drop");
  const double u = rng.uniform();
  if (u < p_drop) return make_uncond_condition(c);
  return c;
}

}  // namespace anchorflow
