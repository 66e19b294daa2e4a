// Copyright 2026 The RealMotion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "realmotion/nn.hpp"

#include <cmath>

namespace realmotion::nn
{

Linear::Linear(
  ParameterStore & store, const std::string & name, int in, int out, std::mt19937_64 & rng,
  bool zero_init)
{
  if (zero_init) {
    weight = store.create(name + ".weight", in, out);
  } else {
    weight = store.create_xavier(name + ".weight", in, out, rng);
  }
  bias = store.create(name + ".bias", 1, out);
}

Var Linear::forward(const Var & x, bool grad) const
{
  return ad::add_row_broadcast(
    ad::matmul(x, ad::param_var(weight, grad)), ad::param_var(bias, grad));
}

Mlp::Mlp(
  ParameterStore & store, const std::string & name, int in, int hidden, int out,
  std::mt19937_64 & rng, bool zero_init_out)
: l1(store, name + ".l1", in, hidden, rng),
  l2(store, name + ".l2", hidden, out, rng, zero_init_out)
{
}

Var Mlp::forward(const Var & x, bool grad) const
{
  return l2.forward(ad::relu(l1.forward(x, grad)), grad);
}

LayerNorm::LayerNorm(ParameterStore & store, const std::string & name, int dim)
{
  gamma = store.create(name + ".gamma", 1, dim);
  gamma->value.setOnes();
  beta = store.create(name + ".beta", 1, dim);
}

Var LayerNorm::forward(const Var & x, bool grad) const
{
  return ad::add_row_broadcast(
    ad::mul_row_broadcast(ad::layernorm_rows(x), ad::param_var(gamma, grad)),
    ad::param_var(beta, grad));
}

MultiHeadAttention::MultiHeadAttention(
  ParameterStore & store, const std::string & name, int dim_, int heads_,
  std::mt19937_64 & rng)
: heads(heads_),
  dim(dim_),
  wq(store, name + ".wq", dim_, dim_, rng),
  wk(store, name + ".wk", dim_, dim_, rng),
  wv(store, name + ".wv", dim_, dim_, rng),
  wo(store, name + ".wo", dim_, dim_, rng)
{
}

Var MultiHeadAttention::forward(
  const Var & query, const Var & key, const Var & value, const Mat * key_mask,
  bool grad) const
{
  if (dim % heads != 0) {
    throw ad::ShapeMismatch("attention dim must be divisible by head count");
  }
  const int dh = dim / heads;
  const Var q = wq.forward(query, grad);
  const Var k = wk.forward(key, grad);
  const Var v = wv.forward(value, grad);

  std::vector<Var> head_outputs;
  head_outputs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var qh = ad::slice_cols(q, h * dh, dh);
    const Var kh = ad::slice_cols(k, h * dh, dh);
    const Var vh = ad::slice_cols(v, h * dh, dh);
    Var logits = ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(double(dh)));
    if (key_mask != nullptr) {
      logits = ad::add(logits, ad::constant(*key_mask));
    }
    head_outputs.push_back(ad::matmul(ad::softmax_rows(logits), vh));
  }
  return wo.forward(ad::concat_cols(head_outputs), grad);
}

EncoderBlock::EncoderBlock(
  ParameterStore & store, const std::string & name, int dim, int heads, std::mt19937_64 & rng)
: ln1(store, name + ".ln1", dim),
  ln2(store, name + ".ln2", dim),
  attn(store, name + ".attn", dim, heads, rng),
  ff(store, name + ".ff", dim, 2 * dim, dim, rng)
{
}

Var EncoderBlock::forward(const Var & x, const Mat * key_mask, bool grad) const
{
  const Var normed = ln1.forward(x, grad);
  Var y = ad::add(x, attn.forward(normed, normed, normed, key_mask, grad));
  return ad::add(y, ff.forward(ln2.forward(y, grad), grad));
}

CrossAttentionBlock::CrossAttentionBlock(
  ParameterStore & store, const std::string & name, int dim, int heads, std::mt19937_64 & rng)
: ln(store, name + ".ln", dim), attn(store, name + ".attn", dim, heads, rng)
{
}

Var CrossAttentionBlock::forward(
  const Var & q, const Var & kv, const Mat * key_mask, bool grad) const
{
  return ad::add(q, attn.forward(ln.forward(q, grad), kv, kv, key_mask, grad));
}

MotionLayerNorm::MotionLayerNorm(
  ParameterStore & store, const std::string & name, int dim, std::mt19937_64 & rng)
: pe(store, name + ".pe", 5, dim, rng)
{
  // Zero maps keep gamma = 1, beta = 0 at init, i.e. plain LayerNorm.
  w_gamma = store.create(name + ".w_gamma", dim, dim);
  w_beta = store.create(name + ".w_beta", dim, dim);
}

Var MotionLayerNorm::encode_motion(const RelativeMotion & motion, bool grad) const
{
  Mat raw(1, 5);
  raw << motion.dx, motion.dy, std::sin(motion.dtheta), std::cos(motion.dtheta), motion.dt;
  return ad::relu(pe.forward(ad::constant(raw), grad));
}

Var MotionLayerNorm::forward(
  const Var & features, const RelativeMotion & motion, bool grad) const
{
  const Var c = encode_motion(motion, grad);  // 1 x dim
  const Var ones = ad::constant(Mat::Ones(1, features.cols()));
  const Var gamma = ad::add(ad::matmul(c, ad::param_var(w_gamma, grad)), ones);
  const Var beta = ad::matmul(c, ad::param_var(w_beta, grad));
  return ad::add_row_broadcast(
    ad::mul_row_broadcast(ad::layernorm_rows(features), gamma), beta);
}

Mat sinusoidal_position_encoding(int length, int dim)
{
  Mat pe = Mat::Zero(length, dim);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < dim / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
      pe(pos, 2 * i) = std::sin(pos * freq);
      pe(pos, 2 * i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

Mat neighborhood_mask(const std::vector<uint8_t> & frame_valid, int window)
{
  const int t = static_cast<int>(frame_valid.size());
  Mat mask = Mat::Zero(t, t);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < t; ++j) {
      if (i == j) {
        continue;
      }
      if (std::abs(i - j) >= window || frame_valid[static_cast<size_t>(j)] == 0) {
        mask(i, j) = kMaskedLogit;
      }
    }
  }
  return mask;
}

}  // namespace realmotion::nn
