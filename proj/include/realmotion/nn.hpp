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

#ifndef REALMOTION__NN_HPP_
#define REALMOTION__NN_HPP_

#include <optional>
#include <random>
#include <string>

#include "realmotion/autodiff.hpp"
#include "realmotion/geometry.hpp"

namespace realmotion::nn
{

using ad::Mat;
using ad::ParameterStore;
using ad::ParamPtr;
using ad::Var;

inline constexpr double kMaskedLogit = -1e9;

struct Linear
{
  ParamPtr weight;  // in x out
  ParamPtr bias;    // 1 x out

  Linear() = default;
  Linear(
    ParameterStore & store, const std::string & name, int in, int out, std::mt19937_64 & rng,
    bool zero_init = false);

  Var forward(const Var & x, bool grad) const;
};

/// Two-layer feed-forward with ReLU.
struct Mlp
{
  Linear l1;
  Linear l2;

  Mlp() = default;
  Mlp(
    ParameterStore & store, const std::string & name, int in, int hidden, int out,
    std::mt19937_64 & rng, bool zero_init_out = false);

  Var forward(const Var & x, bool grad) const;
};

struct LayerNorm
{
  ParamPtr gamma;  // 1 x dim, init 1
  ParamPtr beta;   // 1 x dim, init 0

  LayerNorm() = default;
  LayerNorm(ParameterStore & store, const std::string & name, int dim);

  Var forward(const Var & x, bool grad) const;
};

struct MultiHeadAttention
{
  int heads = 4;
  int dim = 64;
  Linear wq, wk, wv, wo;

  MultiHeadAttention() = default;
  MultiHeadAttention(
    ParameterStore & store, const std::string & name, int dim, int heads,
    std::mt19937_64 & rng);

  /// key_mask, when present, is an additive Nq x Nk matrix (0 or
  /// kMaskedLogit). Masked keys receive exactly zero attention weight.
  Var forward(
    const Var & query, const Var & key, const Var & value, const Mat * key_mask,
    bool grad) const;
};

/// Pre-LN transformer encoder block (self-attention + feed-forward).
struct EncoderBlock
{
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Mlp ff;

  EncoderBlock() = default;
  EncoderBlock(
    ParameterStore & store, const std::string & name, int dim, int heads,
    std::mt19937_64 & rng);

  Var forward(const Var & x, const Mat * key_mask, bool grad) const;
};

/// Residual cross-attention: q + MHA(LN(q), kv, kv).
struct CrossAttentionBlock
{
  LayerNorm ln;
  MultiHeadAttention attn;

  CrossAttentionBlock() = default;
  CrossAttentionBlock(
    ParameterStore & store, const std::string & name, int dim, int heads,
    std::mt19937_64 & rng);

  Var forward(const Var & q, const Var & kv, const Mat * key_mask, bool grad) const;
};

/// Motion-aware layer normalization: gamma/beta are affine in the encoded
/// relative motion and start out as identity (plain LayerNorm).
struct MotionLayerNorm
{
  Linear pe;        // 5 -> dim position encoding of (dx, dy, sin, cos, dt)
  ParamPtr w_gamma; // dim x dim, zero init
  ParamPtr w_beta;  // dim x dim, zero init

  MotionLayerNorm() = default;
  MotionLayerNorm(
    ParameterStore & store, const std::string & name, int dim, std::mt19937_64 & rng);

  Var encode_motion(const RelativeMotion & motion, bool grad) const;  // 1 x dim
  Var forward(const Var & features, const RelativeMotion & motion, bool grad) const;
};

/// Fixed sinusoidal position table, rows = positions.
Mat sinusoidal_position_encoding(int length, int dim);

/// Additive band mask for windowed temporal self-attention combined with
/// per-frame validity; frames farther than `window - 1` apart or invalid as
/// keys are masked. The diagonal stays open so every query has a key.
Mat neighborhood_mask(const std::vector<uint8_t> & frame_valid, int window);

}  // namespace realmotion::nn

#endif  // REALMOTION__NN_HPP_
