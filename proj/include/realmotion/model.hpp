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

#ifndef REALMOTION__MODEL_HPP_
#define REALMOTION__MODEL_HPP_

#include <deque>
#include <filesystem>
#include <string>
#include <vector>

#include "realmotion/nn.hpp"
#include "realmotion/scene.hpp"

namespace realmotion
{

inline constexpr const char * kCheckpointFormatVersion = "realmotion-ckpt/1";

struct ModelConfig
{
  int dim = 64;
  int heads = 4;
  int depth = 2;  // encoder and stream cross-attention depth
  int neighborhood_window = 10;
  int num_modes = 6;
  int k_future = 60;
  int decoder_hidden = 0;  // 0 = dim
  bool context_stream = true;
  bool trajectory_stream = true;
  int memory_capacity = 12;
  uint64_t seed = 0;

  int hidden() const { return decoder_hidden > 0 ? decoder_hidden : dim; }
  std::string hash() const;
};

/// Concatenated token features of one encoded sub-scene: rows
/// [0, n_agents) are agents, the rest map polylines.
struct SceneFeatures
{
  ad::Var agents;  // N_a x D
  ad::Var map;     // N_m x D
  std::vector<uint8_t> agent_mask;
  std::vector<uint8_t> map_mask;

  ad::Var scene() const { return ad::concat_rows({agents, map}); }
};

/// Multimodal prediction for one sub-scene, in its local frame.
/// Trajectories are stacked mode-major: rows [m*K, (m+1)*K) hold mode m.
struct Forecast
{
  ad::Var trajectories;   // (num_modes * K) x 2
  ad::Var mode_features;  // num_modes x D
  ad::Var logits;         // 1 x num_modes
  ad::Var probs;          // 1 x num_modes
  ad::Var aux;            // N_a x (2K), one trajectory per agent slot
  int num_modes = 0;
  int k_future = 0;

  Eigen::Matrix<double, Eigen::Dynamic, 2> mode_trajectory(int mode) const;
};

struct EmptyBank : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct MemoryEntry
{
  ad::Var trajectory_global;  // K x 2
  ad::Var feature;            // 1 x D
  Pose2 origin_pose;
};

/// FIFO store of past predictions for one focal agent; no deduplication.
class MemoryBank
{
public:
  explicit MemoryBank(int capacity = 12, std::string owner = "")
  : capacity_(capacity), owner_(std::move(owner))
  {
  }

  void push(MemoryEntry entry);
  void evict(size_t index);
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  int capacity() const { return capacity_; }
  const std::deque<MemoryEntry> & entries() const { return entries_; }
  std::deque<MemoryEntry> & entries() { return entries_; }
  const std::string & owner() const { return owner_; }

private:
  int capacity_;
  std::string owner_;
  std::deque<MemoryEntry> entries_;
};

/// Cross-segment state carried by the inference driver for one focal
/// sequence.
struct StreamState
{
  bool has_prev = false;
  ad::Var prev_features;  // (N_a + N_m) x D of the previous sub-scene
  int prev_num_agents = 0;
  std::vector<uint8_t> prev_token_mask;
  Pose2 prev_pose;
  MemoryBank bank{12};

  /// Severs the state from earlier graphs (gradient-step boundary).
  void detach();
};

struct AlignedMemory
{
  ad::Var features;      // n x D
  ad::Var trajectories;  // n x 2K, flattened row-major per entry
};

struct SegmentOutput
{
  Forecast initial;
  Forecast refined;
  bool relayed = false;
};

class Model
{
public:
  explicit Model(const ModelConfig & cfg);

  const ModelConfig & config() const { return cfg_; }
  ad::ParameterStore & params() { return store_; }
  const ad::ParameterStore & params() const { return store_; }

  ad::Var encode_map(const VectorizedScene & vs, bool grad) const;
  ad::Var encode_agents(const VectorizedScene & vs, bool grad) const;
  SceneFeatures encode_scene(const VectorizedScene & vs, bool grad) const;
  SceneFeatures reference_context(
    const SceneFeatures & current, const StreamState & state, const Pose2 & current_pose,
    bool grad) const;
  Forecast decode(const SceneFeatures & features, int focal_index, bool grad) const;
  AlignedMemory align_memory(
    MemoryBank & bank, const Pose2 & current_pose, double q, bool grad) const;
  Forecast relay(const Forecast & initial, const AlignedMemory & memory, bool grad) const;
  void update_memory(
    MemoryBank & bank, const Forecast & refined, const Pose2 & current_pose) const;

  /// Full per-segment pipeline, advancing `state` in place.
  SegmentOutput run_segment(
    const VectorizedScene & vs, StreamState & state, double q, bool grad) const;

  StreamState make_state(const std::string & owner = "") const;

  void save_checkpoint(const std::filesystem::path & path) const;
  static Model load_checkpoint(const std::filesystem::path & path);

private:
  ModelConfig cfg_;
  ad::ParameterStore store_;

  // Backbone.
  nn::Mlp map_point_mlp_;
  nn::Linear map_post_;
  nn::Linear agent_embed_;
  std::vector<nn::EncoderBlock> agent_blocks_;
  std::vector<nn::EncoderBlock> scene_blocks_;
  ad::ParamPtr mode_embed_;  // num_modes x D
  nn::Mlp mode_ff_;
  nn::Mlp traj_head_;
  nn::Mlp prob_head_;
  nn::Mlp aux_head_;

  // Scene context stream.
  nn::MotionLayerNorm context_mln_;
  std::vector<nn::CrossAttentionBlock> map_map_blocks_;
  std::vector<nn::CrossAttentionBlock> agent_scene_blocks_;

  // Agent trajectory stream.
  nn::MotionLayerNorm memory_mln_;
  nn::Linear trajectory_embed_;  // 2K -> D
  std::vector<nn::LayerNorm> relay_ln_;
  std::vector<nn::MultiHeadAttention> relay_attn_;
  nn::Mlp offset_head_;  // zero-initialized output layer
};

}  // namespace realmotion

#endif  // REALMOTION__MODEL_HPP_
