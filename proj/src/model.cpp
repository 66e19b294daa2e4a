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

#include "realmotion/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "realmotion/hashing.hpp"

namespace realmotion
{

namespace
{

using json = nlohmann::ordered_json;
using ad::Mat;
using ad::Var;

json config_to_json(const ModelConfig & cfg)
{
  return json{
    {"dim", cfg.dim},
    {"heads", cfg.heads},
    {"depth", cfg.depth},
    {"neighborhood_window", cfg.neighborhood_window},
    {"num_modes", cfg.num_modes},
    {"k_future", cfg.k_future},
    {"decoder_hidden", cfg.decoder_hidden},
    {"context_stream", cfg.context_stream},
    {"trajectory_stream", cfg.trajectory_stream},
    {"memory_capacity", cfg.memory_capacity},
    {"seed", cfg.seed}};
}

ModelConfig config_from_json(const json & j)
{
  ModelConfig cfg;
  cfg.dim = j["dim"].get<int>();
  cfg.heads = j["heads"].get<int>();
  cfg.depth = j["depth"].get<int>();
  cfg.neighborhood_window = j["neighborhood_window"].get<int>();
  cfg.num_modes = j["num_modes"].get<int>();
  cfg.k_future = j["k_future"].get<int>();
  cfg.decoder_hidden = j["decoder_hidden"].get<int>();
  cfg.context_stream = j["context_stream"].get<bool>();
  cfg.trajectory_stream = j["trajectory_stream"].get<bool>();
  cfg.memory_capacity = j["memory_capacity"].get<int>();
  cfg.seed = j["seed"].get<uint64_t>();
  return cfg;
}

// Additive key mask from a token validity vector; the diagonal stays open.
Mat token_key_mask(const std::vector<uint8_t> & valid, Eigen::Index n_query)
{
  const auto nk = static_cast<Eigen::Index>(valid.size());
  Mat mask = Mat::Zero(n_query, nk);
  for (Eigen::Index j = 0; j < nk; ++j) {
    if (valid[static_cast<size_t>(j)] == 0) {
      mask.col(j).setConstant(nn::kMaskedLogit);
      if (j < n_query) {
        mask(j, j) = 0.0;
      }
    }
  }
  return mask;
}

// Row mask (N x dim) zeroing padded token rows.
Mat row_validity(const std::vector<uint8_t> & valid, Eigen::Index dim)
{
  Mat m(static_cast<Eigen::Index>(valid.size()), dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m.row(i).setConstant(valid[static_cast<size_t>(i)] ? 1.0 : 0.0);
  }
  return m;
}

}  // namespace

std::string ModelConfig::hash() const { return to_hex(fnv1a64(config_to_json(*this).dump())); }

Eigen::Matrix<double, Eigen::Dynamic, 2> Forecast::mode_trajectory(int mode) const
{
  return trajectories.value().middleRows(
    static_cast<Eigen::Index>(mode) * k_future, k_future);
}

void MemoryBank::push(MemoryEntry entry)
{
  entries_.push_back(std::move(entry));
  while (static_cast<int>(entries_.size()) > capacity_) {
    entries_.pop_front();
  }
}

void MemoryBank::evict(size_t index)
{
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(index));
}

void StreamState::detach()
{
  if (has_prev) {
    prev_features = prev_features.detach();
  }
  for (auto & entry : bank.entries()) {
    entry.trajectory_global = entry.trajectory_global.detach();
    entry.feature = entry.feature.detach();
  }
}

Model::Model(const ModelConfig & cfg) : cfg_(cfg)
{
  std::mt19937_64 rng(cfg.seed ^ 0x5ee0a11ce5ULL);
  const int d = cfg.dim;
  const int h = cfg.hidden();
  const int k2 = 2 * cfg.k_future;

  map_point_mlp_ = nn::Mlp(store_, "map.point", kMapChannels, d, d, rng);
  map_post_ = nn::Linear(store_, "map.post", d, d, rng);
  agent_embed_ = nn::Linear(store_, "agent.embed", kAgentChannels, d, rng);
  for (int i = 0; i < cfg.depth; ++i) {
    agent_blocks_.emplace_back(store_, "agent.block" + std::to_string(i), d, cfg.heads, rng);
  }
  for (int i = 0; i < cfg.depth; ++i) {
    scene_blocks_.emplace_back(store_, "scene.block" + std::to_string(i), d, cfg.heads, rng);
  }
  mode_embed_ = store_.create_xavier("decoder.mode_embed", cfg.num_modes, d, rng);
  mode_ff_ = nn::Mlp(store_, "decoder.mode_ff", d, h, d, rng);
  traj_head_ = nn::Mlp(store_, "decoder.traj", d, h, k2, rng);
  prob_head_ = nn::Mlp(store_, "decoder.prob", d, h, 1, rng);
  aux_head_ = nn::Mlp(store_, "decoder.aux", d, h, k2, rng);

  context_mln_ = nn::MotionLayerNorm(store_, "context.mln", d, rng);
  for (int i = 0; i < cfg.depth; ++i) {
    map_map_blocks_.emplace_back(store_, "context.map_map" + std::to_string(i), d, cfg.heads, rng);
    agent_scene_blocks_.emplace_back(
      store_, "context.agent_scene" + std::to_string(i), d, cfg.heads, rng);
  }

  memory_mln_ = nn::MotionLayerNorm(store_, "memory.mln", d, rng);
  trajectory_embed_ = nn::Linear(store_, "memory.te", k2, d, rng);
  for (int i = 0; i < cfg.depth; ++i) {
    relay_ln_.emplace_back(store_, "memory.relay_ln" + std::to_string(i), d);
    relay_attn_.emplace_back(
      store_, "memory.relay_attn" + std::to_string(i), d, cfg.heads, rng);
  }
  // Zero output layer makes the relay an exact identity at initialization.
  offset_head_ = nn::Mlp(store_, "memory.offset", d, h, k2, rng, true);
}

Var Model::encode_map(const VectorizedScene & vs, bool grad) const
{
  std::vector<Var> rows;
  rows.reserve(vs.map.size());
  for (size_t i = 0; i < vs.map.size(); ++i) {
    if (vs.map_mask[i] == 0) {
      rows.push_back(ad::constant(Mat::Zero(1, cfg_.dim)));
      continue;
    }
    const Var points = ad::constant(vs.map[i]);
    const Var point_features = map_point_mlp_.forward(points, grad);
    rows.push_back(map_post_.forward(ad::max_rows(point_features), grad));
  }
  return ad::concat_rows(rows);
}

Var Model::encode_agents(const VectorizedScene & vs, bool grad) const
{
  const int t = static_cast<int>(vs.agents.empty() ? 0 : vs.agents[0].rows());
  const Mat pe = nn::sinusoidal_position_encoding(t, cfg_.dim);
  std::vector<Var> rows;
  rows.reserve(vs.agents.size());
  for (size_t a = 0; a < vs.agents.size(); ++a) {
    const auto & frame_mask = vs.agent_frame_mask[a];
    if (vs.agent_mask[a] == 0) {
      rows.push_back(ad::constant(Mat::Zero(1, cfg_.dim)));
      continue;
    }
    Var x = ad::add(agent_embed_.forward(ad::constant(vs.agents[a]), grad), ad::constant(pe));
    const Mat mask = nn::neighborhood_mask(frame_mask, cfg_.neighborhood_window);
    for (const auto & block : agent_blocks_) {
      x = block.forward(x, &mask, grad);
    }
    int last_valid = t - 1;
    while (last_valid > 0 && frame_mask[static_cast<size_t>(last_valid)] == 0) {
      --last_valid;
    }
    rows.push_back(ad::row(x, last_valid));
  }
  return ad::concat_rows(rows);
}

SceneFeatures Model::encode_scene(const VectorizedScene & vs, bool grad) const
{
  const Var f_a = encode_agents(vs, grad);
  const Var f_m = encode_map(vs, grad);
  const auto n_a = f_a.rows();
  const auto n_m = f_m.rows();

  std::vector<uint8_t> token_mask = vs.agent_mask;
  token_mask.insert(token_mask.end(), vs.map_mask.begin(), vs.map_mask.end());
  const Mat key_mask = token_key_mask(token_mask, n_a + n_m);

  Var tokens = ad::concat_rows({f_a, f_m});
  for (const auto & block : scene_blocks_) {
    tokens = block.forward(tokens, &key_mask, grad);
  }
  tokens = ad::mul_mask(tokens, row_validity(token_mask, cfg_.dim));

  SceneFeatures out;
  out.agents = ad::slice_rows(tokens, 0, n_a);
  out.map = ad::slice_rows(tokens, n_a, n_m);
  out.agent_mask = vs.agent_mask;
  out.map_mask = vs.map_mask;
  return out;
}

SceneFeatures Model::reference_context(
  const SceneFeatures & current, const StreamState & state, const Pose2 & current_pose,
  bool grad) const
{
  if (!state.has_prev) {
    return current;
  }
  const RelativeMotion motion = relative_motion(state.prev_pose, current_pose);
  const Var aligned_prev = context_mln_.forward(state.prev_features, motion, grad);
  const auto prev_na = static_cast<Eigen::Index>(state.prev_num_agents);
  const auto prev_total = aligned_prev.rows();
  const Var aligned_prev_map = ad::slice_rows(aligned_prev, prev_na, prev_total - prev_na);

  const std::vector<uint8_t> prev_map_mask(
    state.prev_token_mask.begin() + prev_na, state.prev_token_mask.end());

  Var f_m = current.map;
  Var f_a = current.agents;
  const Mat map_key_mask = token_key_mask(prev_map_mask, f_m.rows());
  const Mat scene_key_mask = token_key_mask(state.prev_token_mask, f_a.rows());
  for (int d = 0; d < cfg_.depth; ++d) {
    f_m = map_map_blocks_[static_cast<size_t>(d)].forward(
      f_m, aligned_prev_map, &map_key_mask, grad);
    f_a = agent_scene_blocks_[static_cast<size_t>(d)].forward(
      f_a, aligned_prev, &scene_key_mask, grad);
  }

  SceneFeatures out;
  out.agents = ad::mul_mask(f_a, row_validity(current.agent_mask, cfg_.dim));
  out.map = ad::mul_mask(f_m, row_validity(current.map_mask, cfg_.dim));
  out.agent_mask = current.agent_mask;
  out.map_mask = current.map_mask;
  return out;
}

Forecast Model::decode(const SceneFeatures & features, int focal_index, bool grad) const
{
  const int m = cfg_.num_modes;
  const int k2 = 2 * cfg_.k_future;
  const Var focal = ad::row(features.agents, focal_index);  // 1 x D
  const Var broadcast = ad::matmul(ad::constant(Mat::Ones(m, 1)), focal);
  const Var seed = ad::add(broadcast, ad::param_var(mode_embed_, grad));
  const Var mode_features = ad::add(seed, mode_ff_.forward(seed, grad));

  Forecast out;
  out.num_modes = m;
  out.k_future = cfg_.k_future;
  out.mode_features = mode_features;
  out.trajectories =
    ad::reshape_rowmajor(traj_head_.forward(mode_features, grad), m * cfg_.k_future, 2);
  out.logits = ad::transpose(prob_head_.forward(mode_features, grad));
  out.probs = ad::softmax_rows(out.logits);
  out.aux = aux_head_.forward(features.agents, grad);
  return out;
}

AlignedMemory Model::align_memory(
  MemoryBank & bank, const Pose2 & current_pose, double q, bool grad) const
{
  // Silently evict entries older than their own horizon.
  for (size_t i = bank.size(); i-- > 0;) {
    const double dt = current_pose.t - bank.entries()[i].origin_pose.t;
    if (std::llround(dt * q) >= cfg_.k_future) {
      bank.evict(i);
    }
  }
  if (bank.empty()) {
    throw EmptyBank("memory bank is empty");
  }

  const Mat rot_t = rotation2d(-current_pose.theta).transpose();
  std::vector<Var> features;
  std::vector<Var> trajectories;
  for (const auto & entry : bank.entries()) {
    const double dt = current_pose.t - entry.origin_pose.t;
    const auto idx = static_cast<Eigen::Index>(std::llround(dt * q));
    const Var y = entry.trajectory_global;
    const Var centered = ad::sub_row_broadcast(y, ad::row(y, idx));
    trajectories.push_back(
      ad::reshape_rowmajor(ad::matmul(centered, ad::constant(rot_t)), 1, 2 * cfg_.k_future));
    const RelativeMotion motion = relative_motion(entry.origin_pose, current_pose);
    features.push_back(memory_mln_.forward(entry.feature, motion, grad));
  }

  AlignedMemory out;
  out.features = ad::concat_rows(features);
  out.trajectories = ad::concat_rows(trajectories);
  return out;
}

Forecast Model::relay(const Forecast & initial, const AlignedMemory & memory, bool grad) const
{
  const int m = cfg_.num_modes;
  const int k2 = 2 * cfg_.k_future;

  const Var y_flat = ad::reshape_rowmajor(initial.trajectories, m, k2);
  const Var te_query = trajectory_embed_.forward(y_flat, grad);
  const Var te_keys = trajectory_embed_.forward(memory.trajectories, grad);
  const Var keys = ad::add(memory.features, te_keys);

  Var f = initial.mode_features;
  for (int d = 0; d < cfg_.depth; ++d) {
    const Var query = ad::add(relay_ln_[static_cast<size_t>(d)].forward(f, grad), te_query);
    f = ad::add(
      f, relay_attn_[static_cast<size_t>(d)].forward(query, keys, memory.features, nullptr, grad));
  }

  const Var offsets = ad::reshape_rowmajor(offset_head_.forward(f, grad), m * cfg_.k_future, 2);

  Forecast out = initial;
  out.mode_features = f;
  out.trajectories = ad::add(initial.trajectories, offsets);
  return out;
}

void Model::update_memory(
  MemoryBank & bank, const Forecast & refined, const Pose2 & current_pose) const
{
  const Mat rot_t = rotation2d(current_pose.theta).transpose();
  Mat origin(1, 2);
  origin << current_pose.x, current_pose.y;
  for (int m = 0; m < cfg_.num_modes; ++m) {
    const Var local =
      ad::slice_rows(refined.trajectories, static_cast<Eigen::Index>(m) * cfg_.k_future,
        cfg_.k_future);
    const Var global =
      ad::add_row_broadcast(ad::matmul(local, ad::constant(rot_t)), ad::constant(origin));
    MemoryEntry entry;
    entry.trajectory_global = global;
    entry.feature = ad::row(refined.mode_features, m);
    entry.origin_pose = current_pose;
    bank.push(std::move(entry));
  }
}

SegmentOutput Model::run_segment(
  const VectorizedScene & vs, StreamState & state, double q, bool grad) const
{
  SceneFeatures features = encode_scene(vs, grad);
  if (cfg_.context_stream && state.has_prev) {
    features = reference_context(features, state, vs.frame, grad);
  }

  SegmentOutput out;
  out.initial = decode(features, vs.focal_index, grad);
  out.refined = out.initial;
  if (cfg_.trajectory_stream && !state.bank.empty()) {
    try {
      const AlignedMemory aligned = align_memory(state.bank, vs.frame, q, grad);
      out.refined = relay(out.initial, aligned, grad);
      out.relayed = true;
    } catch (const EmptyBank &) {
      // Every entry was stale; fall back to the initial forecast.
    }
  }
  if (cfg_.trajectory_stream) {
    update_memory(state.bank, out.refined, vs.frame);
  }

  state.has_prev = true;
  state.prev_features = features.scene();
  state.prev_num_agents = static_cast<int>(features.agent_mask.size());
  state.prev_token_mask = features.agent_mask;
  state.prev_token_mask.insert(
    state.prev_token_mask.end(), features.map_mask.begin(), features.map_mask.end());
  state.prev_pose = vs.frame;
  return out;
}

StreamState Model::make_state(const std::string & owner) const
{
  StreamState state;
  state.bank = MemoryBank(cfg_.memory_capacity, owner);
  return state;
}

void Model::save_checkpoint(const std::filesystem::path & path) const
{
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = config_to_json(cfg_);
  j["config_hash"] = cfg_.hash();
  json params = json::object();
  for (const auto & p : store_.all()) {
    json data = json::array();
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        data.push_back(p->value(i, c));
      }
    }
    params[p->name] = {
      {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", std::move(data)}};
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  out << j.dump() << '\n';
  if (!out) {
    throw std::runtime_error("failed to write checkpoint " + path.string());
  }
}

Model Model::load_checkpoint(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  json j = json::parse(in);
  if (j["format_version"] != kCheckpointFormatVersion) {
    throw std::runtime_error("unsupported checkpoint format version");
  }
  Model model(config_from_json(j["config"]));
  const auto & params = j["params"];
  for (const auto & p : model.store_.all()) {
    if (!params.contains(p->name)) {
      throw std::runtime_error("checkpoint missing parameter " + p->name);
    }
    const auto & jp = params[p->name];
    const auto rows = jp["rows"].get<Eigen::Index>();
    const auto cols = jp["cols"].get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw std::runtime_error("checkpoint shape mismatch for " + p->name);
    }
    const auto & data = jp["data"];
    size_t idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        p->value(i, c) = data[idx++].get<double>();
      }
    }
  }
  return model;
}

}  // namespace realmotion
