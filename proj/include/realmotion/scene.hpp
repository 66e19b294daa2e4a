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

#ifndef REALMOTION__SCENE_HPP_
#define REALMOTION__SCENE_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "realmotion/geometry.hpp"

namespace realmotion
{

enum class AgentCategory : uint8_t { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };

/// Per-frame motion state of one agent. Invalid frames keep a false flag
/// instead of fabricated values.
struct AgentState
{
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  Vec2 velocity = Vec2::Zero();
  Vec2 acceleration = Vec2::Zero();
  bool valid = false;
};

struct AgentTrack
{
  std::string id;
  std::vector<AgentState> states;  // uniformly sampled at the scene frequency
  AgentCategory category = AgentCategory::kVehicle;
};

struct LanePolyline
{
  std::string id;
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;
};

/// One benchmark sample: full tracks over T_hist + T_fut frames plus the map.
struct Scene
{
  std::vector<AgentTrack> tracks;
  std::vector<LanePolyline> lanes;
  std::vector<std::string> focal_ids;
  int t_hist = 50;
  int t_fut = 60;
  double frequency_hz = 10.0;

  int total_frames() const { return t_hist + t_fut; }
  const AgentTrack * find_track(const std::string & id) const;
};

// Agent channels: x, y, cos(h), sin(h), vx, vy, ax, ay, valid.
inline constexpr int kAgentChannels = 9;
inline constexpr int kMapChannels = 2;
inline constexpr int kLanePoints = 20;
inline constexpr double kDefaultRadius = 150.0;

struct FocalInvalid : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct DegeneratePolyline : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Normalized model input in the focal agent's local frame. Fixed-capacity
/// rows with masks; padded rows are all-zero.
struct VectorizedScene
{
  // One T x kAgentChannels matrix per agent slot.
  std::vector<Eigen::MatrixXd> agents;
  // One kLanePoints x kMapChannels matrix per map slot.
  std::vector<Eigen::MatrixXd> map;
  std::vector<uint8_t> agent_mask;  // 1 = real agent
  std::vector<std::string> agent_ids;  // source track id per slot ("" = pad)
  std::vector<uint8_t> map_mask;    // 1 = real polyline
  // Per-agent, per-frame validity (all-zero for padded slots).
  std::vector<std::vector<uint8_t>> agent_frame_mask;
  int focal_index = 0;
  Pose2 frame;  // global pose of the focal agent at the current frame

  int num_agents() const { return static_cast<int>(agents.size()); }
  int num_polylines() const { return static_cast<int>(map.size()); }
};

/// Resamples a polyline to `p` points equally spaced by arc length,
/// preserving both endpoints.
Eigen::Matrix<double, Eigen::Dynamic, 2> resample_polyline(
  const Eigen::Matrix<double, Eigen::Dynamic, 2> & points, int p);

/// Builds the vectorized input around `focal` at frame `current_frame`
/// (0-based index of the last history frame), keeping `hist_len` history
/// frames. Agents valid and within `radius` at the current frame are
/// included, the focal agent first; lanes need at least one point in range.
/// Capacities of 0 mean "fit to content".
VectorizedScene vectorize(
  const Scene & scene, const std::string & focal, double radius,
  int current_frame, int hist_len, int capacity_agents = 0, int capacity_map = 0);

/// Convenience overload anchored at the scene's own current frame with the
/// full history window.
VectorizedScene vectorize(const Scene & scene, const std::string & focal, double radius);

}  // namespace realmotion

#endif  // REALMOTION__SCENE_HPP_
