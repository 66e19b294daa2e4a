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

#include "realmotion/scene.hpp"

#include <algorithm>
#include <cmath>

namespace realmotion
{

const AgentTrack * Scene::find_track(const std::string & id) const
{
  for (const auto & track : tracks) {
    if (track.id == id) {
      return &track;
    }
  }
  return nullptr;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> resample_polyline(
  const Eigen::Matrix<double, Eigen::Dynamic, 2> & points, int p)
{
  const Eigen::Index n = points.rows();
  if (n < 2 || p < 2) {
    throw DegeneratePolyline("polyline needs at least 2 points");
  }

  std::vector<double> cumlen(n, 0.0);
  for (Eigen::Index i = 1; i < n; ++i) {
    cumlen[i] = cumlen[i - 1] + (points.row(i) - points.row(i - 1)).norm();
  }
  if (cumlen[n - 1] <= 0.0) {
    throw DegeneratePolyline("polyline has zero length");
  }

  Eigen::Matrix<double, Eigen::Dynamic, 2> out(p, 2);
  out.row(0) = points.row(0);
  out.row(p - 1) = points.row(n - 1);
  Eigen::Index seg = 0;
  for (int k = 1; k < p - 1; ++k) {
    const double s = cumlen[n - 1] * static_cast<double>(k) / (p - 1);
    while (seg + 2 < n && cumlen[seg + 1] < s) {
      ++seg;
    }
    const double seg_len = cumlen[seg + 1] - cumlen[seg];
    const double u = seg_len > 0.0 ? (s - cumlen[seg]) / seg_len : 0.0;
    out.row(k) = points.row(seg) * (1.0 - u) + points.row(seg + 1) * u;
  }
  return out;
}

namespace
{

Eigen::MatrixXd zero_agent_block(int hist_len)
{
  return Eigen::MatrixXd::Zero(hist_len, kAgentChannels);
}

}  // namespace

VectorizedScene vectorize(
  const Scene & scene, const std::string & focal, double radius,
  int current_frame, int hist_len, int capacity_agents, int capacity_map)
{
  const AgentTrack * focal_track = scene.find_track(focal);
  if (focal_track == nullptr || current_frame < 0 ||
      current_frame >= static_cast<int>(focal_track->states.size()) ||
      !focal_track->states[current_frame].valid) {
    throw FocalInvalid("focal agent has no valid state at the current frame");
  }
  if (radius <= 0.0) {
    throw FocalInvalid("inclusion radius must be positive");
  }

  const AgentState & focal_now = focal_track->states[current_frame];
  VectorizedScene vs;
  vs.frame = Pose2(
    focal_now.position.x(), focal_now.position.y(), focal_now.heading,
    current_frame / scene.frequency_hz);
  const Eigen::Matrix2d to_local = rotation2d(-vs.frame.theta);

  auto emit_agent = [&](const AgentTrack & track) {
    Eigen::MatrixXd block = zero_agent_block(hist_len);
    std::vector<uint8_t> frame_mask(hist_len, 0);
    for (int k = 0; k < hist_len; ++k) {
      const int f = current_frame - hist_len + 1 + k;
      if (f < 0 || f >= static_cast<int>(track.states.size()) || !track.states[f].valid) {
        continue;
      }
      const AgentState & st = track.states[f];
      const Vec2 pos = to_local * (st.position - focal_now.position);
      const double h = wrap_angle(st.heading - vs.frame.theta);
      const Vec2 vel = to_local * st.velocity;
      const Vec2 acc = to_local * st.acceleration;
      block(k, 0) = pos.x();
      block(k, 1) = pos.y();
      block(k, 2) = std::cos(h);
      block(k, 3) = std::sin(h);
      block(k, 4) = vel.x();
      block(k, 5) = vel.y();
      block(k, 6) = acc.x();
      block(k, 7) = acc.y();
      block(k, 8) = 1.0;
      frame_mask[k] = 1;
    }
    vs.agents.push_back(std::move(block));
    vs.agent_frame_mask.push_back(std::move(frame_mask));
    vs.agent_mask.push_back(1);
    vs.agent_ids.push_back(track.id);
  };

  vs.focal_index = 0;
  emit_agent(*focal_track);
  for (const auto & track : scene.tracks) {
    if (track.id == focal) {
      continue;
    }
    if (current_frame >= static_cast<int>(track.states.size()) ||
        !track.states[current_frame].valid) {
      continue;
    }
    const double dist = (track.states[current_frame].position - focal_now.position).norm();
    if (dist <= radius) {
      emit_agent(track);
    }
  }

  for (const auto & lane : scene.lanes) {
    const auto pts = resample_polyline(lane.points, kLanePoints);
    bool in_range = false;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      if ((pts.row(i).transpose() - focal_now.position).norm() <= radius) {
        in_range = true;
        break;
      }
    }
    if (!in_range) {
      continue;
    }
    Eigen::MatrixXd block(kLanePoints, kMapChannels);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      block.row(i) = (to_local * (pts.row(i).transpose() - focal_now.position)).transpose();
    }
    vs.map.push_back(std::move(block));
    vs.map_mask.push_back(1);
  }

  while (capacity_agents > 0 && vs.num_agents() < capacity_agents) {
    vs.agents.push_back(zero_agent_block(hist_len));
    vs.agent_frame_mask.emplace_back(hist_len, 0);
    vs.agent_mask.push_back(0);
    vs.agent_ids.emplace_back();
  }
  while (capacity_map > 0 && vs.num_polylines() < capacity_map) {
    vs.map.push_back(Eigen::MatrixXd::Zero(kLanePoints, kMapChannels));
    vs.map_mask.push_back(0);
  }
  return vs;
}

VectorizedScene vectorize(const Scene & scene, const std::string & focal, double radius)
{
  return vectorize(scene, focal, radius, scene.t_hist - 1, scene.t_hist);
}

}  // namespace realmotion
