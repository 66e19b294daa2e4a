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

#include "realmotion/sequencer.hpp"

#include <algorithm>

namespace realmotion
{

namespace
{

void check_split_points(const Scene & scene, const std::vector<int> & split_points)
{
  if (split_points.empty()) {
    throw SplitPointsInvalid("split points must be non-empty");
  }
  for (size_t i = 1; i < split_points.size(); ++i) {
    if (split_points[i] <= split_points[i - 1]) {
      throw SplitPointsInvalid("split points must be strictly increasing");
    }
  }
  if (split_points.back() != scene.t_hist) {
    throw SplitPointsInvalid("last split point must equal the scene's history length");
  }
  if (split_points.front() < 2) {
    throw SplitPointsInvalid("first split point leaves no history window");
  }
}

// Future of `track` from frame `current_frame`, expressed in the local frame
// of `pose`.
FutureTarget gather_future(
  const AgentTrack & track, int current_frame, int k_future, const Pose2 & pose)
{
  const Eigen::Matrix2d to_local = rotation2d(-pose.theta);
  FutureTarget target;
  target.points = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(k_future, 2);
  target.valid.assign(static_cast<size_t>(k_future), 0);
  for (int k = 0; k < k_future; ++k) {
    const int f = current_frame + 1 + k;
    if (f >= static_cast<int>(track.states.size()) || !track.states[f].valid) {
      continue;
    }
    const Vec2 local = to_local * (track.states[f].position - pose.position());
    target.points.row(k) = local.transpose();
    target.valid[static_cast<size_t>(k)] = 1;
  }
  return target;
}

}  // namespace

SceneSequence split_scene(
  const Scene & scene, const std::vector<int> & split_points, const std::string & focal,
  double radius)
{
  check_split_points(scene, split_points);
  const int hist_len = split_points.front();

  SceneSequence seq;
  seq.split_points = split_points;
  seq.segment_hist_len = hist_len;
  seq.focal = focal;

  for (const int tp : split_points) {
    const int current_frame = tp - 1;
    VectorizedScene vs = vectorize(scene, focal, radius, current_frame, hist_len);

    const AgentTrack * focal_track = scene.find_track(focal);
    const FutureTarget focal_fut =
      gather_future(*focal_track, current_frame, scene.t_fut, vs.frame);
    seq.focal_targets.push_back(focal_fut.points);

    std::vector<FutureTarget> aux;
    aux.reserve(vs.agents.size());
    for (const auto & id : vs.agent_ids) {
      if (id.empty()) {
        FutureTarget pad;
        pad.points = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(scene.t_fut, 2);
        pad.valid.assign(static_cast<size_t>(scene.t_fut), 0);
        aux.push_back(std::move(pad));
        continue;
      }
      aux.push_back(gather_future(*scene.find_track(id), current_frame, scene.t_fut, vs.frame));
    }
    seq.aux_targets.push_back(std::move(aux));
    seq.sub_scenes.push_back(std::move(vs));
  }
  return seq;
}

std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> future_targets(
  const Scene & scene, const std::vector<int> & split_points, const std::string & focal)
{
  check_split_points(scene, split_points);
  const AgentTrack * focal_track = scene.find_track(focal);
  if (focal_track == nullptr) {
    throw FocalInvalid("unknown focal agent");
  }
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> out;
  for (const int tp : split_points) {
    const int current_frame = tp - 1;
    const AgentState & now = focal_track->states[static_cast<size_t>(current_frame)];
    const Pose2 pose(
      now.position.x(), now.position.y(), now.heading, current_frame / scene.frequency_hz);
    out.push_back(gather_future(*focal_track, current_frame, scene.t_fut, pose).points);
  }
  return out;
}

}  // namespace realmotion
