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

#ifndef REALMOTION__SEQUENCER_HPP_
#define REALMOTION__SEQUENCER_HPP_

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "realmotion/scene.hpp"

namespace realmotion
{

struct SplitPointsInvalid : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Ground-truth future for one agent in a sub-scene's local frame. Rows
/// beyond the agent's observed lifetime carry a zero mask entry.
struct FutureTarget
{
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;  // K x 2
  std::vector<uint8_t> valid;                       // per future frame
};

/// An ordered run of sub-scenes anchored at the split points, each
/// normalized to the focal pose at its own anchor frame.
struct SceneSequence
{
  std::vector<VectorizedScene> sub_scenes;
  std::vector<int> split_points;
  int segment_hist_len = 0;
  std::string focal;
  // focal_targets[i]: the focal agent's K-frame future from split point i.
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> focal_targets;
  // aux_targets[i][a]: future of agent slot a of sub-scene i.
  std::vector<std::vector<FutureTarget>> aux_targets;

  int num_segments() const { return static_cast<int>(sub_scenes.size()); }
};

/// Reorganizes one scene into a continuous sub-scene sequence. Split points
/// are 1-based frame counts; the last must equal scene.t_hist. Every
/// sub-scene keeps min(split_points) history frames and a fixed K = t_fut
/// future target.
SceneSequence split_scene(
  const Scene & scene, const std::vector<int> & split_points, const std::string & focal,
  double radius);

/// The focal agent's ground-truth futures alone (same frames/local frames as
/// split_scene produces).
std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> future_targets(
  const Scene & scene, const std::vector<int> & split_points, const std::string & focal);

}  // namespace realmotion

#endif  // REALMOTION__SEQUENCER_HPP_
