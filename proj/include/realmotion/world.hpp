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

#ifndef REALMOTION__WORLD_HPP_
#define REALMOTION__WORLD_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "realmotion/scene.hpp"

namespace realmotion
{

inline constexpr const char * kSceneFormatVersion = "realmotion-scene/1";

struct BehaviorMix
{
  double constant_velocity = 0.4;
  double turn = 0.3;
  double lane_change = 0.15;
  double stop = 0.15;

  double sum() const { return constant_velocity + turn + lane_change + stop; }
};

struct WorldConfig
{
  int n_agents = 6;
  int n_lanes = 8;
  int t_hist = 50;
  int t_fut = 60;
  double frequency_hz = 10.0;
  uint64_t seed = 0;
  BehaviorMix behavior_mix;

  void validate() const;  // throws ConfigInvalid
};

struct ConfigInvalid : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct FormatVersionMismatch : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct CorruptFile : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Deterministic scene generation: identical (cfg, scene_index) pairs yield
/// bit-identical scenes. scene_index derives an independent RNG stream so
/// datasets can be generated in parallel.
Scene generate_scene(const WorldConfig & cfg, uint64_t scene_index = 0);

/// Structured-text scene codec (".json"), lossless for doubles. A ".rmsb"
/// extension selects the little-endian binary variant.
void write_scene(const Scene & scene, const std::filesystem::path & path);
Scene read_scene(const std::filesystem::path & path);

bool scenes_equal(const Scene & a, const Scene & b);

}  // namespace realmotion

#endif  // REALMOTION__WORLD_HPP_
