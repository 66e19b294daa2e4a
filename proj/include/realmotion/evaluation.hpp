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

#ifndef REALMOTION__EVALUATION_HPP_
#define REALMOTION__EVALUATION_HPP_

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "realmotion/model.hpp"
#include "realmotion/training.hpp"

namespace realmotion
{

inline constexpr double kMissThreshold = 2.0;  // meters, strict "exceeds"

using TrajectoryMat = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Stacked multimodal prediction: modes.size() trajectories of K steps each
/// plus their probabilities.
struct ModeSet
{
  std::vector<TrajectoryMat> modes;
  Eigen::VectorXd probs;
};

/// Top-k (by probability) minimum final displacement error.
double min_fde(const ModeSet & pred, const TrajectoryMat & gt, int k);
/// Top-k minimum average displacement error.
double min_ade(const ModeSet & pred, const TrajectoryMat & gt, int k);
/// b-minFDE over all modes: endpoint error of the best mode plus (1-pi)^2.
double b_min_fde(const ModeSet & pred, const TrajectoryMat & gt);

struct SceneRecord
{
  std::string scene_id;
  double min_ade_1 = 0.0;
  double min_fde_1 = 0.0;
  double min_ade_6 = 0.0;
  double min_fde_6 = 0.0;
  double b_min_fde_6 = 0.0;
};

struct MetricReport
{
  double min_ade_1 = 0.0;
  double min_fde_1 = 0.0;
  double min_ade_6 = 0.0;
  double min_fde_6 = 0.0;
  double miss_rate_1 = 0.0;
  double miss_rate_6 = 0.0;
  double b_min_fde_6 = 0.0;
  size_t count = 0;
  std::vector<SceneRecord> per_scene;
};

/// Share of scenes whose top-k minFDE strictly exceeds 2 m.
double miss_rate(const std::vector<SceneRecord> & records, int k);

MetricReport aggregate(std::vector<SceneRecord> records);

struct MultiAgentMetrics
{
  double avg_min_fde = 0.0;
  double avg_min_ade = 0.0;
  double actor_miss_rate = 0.0;
};

/// Scene-level averages over all scored actors for a fixed k.
MultiAgentMetrics multi_agent_metrics(
  const std::vector<ModeSet> & per_agent_preds, const std::vector<TrajectoryMat> & per_agent_gt,
  int k);

/// K-means ensemble of sub-model predictions: cluster the stacked
/// trajectories (flattened Euclidean distance), return member means with
/// probabilities proportional to cluster size.
ModeSet ensemble(
  const std::vector<TrajectoryMat> & predictions, int num_clusters = 6, uint64_t seed = 0,
  int max_iters = 50, double tol = 1e-6);

// --- model evaluation driver --------------------------------------------

struct EvalConfig
{
  std::vector<int> split_points{30, 40, 50};
  double radius = kDefaultRadius;
};

/// Runs the sequence pipeline per scene and scores the final segment's
/// refined forecast against the benchmark target.
MetricReport evaluate(const Model & model, const std::vector<Scene> & scenes,
                      const EvalConfig & cfg);

ModeSet forecast_to_modeset(const Forecast & forecast);

void write_metric_report(const MetricReport & report, const std::filesystem::path & path);

// --- latency bench -------------------------------------------------------

enum class BenchMode { kOnline, kOffline };

struct LatencyReport
{
  double online_median_ms = 0.0;
  double online_iqr_ms = 0.0;
  double offline_median_ms = 0.0;
  double offline_iqr_ms = 0.0;
  int repetitions = 0;
  bool predictions_identical = false;
  std::string hardware;
};

/// Online: one new segment against cached stream state. Offline: recompute
/// the full sequence per query. Median wall-time over `reps` repetitions;
/// verifies both paths produce bit-identical final predictions.
LatencyReport latency_bench(
  const Model & model, const Scene & scene, const EvalConfig & cfg, int reps = 100);

}  // namespace realmotion

#endif  // REALMOTION__EVALUATION_HPP_
