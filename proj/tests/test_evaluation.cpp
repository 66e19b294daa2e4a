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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "realmotion/evaluation.hpp"
#include "realmotion/world.hpp"
#include "test_support.hpp"

using namespace realmotion;
using test::uniform;

namespace
{

TrajectoryMat random_traj(std::mt19937_64 & rng, int k, double span = 10.0)
{
  TrajectoryMat t(k, 2);
  for (int i = 0; i < k; ++i) {
    t(i, 0) = uniform(rng, -span, span);
    t(i, 1) = uniform(rng, -span, span);
  }
  return t;
}

ModeSet random_modeset(std::mt19937_64 & rng, int modes, int k)
{
  ModeSet ms;
  Eigen::VectorXd raw(modes);
  for (int m = 0; m < modes; ++m) {
    ms.modes.push_back(random_traj(rng, k));
    raw[m] = uniform(rng, 0.1, 1.0);
  }
  ms.probs = raw / raw.sum();
  return ms;
}

// Brute-force oracle: enumerate every subset-free top-k choice directly.
double oracle_min_fde(const ModeSet & ms, const TrajectoryMat & gt, int k)
{
  std::vector<std::pair<double, int>> order;
  for (int m = 0; m < static_cast<int>(ms.modes.size()); ++m) {
    order.emplace_back(-ms.probs[m], m);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto & a, const auto & b) {
    return a.first < b.first;
  });
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < std::min<int>(k, static_cast<int>(order.size())); ++i) {
    const auto & mode = ms.modes[static_cast<size_t>(order[static_cast<size_t>(i)].second)];
    best = std::min(best, (mode.bottomRows(1) - gt.bottomRows(1)).norm());
  }
  return best;
}

double oracle_min_ade(const ModeSet & ms, const TrajectoryMat & gt, int k)
{
  std::vector<std::pair<double, int>> order;
  for (int m = 0; m < static_cast<int>(ms.modes.size()); ++m) {
    order.emplace_back(-ms.probs[m], m);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto & a, const auto & b) {
    return a.first < b.first;
  });
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < std::min<int>(k, static_cast<int>(order.size())); ++i) {
    const auto & mode = ms.modes[static_cast<size_t>(order[static_cast<size_t>(i)].second)];
    double total = 0.0;
    for (Eigen::Index r = 0; r < mode.rows(); ++r) {
      total += (mode.row(r) - gt.row(r)).norm();
    }
    best = std::min(best, total / static_cast<double>(mode.rows()));
  }
  return best;
}

ModelConfig small_model_config()
{
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.depth = 1;
  cfg.num_modes = 2;
  cfg.k_future = 5;
  cfg.seed = 13;
  return cfg;
}

std::vector<Scene> small_scenes(int n, uint64_t seed = 60)
{
  const WorldConfig wc{.n_agents = 4, .n_lanes = 5, .t_hist = 20, .t_fut = 5, .seed = seed};
  std::vector<Scene> scenes;
  for (int i = 0; i < n; ++i) {
    scenes.push_back(generate_scene(wc, static_cast<uint64_t>(i)));
  }
  return scenes;
}

EvalConfig small_eval_config()
{
  EvalConfig cfg;
  cfg.split_points = {16, 18, 20};
  return cfg;
}

}  // namespace

TEST_CASE("minFDE and minADE match a brute-force oracle over 1000 cases")
{
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const int modes = 1 + static_cast<int>(rng() % 8);
    const int k_steps = 2 + static_cast<int>(rng() % 10);
    const ModeSet ms = random_modeset(rng, modes, k_steps);
    const TrajectoryMat gt = random_traj(rng, k_steps);
    for (const int k : {1, 3, 6}) {
      CHECK(min_fde(ms, gt, k) == oracle_min_fde(ms, gt, k));
      CHECK(min_ade(ms, gt, k) == oracle_min_ade(ms, gt, k));
    }
  }
}

TEST_CASE("b-minFDE adds the probability penalty of the best-FDE mode")
{
  // Two modes: mode 0 ends exactly 1 m off with pi = 0.5 -> 1 + 0.25.
  ModeSet ms;
  TrajectoryMat a(2, 2), b(2, 2), gt(2, 2);
  gt << 0.0, 0.0, 5.0, 0.0;
  a << 0.0, 0.0, 6.0, 0.0;   // FDE 1.0
  b << 0.0, 0.0, 15.0, 0.0;  // FDE 10.0
  ms.modes = {a, b};
  ms.probs = Eigen::Vector2d(0.5, 0.5);
  CHECK(b_min_fde(ms, gt) == doctest::Approx(1.25));

  // The penalty uses the argmin-FDE mode's probability, not the max-prob one.
  ms.probs = Eigen::Vector2d(0.2, 0.8);
  CHECK(b_min_fde(ms, gt) == doctest::Approx(1.0 + 0.8 * 0.8));
}

TEST_CASE("miss rate is strict at exactly 2 meters")
{
  std::vector<SceneRecord> records(3);
  records[0].min_fde_6 = kMissThreshold;         // not a miss
  records[1].min_fde_6 = kMissThreshold + 1e-9;  // miss
  records[2].min_fde_6 = 0.5;
  CHECK(miss_rate(records, 6) == doctest::Approx(1.0 / 3.0));

  records[0].min_fde_1 = 3.0;
  records[1].min_fde_1 = 1.0;
  records[2].min_fde_1 = 2.0;
  CHECK(miss_rate(records, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("aggregate averages per-scene records")
{
  std::vector<SceneRecord> records(2);
  records[0].min_ade_6 = 1.0;
  records[1].min_ade_6 = 3.0;
  records[0].min_fde_6 = 4.0;
  records[1].min_fde_6 = 0.0;
  const MetricReport report = aggregate(records);
  CHECK(report.count == 2);
  CHECK(report.min_ade_6 == doctest::Approx(2.0));
  CHECK(report.min_fde_6 == doctest::Approx(2.0));
  CHECK(report.miss_rate_6 == doctest::Approx(0.5));
  CHECK(report.per_scene.size() == 2);
}

TEST_CASE("multi-agent metrics average over scored actors")
{
  std::mt19937_64 rng(5);
  std::vector<ModeSet> preds;
  std::vector<TrajectoryMat> gts;
  for (int a = 0; a < 4; ++a) {
    preds.push_back(random_modeset(rng, 6, 8));
    gts.push_back(random_traj(rng, 8));
  }
  const MultiAgentMetrics out = multi_agent_metrics(preds, gts, 6);
  double fde_sum = 0.0, ade_sum = 0.0;
  int misses = 0;
  for (int a = 0; a < 4; ++a) {
    const double f = min_fde(preds[a], gts[a], 6);
    fde_sum += f;
    ade_sum += min_ade(preds[a], gts[a], 6);
    if (f > kMissThreshold) ++misses;
  }
  CHECK(out.avg_min_fde == doctest::Approx(fde_sum / 4.0));
  CHECK(out.avg_min_ade == doctest::Approx(ade_sum / 4.0));
  CHECK(out.actor_miss_rate == doctest::Approx(misses / 4.0));
}

TEST_CASE("ensemble recovers separated bundles with exact member means")
{
  // Two well-separated bundles of 4 and 2 trajectories.
  std::mt19937_64 rng(31);
  const int k = 6;
  const TrajectoryMat center_a = random_traj(rng, k, 2.0);
  TrajectoryMat center_b = random_traj(rng, k, 2.0);
  center_b.array() += 500.0;

  std::vector<TrajectoryMat> members;
  for (int i = 0; i < 4; ++i) {
    TrajectoryMat m = center_a;
    m.array() += 0.01 * static_cast<double>(i);
    members.push_back(m);
  }
  for (int i = 0; i < 2; ++i) {
    TrajectoryMat m = center_b;
    m.array() -= 0.01 * static_cast<double>(i);
    members.push_back(m);
  }

  const ModeSet out = ensemble(members, 2, 9);
  REQUIRE(out.modes.size() == 2);
  CHECK(out.probs.sum() == doctest::Approx(1.0));

  // Identify which output mode is which bundle by proximity.
  const int ia = (out.modes[0].row(0) - center_a.row(0)).norm() <
                     (out.modes[1].row(0) - center_a.row(0)).norm()
                   ? 0
                   : 1;
  const int ib = 1 - ia;

  TrajectoryMat mean_a = TrajectoryMat::Zero(k, 2);
  for (int i = 0; i < 4; ++i) mean_a += members[static_cast<size_t>(i)];
  mean_a /= 4.0;
  TrajectoryMat mean_b = TrajectoryMat::Zero(k, 2);
  for (int i = 4; i < 6; ++i) mean_b += members[static_cast<size_t>(i)];
  mean_b /= 2.0;

  CHECK((out.modes[static_cast<size_t>(ia)] - mean_a).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((out.modes[static_cast<size_t>(ib)] - mean_b).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(out.probs[ia] == doctest::Approx(4.0 / 6.0));
  CHECK(out.probs[ib] == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("ensemble modes stay inside the members' coordinate envelope")
{
  std::mt19937_64 rng(77);
  std::vector<TrajectoryMat> members;
  for (int i = 0; i < 10; ++i) {
    members.push_back(random_traj(rng, 5));
  }
  const ModeSet out = ensemble(members, 3, 1);
  TrajectoryMat lo = members[0], hi = members[0];
  for (const auto & m : members) {
    lo = lo.cwiseMin(m);
    hi = hi.cwiseMax(m);
  }
  for (const auto & mode : out.modes) {
    CHECK(((mode - lo).array() >= -1e-12).all());
    CHECK(((hi - mode).array() >= -1e-12).all());
  }
  CHECK(out.probs.sum() == doctest::Approx(1.0));
  CHECK(out.probs.minCoeff() > 0.0);  // empty-cluster repair guarantees members
}

TEST_CASE("ensemble is deterministic in its seed")
{
  std::mt19937_64 rng(15);
  std::vector<TrajectoryMat> members;
  for (int i = 0; i < 8; ++i) {
    members.push_back(random_traj(rng, 5));
  }
  const ModeSet a = ensemble(members, 3, 42);
  const ModeSet b = ensemble(members, 3, 42);
  for (size_t m = 0; m < a.modes.size(); ++m) {
    CHECK((a.modes[m] - b.modes[m]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("evaluate produces finite per-scene metrics")
{
  Model model(small_model_config());
  const auto scenes = small_scenes(4);
  const MetricReport report = evaluate(model, scenes, small_eval_config());
  CHECK(report.count == 4);
  CHECK(report.per_scene.size() == 4);
  CHECK(std::isfinite(report.min_ade_6));
  CHECK(std::isfinite(report.min_fde_6));
  CHECK(report.min_fde_1 >= report.min_fde_6);  // top-1 can never beat top-6
  CHECK(report.min_ade_1 >= report.min_ade_6);
}

TEST_CASE("metric report round trips through JSON")
{
  Model model(small_model_config());
  const auto scenes = small_scenes(2, 71);
  const MetricReport report = evaluate(model, scenes, small_eval_config());
  const auto path = std::filesystem::temp_directory_path() / "rm_metrics.json";
  write_metric_report(report, path);

  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  CHECK(j["count"].get<size_t>() == report.count);
  CHECK(j["minFDE_6"].get<double>() == report.min_fde_6);
  CHECK(j["per_scene"].size() == report.per_scene.size());
  std::filesystem::remove(path);
}

TEST_CASE("latency bench: online beats offline with identical predictions")
{
  Model model(small_model_config());
  const auto scenes = small_scenes(1, 83);
  const LatencyReport report = latency_bench(model, scenes[0], small_eval_config(), 15);
  CHECK(report.repetitions == 15);
  CHECK(report.predictions_identical);
  CHECK(report.online_median_ms > 0.0);
  CHECK(report.online_median_ms < report.offline_median_ms);
}

TEST_CASE("forecast_to_modeset mirrors the forecast tensors")
{
  Model model(small_model_config());
  const auto scenes = small_scenes(1, 97);
  const SceneSequence seq =
    split_scene(scenes[0], {16, 18, 20}, "agent_0", kDefaultRadius);
  StreamState state = model.make_state();
  const SegmentOutput out = model.run_segment(seq.sub_scenes[0], state, 10.0, false);
  const ModeSet ms = forecast_to_modeset(out.refined);
  REQUIRE(static_cast<int>(ms.modes.size()) == out.refined.num_modes);
  for (int m = 0; m < out.refined.num_modes; ++m) {
    CHECK((ms.modes[static_cast<size_t>(m)] - out.refined.mode_trajectory(m))
            .cwiseAbs()
            .maxCoeff() == 0.0);
    CHECK(ms.probs[m] == out.refined.probs.value()(0, m));
  }
}
