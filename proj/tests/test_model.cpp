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

#include "realmotion/model.hpp"
#include "realmotion/sequencer.hpp"
#include "realmotion/world.hpp"
#include "test_support.hpp"

using namespace realmotion;
using ad::Mat;
using ad::Var;

namespace
{

ModelConfig small_config()
{
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.depth = 1;
  cfg.neighborhood_window = 10;
  cfg.num_modes = 2;
  cfg.k_future = 5;
  cfg.seed = 7;
  return cfg;
}

SceneSequence small_sequence(uint64_t seed = 11, uint64_t index = 0)
{
  const WorldConfig wc{.n_agents = 4, .n_lanes = 5, .t_hist = 20, .t_fut = 5, .seed = seed};
  const Scene scene = generate_scene(wc, index);
  // Split points two frames apart keep memory entries inside the k_future=5
  // horizon (0.2 s < 0.5 s at 10 Hz).
  return split_scene(scene, {16, 18, 20}, "agent_0", kDefaultRadius);
}

}  // namespace

TEST_CASE("encode/decode shapes and probability normalization")
{
  const ModelConfig cfg = small_config();
  Model model(cfg);
  const SceneSequence seq = small_sequence();
  const VectorizedScene & vs = seq.sub_scenes[0];

  const SceneFeatures features = model.encode_scene(vs, false);
  CHECK(features.agents.rows() == vs.num_agents());
  CHECK(features.agents.cols() == cfg.dim);
  CHECK(features.map.rows() == vs.num_polylines());

  const Forecast forecast = model.decode(features, vs.focal_index, false);
  CHECK(forecast.trajectories.rows() == cfg.num_modes * cfg.k_future);
  CHECK(forecast.trajectories.cols() == 2);
  CHECK(forecast.logits.cols() == cfg.num_modes);
  CHECK(forecast.probs.value().sum() == doctest::Approx(1.0));
  CHECK(forecast.aux.rows() == vs.num_agents());
  CHECK(forecast.aux.cols() == 2 * cfg.k_future);
}

TEST_CASE("map encoding is invariant to point order and duplicates share features")
{
  Model model(small_config());
  const SceneSequence seq = small_sequence(3);
  VectorizedScene vs = seq.sub_scenes[0];
  REQUIRE(vs.num_polylines() >= 1);

  const Var before = model.encode_map(vs, false);
  // Reverse the points of polyline 0: max-pooled PointNet features must not
  // change.
  vs.map[0] = vs.map[0].colwise().reverse().eval();
  const Var after = model.encode_map(vs, false);
  CHECK((before.value().row(0) - after.value().row(0)).cwiseAbs().maxCoeff() <= 1e-12);

  // Duplicate a polyline into another slot: identical rows out.
  if (vs.num_polylines() >= 2 && vs.map_mask[1] == 1) {
    vs.map[1] = vs.map[0];
    const Var dup = model.encode_map(vs, false);
    CHECK((dup.value().row(0) - dup.value().row(1)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("neighborhood mask structure")
{
  std::vector<uint8_t> valid{1, 1, 0, 1};
  const Mat mask = nn::neighborhood_mask(valid, 2);
  CHECK(mask(0, 0) == 0.0);
  CHECK(mask(0, 1) == 0.0);           // within window
  CHECK(mask(0, 2) == nn::kMaskedLogit);  // out of window and invalid
  CHECK(mask(0, 3) == nn::kMaskedLogit);  // out of window
  CHECK(mask(1, 2) == nn::kMaskedLogit);  // invalid key
  CHECK(mask(2, 2) == 0.0);           // diagonal stays open
  CHECK(mask(3, 2) == nn::kMaskedLogit);
  CHECK(mask(3, 3) == 0.0);

  // window >= T with all-valid frames degenerates to no masking at all.
  const Mat full = nn::neighborhood_mask({1, 1, 1, 1}, 4);
  CHECK(full.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("window of T matches a full-attention reference")
{
  ModelConfig cfg = small_config();
  cfg.neighborhood_window = 20;  // == t_hist of the sub-scene history? use seq hist 10
  Model windowed(cfg);
  ModelConfig cfg_full = cfg;
  cfg_full.neighborhood_window = 1000;
  Model full(cfg_full);  // same seed: identical parameters

  const SceneSequence seq = small_sequence(5);
  const VectorizedScene & vs = seq.sub_scenes[0];
  const Var a = windowed.encode_agents(vs, false);
  const Var b = full.encode_agents(vs, false);
  CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("masked keys receive exactly zero attention weight")
{
  ad::ParameterStore store;
  std::mt19937_64 rng(2);
  nn::MultiHeadAttention attn(store, "attn", 8, 2, rng);
  const Mat q = Mat::Random(2, 8);
  const Mat kv = Mat::Random(3, 8);

  Mat mask = Mat::Zero(2, 3);
  mask.col(2).setConstant(nn::kMaskedLogit);
  const Var masked =
    attn.forward(ad::constant(q), ad::constant(kv), ad::constant(kv), &mask, false);

  const Mat kv2 = kv.topRows(2);
  const Var dropped =
    attn.forward(ad::constant(q), ad::constant(kv2), ad::constant(kv2), nullptr, false);
  CHECK((masked.value() - dropped.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("masked tokens receive exactly zero gradient")
{
  ad::ParameterStore store;
  std::mt19937_64 rng(4);
  nn::MultiHeadAttention attn(store, "attn", 8, 2, rng);
  auto kv_param = store.create_xavier("kv", 3, 8, rng);
  const Mat q = Mat::Random(2, 8);
  Mat mask = Mat::Zero(2, 3);
  mask.col(1).setConstant(nn::kMaskedLogit);

  store.zero_grad();
  const Var kv = ad::param_var(kv_param, true);
  const Var out = attn.forward(ad::constant(q), kv, kv, &mask, true);
  ad::backward(ad::sum_all(out));
  CHECK(kv_param->grad.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(kv_param->grad.row(0).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("padded token rows come out exactly zero and inert")
{
  Model model(small_config());
  const WorldConfig wc{.n_agents = 3, .n_lanes = 4, .t_hist = 20, .t_fut = 5, .seed = 19};
  const Scene scene = generate_scene(wc);
  VectorizedScene vs = vectorize(scene, "agent_0", kDefaultRadius, 19, 20, 6, 6);

  const SceneFeatures features = model.encode_scene(vs, false);
  const Var tokens = features.scene();
  std::vector<uint8_t> token_mask = features.agent_mask;
  token_mask.insert(token_mask.end(), features.map_mask.begin(), features.map_mask.end());
  for (Eigen::Index i = 0; i < tokens.rows(); ++i) {
    if (token_mask[static_cast<size_t>(i)] == 0) {
      CHECK(tokens.value().row(i).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  // Garbage in a padded slot must not change anything.
  VectorizedScene dirty = vs;
  bool found_pad = false;
  for (int a = 0; a < dirty.num_agents(); ++a) {
    if (dirty.agent_mask[a] == 0) {
      dirty.agents[a].setConstant(123.0);
      found_pad = true;
      break;
    }
  }
  REQUIRE(found_pad);
  const SceneFeatures dirty_features = model.encode_scene(dirty, false);
  CHECK(
    (dirty_features.scene().value() - tokens.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("motion-aware layernorm is a plain layernorm at initialization")
{
  ad::ParameterStore store;
  std::mt19937_64 rng(9);
  nn::MotionLayerNorm mln(store, "mln", 16, rng);
  const Mat f = Mat::Random(4, 16);
  const RelativeMotion motion{2.0, -1.0, 0.4, 1.0};
  const Var out = mln.forward(ad::constant(f), motion, false);
  const Var plain = ad::layernorm_rows(ad::constant(f));
  CHECK((out.value() - plain.value()).cwiseAbs().maxCoeff() == 0.0);

  // After perturbing the zero-initialized maps it must depend on the motion.
  for (auto & p : store.all()) {
    if (p->name == "mln.w_gamma") p->value.setConstant(0.01);
  }
  const Var moved = mln.forward(ad::constant(f), motion, false);
  CHECK((moved.value() - plain.value()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("reference_context without history is the exact identity")
{
  Model model(small_config());
  const SceneSequence seq = small_sequence(13);
  const VectorizedScene & vs = seq.sub_scenes[0];
  const SceneFeatures features = model.encode_scene(vs, false);
  StreamState state = model.make_state();
  const SceneFeatures out = model.reference_context(features, state, vs.frame, false);
  CHECK((out.agents.value() - features.agents.value()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((out.map.value() - features.map.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("relay is an exact identity at initialization")
{
  Model model(small_config());
  const SceneSequence seq = small_sequence(15);
  StreamState state = model.make_state();
  const double q = 10.0;

  // Segment 0 fills the bank; segment 1 relays.
  const SegmentOutput first = model.run_segment(seq.sub_scenes[0], state, q, false);
  CHECK_FALSE(first.relayed);
  const SegmentOutput second = model.run_segment(seq.sub_scenes[1], state, q, false);
  CHECK(second.relayed);
  CHECK(
    (second.refined.trajectories.value() - second.initial.trajectories.value())
      .cwiseAbs()
      .maxCoeff() == 0.0);
}

TEST_CASE("memory bank keeps FIFO order and bounded size")
{
  MemoryBank bank(3, "focal");
  for (int i = 0; i < 5; ++i) {
    MemoryEntry e;
    e.trajectory_global = ad::constant(Mat::Constant(5, 2, double(i)));
    e.feature = ad::constant(Mat::Constant(1, 4, double(i)));
    e.origin_pose = Pose2(0.0, 0.0, 0.0, double(i));
    bank.push(std::move(e));
  }
  CHECK(bank.size() == 3);
  CHECK(bank.entries()[0].feature.value()(0, 0) == 2.0);  // oldest kept
  CHECK(bank.entries()[2].feature.value()(0, 0) == 4.0);  // newest last
  bank.evict(0);
  CHECK(bank.size() == 2);
  CHECK(bank.entries()[0].feature.value()(0, 0) == 3.0);
}

TEST_CASE("align_memory evicts stale entries and throws on an empty bank")
{
  const ModelConfig cfg = small_config();
  Model model(cfg);
  MemoryBank bank(cfg.memory_capacity);
  MemoryEntry stale;
  stale.trajectory_global = ad::constant(Mat::Zero(cfg.k_future, 2));
  stale.feature = ad::constant(Mat::Zero(1, cfg.dim));
  stale.origin_pose = Pose2(0.0, 0.0, 0.0, 0.0);
  bank.push(std::move(stale));

  // k_future = 5 at q = 10 Hz: anything 0.5 s old is out of horizon.
  const Pose2 now(1.0, 1.0, 0.0, 0.5);
  CHECK_THROWS_AS(model.align_memory(bank, now, 10.0, false), EmptyBank);
  CHECK(bank.empty());
}

TEST_CASE("update_memory then align_memory reproduces the local trajectories")
{
  const ModelConfig cfg = small_config();
  Model model(cfg);
  const SceneSequence seq = small_sequence(33);
  const VectorizedScene & vs = seq.sub_scenes[0];
  const SceneFeatures features = model.encode_scene(vs, false);
  const Forecast forecast = model.decode(features, vs.focal_index, false);

  MemoryBank bank(cfg.memory_capacity);
  model.update_memory(bank, forecast, vs.frame);
  REQUIRE(bank.size() == static_cast<size_t>(cfg.num_modes));

  const AlignedMemory aligned = model.align_memory(bank, vs.frame, 10.0, false);
  for (int m = 0; m < cfg.num_modes; ++m) {
    const Eigen::Matrix<double, Eigen::Dynamic, 2> local = forecast.mode_trajectory(m);
    // Same pose, dt = 0: aligned rows are the local points re-centered on
    // the first prediction point.
    Eigen::Matrix<double, Eigen::Dynamic, 2> expect = local;
    expect.rowwise() -= local.row(0);
    Mat flat(1, 2 * cfg.k_future);
    for (int k = 0; k < cfg.k_future; ++k) {
      flat(0, 2 * k) = expect(k, 0);
      flat(0, 2 * k + 1) = expect(k, 1);
    }
    CHECK((aligned.trajectories.value().row(m) - flat).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("align_memory at a later pose matches a geometric oracle")
{
  const ModelConfig cfg = small_config();
  Model model(cfg);
  MemoryBank bank(cfg.memory_capacity);

  std::mt19937_64 rng(71);
  const Pose2 origin = test::random_pose(rng);
  Mat global(cfg.k_future, 2);
  for (int k = 0; k < cfg.k_future; ++k) {
    global(k, 0) = test::uniform(rng, -20.0, 20.0);
    global(k, 1) = test::uniform(rng, -20.0, 20.0);
  }
  MemoryEntry entry;
  entry.trajectory_global = ad::constant(global);
  entry.feature = ad::constant(Mat::Random(1, cfg.dim));
  entry.origin_pose = origin;
  bank.push(std::move(entry));

  const Pose2 now(origin.x + 3.0, origin.y - 1.0, origin.theta + 0.3, origin.t + 0.2);
  const AlignedMemory aligned = model.align_memory(bank, now, 10.0, false);

  // Oracle: re-anchor at index round(dt * q) = 2 and rotate into the frame.
  const Eigen::Matrix2d r = rotation2d(-now.theta);
  for (int k = 0; k < cfg.k_future; ++k) {
    const Vec2 expect = r * (global.row(k) - global.row(2)).transpose();
    CHECK(std::abs(aligned.trajectories.value()(0, 2 * k) - expect.x()) <= 1e-9);
    CHECK(std::abs(aligned.trajectories.value()(0, 2 * k + 1) - expect.y()) <= 1e-9);
  }
}

TEST_CASE("forward pass is deterministic across identical models")
{
  const ModelConfig cfg = small_config();
  Model a(cfg);
  Model b(cfg);
  const SceneSequence seq = small_sequence(27);
  StreamState sa = a.make_state();
  StreamState sb = b.make_state();
  for (const auto & vs : seq.sub_scenes) {
    const SegmentOutput oa = a.run_segment(vs, sa, 10.0, false);
    const SegmentOutput ob = b.run_segment(vs, sb, 10.0, false);
    CHECK(
      (oa.refined.trajectories.value() - ob.refined.trajectories.value())
        .cwiseAbs()
        .maxCoeff() == 0.0);
    CHECK((oa.refined.probs.value() - ob.refined.probs.value()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("checkpoint round trip preserves parameters and outputs")
{
  const ModelConfig cfg = small_config();
  Model model(cfg);
  // Nudge parameters away from init so the round trip is non-trivial.
  std::mt19937_64 rng(55);
  for (auto & p : model.params().all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      p->value(i) += test::uniform(rng, -0.01, 0.01);
    }
  }

  const auto path = std::filesystem::temp_directory_path() / "rm_test_ckpt.json";
  model.save_checkpoint(path);
  Model loaded = Model::load_checkpoint(path);
  std::filesystem::remove(path);

  REQUIRE(loaded.params().all().size() == model.params().all().size());
  for (size_t i = 0; i < model.params().all().size(); ++i) {
    const auto & pa = model.params().all()[i];
    const auto & pb = loaded.params().all()[i];
    CHECK(pa->name == pb->name);
    CHECK((pa->value - pb->value).cwiseAbs().maxCoeff() == 0.0);
  }

  const SceneSequence seq = small_sequence(61);
  StreamState sa = model.make_state();
  StreamState sb = loaded.make_state();
  const SegmentOutput oa = model.run_segment(seq.sub_scenes[0], sa, 10.0, false);
  const SegmentOutput ob = loaded.run_segment(seq.sub_scenes[0], sb, 10.0, false);
  CHECK(
    (oa.refined.trajectories.value() - ob.refined.trajectories.value()).cwiseAbs().maxCoeff() ==
    0.0);
}

TEST_CASE("backbone and stream gradients pass a finite-difference check")
{
  ModelConfig cfg = small_config();
  Model model(cfg);
  const SceneSequence seq = small_sequence(81);
  const Mat w = Mat::Random(cfg.num_modes * cfg.k_future, 2);

  const auto build = [&] {
    StreamState state = model.make_state();
    Var loss;
    for (int i = 0; i < 2; ++i) {
      const SegmentOutput out = model.run_segment(seq.sub_scenes[i], state, 10.0, true);
      const Var term = ad::add(
        ad::sum_all(ad::mul(out.refined.trajectories, ad::constant(w))),
        ad::sum_all(out.refined.probs));
      loss = loss.defined() ? ad::add(loss, term) : term;
    }
    return loss;
  };
  const auto result = test::check_param_gradients(model.params(), build, 1e-4, 2, 5);
  CAPTURE(result.worst_param);
  CHECK(result.max_rel_err <= 1e-3);
}
