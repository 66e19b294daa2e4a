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

#include <random>

#include "realmotion/scene.hpp"
#include "realmotion/world.hpp"
#include "test_support.hpp"

using namespace realmotion;
using test::uniform;

namespace
{

// A fully valid straight-line track.
AgentTrack make_track(const std::string & id, Vec2 start, Vec2 velocity, int frames, double q)
{
  AgentTrack track;
  track.id = id;
  for (int k = 0; k < frames; ++k) {
    AgentState st;
    st.position = start + velocity * (k / q);
    st.velocity = velocity;
    st.heading = std::atan2(velocity.y(), velocity.x());
    st.valid = true;
    track.states.push_back(st);
  }
  return track;
}

Scene make_scene()
{
  Scene scene;
  scene.t_hist = 10;
  scene.t_fut = 5;
  scene.frequency_hz = 10.0;
  scene.tracks.push_back(make_track("focal", {0.0, 0.0}, {5.0, 0.0}, 15, 10.0));
  scene.focal_ids = {"focal"};
  LanePolyline lane;
  lane.id = "lane";
  lane.points.resize(2, 2);
  lane.points << 0.0, 0.0, 20.0, 0.0;
  scene.lanes.push_back(lane);
  return scene;
}

// Applies a rigid motion to every element of a scene.
Scene transform_scene(const Scene & scene, double theta, Vec2 shift)
{
  Scene out = scene;
  const Eigen::Matrix2d r = rotation2d(theta);
  for (auto & track : out.tracks) {
    for (auto & st : track.states) {
      st.position = r * st.position + shift;
      st.velocity = r * st.velocity;
      st.acceleration = r * st.acceleration;
      st.heading = wrap_angle(st.heading + theta);
    }
  }
  for (auto & lane : out.lanes) {
    for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
      lane.points.row(i) = (r * lane.points.row(i).transpose() + shift).transpose();
    }
  }
  return out;
}

}  // namespace

TEST_CASE("resample_polyline straight segment")
{
  Eigen::Matrix<double, Eigen::Dynamic, 2> pts(2, 2);
  pts << 0.0, 0.0, 0.0, 10.0;
  const auto out = resample_polyline(pts, 5);
  REQUIRE(out.rows() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(out(i, 0) == doctest::Approx(0.0));
    CHECK(out(i, 1) == doctest::Approx(2.5 * i));
  }
}

TEST_CASE("resample_polyline endpoints only for P=2")
{
  Eigen::Matrix<double, Eigen::Dynamic, 2> pts(3, 2);
  pts << 0.0, 0.0, 1.0, 1.0, 4.0, 0.0;
  const auto out = resample_polyline(pts, 2);
  REQUIRE(out.rows() == 2);
  CHECK(out.row(0) == pts.row(0));
  CHECK(out.row(1) == pts.row(2));
}

TEST_CASE("resample_polyline rejects degenerate input")
{
  Eigen::Matrix<double, Eigen::Dynamic, 2> one(1, 2);
  one << 0.0, 0.0;
  CHECK_THROWS_AS(resample_polyline(one, 5), DegeneratePolyline);
  Eigen::Matrix<double, Eigen::Dynamic, 2> dup(2, 2);
  dup << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(resample_polyline(dup, 5), DegeneratePolyline);
}

TEST_CASE("resample_polyline L-shape against dense interpolation oracle")
{
  // L: (0,0) -> (4,0) -> (4,3), total length 7.
  Eigen::Matrix<double, Eigen::Dynamic, 2> pts(3, 2);
  pts << 0.0, 0.0, 4.0, 0.0, 4.0, 3.0;
  const int p = 7;
  const auto out = resample_polyline(pts, p);

  // Dense 10k-sample arc-length oracle.
  const int dense_n = 10000;
  Eigen::Matrix<double, Eigen::Dynamic, 2> dense(dense_n, 2);
  for (int i = 0; i < dense_n; ++i) {
    const double s = 7.0 * i / (dense_n - 1);
    if (s <= 4.0) {
      dense.row(i) << s, 0.0;
    } else {
      dense.row(i) << 4.0, s - 4.0;
    }
  }
  for (int k = 0; k < p; ++k) {
    const double s = 7.0 * k / (p - 1);
    const int di = static_cast<int>(std::llround(s / 7.0 * (dense_n - 1)));
    CHECK((out.row(k) - dense.row(di)).norm() <= 1e-3);
  }
}

TEST_CASE("vectorize normalizes the focal agent to the origin")
{
  const Scene scene = make_scene();
  const VectorizedScene vs = vectorize(scene, "focal", kDefaultRadius);
  REQUIRE(vs.num_agents() == 1);
  CHECK(vs.focal_index == 0);
  const auto & block = vs.agents[0];
  const Eigen::Index last = block.rows() - 1;
  CHECK(block(last, 0) == doctest::Approx(0.0));  // current position x
  CHECK(block(last, 1) == doctest::Approx(0.0));  // current position y
  CHECK(block(last, 2) == doctest::Approx(1.0));  // cos(local heading)
  CHECK(block(last, 3) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(block(last, 8) == doctest::Approx(1.0));  // valid flag
}

TEST_CASE("vectorize applies the inclusion radius at the current frame")
{
  Scene scene = make_scene();
  const Vec2 focal_now = scene.tracks[0].states[scene.t_hist - 1].position;
  const double radius = 30.0;
  scene.tracks.push_back(
    make_track("near", focal_now + Vec2(radius - 1.0, 0.0), {1.0, 0.0}, 15, 10.0));
  scene.tracks.push_back(
    make_track("far", focal_now + Vec2(radius + 1.0, 0.0), {1.0, 0.0}, 15, 10.0));

  const VectorizedScene vs = vectorize(scene, "focal", radius, scene.t_hist - 1, scene.t_hist);
  REQUIRE(vs.num_agents() == 2);
  CHECK(vs.agent_ids[1] == "near");
}

TEST_CASE("vectorize rejects a focal agent with invalid current frame")
{
  Scene scene = make_scene();
  scene.tracks[0].states[scene.t_hist - 1].valid = false;
  CHECK_THROWS_AS(vectorize(scene, "focal", kDefaultRadius), FocalInvalid);
}

TEST_CASE("vectorize is equivariant under rigid motions of the scene")
{
  const WorldConfig cfg{.n_agents = 5, .n_lanes = 6, .seed = 21};
  const Scene scene = generate_scene(cfg);
  const Scene moved = transform_scene(scene, 1.1, Vec2(40.0, -25.0));

  const VectorizedScene a = vectorize(scene, "agent_0", kDefaultRadius);
  const VectorizedScene b = vectorize(moved, "agent_0", kDefaultRadius);
  REQUIRE(a.num_agents() == b.num_agents());
  REQUIRE(a.num_polylines() == b.num_polylines());
  for (int i = 0; i < a.num_agents(); ++i) {
    CHECK((a.agents[i] - b.agents[i]).cwiseAbs().maxCoeff() <= 1e-9);
  }
  for (int i = 0; i < a.num_polylines(); ++i) {
    CHECK((a.map[i] - b.map[i]).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("padded rows are zero and masked; unmasked rows are finite")
{
  const WorldConfig cfg{.n_agents = 4, .n_lanes = 5, .seed = 3};
  const Scene scene = generate_scene(cfg);
  const VectorizedScene vs =
    vectorize(scene, "agent_0", kDefaultRadius, scene.t_hist - 1, scene.t_hist, 12, 12);
  REQUIRE(vs.num_agents() == 12);
  REQUIRE(vs.num_polylines() == 12);
  for (int i = 0; i < 12; ++i) {
    if (vs.agent_mask[i] == 0) {
      CHECK(vs.agents[i].cwiseAbs().maxCoeff() == 0.0);
    } else {
      CHECK(vs.agents[i].allFinite());
    }
    if (vs.map_mask[i] == 0) {
      CHECK(vs.map[i].cwiseAbs().maxCoeff() == 0.0);
    } else {
      CHECK(vs.map[i].allFinite());
    }
  }
}
