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

#ifndef REALMOTION__GEOMETRY_HPP_
#define REALMOTION__GEOMETRY_HPP_

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

namespace realmotion
{

using Vec2 = Eigen::Vector2d;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

/// 2D rotation matrix for a counter-clockwise rotation by theta.
Eigen::Matrix2d rotation2d(double theta);

/// A timestamped SE(2) pose. theta is kept in (-pi, pi].
struct Pose2
{
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double t = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_, double t_ = 0.0)
  : x(x_), y(y_), theta(wrap_angle(theta_)), t(t_)
  {
  }

  Vec2 position() const { return Vec2(x, y); }
};

/// Relative motion between two global poses: (dx, dy) is `from`'s origin
/// expressed in `to`'s local frame, dtheta = wrap(from.theta - to.theta),
/// dt = to.t - from.t.
struct RelativeMotion
{
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  double dt = 0.0;
};

RelativeMotion relative_motion(const Pose2 & from, const Pose2 & to);

struct IndexOutOfRange : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct FrameMismatch : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Local frame tag: the pose defining the frame plus the global anchor point
/// subtracted before rotation. For model outputs the anchor is the pose
/// position; for re-projected memory trajectories it is the origin waypoint.
struct LocalFrame
{
  Pose2 pose;
  Vec2 anchor;

  explicit LocalFrame(const Pose2 & p) : pose(p), anchor(p.x, p.y) {}
  LocalFrame(const Pose2 & p, const Vec2 & a) : pose(p), anchor(a) {}
};

/// An ordered 2D point sequence sampled at a fixed frequency, tagged with the
/// frame it lives in (global when `frame` is empty).
struct Trajectory
{
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;  // one point per row
  double frequency_hz = 10.0;
  std::optional<LocalFrame> frame;  // nullopt = global

  bool is_global() const { return !frame.has_value(); }
  Eigen::Index size() const { return points.rows(); }
};

/// Re-projects a global trajectory into the local frame of `origin_pose`.
/// The origin waypoint is y[round(dt * q)]; points become
/// R(-theta) * (p - origin). Throws IndexOutOfRange when the origin index
/// falls outside the trajectory.
Trajectory transform_trajectory(
  const Trajectory & y, const Pose2 & origin_pose, double dt, double q);

/// Exact inverse of transform_trajectory for the frame recorded in `y`.
/// Throws FrameMismatch if `y` is already global.
Trajectory inverse_transform_trajectory(const Trajectory & y, const Pose2 & origin_pose);

}  // namespace realmotion

#endif  // REALMOTION__GEOMETRY_HPP_
