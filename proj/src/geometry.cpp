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

#include "realmotion/geometry.hpp"

#include <cmath>

namespace realmotion
{

double wrap_angle(double theta)
{
  double a = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (a <= 0.0) {
    a += 2.0 * M_PI;
  }
  return a - M_PI;
}

Eigen::Matrix2d rotation2d(double theta)
{
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

RelativeMotion relative_motion(const Pose2 & from, const Pose2 & to)
{
  const Vec2 d = rotation2d(-to.theta) * (from.position() - to.position());
  RelativeMotion m;
  m.dx = d.x();
  m.dy = d.y();
  m.dtheta = wrap_angle(from.theta - to.theta);
  m.dt = to.t - from.t;
  return m;
}

Trajectory transform_trajectory(
  const Trajectory & y, const Pose2 & origin_pose, double dt, double q)
{
  const auto idx = static_cast<Eigen::Index>(std::llround(dt * q));
  if (idx < 0 || idx >= y.size()) {
    throw IndexOutOfRange("trajectory origin index out of range");
  }
  const Vec2 origin = y.points.row(idx).transpose();
  const Eigen::Matrix2d r = rotation2d(-origin_pose.theta);

  Trajectory out;
  out.frequency_hz = y.frequency_hz;
  out.points.resize(y.size(), 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out.points.row(i) = (r * (y.points.row(i).transpose() - origin)).transpose();
  }
  out.frame = LocalFrame(origin_pose, origin);
  return out;
}

Trajectory inverse_transform_trajectory(const Trajectory & y, const Pose2 & origin_pose)
{
  if (y.is_global()) {
    throw FrameMismatch("trajectory is already in the global frame");
  }
  const Eigen::Matrix2d r = rotation2d(origin_pose.theta);
  const Vec2 anchor = y.frame->anchor;

  Trajectory out;
  out.frequency_hz = y.frequency_hz;
  out.points.resize(y.size(), 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out.points.row(i) = (r * y.points.row(i).transpose() + anchor).transpose();
  }
  out.frame.reset();
  return out;
}

}  // namespace realmotion
