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

#ifndef REALMOTION__TESTS__TEST_SUPPORT_HPP_
#define REALMOTION__TESTS__TEST_SUPPORT_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "realmotion/autodiff.hpp"
#include "realmotion/geometry.hpp"

namespace realmotion::test
{

inline double uniform(std::mt19937_64 & rng, double lo, double hi)
{
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline Pose2 random_pose(std::mt19937_64 & rng, double span = 50.0)
{
  return Pose2(
    uniform(rng, -span, span), uniform(rng, -span, span), uniform(rng, -M_PI, M_PI),
    uniform(rng, 0.0, 10.0));
}

/// 3x3 homogeneous matrix of an SE(2) pose.
inline Eigen::Matrix3d pose_matrix(const Pose2 & p)
{
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h.topLeftCorner<2, 2>() = rotation2d(p.theta);
  h(0, 2) = p.x;
  h(1, 2) = p.y;
  return h;
}

/// Homogeneous matrix of a relative motion (rotation dtheta, translation
/// dx, dy).
inline Eigen::Matrix3d motion_matrix(const RelativeMotion & m)
{
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h.topLeftCorner<2, 2>() = rotation2d(m.dtheta);
  h(0, 2) = m.dx;
  h(1, 2) = m.dy;
  return h;
}

struct GradCheckResult
{
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t checked = 0;
};

/// Central finite-difference check of analytic parameter gradients.
/// `build` must construct the full forward graph from current parameter
/// values and return a scalar loss Var. Samples up to
/// `samples_per_param` entries of every parameter.
inline GradCheckResult check_param_gradients(
  ad::ParameterStore & store, const std::function<ad::Var()> & build,
  double step = 1e-4, int samples_per_param = 6, uint64_t seed = 0)
{
  store.zero_grad();
  ad::Var loss = build();
  ad::backward(loss);

  std::mt19937_64 rng(seed ^ 0xfd9e7aULL);
  GradCheckResult result;
  for (const auto & p : store.all()) {
    const Eigen::Index total = p->value.size();
    std::vector<Eigen::Index> picks;
    if (total <= samples_per_param) {
      for (Eigen::Index i = 0; i < total; ++i) picks.push_back(i);
    } else {
      for (int s = 0; s < samples_per_param; ++s) {
        picks.push_back(static_cast<Eigen::Index>(rng() % static_cast<uint64_t>(total)));
      }
    }
    for (const Eigen::Index flat : picks) {
      const Eigen::Index r = flat % p->value.rows();
      const Eigen::Index c = flat / p->value.rows();
      const double saved = p->value(r, c);
      p->value(r, c) = saved + step;
      const double up = build().value()(0, 0);
      p->value(r, c) = saved - step;
      const double down = build().value()(0, 0);
      p->value(r, c) = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad(r, c);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
      const double rel = std::abs(numeric - analytic) / denom;
      ++result.checked;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = p->name;
      }
    }
  }
  return result;
}

}  // namespace realmotion::test

#endif  // REALMOTION__TESTS__TEST_SUPPORT_HPP_
