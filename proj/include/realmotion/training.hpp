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

#ifndef REALMOTION__TRAINING_HPP_
#define REALMOTION__TRAINING_HPP_

#include <functional>
#include <string>
#include <vector>

#include "realmotion/model.hpp"
#include "realmotion/sequencer.hpp"

namespace realmotion
{

inline constexpr double kSmoothL1Beta = 1.0;

struct NonFiniteLoss : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Per-term losses; total = reg + cls + refine with equal weights.
struct LossBreakdown
{
  ad::Var reg;
  ad::Var cls;
  ad::Var refine;
  ad::Var total;
  int best_initial_mode = 0;
  int best_refined_mode = 0;

  double reg_value() const { return reg.value()(0, 0); }
  double cls_value() const { return cls.value()(0, 0); }
  double refine_value() const { return refine.value()(0, 0); }
  double total_value() const { return total.value()(0, 0); }
};

/// Winner-takes-all losses for one segment. The best mode is the argmin of
/// final displacement (ties to the lowest index), chosen separately for the
/// initial and refined heads. Auxiliary single-trajectory supervision of
/// non-focal agents folds into the regression term.
LossBreakdown compute_losses(
  const Forecast & initial, const Forecast & refined,
  const Eigen::Matrix<double, Eigen::Dynamic, 2> & gt,
  const std::vector<FutureTarget> & aux_gt, int focal_index);

struct TrainConfig
{
  int epochs = 8;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  int gradient_steps = 3;  // trailing segments that receive backprop
  std::vector<int> split_points{30, 40, 50};
  double radius = kDefaultRadius;
  uint64_t seed = 0;
};

/// Decoupled-weight-decay Adam over a parameter store.
class AdamW
{
public:
  AdamW(ad::ParameterStore & store, double lr, double weight_decay);
  void step();

private:
  ad::ParameterStore & store_;
  double lr_;
  double weight_decay_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

struct EpochStats
{
  int epoch = 0;
  double mean_total = 0.0;
  double mean_reg = 0.0;
  double mean_cls = 0.0;
  double mean_refine = 0.0;
};

using EpochCallback = std::function<void(const EpochStats &)>;

/// Multi-segment training over a scene set. Segments outside the gradient
/// window run without gradient tracking and unsupervised; stream state is
/// detached at the window boundary. Throws NonFiniteLoss on divergence.
std::vector<EpochStats> train(
  Model & model, const std::vector<Scene> & scenes, const TrainConfig & cfg,
  const EpochCallback & on_epoch = nullptr);

/// Total training loss of one scene sequence without updating parameters.
double sequence_loss(const Model & model, const Scene & scene, const TrainConfig & cfg);

}  // namespace realmotion

#endif  // REALMOTION__TRAINING_HPP_
