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

#include "realmotion/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace realmotion
{

namespace
{

using ad::Mat;
using ad::Var;

int argmin_final_displacement(
  const Forecast & forecast, const Eigen::Matrix<double, Eigen::Dynamic, 2> & gt)
{
  const Eigen::RowVector2d gt_end = gt.row(gt.rows() - 1);
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int m = 0; m < forecast.num_modes; ++m) {
    const Eigen::RowVector2d end =
      forecast.trajectories.value().row((m + 1) * forecast.k_future - 1);
    const double d = (end - gt_end).norm();
    if (d < best_dist) {
      best_dist = d;
      best = m;
    }
  }
  return best;
}

Var mode_smooth_l1(
  const Forecast & forecast, int mode, const Eigen::Matrix<double, Eigen::Dynamic, 2> & gt)
{
  const Var pred = ad::slice_rows(
    forecast.trajectories, static_cast<Eigen::Index>(mode) * forecast.k_future,
    forecast.k_future);
  const Var residual = ad::sub(pred, ad::constant(gt));
  return ad::mean_all(ad::huber(residual, kSmoothL1Beta));
}

}  // namespace

LossBreakdown compute_losses(
  const Forecast & initial, const Forecast & refined,
  const Eigen::Matrix<double, Eigen::Dynamic, 2> & gt,
  const std::vector<FutureTarget> & aux_gt, int focal_index)
{
  LossBreakdown out;
  out.best_initial_mode = argmin_final_displacement(initial, gt);
  out.best_refined_mode = argmin_final_displacement(refined, gt);

  Var reg = mode_smooth_l1(initial, out.best_initial_mode, gt);

  // Auxiliary single-trajectory loss over non-focal agents with observed
  // futures, weighted by per-frame validity.
  const int k = initial.k_future;
  Var aux_sum = ad::constant_scalar(0.0);
  int aux_count = 0;
  for (size_t a = 0; a < aux_gt.size(); ++a) {
    if (static_cast<int>(a) == focal_index) {
      continue;
    }
    const auto & target = aux_gt[a];
    double valid_count = 0.0;
    Mat weight = Mat::Zero(k, 2);
    for (int f = 0; f < k; ++f) {
      if (target.valid[static_cast<size_t>(f)]) {
        weight.row(f).setOnes();
        valid_count += 2.0;
      }
    }
    if (valid_count == 0.0) {
      continue;
    }
    const Var pred = ad::reshape_rowmajor(
      ad::row(initial.aux, static_cast<Eigen::Index>(a)), k, 2);
    const Var residual = ad::sub(pred, ad::constant(target.points));
    const Var weighted = ad::mul_mask(ad::huber(residual, kSmoothL1Beta), weight);
    aux_sum = ad::add(aux_sum, ad::scale(ad::sum_all(weighted), 1.0 / valid_count));
    ++aux_count;
  }
  if (aux_count > 0) {
    reg = ad::add(reg, ad::scale(aux_sum, 1.0 / aux_count));
  }

  out.reg = reg;
  out.cls = ad::cross_entropy_logits(initial.logits, out.best_initial_mode);
  out.refine = mode_smooth_l1(refined, out.best_refined_mode, gt);
  out.total = ad::add(ad::add(out.reg, out.cls), out.refine);
  if (!std::isfinite(out.total_value())) {
    throw NonFiniteLoss("loss is not finite");
  }
  return out;
}

AdamW::AdamW(ad::ParameterStore & store, double lr, double weight_decay)
: store_(store), lr_(lr), weight_decay_(weight_decay)
{
}

void AdamW::step()
{
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto & p : store_.all()) {
    p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * p->grad;
    p->adam_v = beta2_ * p->adam_v.array() + (1.0 - beta2_) * p->grad.array().square();
    const Mat m_hat = p->adam_m / bc1;
    const Mat v_hat = p->adam_v / bc2;
    p->value.array() -=
      lr_ * (m_hat.array() / (v_hat.array().sqrt() + eps_) + weight_decay_ * p->value.array());
  }
}

namespace
{

struct SequenceLosses
{
  std::vector<LossBreakdown> segments;  // supervised segments only
};

SequenceLosses run_sequence(
  const Model & model, const Scene & scene, const TrainConfig & cfg, bool with_grad)
{
  const SceneSequence seq =
    split_scene(scene, cfg.split_points, scene.focal_ids.front(), cfg.radius);
  const int n_seg = seq.num_segments();
  const int grad_from = std::max(0, n_seg - std::max(1, cfg.gradient_steps));

  StreamState state = model.make_state(seq.focal);
  SequenceLosses out;
  for (int i = 0; i < n_seg; ++i) {
    const bool grad = with_grad && i >= grad_from;
    if (with_grad && i == grad_from) {
      state.detach();
    }
    const SegmentOutput seg =
      model.run_segment(seq.sub_scenes[static_cast<size_t>(i)], state, scene.frequency_hz, grad);
    if (i >= grad_from) {
      out.segments.push_back(compute_losses(
        seg.initial, seg.refined, seq.focal_targets[static_cast<size_t>(i)],
        seq.aux_targets[static_cast<size_t>(i)],
        seq.sub_scenes[static_cast<size_t>(i)].focal_index));
    }
  }
  return out;
}

}  // namespace

double sequence_loss(const Model & model, const Scene & scene, const TrainConfig & cfg)
{
  const SequenceLosses losses = run_sequence(model, scene, cfg, false);
  double total = 0.0;
  for (const auto & l : losses.segments) {
    total += l.total_value();
  }
  return total;
}

std::vector<EpochStats> train(
  Model & model, const std::vector<Scene> & scenes, const TrainConfig & cfg,
  const EpochCallback & on_epoch)
{
  if (scenes.empty()) {
    throw std::invalid_argument("training set is empty");
  }
  AdamW optimizer(model.params(), cfg.learning_rate, cfg.weight_decay);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x7261696e5eedULL);
  std::vector<EpochStats> history;

  std::vector<size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with raw engine draws for cross-platform determinism.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng() % i);
      std::swap(order[i - 1], order[j]);
    }

    EpochStats stats;
    stats.epoch = epoch;
    size_t loss_count = 0;
    size_t in_batch = 0;
    model.params().zero_grad();
    for (size_t si = 0; si < order.size(); ++si) {
      const SequenceLosses losses = run_sequence(model, scenes[order[si]], cfg, true);
      ad::Var scene_total;
      for (const auto & l : losses.segments) {
        stats.mean_total += l.total_value();
        stats.mean_reg += l.reg_value();
        stats.mean_cls += l.cls_value();
        stats.mean_refine += l.refine_value();
        scene_total = scene_total.defined() ? ad::add(scene_total, l.total) : l.total;
        ++loss_count;
      }
      ad::backward(ad::scale(scene_total, 1.0 / cfg.batch_size));
      ++in_batch;
      if (in_batch == static_cast<size_t>(cfg.batch_size) || si + 1 == order.size()) {
        optimizer.step();
        model.params().zero_grad();
        in_batch = 0;
      }
    }
    const double denom = static_cast<double>(std::max<size_t>(1, loss_count));
    stats.mean_total /= denom;
    stats.mean_reg /= denom;
    stats.mean_cls /= denom;
    stats.mean_refine /= denom;
    history.push_back(stats);
    if (on_epoch) {
      on_epoch(stats);
    }
  }
  return history;
}

}  // namespace realmotion
