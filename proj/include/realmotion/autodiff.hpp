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

#ifndef REALMOTION__AUTODIFF_HPP_
#define REALMOTION__AUTODIFF_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace realmotion::ad
{

using Mat = Eigen::MatrixXd;

struct ShapeMismatch : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// One node of the dynamically built computation graph. Nodes are created in
/// program order; backward() replays them in reverse creation order.
struct Node
{
  Mat value;
  Mat grad;  // allocated on first contribution
  bool requires_grad = false;
  uint64_t order = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backprop;  // pushes this->grad into parents

  void accumulate(const Mat & g)
  {
    if (grad.size() == 0) {
      grad = Mat::Zero(value.rows(), value.cols());
    }
    grad += g;
  }
};

using NodePtr = std::shared_ptr<Node>;

/// Value handle over a graph node.
class Var
{
public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Mat & value() const { return node_->value; }
  const Mat & grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  const NodePtr & node() const { return node_; }

  /// Value-equal copy severed from the graph.
  Var detach() const;

private:
  NodePtr node_;
};

/// A named, trainable tensor with optimizer slots.
struct Parameter
{
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
};

using ParamPtr = std::shared_ptr<Parameter>;

/// Owns the parameters of a model in registration order.
class ParameterStore
{
public:
  ParamPtr create(const std::string & name, Eigen::Index rows, Eigen::Index cols);
  ParamPtr create_xavier(
    const std::string & name, Eigen::Index rows, Eigen::Index cols, std::mt19937_64 & rng);

  const std::vector<ParamPtr> & all() const { return params_; }
  void zero_grad();
  size_t count() const;  // total scalar count

private:
  std::vector<ParamPtr> params_;
};

// Graph construction ------------------------------------------------------

Var constant(Mat value);
Var constant_scalar(double value);
/// Leaf bound to a parameter; when grad_enabled the backward pass
/// accumulates into the parameter's grad slot.
Var param_var(const ParamPtr & p, bool grad_enabled);

Var add(const Var & a, const Var & b);
Var sub(const Var & a, const Var & b);
Var mul(const Var & a, const Var & b);  // elementwise
Var scale(const Var & a, double s);
Var matmul(const Var & a, const Var & b);
Var transpose(const Var & a);
Var relu(const Var & a);
Var add_row_broadcast(const Var & x, const Var & row);
Var sub_row_broadcast(const Var & x, const Var & row);
Var mul_row_broadcast(const Var & x, const Var & row);
Var softmax_rows(const Var & a);
Var layernorm_rows(const Var & a, double eps = 1e-5);
Var concat_rows(const std::vector<Var> & parts);
Var concat_cols(const std::vector<Var> & parts);
Var slice_rows(const Var & a, Eigen::Index r0, Eigen::Index n);
Var slice_cols(const Var & a, Eigen::Index c0, Eigen::Index n);
Var row(const Var & a, Eigen::Index r);
/// Row-major reshape: element (i, j) maps to flat index i * cols + j.
Var reshape_rowmajor(const Var & a, Eigen::Index rows, Eigen::Index cols);
Var pick(const Var & a, Eigen::Index r, Eigen::Index c);  // 1x1
/// Column-wise max over rows (1 x C); ties route gradient to the first
/// attaining row.
Var max_rows(const Var & a);
Var sum_all(const Var & a);        // 1x1
Var mean_all(const Var & a);       // 1x1
Var mul_mask(const Var & a, const Mat & mask);
Var huber(const Var & a, double beta);  // elementwise smooth-L1 value
Var logsumexp_row(const Var & a);  // a is 1xK -> 1x1

/// Cross entropy of a 1xK logit row against a target index.
Var cross_entropy_logits(const Var & logits, Eigen::Index target);

/// Reverse-mode sweep from a 1x1 loss node.
void backward(const Var & loss);

}  // namespace realmotion::ad

#endif  // REALMOTION__AUTODIFF_HPP_
