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

#include "realmotion/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace realmotion::ad
{

namespace
{

std::atomic<uint64_t> g_order{0};

NodePtr make_node(Mat value, std::vector<NodePtr> parents)
{
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->order = g_order.fetch_add(1);
  node->requires_grad = false;
  for (const auto & p : parents) {
    if (p->requires_grad) {
      node->requires_grad = true;
    }
  }
  node->parents = std::move(parents);
  return node;
}

void check_same_shape(const Var & a, const Var & b, const char * op)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(op) + ": operand shapes differ");
  }
}

}  // namespace

Var Var::detach() const { return constant(node_->value); }

ParamPtr ParameterStore::create(const std::string & name, Eigen::Index rows, Eigen::Index cols)
{
  auto p = std::make_shared<Parameter>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  p->grad = Mat::Zero(rows, cols);
  p->adam_m = Mat::Zero(rows, cols);
  p->adam_v = Mat::Zero(rows, cols);
  params_.push_back(p);
  return p;
}

ParamPtr ParameterStore::create_xavier(
  const std::string & name, Eigen::Index rows, Eigen::Index cols, std::mt19937_64 & rng)
{
  auto p = create(name, rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      p->value(i, j) = limit * (2.0 * u - 1.0);
    }
  }
  return p;
}

void ParameterStore::zero_grad()
{
  for (auto & p : params_) {
    p->grad.setZero();
  }
}

size_t ParameterStore::count() const
{
  size_t n = 0;
  for (const auto & p : params_) {
    n += static_cast<size_t>(p->value.size());
  }
  return n;
}

Var constant(Mat value)
{
  auto node = make_node(std::move(value), {});
  return Var(node);
}

Var constant_scalar(double value)
{
  Mat m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var param_var(const ParamPtr & p, bool grad_enabled)
{
  auto node = make_node(p->value, {});
  node->requires_grad = grad_enabled;
  if (grad_enabled) {
    ParamPtr captured = p;
    node->backprop = [captured](Node & self) { captured->grad += self.grad; };
  }
  return Var(node);
}

Var add(const Var & a, const Var & b)
{
  check_same_shape(a, b, "add");
  auto node = make_node(a.value() + b.value(), {a.node(), b.node()});
  node->backprop = [](Node & self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(self.grad);
  };
  return Var(node);
}

Var sub(const Var & a, const Var & b)
{
  check_same_shape(a, b, "sub");
  auto node = make_node(a.value() - b.value(), {a.node(), b.node()});
  node->backprop = [](Node & self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(-self.grad);
  };
  return Var(node);
}

Var mul(const Var & a, const Var & b)
{
  check_same_shape(a, b, "mul");
  auto node = make_node(a.value().cwiseProduct(b.value()), {a.node(), b.node()});
  node->backprop = [](Node & self) {
    if (self.parents[0]->requires_grad) {
      self.parents[0]->accumulate(self.grad.cwiseProduct(self.parents[1]->value));
    }
    if (self.parents[1]->requires_grad) {
      self.parents[1]->accumulate(self.grad.cwiseProduct(self.parents[0]->value));
    }
  };
  return Var(node);
}

Var scale(const Var & a, double s)
{
  auto node = make_node(a.value() * s, {a.node()});
  node->backprop = [s](Node & self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad * s);
  };
  return Var(node);
}

Var matmul(const Var & a, const Var & b)
{
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul: inner dimensions differ");
  }
  auto node = make_node(a.value() * b.value(), {a.node(), b.node()});
  node->backprop = [](Node & self) {
    if (self.parents[0]->requires_grad) {
      self.parents[0]->accumulate(self.grad * self.parents[1]->value.transpose());
    }
    if (self.parents[1]->requires_grad) {
      self.parents[1]->accumulate(self.parents[0]->value.transpose() * self.grad);
    }
  };
  return Var(node);
}

Var transpose(const Var & a)
{
  auto node = make_node(a.value().transpose(), {a.node()});
  node->backprop = [](Node & self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad.transpose());
  };
  return Var(node);
}

Var relu(const Var & a)
{
  auto node = make_node(a.value().cwiseMax(0.0), {a.node()});
  node->backprop = [](Node & self) {
    if (self.parents[0]->requires_grad) {
      const Mat gate = (self.parents[0]->value.array() > 0.0).cast<double>();
      self.parents[0]->accumulate(self.grad.cwiseProduct(gate));
    }
  };
  return Var(node);
}

namespace
{

Var row_broadcast_op(const Var & x, const Var & r, double sign_row, bool multiply)
{
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw ShapeMismatch("row broadcast: row operand must be 1 x cols(x)");
  }
  Mat out = x.value();
  if (multiply) {
    out.array().rowwise() *= r.value().row(0).array();
  } else {
    out.array().rowwise() += sign_row * r.value().row(0).array();
  }
  auto node = make_node(std::move(out), {x.node(), r.node()});
  node->backprop = [sign_row, multiply](Node & self) {
    Node & xp = *self.parents[0];
    Node & rp = *self.parents[1];
    if (multiply) {
      if (xp.requires_grad) {
        Mat gx = self.grad;
        gx.array().rowwise() *= rp.value.row(0).array();
        xp.accumulate(gx);
      }
      if (rp.requires_grad) {
        rp.accumulate(self.grad.cwiseProduct(xp.value).colwise().sum());
      }
    } else {
      if (xp.requires_grad) xp.accumulate(self.grad);
      if (rp.requires_grad) rp.accumulate(sign_row * self.grad.colwise().sum());
    }
  };
  return Var(node);
}

}  // namespace

Var add_row_broadcast(const Var & x, const Var & r) { return row_broadcast_op(x, r, 1.0, false); }
Var sub_row_broadcast(const Var & x, const Var & r) { return row_broadcast_op(x, r, -1.0, false); }
Var mul_row_broadcast(const Var & x, const Var & r) { return row_broadcast_op(x, r, 1.0, true); }

Var softmax_rows(const Var & a)
{
  Mat y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  auto node = make_node(std::move(y), {a.node()});
  node->backprop = [](Node & self) {
    if (!self.parents[0]->requires_grad) return;
    Mat gx(self.value.rows(), self.value.cols());
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      const double dot = self.grad.row(i).dot(self.value.row(i));
      gx.row(i) = (self.grad.row(i).array() - dot) * self.value.row(i).array();
    }
    self.parents[0]->accumulate(gx);
  };
  return Var(node);
}

Var layernorm_rows(const Var & a, double eps)
{
  const Eigen::Index d = a.cols();
  Mat y(a.rows(), d);
  Mat inv_std(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mu = a.value().row(i).mean();
    const Eigen::RowVectorXd centered = a.value().row(i).array() - mu;
    const double var = centered.squaredNorm() / static_cast<double>(d);
    inv_std(i, 0) = 1.0 / std::sqrt(var + eps);
    y.row(i) = centered * inv_std(i, 0);
  }
  auto node = make_node(std::move(y), {a.node()});
  node->backprop = [inv_std, d](Node & self) {
    if (!self.parents[0]->requires_grad) return;
    Mat gx(self.value.rows(), d);
    const double dn = static_cast<double>(d);
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      const Eigen::RowVectorXd g = self.grad.row(i);
      const Eigen::RowVectorXd yh = self.value.row(i);
      const double g_mean = g.mean();
      const double gy_mean = g.dot(yh) / dn;
      gx.row(i) = (g.array() - g_mean - yh.array() * gy_mean) * inv_std(i, 0);
    }
    self.parents[0]->accumulate(gx);
  };
  return Var(node);
}

Var concat_rows(const std::vector<Var> & parts)
{
  if (parts.empty()) {
    throw ShapeMismatch("concat_rows: empty input");
  }
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<NodePtr> parents;
  for (const auto & p : parts) {
    if (p.cols() != cols) {
      throw ShapeMismatch("concat_rows: column counts differ");
    }
    rows += p.rows();
    parents.push_back(p.node());
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (const auto & p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  auto node = make_node(std::move(out), std::move(parents));
  node->backprop = [](Node & self) {
    Eigen::Index r = 0;
    for (auto & p : self.parents) {
      if (p->requires_grad) {
        p->accumulate(self.grad.middleRows(r, p->value.rows()));
      }
      r += p->value.rows();
    }
  };
  return Var(node);
}

Var concat_cols(const std::vector<Var> & parts)
{
  if (parts.empty()) {
    throw ShapeMismatch("concat_cols: empty input");
  }
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<NodePtr> parents;
  for (const auto & p : parts) {
    if (p.rows() != rows) {
      throw ShapeMismatch("concat_cols: row counts differ");
    }
    cols += p.cols();
    parents.push_back(p.node());
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (const auto & p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  auto node = make_node(std::move(out), std::move(parents));
  node->backprop = [](Node & self) {
    Eigen::Index c = 0;
    for (auto & p : self.parents) {
      if (p->requires_grad) {
        p->accumulate(self.grad.middleCols(c, p->value.cols()));
      }
      c += p->value.cols();
    }
  };
  return Var(node);
}

Var slice_rows(const Var & a, Eigen::Index r0, Eigen::Index n)
{
  if (r0 < 0 || n < 0 || r0 + n > a.rows()) {
    throw ShapeMismatch("slice_rows: range out of bounds");
  }
  auto node = make_node(a.value().middleRows(r0, n), {a.node()});
  node->backprop = [r0, n](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    g.middleRows(r0, n) = self.grad;
    p.accumulate(g);
  };
  return Var(node);
}

Var slice_cols(const Var & a, Eigen::Index c0, Eigen::Index n)
{
  if (c0 < 0 || n < 0 || c0 + n > a.cols()) {
    throw ShapeMismatch("slice_cols: range out of bounds");
  }
  auto node = make_node(a.value().middleCols(c0, n), {a.node()});
  node->backprop = [c0, n](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    g.middleCols(c0, n) = self.grad;
    p.accumulate(g);
  };
  return Var(node);
}

Var row(const Var & a, Eigen::Index r) { return slice_rows(a, r, 1); }

Var reshape_rowmajor(const Var & a, Eigen::Index rows, Eigen::Index cols)
{
  if (rows * cols != a.rows() * a.cols()) {
    throw ShapeMismatch("reshape_rowmajor: element count differs");
  }
  const Eigen::Index in_cols = a.cols();
  Mat out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const Eigen::Index flat = i * cols + j;
      out(i, j) = a.value()(flat / in_cols, flat % in_cols);
    }
  }
  auto node = make_node(std::move(out), {a.node()});
  node->backprop = [in_cols](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    const Eigen::Index cols = self.value.cols();
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        const Eigen::Index flat = i * cols + j;
        g(flat / in_cols, flat % in_cols) += self.grad(i, j);
      }
    }
    p.accumulate(g);
  };
  return Var(node);
}

Var pick(const Var & a, Eigen::Index r, Eigen::Index c)
{
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) {
    throw ShapeMismatch("pick: index out of bounds");
  }
  Mat out(1, 1);
  out(0, 0) = a.value()(r, c);
  auto node = make_node(std::move(out), {a.node()});
  node->backprop = [r, c](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    g(r, c) = self.grad(0, 0);
    p.accumulate(g);
  };
  return Var(node);
}

Var max_rows(const Var & a)
{
  Mat out(1, a.cols());
  std::vector<Eigen::Index> argmax(static_cast<size_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::Index best = 0;
    a.value().col(j).maxCoeff(&best);
    argmax[static_cast<size_t>(j)] = best;
    out(0, j) = a.value()(best, j);
  }
  auto node = make_node(std::move(out), {a.node()});
  node->backprop = [argmax](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat g = Mat::Zero(p.value.rows(), p.value.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      g(argmax[static_cast<size_t>(j)], j) = self.grad(0, j);
    }
    p.accumulate(g);
  };
  return Var(node);
}

Var sum_all(const Var & a)
{
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  auto node = make_node(std::move(out), {a.node()});
  node->backprop = [](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    p.accumulate(Mat::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  };
  return Var(node);
}

Var mean_all(const Var & a)
{
  return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Var mul_mask(const Var & a, const Mat & mask)
{
  return mul(a, constant(mask));
}

Var huber(const Var & a, double beta)
{
  Mat out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double x = std::abs(a.value()(i, j));
      out(i, j) = x < beta ? 0.5 * x * x / beta : x - 0.5 * beta;
    }
  }
  auto node = make_node(std::move(out), {a.node()});
  node->backprop = [beta](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    Mat g(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        const double x = p.value(i, j);
        g(i, j) = std::abs(x) < beta ? x / beta : (x > 0.0 ? 1.0 : -1.0);
      }
    }
    p.accumulate(self.grad.cwiseProduct(g));
  };
  return Var(node);
}

Var logsumexp_row(const Var & a)
{
  if (a.rows() != 1) {
    throw ShapeMismatch("logsumexp_row: expects a single row");
  }
  const double m = a.value().maxCoeff();
  const double lse = m + std::log((a.value().array() - m).exp().sum());
  Mat out(1, 1);
  out(0, 0) = lse;
  auto node = make_node(std::move(out), {a.node()});
  node->backprop = [lse](Node & self) {
    Node & p = *self.parents[0];
    if (!p.requires_grad) return;
    const Mat soft = (p.value.array() - lse).exp();
    p.accumulate(self.grad(0, 0) * soft);
  };
  return Var(node);
}

Var cross_entropy_logits(const Var & logits, Eigen::Index target)
{
  return sub(logsumexp_row(logits), pick(logits, 0, target));
}

void backward(const Var & loss)
{
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeMismatch("backward: loss must be a 1x1 value");
  }
  if (!loss.requires_grad()) {
    return;
  }

  // Reachable requires-grad subgraph, iterative DFS.
  std::vector<Node *> topo;
  std::unordered_set<Node *> seen;
  std::vector<Node *> stack{loss.node().get()};
  while (!stack.empty()) {
    Node * n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) {
      continue;
    }
    topo.push_back(n);
    for (const auto & p : n->parents) {
      stack.push_back(p.get());
    }
  }
  std::sort(topo.begin(), topo.end(), [](Node * a, Node * b) { return a->order > b->order; });

  loss.node()->accumulate(Mat::Ones(1, 1));
  for (Node * n : topo) {
    if (n->backprop && n->grad.size() != 0) {
      n->backprop(*n);
    }
  }
}

}  // namespace realmotion::ad
