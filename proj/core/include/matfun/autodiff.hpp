#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "matfun/random.hpp"

namespace matfun::nn {

// Row-major so that a batch of samples (or tokens) is a block of rows.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const;
  [[nodiscard]] int id() const { return id_; }
  [[nodiscard]] Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records every operation of one forward pass; backward() walks it in reverse
// and accumulates gradients into the Parameters that were read with param().
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var constant(Tensor value);
  Var param(Parameter& p);
  // The closure is dropped when no parent needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward back);

  void backward(Var root);

  [[nodiscard]] const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].val(); }
  [[nodiscard]] const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  [[nodiscard]] bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  // Zero-initialised on first touch.
  Tensor& grad_slot(int id);
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward back;
    Parameter* param = nullptr;
    bool needs_grad = false;

    // Parameters are read in place rather than copied onto the tape.
    [[nodiscard]] const Tensor& val() const { return param ? param->value : value; }
  };
  std::deque<Node> nodes_;
};

Var matmul(Var a, Var b);
Var matmul_bt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // entrywise
Var scale(Var a, double s);
// x (r x c) plus a 1 x c row on every row.
Var add_row(Var x, Var row);
// x holds batch blocks of `period` rows; pos (period x c) is added to each block.
Var add_periodic(Var x, Var pos);
Var relu(Var x);
Var sin(Var x);
Var cos(Var x);
Var concat_cols(Var a, Var b);
Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);  // row-major reinterpretation
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var embedding(Var table, std::span<const int> ids);
// Inverted dropout; identity when rng is null or p == 0.
Var dropout(Var x, double p, CounterRng* rng);
Var sum(Var x);
Var mean(Var x);

// q is (batch*Lq) x d, k and v are (batch*Lk) x d. Columns are split into
// `heads` equal groups; head outputs are written back to their own columns, so
// the result is the concatenation of the heads (before any output projection).
struct AttentionShape {
  Eigen::Index batch = 1;
  Eigen::Index heads = 1;
  bool causal = false;  // query i sees keys 0..i; needs Lq == Lk
};
Var attention(Var q, Var k, Var v, const AttentionShape& shape);
// Softmax weights per (batch, head), index b * heads + h.
std::vector<Tensor> attention_weights(const Tensor& q, const Tensor& k, const AttentionShape& shape);

// Losses over a batch of rows; each row is one flattened sample.
// mean_i  sum_j |p_ij - y_ij| / (sum_j |y_ij| + eps)
Var rel_l1_loss(Var pred, const Tensor& target, double eps = 1e-7);
// mean_i ||p_i - y_i||_2
Var frobenius_loss(Var pred, const Tensor& target);
// mean over all entries of (p - y)^2
Var mse_loss(Var pred, const Tensor& target);
// Mean token cross-entropy of logits rows against labels; label -1 is skipped.
Var cross_entropy(Var logits, std::span<const int> labels);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // parameter with the largest discrepancy
  std::size_t coordinates = 0;
};

// Central differences against backward(). For each parameter the relative
// error is ||g - g_fd|| / max(||g||, ||g_fd||, 1e-5 max(1, |loss|)) over the checked coordinates
// (all of them, or `max_entries` picked deterministically).
GradCheckResult gradient_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                               double h = 1e-6, std::size_t max_entries = 0);

}  // namespace matfun::nn
