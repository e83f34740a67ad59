#pragma once

#include <functional>
#include <vector>

#include "trajpred/common.hpp"

namespace trajpred::ad {

// Reverse-mode automatic differentiation on a dynamically recorded tape.
// Values are dense double matrices; column vectors are n x 1, scalars 1 x 1.
// A Var is a cheap handle (tape pointer + node index) into the tape that
// recorded it. Backward walks the tape in reverse creation order, so any
// value recorded before the loss node receives correct accumulated
// gradients.
//
// Sums whose operand order must not leak into the result (neighbor
// aggregation under agent relabeling) go through canonical_sum /
// softmax, which accumulate in a value-derived order. This makes those
// reductions bitwise order-independent, which the permutation and
// locality guarantees elsewhere rely on.

class Tape;

class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Mat& value() const;
  const Mat& grad() const;  // zero-sized until backward touches the node
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
  double scalar() const;  // value of a 1x1 node
  Tape* tape() const { return tape_; }
  int index() const { return idx_; }

 private:
  friend class Tape;
  Var(Tape* t, int i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Input that gradients never flow into.
  Var constant(Mat v);
  // Differentiable leaf (parameter or probed input).
  Var leaf(Mat v);

  // Seeds d(loss)/d(loss) = 1 and propagates to every differentiable node
  // recorded before `loss`.
  void backward(const Var& loss);

  // --- internals used by the op library ---
  struct Node {
    Mat value;
    Mat grad;  // lazily sized on first accumulation
    bool requires_grad = false;
    std::function<void(Tape&, int)> back;  // nullptr for constants/leaves
  };

  Var emplace(Mat value, bool requires_grad, std::function<void(Tape&, int)> back);
  const Node& node(int i) const { return nodes_[i]; }
  Node& node(int i) { return nodes_[i]; }
  // Accumulates g into node i's gradient if that node wants gradients.
  void acc(int i, const Mat& g);

 private:
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

inline const Mat& Var::value() const { return tape_->node(idx_).value; }
inline const Mat& Var::grad() const { return tape_->node(idx_).grad; }
inline double Var::scalar() const { return value()(0, 0); }

// ---------------------------------------------------------------------------
// Op library. All functions record onto the tape of their first argument.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var cmul(const Var& a, const Var& b);             // elementwise
Var matmul(const Var& a, const Var& b);
Var affine(const Var& w, const Var& x, const Var& b);  // w*x + b, b broadcast over columns
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var mul_sv(const Var& s, const Var& a);           // (1x1) * matrix
Var div_sv(const Var& a, const Var& s);           // matrix / (1x1)
Var sum(const Var& a);                            // 1x1
Var mean(const Var& a);                           // 1x1
Var dot(const Var& a, const Var& b);              // 1x1
Var sqnorm(const Var& a);                         // 1x1, sum of squares
Var sqdist(const Var& a, const Var& b);           // 1x1, ||a-b||^2
Var exp_(const Var& a);
Var tanh_(const Var& a);
Var sigmoid(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var softplus(const Var& a);
Var sin_(const Var& a);
Var cos_(const Var& a);
Var wrap_angle_op(const Var& a);                  // 1x1; gradient passes through
Var softmax(const Var& a);                        // column vector, stable, canonical denominator
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int r0, int n);
Var stack_scalars(const std::vector<Var>& xs);    // n x 1 from 1x1 vars
// Sum of same-shaped vars, accumulated in a value-derived order so the
// result does not depend on operand order.
Var canonical_sum(const std::vector<Var>& xs);

// 2-D convolution, stride 1, zero padding preserving H x W.
// x is a (c_in*H*W) x 1 vector in channel-major order; w is c_out x (c_in*k*k);
// b is c_out x 1. Returns (c_out*H*W) x 1.
Var conv2d_same(const Var& x, const Var& w, const Var& b, int c_in, int h, int wd,
                int c_out, int k);
// Mean over each channel block of a (c*hw) x 1 vector -> c x 1.
Var channel_mean(const Var& x, int c, int hw);

// Accumulate-in-given-order sum (plain), for fixed-order reductions.
Var sum_of(const std::vector<Var>& xs);

}  // namespace trajpred::ad
