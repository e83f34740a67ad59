#include "trajpred/ad/tape.hpp"

#include <algorithm>
#include <cstring>

namespace trajpred::ad {

namespace {

void check_same_tape(const Var& a, const Var& b) {
  require_arg(a.tape() == b.tape(), "ad: vars recorded on different tapes");
}

// Deterministic total order on the raw double storage; used by canonical
// reductions. Only consistency matters, not numeric order.
bool value_less(const Mat& a, const Mat& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) < 0;
}

}  // namespace

Var Tape::emplace(Mat value, bool requires_grad, std::function<void(Tape&, int)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Mat v) { return emplace(std::move(v), false, nullptr); }

Var Tape::leaf(Mat v) { return emplace(std::move(v), true, nullptr); }

void Tape::acc(int i, const Mat& g) {
  Node& n = nodes_[i];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Tape::backward(const Var& loss) {
  require_arg(loss.tape() == this, "backward: loss from another tape");
  require_arg(loss.value().rows() == 1 && loss.value().cols() == 1,
              "backward: loss must be scalar");
  Node& l = nodes_[loss.index()];
  require(l.requires_grad, "backward: loss does not depend on any leaf");
  l.grad = Mat::Ones(1, 1);
  for (int i = loss.index(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back(*this, i);
  }
}

// --- helpers for op definitions -------------------------------------------

namespace {

bool rg(const Var& a) { return a.tape()->node(a.index()).requires_grad; }

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_arg(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
              "add: shape mismatch");
  int ia = a.index(), ib = b.index();
  return a.tape()->emplace(a.value() + b.value(), rg(a) || rg(b), [ia, ib](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    t.acc(ia, g);
    t.acc(ib, g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_arg(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
              "sub: shape mismatch");
  int ia = a.index(), ib = b.index();
  return a.tape()->emplace(a.value() - b.value(), rg(a) || rg(b), [ia, ib](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    t.acc(ia, g);
    t.acc(ib, -g);
  });
}

Var neg(const Var& a) {
  int ia = a.index();
  return a.tape()->emplace(-a.value(), rg(a), [ia](Tape& t, int self) {
    t.acc(ia, -t.node(self).grad);
  });
}

Var cmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_arg(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
              "cmul: shape mismatch");
  int ia = a.index(), ib = b.index();
  return a.tape()->emplace(a.value().cwiseProduct(b.value()), rg(a) || rg(b),
                           [ia, ib](Tape& t, int self) {
                             const Mat& g = t.node(self).grad;
                             t.acc(ia, g.cwiseProduct(t.node(ib).value));
                             t.acc(ib, g.cwiseProduct(t.node(ia).value));
                           });
}

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_arg(a.value().cols() == b.value().rows(), "matmul: inner dimension mismatch");
  int ia = a.index(), ib = b.index();
  return a.tape()->emplace(a.value() * b.value(), rg(a) || rg(b), [ia, ib](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    t.acc(ia, g * t.node(ib).value.transpose());
    t.acc(ib, t.node(ia).value.transpose() * g);
  });
}

Var affine(const Var& w, const Var& x, const Var& b) {
  check_same_tape(w, x);
  check_same_tape(w, b);
  require_arg(w.value().cols() == x.value().rows(), "affine: inner dimension mismatch");
  require_arg(b.value().rows() == w.value().rows() && b.value().cols() == 1,
              "affine: bias shape mismatch");
  int iw = w.index(), ix = x.index(), ib = b.index();
  Mat y = w.value() * x.value();
  y.colwise() += Eigen::VectorXd(b.value().col(0));
  return w.tape()->emplace(std::move(y), rg(w) || rg(x) || rg(b), [iw, ix, ib](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    t.acc(iw, g * t.node(ix).value.transpose());
    t.acc(ix, t.node(iw).value.transpose() * g);
    t.acc(ib, g.rowwise().sum());
  });
}

Var scale(const Var& a, double c) {
  int ia = a.index();
  return a.tape()->emplace(a.value() * c, rg(a), [ia, c](Tape& t, int self) {
    t.acc(ia, t.node(self).grad * c);
  });
}

Var add_scalar(const Var& a, double c) {
  int ia = a.index();
  return a.tape()->emplace(a.value().array() + c, rg(a), [ia](Tape& t, int self) {
    t.acc(ia, t.node(self).grad);
  });
}

Var mul_sv(const Var& s, const Var& a) {
  check_same_tape(s, a);
  require_arg(s.value().size() == 1, "mul_sv: scalar operand must be 1x1");
  int is = s.index(), ia = a.index();
  return a.tape()->emplace(a.value() * s.value()(0, 0), rg(s) || rg(a),
                           [is, ia](Tape& t, int self) {
                             const Mat& g = t.node(self).grad;
                             Mat gs(1, 1);
                             gs(0, 0) = (g.array() * t.node(ia).value.array()).sum();
                             t.acc(is, gs);
                             t.acc(ia, g * t.node(is).value(0, 0));
                           });
}

Var div_sv(const Var& a, const Var& s) {
  check_same_tape(a, s);
  require_arg(s.value().size() == 1, "div_sv: scalar operand must be 1x1");
  int ia = a.index(), is = s.index();
  const double sv = s.value()(0, 0);
  return a.tape()->emplace(a.value() / sv, rg(a) || rg(s), [ia, is](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    const double d = t.node(is).value(0, 0);
    t.acc(ia, g / d);
    Mat gs(1, 1);
    gs(0, 0) = -(g.array() * t.node(ia).value.array()).sum() / (d * d);
    t.acc(is, gs);
  });
}

Var sum(const Var& a) {
  int ia = a.index();
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape()->emplace(std::move(y), rg(a), [ia](Tape& t, int self) {
    const double g = t.node(self).grad(0, 0);
    t.acc(ia, Mat::Constant(t.node(ia).value.rows(), t.node(ia).value.cols(), g));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var dot(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_arg(a.value().size() == b.value().size(), "dot: size mismatch");
  int ia = a.index(), ib = b.index();
  Mat y(1, 1);
  y(0, 0) = (a.value().array() * b.value().array()).sum();
  return a.tape()->emplace(std::move(y), rg(a) || rg(b), [ia, ib](Tape& t, int self) {
    const double g = t.node(self).grad(0, 0);
    t.acc(ia, g * t.node(ib).value);
    t.acc(ib, g * t.node(ia).value);
  });
}

Var sqnorm(const Var& a) {
  int ia = a.index();
  Mat y(1, 1);
  y(0, 0) = a.value().squaredNorm();
  return a.tape()->emplace(std::move(y), rg(a), [ia](Tape& t, int self) {
    const double g = t.node(self).grad(0, 0);
    t.acc(ia, 2.0 * g * t.node(ia).value);
  });
}

Var sqdist(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_arg(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
              "sqdist: shape mismatch");
  int ia = a.index(), ib = b.index();
  Mat y(1, 1);
  y(0, 0) = (a.value() - b.value()).squaredNorm();
  return a.tape()->emplace(std::move(y), rg(a) || rg(b), [ia, ib](Tape& t, int self) {
    const double g = t.node(self).grad(0, 0);
    Mat d = t.node(ia).value - t.node(ib).value;
    t.acc(ia, 2.0 * g * d);
    t.acc(ib, -2.0 * g * d);
  });
}

namespace {

template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  int ia = a.index();
  Mat y = a.value().unaryExpr(f);
  return a.tape()->emplace(std::move(y), rg(a), [ia, df](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    t.acc(ia, g.cwiseProduct(t.node(ia).value.unaryExpr(df)));
  });
}

}  // namespace

// Transcendentals go through per-element std:: calls (unaryExpr), never
// Eigen's vectorized array math: packet lanes and scalar tails can round
// differently, which would make results depend on an element's position.

Var exp_(const Var& a) {
  int ia = a.index();
  Mat y = a.value().unaryExpr([](double x) { return std::exp(x); });
  return a.tape()->emplace(std::move(y), rg(a), [ia](Tape& t, int self) {
    t.acc(ia, t.node(self).grad.cwiseProduct(t.node(self).value));
  });
}

Var tanh_(const Var& a) {
  int ia = a.index();
  Mat y = a.value().unaryExpr([](double x) { return std::tanh(x); });
  return a.tape()->emplace(std::move(y), rg(a), [ia](Tape& t, int self) {
    const Mat& v = t.node(self).value;
    t.acc(ia, t.node(self).grad.cwiseProduct((1.0 - v.array().square()).matrix()));
  });
}

Var sigmoid(const Var& a) {
  int ia = a.index();
  Mat y = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return a.tape()->emplace(std::move(y), rg(a), [ia](Tape& t, int self) {
    const Mat& v = t.node(self).value;
    t.acc(ia, t.node(self).grad.cwiseProduct((v.array() * (1.0 - v.array())).matrix()));
  });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(
      a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
      [slope](double x) { return x >= 0.0 ? 1.0 : slope; });
}

Var softplus(const Var& a) {
  // log(1 + e^x), computed stably.
  return unary(
      a,
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var sin_(const Var& a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

Var cos_(const Var& a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

Var wrap_angle_op(const Var& a) {
  // Locally x - 2*pi*k, so the derivative is 1 everywhere it exists.
  return unary(a, [](double x) { return wrap_angle(x); }, [](double) { return 1.0; });
}

Var softmax(const Var& a) {
  require_arg(a.value().cols() == 1, "softmax: expects a column vector");
  int ia = a.index();
  const Mat& x = a.value();
  const double m = x.maxCoeff();
  Mat e = x.unaryExpr([m](double v) { return std::exp(v - m); });
  // Canonical accumulation: sum scalars in value order so relabeling the
  // entries cannot change the denominator's rounding.
  std::vector<double> terms(e.data(), e.data() + e.size());
  std::sort(terms.begin(), terms.end());
  double denom = 0.0;
  for (double v : terms) denom += v;
  Mat y = e / denom;
  return a.tape()->emplace(std::move(y), rg(a), [ia](Tape& t, int self) {
    const Mat& s = t.node(self).value;
    const Mat& g = t.node(self).grad;
    const double gs = (g.array() * s.array()).sum();
    t.acc(ia, (s.array() * (g.array() - gs)).matrix());
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require_arg(!parts.empty(), "concat_rows: empty input");
  Tape* tape = parts[0].tape();
  int cols = parts[0].cols();
  int rows = 0;
  bool any_rg = false;
  for (const auto& p : parts) {
    require_arg(p.tape() == tape, "concat_rows: vars from different tapes");
    require_arg(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
    any_rg = any_rg || rg(p);
  }
  Mat y(rows, cols);
  std::vector<int> idx;
  std::vector<int> offs;
  int r = 0;
  for (const auto& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    idx.push_back(p.index());
    offs.push_back(r);
    r += p.rows();
  }
  return tape->emplace(std::move(y), any_rg,
                       [idx = std::move(idx), offs = std::move(offs)](Tape& t, int self) {
                         const Mat& g = t.node(self).grad;
                         for (std::size_t k = 0; k < idx.size(); ++k) {
                           const int nrow = static_cast<int>(t.node(idx[k]).value.rows());
                           t.acc(idx[k], g.middleRows(offs[k], nrow));
                         }
                       });
}

Var slice_rows(const Var& a, int r0, int n) {
  require_arg(r0 >= 0 && n >= 1 && r0 + n <= a.rows(), "slice_rows: out of range");
  int ia = a.index();
  Mat y = a.value().middleRows(r0, n);
  return a.tape()->emplace(std::move(y), rg(a), [ia, r0, n](Tape& t, int self) {
    Mat g = Mat::Zero(t.node(ia).value.rows(), t.node(ia).value.cols());
    g.middleRows(r0, n) = t.node(self).grad;
    t.acc(ia, g);
  });
}

Var stack_scalars(const std::vector<Var>& xs) {
  require_arg(!xs.empty(), "stack_scalars: empty input");
  Tape* tape = xs[0].tape();
  Mat y(static_cast<int>(xs.size()), 1);
  std::vector<int> idx;
  bool any_rg = false;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    require_arg(xs[k].tape() == tape, "stack_scalars: vars from different tapes");
    require_arg(xs[k].value().size() == 1, "stack_scalars: operands must be 1x1");
    y(static_cast<int>(k), 0) = xs[k].scalar();
    idx.push_back(xs[k].index());
    any_rg = any_rg || rg(xs[k]);
  }
  return tape->emplace(std::move(y), any_rg, [idx = std::move(idx)](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    Mat gi(1, 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      gi(0, 0) = g(static_cast<int>(k), 0);
      t.acc(idx[k], gi);
    }
  });
}

Var canonical_sum(const std::vector<Var>& xs) {
  require_arg(!xs.empty(), "canonical_sum: empty input");
  Tape* tape = xs[0].tape();
  std::vector<int> order(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    require_arg(xs[k].tape() == tape, "canonical_sum: vars from different tapes");
    require_arg(xs[k].rows() == xs[0].rows() && xs[k].cols() == xs[0].cols(),
                "canonical_sum: shape mismatch");
    order[k] = static_cast<int>(k);
  }
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return value_less(xs[i].value(), xs[j].value());
  });
  Mat y = Mat::Zero(xs[0].rows(), xs[0].cols());
  for (int k : order) y += xs[k].value();
  std::vector<int> idx;
  bool any_rg = false;
  for (const auto& x : xs) {
    idx.push_back(x.index());
    any_rg = any_rg || rg(x);
  }
  return tape->emplace(std::move(y), any_rg, [idx = std::move(idx)](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    for (int i : idx) t.acc(i, g);
  });
}

Var sum_of(const std::vector<Var>& xs) {
  require_arg(!xs.empty(), "sum_of: empty input");
  Tape* tape = xs[0].tape();
  Mat y = Mat::Zero(xs[0].rows(), xs[0].cols());
  std::vector<int> idx;
  bool any_rg = false;
  for (const auto& x : xs) {
    require_arg(x.tape() == tape, "sum_of: vars from different tapes");
    require_arg(x.rows() == xs[0].rows() && x.cols() == xs[0].cols(), "sum_of: shape mismatch");
    y += x.value();
    idx.push_back(x.index());
    any_rg = any_rg || rg(x);
  }
  return tape->emplace(std::move(y), any_rg, [idx = std::move(idx)](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    for (int i : idx) t.acc(i, g);
  });
}

// --- convolution -----------------------------------------------------------

namespace {

// Builds the im2col matrix: (c_in*k*k) x (h*w), zero padded.
Mat im2col(const Mat& x, int c_in, int h, int w, int k) {
  const int pad = k / 2;
  Mat cols = Mat::Zero(c_in * k * k, h * w);
  for (int c = 0; c < c_in; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        const int row = (c * k + kr) * k + kc;
        for (int r = 0; r < h; ++r) {
          const int sr = r + kr - pad;
          if (sr < 0 || sr >= h) continue;
          for (int cc = 0; cc < w; ++cc) {
            const int sc = cc + kc - pad;
            if (sc < 0 || sc >= w) continue;
            cols(row, r * w + cc) = x((c * h + sr) * w + sc, 0);
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters column gradients back into the input vector.
Mat col2im(const Mat& gcols, int c_in, int h, int w, int k) {
  const int pad = k / 2;
  Mat gx = Mat::Zero(c_in * h * w, 1);
  for (int c = 0; c < c_in; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        const int row = (c * k + kr) * k + kc;
        for (int r = 0; r < h; ++r) {
          const int sr = r + kr - pad;
          if (sr < 0 || sr >= h) continue;
          for (int cc = 0; cc < w; ++cc) {
            const int sc = cc + kc - pad;
            if (sc < 0 || sc >= w) continue;
            gx((c * h + sr) * w + sc, 0) += gcols(row, r * w + cc);
          }
        }
      }
    }
  }
  return gx;
}

}  // namespace

Var conv2d_same(const Var& x, const Var& w, const Var& b, int c_in, int h, int wd, int c_out,
                int k) {
  check_same_tape(x, w);
  check_same_tape(x, b);
  require_arg(k % 2 == 1, "conv2d_same: kernel size must be odd");
  require_arg(x.value().rows() == c_in * h * wd && x.value().cols() == 1,
              "conv2d_same: input shape mismatch");
  require_arg(w.value().rows() == c_out && w.value().cols() == c_in * k * k,
              "conv2d_same: kernel shape mismatch");
  require_arg(b.value().rows() == c_out && b.value().cols() == 1,
              "conv2d_same: bias shape mismatch");
  int ix = x.index(), iw = w.index(), ib = b.index();
  Mat cols = im2col(x.value(), c_in, h, wd, k);
  Mat y2 = w.value() * cols;  // c_out x (h*w)
  y2.colwise() += Eigen::VectorXd(b.value().col(0));
  Mat yv(c_out * h * wd, 1);  // flatten channel-major
  for (int c = 0; c < c_out; ++c)
    for (int p = 0; p < h * wd; ++p) yv(c * h * wd + p, 0) = y2(c, p);
  return x.tape()->emplace(std::move(yv), rg(x) || rg(w) || rg(b),
                           [ix, iw, ib, c_in, h, wd, c_out, k](Tape& t, int self) {
                             const Mat& g = t.node(self).grad;  // (c_out*h*w) x 1
                             Mat g2(c_out, h * wd);
                             for (int c = 0; c < c_out; ++c)
                               for (int p = 0; p < h * wd; ++p) g2(c, p) = g(c * h * wd + p, 0);
                             Mat cols = im2col(t.node(ix).value, c_in, h, wd, k);
                             t.acc(iw, g2 * cols.transpose());
                             t.acc(ib, g2.rowwise().sum());
                             Mat gcols = t.node(iw).value.transpose() * g2;
                             t.acc(ix, col2im(gcols, c_in, h, wd, k));
                           });
}

Var channel_mean(const Var& x, int c, int hw) {
  require_arg(x.value().rows() == c * hw && x.value().cols() == 1,
              "channel_mean: input shape mismatch");
  int ix = x.index();
  Mat y(c, 1);
  for (int i = 0; i < c; ++i) y(i, 0) = x.value().middleRows(i * hw, hw).mean();
  return x.tape()->emplace(std::move(y), rg(x), [ix, c, hw](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    Mat gx(c * hw, 1);
    for (int i = 0; i < c; ++i) gx.middleRows(i * hw, hw).setConstant(g(i, 0) / hw);
    t.acc(ix, gx);
  });
}

}  // namespace trajpred::ad
