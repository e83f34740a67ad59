#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajpred/ad/tape.hpp"
#include "trajpred/rng.hpp"

namespace trajpred::nn {

// A named trainable array. `value` is the master copy the optimizer updates;
// `grad` accumulates across cases between optimizer steps.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m, adam_v;
};

class ParamStore {
 public:
  Param* create(const std::string& name, int rows, int cols) {
    require_arg(!index_.count(name), "ParamStore: duplicate parameter " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->value = Mat::Zero(rows, cols);
    p->grad = Mat::Zero(rows, cols);
    p->adam_m = Mat::Zero(rows, cols);
    p->adam_v = Mat::Zero(rows, cols);
    Param* raw = p.get();
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return raw;
  }

  Param* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Per-tape leaf cache: one leaf per parameter per tape, so weight sharing
// lands every use on the same node and gradients accumulate there.
class Binding {
 public:
  explicit Binding(ad::Tape& tape) : tape_(&tape) {}

  ad::Var operator()(Param* p) {
    auto it = vars_.find(p);
    if (it != vars_.end()) return it->second;
    ad::Var v = tape_->leaf(p->value);
    vars_.emplace(p, v);
    bound_.push_back(p);
    return v;
  }

  ad::Tape& tape() { return *tape_; }

  // Adds each bound leaf's tape gradient into its parameter accumulator.
  void flush_grads() {
    for (Param* p : bound_) {
      const Mat& g = vars_.at(p).grad();
      if (g.size() != 0) p->grad += g;
    }
  }

 private:
  ad::Tape* tape_;
  std::unordered_map<Param*, ad::Var> vars_;
  std::vector<Param*> bound_;
};

// Symmetric uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline void init_uniform_fan_in(Param* p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int c = 0; c < p->value.cols(); ++c)
    for (int r = 0; r < p->value.rows(); ++r) p->value(r, c) = rng.uniform(-bound, bound);
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 0.0;  // 0 disables gradient clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& store) {
    ++t_;
    double scale = 1.0;
    if (cfg_.clip > 0.0) {
      double sq = 0.0;
      for (const auto& p : store.all()) sq += p->grad.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip) scale = cfg_.clip / norm;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (const auto& p : store.all()) {
      Mat g = p->grad * scale;
      p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * g;
      p->adam_v = cfg_.beta2 * p->adam_v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      Mat mhat = p->adam_m / bc1;
      Mat vhat = p->adam_v / bc2;
      p->value -= cfg_.lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
    }
  }

  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
};

}  // namespace trajpred::nn
