#pragma once

#include <functional>
#include <tuple>

#include "trajpred/nn/params.hpp"

namespace trajpred::nn {

// Central finite-difference verification of reverse-mode gradients.
// `build_loss` must rebuild the forward pass from current parameter values
// and return the scalar loss node. The analytic side runs once; each probed
// scalar costs two extra forward evaluations.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_row = 0, worst_col = 0;
  double analytic = 0.0, numeric = 0.0;
  int checked = 0;
};

// `probe` selects (param, row, col) triples to check; empty means all scalars.
inline GradCheckReport check_gradients(
    ParamStore& store, const std::function<ad::Var(Binding&)>& build_loss,
    std::vector<std::tuple<Param*, int, int>> probe = {}, double h = 1e-5) {
  store.zero_grad();
  {
    ad::Tape tape;
    Binding bind(tape);
    ad::Var loss = build_loss(bind);
    tape.backward(loss);
    bind.flush_grads();
  }
  if (probe.empty()) {
    for (const auto& p : store.all())
      for (int c = 0; c < p->value.cols(); ++c)
        for (int r = 0; r < p->value.rows(); ++r) probe.emplace_back(p.get(), r, c);
  }
  auto eval = [&]() {
    ad::Tape tape(false);
    Binding bind(tape);
    return build_loss(bind).scalar();
  };
  GradCheckReport rep;
  for (auto [p, r, c] : probe) {
    const double saved = p->value(r, c);
    const double step = h * std::max(1.0, std::abs(saved));
    p->value(r, c) = saved + step;
    const double fp = eval();
    p->value(r, c) = saved - step;
    const double fm = eval();
    p->value(r, c) = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    const double analytic = p->grad(r, c);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    const double rel = std::abs(analytic - numeric) / denom;
    ++rep.checked;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_param = p->name;
      rep.worst_row = r;
      rep.worst_col = c;
      rep.analytic = analytic;
      rep.numeric = numeric;
    }
  }
  return rep;
}

}  // namespace trajpred::nn
