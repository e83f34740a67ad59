#include "trajpred/generative_loss.hpp"

namespace trajpred {

MmdKernel mmd_kernel_from_string(const std::string& s) {
  if (s == "imq" || s == "inverse_multiquadratic") return MmdKernel::inverse_multiquadratic;
  if (s == "rbf" || s == "radial_basis") return MmdKernel::radial_basis;
  throw std::runtime_error("unknown MMD kernel '" + s + "'");
}

std::string to_string(MmdKernel k) {
  return k == MmdKernel::inverse_multiquadratic ? "imq" : "rbf";
}

namespace {

double kernel_val(double sqd, const MmdConfig& cfg) {
  if (cfg.kernel == MmdKernel::inverse_multiquadratic) return cfg.scale / (cfg.scale + sqd);
  return std::exp(-sqd / cfg.scale);
}

// d k(x, y) / d x = coeff(sqd) * (x - y)
double kernel_dcoeff(double sqd, const MmdConfig& cfg) {
  if (cfg.kernel == MmdKernel::inverse_multiquadratic) {
    const double denom = cfg.scale + sqd;
    return -2.0 * cfg.scale / (denom * denom);
  }
  return -2.0 / cfg.scale * std::exp(-sqd / cfg.scale);
}

double pair_mean(const Mat& a, const Mat& b, const MmdConfig& cfg) {
  double acc = 0.0;
  for (int i = 0; i < a.cols(); ++i)
    for (int j = 0; j < b.cols(); ++j)
      acc += kernel_val((a.col(i) - b.col(j)).squaredNorm(), cfg);
  return acc / (static_cast<double>(a.cols()) * static_cast<double>(b.cols()));
}

}  // namespace

double mmd_vstat(const Mat& xs, const Mat& ys, const MmdConfig& cfg) {
  require_arg(xs.cols() >= 1 && ys.cols() >= 1, "mmd_vstat: empty sample set");
  require_arg(xs.rows() == ys.rows(), "mmd_vstat: dimension mismatch");
  require_arg(cfg.scale > 0, "mmd_vstat: kernel scale must be positive");
  return pair_mean(xs, xs, cfg) + pair_mean(ys, ys, cfg) - 2.0 * pair_mean(xs, ys, cfg);
}

ad::Var mmd_vstat_op(const std::vector<ad::Var>& xs, const Mat& ys, const MmdConfig& cfg) {
  require_arg(!xs.empty(), "mmd_vstat_op: empty posterior sample set");
  ad::Tape* tape = xs[0].tape();
  const int d = xs[0].rows();
  const int n = static_cast<int>(xs.size());
  Mat x(d, n);
  std::vector<int> idx(n);
  bool any_rg = false;
  for (int i = 0; i < n; ++i) {
    require_arg(xs[i].tape() == tape, "mmd_vstat_op: vars from different tapes");
    require_arg(xs[i].rows() == d && xs[i].cols() == 1, "mmd_vstat_op: sample shape mismatch");
    x.col(i) = xs[i].value();
    idx[i] = xs[i].index();
    any_rg = any_rg || tape->node(xs[i].index()).requires_grad;
  }
  Mat val(1, 1);
  val(0, 0) = mmd_vstat(x, ys, cfg);
  const int m = static_cast<int>(ys.cols());
  return tape->emplace(
      std::move(val), any_rg,
      [idx = std::move(idx), x = std::move(x), ys, cfg, n, m](ad::Tape& t, int self) {
        const double g = t.node(self).grad(0, 0);
        const double nn = static_cast<double>(n) * n;
        const double nm = static_cast<double>(n) * m;
        for (int a = 0; a < n; ++a) {
          Mat grad = Mat::Zero(x.rows(), 1);
          for (int b = 0; b < n; ++b) {
            if (b == a) continue;  // diagonal kernel terms are constant
            const Mat diff = x.col(a) - x.col(b);
            grad += (2.0 / nn) * kernel_dcoeff(diff.squaredNorm(), cfg) * diff;
          }
          for (int b = 0; b < m; ++b) {
            const Mat diff = x.col(a) - ys.col(b);
            grad -= (2.0 / nm) * kernel_dcoeff(diff.squaredNorm(), cfg) * diff;
          }
          t.acc(idx[a], g * grad);
        }
      });
}

ad::Var reconstruction_loss(const std::vector<std::vector<ad::Var>>& pred_x,
                            const std::vector<std::vector<ad::Var>>& pred_y,
                            const std::vector<std::vector<Vec2>>& truth) {
  const std::size_t n = truth.size();
  require_arg(n >= 1, "reconstruction_loss: no agents");
  require_arg(pred_x.size() == n && pred_y.size() == n,
              "reconstruction_loss: prediction/truth agent count mismatch");
  std::vector<ad::Var> per_agent;
  for (std::size_t a = 0; a < n; ++a) {
    require_arg(pred_x[a].size() == truth[a].size() && pred_y[a].size() == truth[a].size(),
                "reconstruction_loss: step count mismatch");
    require_arg(!truth[a].empty(), "reconstruction_loss: empty future");
    std::vector<ad::Var> step_terms;
    for (std::size_t t = 0; t < truth[a].size(); ++t) {
      ad::Var ex = ad::add_scalar(pred_x[a][t], -truth[a][t].x());
      ad::Var ey = ad::add_scalar(pred_y[a][t], -truth[a][t].y());
      step_terms.push_back(ad::add(ad::cmul(ex, ex), ad::cmul(ey, ey)));
    }
    per_agent.push_back(ad::sum_of(step_terms));
  }
  return ad::scale(ad::sum_of(per_agent), 1.0 / static_cast<double>(n));
}

ad::Var kl_term(const std::vector<ad::Var>& posterior_means) {
  require_arg(!posterior_means.empty(), "kl_term: no posterior means");
  std::vector<ad::Var> terms;
  for (const auto& mu : posterior_means) terms.push_back(ad::sqnorm(mu));
  return ad::scale(ad::sum_of(terms), 0.5 / static_cast<double>(posterior_means.size()));
}

ad::Var total_loss(const ad::Var& recon, const ad::Var& kl, const ad::Var& mmd,
                   const LossWeights& w) {
  ad::Var loss = ad::scale(recon, w.gamma);
  if (w.alpha != 0.0) {
    require_arg(kl.valid(), "total_loss: missing KL term");
    loss = ad::add(loss, ad::scale(kl, w.alpha));
  }
  if (w.beta != 0.0) {
    require_arg(mmd.valid(), "total_loss: missing MMD term");
    loss = ad::add(loss, ad::scale(mmd, w.beta));
  }
  return loss;
}

}  // namespace trajpred
