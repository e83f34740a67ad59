#pragma once

#include "trajpred/ad/tape.hpp"

namespace trajpred {

// Loss term weights under the constraint 0 < 1 - alpha < beta. The
// constraint is checked at configuration time; tests may suspend it to
// exercise the pure-reconstruction degeneration.
struct LossWeights {
  double gamma = 1.0;  // reconstruction
  double alpha = 0.5;  // KL
  double beta = 1.0;   // MMD

  void validate(bool allow_degenerate = false) const {
    if (allow_degenerate) return;
    require_arg(gamma > 0, "LossWeights: gamma must be positive");
    require_arg(1.0 - alpha > 0, "LossWeights: constraint 0 < 1 - alpha violated (alpha = " +
                                     std::to_string(alpha) + ")");
    require_arg(beta > 1.0 - alpha,
                "LossWeights: constraint 1 - alpha < beta violated (alpha = " +
                    std::to_string(alpha) + ", beta = " + std::to_string(beta) + ")");
    require_arg(alpha >= 0, "LossWeights: alpha must be nonnegative");
  }
};

enum class MmdKernel { inverse_multiquadratic, radial_basis };

struct MmdConfig {
  MmdKernel kernel = MmdKernel::inverse_multiquadratic;
  double scale = 64.0;  // 2 * latent_dim by convention
};

MmdKernel mmd_kernel_from_string(const std::string& s);
std::string to_string(MmdKernel k);

// Biased V-statistic MMD^2 between two sample sets (columns are samples).
// Identical sets give exactly zero by term-wise cancellation.
double mmd_vstat(const Mat& xs, const Mat& ys, const MmdConfig& cfg);

// Tape op: same estimator, differentiable w.r.t. the posterior samples xs.
ad::Var mmd_vstat_op(const std::vector<ad::Var>& xs, const Mat& ys, const MmdConfig& cfg);

// Squared-l2 reconstruction: mean over agents of the squared position error
// accumulated over the future window. Each agent contributes
// sum_t ||p_hat_t - p_t||^2; predictions enter as per-step scalar vars.
ad::Var reconstruction_loss(const std::vector<std::vector<ad::Var>>& pred_x,
                            const std::vector<std::vector<ad::Var>>& pred_y,
                            const std::vector<std::vector<Vec2>>& truth);

// Closed-form KL for identity-covariance posteriors against the standard
// normal prior: mean over agents of ||mu||^2 / 2.
ad::Var kl_term(const std::vector<ad::Var>& posterior_means);

// gamma * recon + alpha * kl + beta * mmd; terms with zero weight are
// skipped so degenerate-weight tests reduce exactly.
ad::Var total_loss(const ad::Var& recon, const ad::Var& kl, const ad::Var& mmd,
                   const LossWeights& w);

}  // namespace trajpred
