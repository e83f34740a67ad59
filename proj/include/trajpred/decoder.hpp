#pragma once

#include "trajpred/data_model.hpp"
#include "trajpred/nn/layers.hpp"

namespace trajpred {

// Bicycle-model state; psi and beta (slip angle) stay wrapped to (-pi, pi].
struct KinematicState {
  double x = 0.0, y = 0.0;
  double psi = 0.0;   // heading
  double v = 0.0;     // speed
  double beta = 0.0;  // slip angle of the CoM velocity w.r.t. the body axis
  double l_r = 1.5;   // rear-axle-to-CoM length
};

struct ControlBounds {
  double a_max = 4.0;      // |dv/dt| bound, m/s^2
  double omega_max = 0.6;  // |dbeta/dt| bound, rad/s
};

// Initial kinematic state from the last observed step: speed and heading
// from finite-difference velocity, slip angle 0 (unobservable from positions).
KinematicState init_kinematic_state(const AgentState& last, double l_r);

struct DecoderConfig {
  int node_dim = 64;
  int latent_dim = 32;
  int gru_hidden = 128;
  int init_hidden = 128;
  double leaky_slope = 0.2;
  ControlBounds bounds;
  double l_r = 1.5;
  int substeps = 1;  // internal integration substeps per emitted control
};

// Recurrent decoder: the GRU reads the agent summary at the first step and
// zero padding afterwards; its raw outputs pass through a smooth saturation
// and either the kinematic bicycle cell or direct displacement aggregation.
struct Decoder {
  DecoderConfig cfg;
  nn::Mlp init_mlp;      // [summary || z] -> initial hidden state
  nn::GruCell gru;
  nn::Linear head_kin;   // hidden -> raw (dv, dbeta)
  nn::Linear head_disp;  // hidden -> (dx, dy)

  static Decoder create(nn::ParamStore& store, const DecoderConfig& cfg, Rng& rng);

  struct KinRollout {
    // Per future step (1..T_f), all 1x1 vars on the tape.
    std::vector<ad::Var> x, y, psi, v, beta;
    std::vector<ad::Var> vdot, betadot;  // saturated controls, per step
  };
  KinRollout rollout_kinematic(nn::Binding& bind, const ad::Var& summary, const ad::Var& z,
                               const KinematicState& init, int t_f, double dt) const;

  struct DispRollout {
    std::vector<ad::Var> x, y;  // cumulative positions per future step
  };
  DispRollout rollout_displacement(nn::Binding& bind, const ad::Var& summary, const ad::Var& z,
                                   const Vec2& last_pos, int t_f) const;
};

// Saturation used on raw controls: bound * tanh(raw / bound); smooth and
// strictly inside (-bound, bound).
ad::Var saturate(const ad::Var& raw, double bound);

}  // namespace trajpred
