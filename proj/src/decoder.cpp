#include "trajpred/decoder.hpp"

namespace trajpred {

KinematicState init_kinematic_state(const AgentState& last, double l_r) {
  KinematicState s;
  s.x = last.position.x();
  s.y = last.position.y();
  s.v = last.velocity.norm();
  if (s.v > 1e-9)
    s.psi = std::atan2(last.velocity.y(), last.velocity.x());
  else
    s.psi = last.heading.value_or(0.0);
  s.beta = 0.0;
  s.l_r = l_r;
  return s;
}

Decoder Decoder::create(nn::ParamStore& store, const DecoderConfig& cfg, Rng& rng) {
  Decoder d;
  d.cfg = cfg;
  d.init_mlp = nn::Mlp::create(
      store, "decoder.init",
      {cfg.node_dim + cfg.latent_dim, cfg.init_hidden, cfg.init_hidden, cfg.gru_hidden},
      cfg.leaky_slope, rng);
  d.gru = nn::GruCell::create(store, "decoder.gru", cfg.node_dim, cfg.gru_hidden, rng);
  d.head_kin = nn::Linear::create(store, "decoder.head_kin", cfg.gru_hidden, 2, rng);
  d.head_disp = nn::Linear::create(store, "decoder.head_disp", cfg.gru_hidden, 2, rng);
  return d;
}

ad::Var saturate(const ad::Var& raw, double bound) {
  require_arg(bound > 0, "saturate: bound must be positive");
  return ad::scale(ad::tanh_(ad::scale(raw, 1.0 / bound)), bound);
}

Decoder::KinRollout Decoder::rollout_kinematic(nn::Binding& bind, const ad::Var& summary,
                                               const ad::Var& z, const KinematicState& init,
                                               int t_f, double dt) const {
  require_arg(t_f >= 0, "rollout_kinematic: negative horizon");
  KinRollout out;
  if (t_f == 0) return out;
  require_arg(dt > 0, "rollout_kinematic: dt must be positive");
  require_arg(cfg.substeps >= 1, "rollout_kinematic: substeps must be >= 1");

  ad::Tape& tape = bind.tape();
  ad::Var h = init_mlp(bind, ad::concat_rows({summary, z}));
  ad::Var zero_in = tape.constant(Mat::Zero(cfg.node_dim, 1));

  ad::Var x = tape.constant(Mat::Constant(1, 1, init.x));
  ad::Var y = tape.constant(Mat::Constant(1, 1, init.y));
  ad::Var psi = tape.constant(Mat::Constant(1, 1, wrap_angle(init.psi)));
  ad::Var v = tape.constant(Mat::Constant(1, 1, init.v));
  ad::Var beta = tape.constant(Mat::Constant(1, 1, wrap_angle(init.beta)));

  const double h_sub = dt / cfg.substeps;
  for (int t = 0; t < t_f; ++t) {
    h = gru.step(bind, t == 0 ? summary : zero_in, h);
    ad::Var raw = head_kin(bind, h);
    ad::Var vdot = saturate(ad::slice_rows(raw, 0, 1), cfg.bounds.a_max);
    ad::Var betadot = saturate(ad::slice_rows(raw, 1, 1), cfg.bounds.omega_max);
    for (int s = 0; s < cfg.substeps; ++s) {
      // a_t evaluated at the pre-update state, then both tau and u advance.
      ad::Var course = ad::add(psi, beta);
      ad::Var xdot = ad::cmul(v, ad::cos_(course));
      ad::Var ydot = ad::cmul(v, ad::sin_(course));
      ad::Var psidot = ad::scale(ad::cmul(v, ad::sin_(beta)), 1.0 / init.l_r);
      x = ad::add(x, ad::scale(xdot, h_sub));
      y = ad::add(y, ad::scale(ydot, h_sub));
      psi = ad::wrap_angle_op(ad::add(psi, ad::scale(psidot, h_sub)));
      v = ad::add(v, ad::scale(vdot, h_sub));
      beta = ad::wrap_angle_op(ad::add(beta, ad::scale(betadot, h_sub)));
    }
    out.x.push_back(x);
    out.y.push_back(y);
    out.psi.push_back(psi);
    out.v.push_back(v);
    out.beta.push_back(beta);
    out.vdot.push_back(vdot);
    out.betadot.push_back(betadot);
  }
  return out;
}

Decoder::DispRollout Decoder::rollout_displacement(nn::Binding& bind, const ad::Var& summary,
                                                   const ad::Var& z, const Vec2& last_pos,
                                                   int t_f) const {
  require_arg(t_f >= 0, "rollout_displacement: negative horizon");
  DispRollout out;
  if (t_f == 0) return out;

  ad::Tape& tape = bind.tape();
  ad::Var h = init_mlp(bind, ad::concat_rows({summary, z}));
  ad::Var zero_in = tape.constant(Mat::Zero(cfg.node_dim, 1));
  ad::Var x = tape.constant(Mat::Constant(1, 1, last_pos.x()));
  ad::Var y = tape.constant(Mat::Constant(1, 1, last_pos.y()));
  for (int t = 0; t < t_f; ++t) {
    h = gru.step(bind, t == 0 ? summary : zero_in, h);
    ad::Var d = head_disp(bind, h);
    x = ad::add(x, ad::slice_rows(d, 0, 1));
    y = ad::add(y, ad::slice_rows(d, 1, 1));
    out.x.push_back(x);
    out.y.push_back(y);
  }
  return out;
}

}  // namespace trajpred
