#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "trajpred/decoder.hpp"
#include "trajpred/nn/grad_check.hpp"

using namespace trajpred;

namespace {

DecoderConfig small_cfg() {
  DecoderConfig cfg;
  cfg.node_dim = 6;
  cfg.latent_dim = 3;
  cfg.gru_hidden = 8;
  cfg.init_hidden = 8;
  return cfg;
}

struct Fixture {
  nn::ParamStore store;
  Decoder dec;
  Fixture(DecoderConfig cfg = small_cfg()) {
    Rng rng(71);
    dec = Decoder::create(store, cfg, rng);
  }
  void zero_outputs() {
    // Zero output heads force zero raw controls / displacements.
    store.find("decoder.head_kin.w")->value.setZero();
    store.find("decoder.head_kin.b")->value.setZero();
    store.find("decoder.head_disp.w")->value.setZero();
    store.find("decoder.head_disp.b")->value.setZero();
  }
};

// Independent oracle: explicit Euler integration of the continuous bicycle
// model with per-control-step constant rates and many substeps.
std::vector<Vec2> fine_euler(KinematicState s, const std::vector<Vec2>& controls, double dt,
                             int substeps) {
  std::vector<Vec2> out;
  for (const auto& u : controls) {
    const double h = dt / substeps;
    for (int k = 0; k < substeps; ++k) {
      const double xdot = s.v * std::cos(s.psi + s.beta);
      const double ydot = s.v * std::sin(s.psi + s.beta);
      const double psidot = s.v / s.l_r * std::sin(s.beta);
      s.x += xdot * h;
      s.y += ydot * h;
      s.psi = wrap_angle(s.psi + psidot * h);
      s.v += u.x() * h;
      s.beta = wrap_angle(s.beta + u.y() * h);
    }
    out.emplace_back(s.x, s.y);
  }
  return out;
}

}  // namespace

TEST_CASE("saturation is total: never exceeds the bound, smooth inside") {
  ad::Tape tape;
  for (double raw : {-100.0, -3.0, 0.0, 2.0, 500.0}) {
    ad::Var v = saturate(tape.constant(Mat::Constant(1, 1, raw)), 4.0);
    CHECK(std::abs(v.scalar()) <= 4.0);
    CHECK(v.scalar() == doctest::Approx(4.0 * std::tanh(raw / 4.0)));
  }
  // Moderate inputs stay strictly inside; huge ones round to the bound.
  CHECK(std::abs(saturate(tape.constant(Mat::Constant(1, 1, 8.0)), 4.0).scalar()) < 4.0);
  CHECK_THROWS_AS(saturate(tape.constant(Mat::Zero(1, 1)), 0.0), std::invalid_argument);
}

TEST_CASE("zero speed, zero controls: position and heading constant") {
  Fixture f;
  f.zero_outputs();
  ad::Tape tape(false);
  nn::Binding bind(tape);
  KinematicState init;
  init.x = 2.0;
  init.y = -1.0;
  init.psi = 0.7;
  init.v = 0.0;
  auto roll = f.dec.rollout_kinematic(bind, tape.constant(Mat::Zero(6, 1)),
                                      tape.constant(Mat::Zero(3, 1)), init, 5, 0.5);
  for (int t = 0; t < 5; ++t) {
    CHECK(roll.x[t].scalar() == doctest::Approx(2.0));
    CHECK(roll.y[t].scalar() == doctest::Approx(-1.0));
    CHECK(roll.psi[t].scalar() == doctest::Approx(0.7));
  }
}

TEST_CASE("straight-line case: v=2, psi=0, controls 0, dt=0.5 advances 1 m per step") {
  Fixture f;
  f.zero_outputs();
  ad::Tape tape(false);
  nn::Binding bind(tape);
  KinematicState init;
  init.v = 2.0;
  auto roll = f.dec.rollout_kinematic(bind, tape.constant(Mat::Zero(6, 1)),
                                      tape.constant(Mat::Zero(3, 1)), init, 3, 0.5);
  CHECK(roll.x[0].scalar() == doctest::Approx(1.0));
  CHECK(roll.x[1].scalar() == doctest::Approx(2.0));
  CHECK(roll.x[2].scalar() == doctest::Approx(3.0));
  for (int t = 0; t < 3; ++t) {
    CHECK(roll.y[t].scalar() == doctest::Approx(0.0));
    CHECK(roll.psi[t].scalar() == doctest::Approx(0.0));
  }
}

TEST_CASE("constant slip: refined cell matches a 1000-substep Euler oracle within 0.05 m") {
  // beta held at 0.1 by construction: start at beta=0.1 with zero rates.
  // The cell integrates with 100 internal substeps; the independent oracle
  // uses 1000.
  DecoderConfig cfg = small_cfg();
  cfg.substeps = 100;
  Fixture f(cfg);
  f.zero_outputs();
  ad::Tape tape(false);
  nn::Binding bind(tape);
  KinematicState init;
  init.v = 5.0;
  init.beta = 0.1;
  init.l_r = 1.5;
  auto roll = f.dec.rollout_kinematic(bind, tape.constant(Mat::Zero(6, 1)),
                                      tape.constant(Mat::Zero(3, 1)), init, 10, 0.5);
  auto oracle = fine_euler(init, std::vector<Vec2>(10, Vec2::Zero()), 0.5, 1000);
  const Vec2 got(roll.x.back().scalar(), roll.y.back().scalar());
  CHECK((got - oracle.back()).norm() < 0.05);
  // The curve is genuinely bent: a straight-line extrapolation is far off.
  const Vec2 straight(init.x + 5.0 * std::cos(init.psi + init.beta) * 5.0,
                      init.y + 5.0 * std::sin(init.psi + init.beta) * 5.0);
  CHECK((straight - oracle.back()).norm() > 1.0);
}

TEST_CASE("rollout satisfies the discrete update exactly (re-simulatable)") {
  Fixture f;  // nonzero heads: genuine controls
  Rng rng(73);
  ad::Tape tape(false);
  nn::Binding bind(tape);
  Mat summary(6, 1), z(3, 1);
  for (int i = 0; i < 6; ++i) summary(i, 0) = rng.normal();
  for (int i = 0; i < 3; ++i) z(i, 0) = rng.normal();
  KinematicState init;
  init.x = 1.0;
  init.v = 3.0;
  init.psi = 0.2;
  const double dt = 0.5;
  auto roll = f.dec.rollout_kinematic(bind, tape.constant(summary), tape.constant(z), init, 8, dt);

  KinematicState s = init;
  for (int t = 0; t < 8; ++t) {
    const double vdot = roll.vdot[t].scalar();
    const double betadot = roll.betadot[t].scalar();
    // Controls strictly within bounds.
    CHECK(std::abs(vdot) < f.dec.cfg.bounds.a_max);
    CHECK(std::abs(betadot) < f.dec.cfg.bounds.omega_max);
    // Re-simulate one step of the discrete model.
    const double xdot = s.v * std::cos(s.psi + s.beta);
    const double ydot = s.v * std::sin(s.psi + s.beta);
    const double psidot = s.v / s.l_r * std::sin(s.beta);
    s.x += xdot * dt;
    s.y += ydot * dt;
    s.psi = wrap_angle(s.psi + psidot * dt);
    s.v += vdot * dt;
    s.beta = wrap_angle(s.beta + betadot * dt);
    CHECK(roll.x[t].scalar() == doctest::Approx(s.x).epsilon(1e-12));
    CHECK(roll.y[t].scalar() == doctest::Approx(s.y).epsilon(1e-12));
    CHECK(roll.psi[t].scalar() == doctest::Approx(s.psi).epsilon(1e-12));
    CHECK(roll.v[t].scalar() == doctest::Approx(s.v).epsilon(1e-12));
    CHECK(roll.beta[t].scalar() == doctest::Approx(s.beta).epsilon(1e-12));
    // Reconstructing controls from consecutive states reproduces them.
    const double v_prev = t == 0 ? init.v : roll.v[t - 1].scalar();
    const double b_prev = t == 0 ? init.beta : roll.beta[t - 1].scalar();
    CHECK(std::abs((roll.v[t].scalar() - v_prev) / dt - vdot) < 1e-9);
    CHECK(std::abs(wrap_angle(roll.beta[t].scalar() - b_prev) / dt - betadot) < 1e-9);
  }
}

TEST_CASE("discretization consistency: first-order convergence in substeps") {
  // Constant nonzero rates; compare terminal position against a very fine
  // reference as substeps double.
  KinematicState init;
  init.v = 4.0;
  init.beta = 0.05;
  init.psi = 0.3;
  std::vector<Vec2> controls(10, Vec2(0.8, 0.04));
  auto reference = fine_euler(init, controls, 0.5, 4096);

  auto run_with_substeps = [&](int substeps) {
    Fixture f;
    DecoderConfig cfg = small_cfg();
    cfg.substeps = substeps;
    nn::ParamStore store;
    Rng rng(71);
    Decoder dec = Decoder::create(store, cfg, rng);
    // Force the heads to emit the desired constant controls via bias-only
    // outputs: raw = atanh(u / bound) * bound.
    store.find("decoder.head_kin.w")->value.setZero();
    Mat b(2, 1);
    b(0, 0) = std::atanh(0.8 / cfg.bounds.a_max) * cfg.bounds.a_max;
    b(1, 0) = std::atanh(0.04 / cfg.bounds.omega_max) * cfg.bounds.omega_max;
    store.find("decoder.head_kin.b")->value = b;
    ad::Tape tape(false);
    nn::Binding bind(tape);
    auto roll = dec.rollout_kinematic(bind, tape.constant(Mat::Zero(6, 1)),
                                      tape.constant(Mat::Zero(3, 1)), init, 10, 0.5);
    return Vec2(roll.x.back().scalar(), roll.y.back().scalar());
  };

  double prev_err = -1;
  for (int substeps : {1, 2, 4, 8, 16, 32, 64}) {
    const double err = (run_with_substeps(substeps) - reference.back()).norm();
    if (prev_err > 0) {
      const double ratio = err / prev_err;
      // First order: error halves when substeps double, within 20%.
      CHECK(ratio > 0.3);
      CHECK(ratio < 0.7);
    }
    prev_err = err;
  }
}

TEST_CASE("displacement rollout: cumulative sums from the last position") {
  Fixture f;
  f.zero_outputs();
  // Bias-only displacement (1, 0) per step.
  Mat b(2, 1);
  b << 1.0, 0.0;
  f.store.find("decoder.head_disp.b")->value = b;
  ad::Tape tape(false);
  nn::Binding bind(tape);
  auto roll = f.dec.rollout_displacement(bind, tape.constant(Mat::Zero(6, 1)),
                                         tape.constant(Mat::Zero(3, 1)), Vec2(5, 5), 3);
  CHECK(roll.x[0].scalar() == doctest::Approx(6.0));
  CHECK(roll.x[1].scalar() == doctest::Approx(7.0));
  CHECK(roll.x[2].scalar() == doctest::Approx(8.0));
  for (int t = 0; t < 3; ++t) CHECK(roll.y[t].scalar() == doctest::Approx(5.0));
}

TEST_CASE("all-zero displacements keep the position constant") {
  Fixture f;
  f.zero_outputs();
  ad::Tape tape(false);
  nn::Binding bind(tape);
  auto roll = f.dec.rollout_displacement(bind, tape.constant(Mat::Zero(6, 1)),
                                         tape.constant(Mat::Zero(3, 1)), Vec2(2, 3), 4);
  for (int t = 0; t < 4; ++t) {
    CHECK(roll.x[t].scalar() == 2.0);
    CHECK(roll.y[t].scalar() == 3.0);
  }
}

TEST_CASE("empty horizon returns an empty trajectory; bad dt errors") {
  Fixture f;
  ad::Tape tape(false);
  nn::Binding bind(tape);
  auto roll = f.dec.rollout_kinematic(bind, tape.constant(Mat::Zero(6, 1)),
                                      tape.constant(Mat::Zero(3, 1)), KinematicState{}, 0, 0.5);
  CHECK(roll.x.empty());
  CHECK_THROWS_AS(f.dec.rollout_kinematic(bind, tape.constant(Mat::Zero(6, 1)),
                                          tape.constant(Mat::Zero(3, 1)), KinematicState{}, 3,
                                          0.0),
                  std::invalid_argument);
}

TEST_CASE("gradient of displacement terminal position matches finite differences") {
  Fixture f;
  Rng rng(79);
  Mat summary(6, 1), z(3, 1);
  for (int i = 0; i < 6; ++i) summary(i, 0) = rng.normal();
  for (int i = 0; i < 3; ++i) z(i, 0) = rng.normal();
  auto build = [&](nn::Binding& bind) {
    auto roll = f.dec.rollout_displacement(bind, bind.tape().constant(summary),
                                           bind.tape().constant(z), Vec2(0, 0), 4);
    return ad::add(ad::cmul(roll.x.back(), roll.x.back()),
                   ad::cmul(roll.y.back(), roll.y.back()));
  };
  auto rep = nn::check_gradients(f.store, build);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("gradient of kinematic terminal position matches finite differences") {
  Fixture f;
  Rng rng(83);
  Mat summary(6, 1), z(3, 1);
  for (int i = 0; i < 6; ++i) summary(i, 0) = rng.normal();
  for (int i = 0; i < 3; ++i) z(i, 0) = rng.normal();
  KinematicState init;
  init.v = 2.0;
  init.psi = 0.4;
  auto build = [&](nn::Binding& bind) {
    auto roll = f.dec.rollout_kinematic(bind, bind.tape().constant(summary),
                                        bind.tape().constant(z), init, 4, 0.5);
    return ad::add(ad::cmul(roll.x.back(), roll.x.back()),
                   ad::cmul(roll.y.back(), roll.y.back()));
  };
  auto rep = nn::check_gradients(f.store, build);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("latent conditioning: different z values give different trajectories") {
  Fixture f;
  Rng rng(89);
  Mat summary(6, 1);
  for (int i = 0; i < 6; ++i) summary(i, 0) = rng.normal();
  Mat z1(3, 1), z2(3, 1);
  for (int i = 0; i < 3; ++i) {
    z1(i, 0) = rng.normal();
    z2(i, 0) = rng.normal();
  }
  ad::Tape tape(false);
  nn::Binding bind(tape);
  KinematicState init;
  init.v = 2.0;
  auto r1 = f.dec.rollout_kinematic(bind, tape.constant(summary), tape.constant(z1), init, 5, 0.5);
  auto r2 = f.dec.rollout_kinematic(bind, tape.constant(summary), tape.constant(z2), init, 5, 0.5);
  double diff = 0;
  for (int t = 0; t < 5; ++t)
    diff += std::abs(r1.x[t].scalar() - r2.x[t].scalar()) +
            std::abs(r1.y[t].scalar() - r2.y[t].scalar());
  CHECK(diff > 1e-9);
}

TEST_CASE("init_kinematic_state derives speed/heading from the last observation") {
  AgentState last;
  last.position = Vec2(3, 4);
  last.velocity = Vec2(3, 4);  // speed 5, heading atan2(4,3)
  KinematicState s = init_kinematic_state(last, 1.5);
  CHECK(s.x == 3.0);
  CHECK(s.y == 4.0);
  CHECK(s.v == doctest::Approx(5.0));
  CHECK(s.psi == doctest::Approx(std::atan2(4.0, 3.0)));
  CHECK(s.beta == 0.0);
  // Stationary: fall back to the recorded heading.
  last.velocity = Vec2::Zero();
  last.heading = 1.1;
  CHECK(init_kinematic_state(last, 1.5).psi == doctest::Approx(1.1));
}
