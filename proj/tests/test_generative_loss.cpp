#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "trajpred/generative_loss.hpp"
#include "trajpred/rng.hpp"

using namespace trajpred;

namespace {

Mat random_samples(Rng& rng, int dim, int n, double mean = 0.0) {
  Mat m(dim, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < dim; ++r) m(r, c) = mean + rng.normal();
  return m;
}

}  // namespace

TEST_CASE("weight constraint: 0 < 1 - alpha < beta") {
  LossWeights ok{1.0, 0.5, 0.6};
  CHECK_NOTHROW(ok.validate());
  LossWeights bad{1.0, 0.5, 0.4};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  LossWeights alpha_too_big{1.0, 1.0, 2.0};
  CHECK_THROWS_AS(alpha_too_big.validate(), std::invalid_argument);
  LossWeights degenerate{1.0, 0.0, 0.0};
  CHECK_THROWS_AS(degenerate.validate(), std::invalid_argument);
  CHECK_NOTHROW(degenerate.validate(/*allow_degenerate=*/true));
}

TEST_CASE("reconstruction: identity gives zero; unit offsets sum") {
  ad::Tape tape;
  auto mk = [&](double v) { return tape.leaf(Mat::Constant(1, 1, v)); };

  SUBCASE("prediction equals truth") {
    std::vector<std::vector<ad::Var>> px = {{mk(1.0), mk(2.0)}};
    std::vector<std::vector<ad::Var>> py = {{mk(0.5), mk(0.5)}};
    std::vector<std::vector<Vec2>> truth = {{Vec2(1.0, 0.5), Vec2(2.0, 0.5)}};
    CHECK(reconstruction_loss(px, py, truth).scalar() == 0.0);
  }
  SUBCASE("single agent, T_f = 2, error (1,0) each step: squared-norm loss 2") {
    std::vector<std::vector<ad::Var>> px = {{mk(1.0), mk(2.0)}};
    std::vector<std::vector<ad::Var>> py = {{mk(0.0), mk(0.0)}};
    std::vector<std::vector<Vec2>> truth = {{Vec2(0.0, 0.0), Vec2(1.0, 0.0)}};
    CHECK(reconstruction_loss(px, py, truth).scalar() == doctest::Approx(2.0));
  }
  SUBCASE("gradient is 2 (pred - truth) / N_b elementwise") {
    std::vector<std::vector<ad::Var>> px = {{mk(1.0)}, {mk(3.0)}};
    std::vector<std::vector<ad::Var>> py = {{mk(0.0)}, {mk(-1.0)}};
    std::vector<std::vector<Vec2>> truth = {{Vec2(0.5, 0.0)}, {Vec2(1.0, 0.0)}};
    ad::Var loss = reconstruction_loss(px, py, truth);
    tape.backward(loss);
    CHECK(px[0][0].grad()(0, 0) == doctest::Approx(2.0 * (1.0 - 0.5) / 2));
    CHECK(px[1][0].grad()(0, 0) == doctest::Approx(2.0 * (3.0 - 1.0) / 2));
    CHECK(py[1][0].grad()(0, 0) == doctest::Approx(2.0 * (-1.0 - 0.0) / 2));
  }
  SUBCASE("shape mismatch is rejected") {
    std::vector<std::vector<ad::Var>> px = {{mk(1.0)}};
    std::vector<std::vector<ad::Var>> py = {{mk(0.0)}};
    std::vector<std::vector<Vec2>> truth = {{Vec2(0, 0), Vec2(1, 1)}};
    CHECK_THROWS_AS(reconstruction_loss(px, py, truth), std::invalid_argument);
  }
}

TEST_CASE("kl term: closed forms") {
  ad::Tape tape;
  const int d = 32;
  SUBCASE("zero means give zero") {
    std::vector<ad::Var> mus = {tape.leaf(Mat::Zero(d, 1)), tape.leaf(Mat::Zero(d, 1))};
    CHECK(kl_term(mus).scalar() == 0.0);
  }
  SUBCASE("unit mean in 32 dims gives 0.5") {
    Mat mu = Mat::Zero(d, 1);
    mu(0, 0) = 1.0;
    CHECK(kl_term({tape.leaf(mu)}).scalar() == doctest::Approx(0.5));
  }
  SUBCASE("batch of two unit means gives 0.5") {
    Mat mu1 = Mat::Zero(d, 1), mu2 = Mat::Zero(d, 1);
    mu1(0, 0) = 1.0;
    mu2(1, 0) = 1.0;
    CHECK(kl_term({tape.leaf(mu1), tape.leaf(mu2)}).scalar() == doctest::Approx(0.5));
  }
  SUBCASE("invariant under orthogonal rotation of the means") {
    Rng rng(3);
    Mat mu(4, 1);
    for (int i = 0; i < 4; ++i) mu(i, 0) = rng.normal();
    // Householder reflection (orthogonal).
    Mat v(4, 1);
    for (int i = 0; i < 4; ++i) v(i, 0) = rng.normal();
    v /= v.norm();
    Mat rot = Mat::Identity(4, 4) - 2.0 * v * v.transpose();
    const double a = kl_term({tape.leaf(mu)}).scalar();
    const double b = kl_term({tape.leaf(Mat(rot * mu))}).scalar();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("mmd: zero on identical sets, exact cancellation") {
  Rng rng(5);
  MmdConfig cfg;
  cfg.scale = 16.0;
  Mat x = random_samples(rng, 8, 20);
  CHECK(mmd_vstat(x, x, cfg) == 0.0);
  // Degenerate singletons.
  Mat single = Mat::Zero(8, 1);
  CHECK(mmd_vstat(single, single, cfg) == 0.0);
  // Symmetry in the two sample sets.
  Mat y = random_samples(rng, 8, 20);
  CHECK(mmd_vstat(x, y, cfg) == doctest::Approx(mmd_vstat(y, x, cfg)).epsilon(1e-12));
  // Nonnegative up to numerical noise.
  CHECK(mmd_vstat(x, y, cfg) > -1e-9);
  // RBF kernel path.
  MmdConfig rbf;
  rbf.kernel = MmdKernel::radial_basis;
  rbf.scale = 16.0;
  CHECK(mmd_vstat(x, x, rbf) == 0.0);
  CHECK(mmd_vstat(x, y, rbf) > -1e-9);
}

TEST_CASE("mmd: permutation-test oracle separates shifted Gaussians") {
  Rng rng(7);
  const int dim = 32, n = 512;
  MmdConfig cfg;
  cfg.scale = 2.0 * dim;
  Mat post = random_samples(rng, dim, n, 3.0);  // N(3*1, I)
  Mat prior = random_samples(rng, dim, n, 0.0);
  const double observed = mmd_vstat(post, prior, cfg);

  // Null distribution: pool and reshuffle labels 100 times.
  Mat pooled(dim, 2 * n);
  pooled.leftCols(n) = post;
  pooled.rightCols(n) = prior;
  std::vector<int> idx(2 * n);
  for (int i = 0; i < 2 * n; ++i) idx[i] = i;
  std::vector<double> null_stats;
  Rng shuffle_rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    shuffle_rng.shuffle(idx);
    Mat a(dim, n), b(dim, n);
    for (int i = 0; i < n; ++i) {
      a.col(i) = pooled.col(idx[i]);
      b.col(i) = pooled.col(idx[n + i]);
    }
    null_stats.push_back(mmd_vstat(a, b, cfg));
  }
  std::sort(null_stats.begin(), null_stats.end());
  const double p95 = null_stats[94];
  CHECK(observed > p95);
}

TEST_CASE("mmd tape op matches the plain estimator and its gradient checks out") {
  Rng rng(13);
  const int dim = 6, n = 8, m = 10;
  Mat ys = random_samples(rng, dim, m);
  std::vector<Mat> xs0;
  for (int i = 0; i < n; ++i) xs0.push_back(random_samples(rng, dim, 1));

  MmdConfig cfg;
  cfg.scale = 2.0 * dim;
  for (MmdKernel kernel : {MmdKernel::inverse_multiquadratic, MmdKernel::radial_basis}) {
    cfg.kernel = kernel;
    ad::Tape tape;
    std::vector<ad::Var> xs;
    for (const auto& x : xs0) xs.push_back(tape.leaf(x));
    ad::Var v = mmd_vstat_op(xs, ys, cfg);
    Mat packed(dim, n);
    for (int i = 0; i < n; ++i) packed.col(i) = xs0[i];
    CHECK(v.scalar() == doctest::Approx(mmd_vstat(packed, ys, cfg)).epsilon(1e-12));

    tape.backward(v);
    // Finite differences on the first sample.
    const double h = 1e-6;
    for (int r = 0; r < dim; ++r) {
      Mat xp = xs0[0], xm = xs0[0];
      xp(r, 0) += h;
      xm(r, 0) -= h;
      Mat pp = packed, pm = packed;
      pp.col(0) = xp;
      pm.col(0) = xm;
      const double num = (mmd_vstat(pp, ys, cfg) - mmd_vstat(pm, ys, cfg)) / (2 * h);
      CHECK(xs[0].grad()(r, 0) == doctest::Approx(num).epsilon(1e-4));
    }
  }
}

TEST_CASE("total loss: degeneration and assembly") {
  ad::Tape tape;
  ad::Var recon = tape.leaf(Mat::Constant(1, 1, 2.5));
  ad::Var kl = tape.leaf(Mat::Constant(1, 1, 0.7));
  ad::Var mmd = tape.leaf(Mat::Constant(1, 1, 0.3));

  SUBCASE("alpha = beta = 0 reduces to gamma * recon exactly") {
    LossWeights w{1.75, 0.0, 0.0};
    ad::Var total = total_loss(recon, kl, mmd, w);
    CHECK(total.scalar() == 1.75 * 2.5);
  }
  SUBCASE("all three terms combine") {
    LossWeights w{1.0, 0.5, 1.0};
    ad::Var total = total_loss(recon, kl, mmd, w);
    CHECK(total.scalar() == doctest::Approx(2.5 + 0.5 * 0.7 + 0.3));
  }
  SUBCASE("perfect reconstruction, zero means, identical sets: loss 0") {
    ad::Var zero = tape.leaf(Mat::Zero(1, 1));
    LossWeights w{1.0, 0.5, 1.0};
    CHECK(total_loss(zero, zero, zero, w).scalar() == 0.0);
  }
}
