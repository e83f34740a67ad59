#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "trajpred/context_raster.hpp"
#include "trajpred/rng.hpp"

using namespace trajpred;

namespace {

Scene scene_from_points(const std::vector<Vec2>& points,
                        const std::vector<Vec2>& velocities = {}) {
  Scene s;
  s.dt = 1.0;
  s.frames.resize(1);
  s.frames[0].timestamp = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    AgentState st;
    st.position = points[i];
    st.velocity = i < velocities.size() ? velocities[i] : Vec2::Zero();
    st.agent_id = "a" + std::to_string(i);
    char key[16];
    std::snprintf(key, sizeof(key), "a%03zu", i);
    s.frames[0].states[key] = st;
  }
  return s;
}

GridSpec unit_grid(int rows, int cols) {
  GridSpec g;
  g.origin = Vec2(0, 0);
  g.cell_size = 1.0;
  g.rows = rows;
  g.cols = cols;
  return g;
}

}  // namespace

TEST_CASE("density: brute-force histogram oracle") {
  // 4 observations: 3 in cell (0,0), 1 in cell (1,1).
  auto s = scene_from_points({{0.2, 0.3}, {0.5, 0.5}, {0.9, 0.1}, {1.5, 1.5}});
  Mat d = build_density_map({s}, unit_grid(3, 3));
  CHECK(d(0, 0) == doctest::Approx(1.0));
  CHECK(d(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(d.sum() == doctest::Approx(1.0 + 1.0 / 3.0));
}

TEST_CASE("density: single observation saturates its cell") {
  auto s = scene_from_points({{2.5, 0.5}});
  Mat d = build_density_map({s}, unit_grid(2, 4));
  CHECK(d(0, 2) == 1.0);
  CHECK(d.sum() == 1.0);
}

TEST_CASE("density: boundary points bin upward (half-open cells)") {
  // x exactly on the shared boundary between columns 0 and 1.
  auto s = scene_from_points({{1.0, 0.5}});
  Mat d = build_density_map({s}, unit_grid(2, 3));
  CHECK(d(0, 1) == 1.0);
  CHECK(d(0, 0) == 0.0);
}

TEST_CASE("density: empty input yields a zero grid plus warning") {
  std::int64_t overflow = -1;
  bool warn = false;
  Mat d = build_density_map({}, unit_grid(2, 2), &overflow, &warn);
  CHECK(d.sum() == 0.0);
  CHECK(warn);
  CHECK(overflow == 0);
}

TEST_CASE("density: out-of-bounds observations count into the overflow tally") {
  auto s = scene_from_points({{0.5, 0.5}, {10.0, 10.0}});
  std::int64_t overflow = 0;
  bool warn = true;
  Mat d = build_density_map({s}, unit_grid(2, 2), &overflow, &warn);
  CHECK(overflow == 1);
  CHECK_FALSE(warn);
  CHECK(d(0, 0) == 1.0);
}

TEST_CASE("density: integer-cell translation translates the grid") {
  Rng rng(3);
  std::vector<Vec2> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(Vec2(rng.uniform(0, 4), rng.uniform(0, 4)));
  Mat base = build_density_map({scene_from_points(pts)}, unit_grid(8, 8));
  std::vector<Vec2> shifted;
  for (const auto& p : pts) shifted.push_back(p + Vec2(2.0, 3.0));
  Mat moved = build_density_map({scene_from_points(shifted)}, unit_grid(8, 8));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(moved(r + 3, c + 2) == base(r, c));
}

TEST_CASE("velocity field: per-cell mean, zero in empty cells") {
  auto s = scene_from_points({{0.5, 0.5}, {0.6, 0.4}}, {{1, 0}, {3, 0}});
  auto [vx, vy] = build_velocity_field({s}, unit_grid(2, 2));
  CHECK(vx(0, 0) == doctest::Approx(2.0));
  CHECK(vy(0, 0) == doctest::Approx(0.0));
  CHECK(vx(1, 1) == 0.0);
  CHECK(vy(1, 1) == 0.0);
}

TEST_CASE("velocity field: brute-force per-cell accumulation oracle") {
  // 3 agents over 2 frames on a small grid.
  Rng rng(9);
  Scene s;
  s.dt = 1.0;
  s.frames.resize(2);
  std::vector<Vec2> all_pos;
  std::vector<Vec2> all_vel;
  for (int f = 0; f < 2; ++f) {
    s.frames[f].timestamp = f;
    for (int a = 0; a < 3; ++a) {
      AgentState st;
      st.position = Vec2(rng.uniform(0, 3), rng.uniform(0, 3));
      st.velocity = Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
      st.agent_id = "a" + std::to_string(a);
      s.frames[f].states[st.agent_id] = st;
      all_pos.push_back(st.position);
      all_vel.push_back(st.velocity);
    }
  }
  GridSpec g = unit_grid(3, 3);
  auto [vx, vy] = build_velocity_field({s}, g);
  // Independent accumulation.
  Mat sum_x = Mat::Zero(3, 3), sum_y = Mat::Zero(3, 3), count = Mat::Zero(3, 3);
  for (std::size_t i = 0; i < all_pos.size(); ++i) {
    const int c = static_cast<int>(std::floor(all_pos[i].x()));
    const int r = static_cast<int>(std::floor(all_pos[i].y()));
    sum_x(r, c) += all_vel[i].x();
    sum_y(r, c) += all_vel[i].y();
    count(r, c) += 1;
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double ex = count(r, c) > 0 ? sum_x(r, c) / count(r, c) : 0.0;
      const double ey = count(r, c) > 0 ? sum_y(r, c) / count(r, c) : 0.0;
      CHECK(vx(r, c) == doctest::Approx(ex));
      CHECK(vy(r, c) == doctest::Approx(ey));
    }
}

TEST_CASE("velocity field: constant-velocity dataset fills occupied cells with it") {
  Rng rng(11);
  std::vector<Vec2> pts;
  std::vector<Vec2> vels;
  for (int i = 0; i < 20; ++i) {
    pts.push_back(Vec2(rng.uniform(0, 5), rng.uniform(0, 5)));
    vels.push_back(Vec2(1.25, -0.5));
  }
  auto s = scene_from_points(pts, vels);
  ContextRasters r = build_context_rasters({s}, unit_grid(5, 5));
  for (int row = 0; row < 5; ++row)
    for (int col = 0; col < 5; ++col)
      if (r.built_from(row, col) > 0) {
        CHECK(r.vel_x(row, col) == doctest::Approx(1.25));
        CHECK(r.vel_y(row, col) == doctest::Approx(-0.5));
      }
}

namespace {

ContextRasters asymmetric_rasters() {
  // 7x7 grid with a distinctive pattern and a constant velocity field.
  GridSpec g;
  g.origin = Vec2(0, 0);
  g.cell_size = 1.0;
  g.rows = 7;
  g.cols = 7;
  ContextRasters r;
  r.spec = g;
  r.density = Mat::Zero(7, 7);
  r.vel_x = Mat::Zero(7, 7);
  r.vel_y = Mat::Zero(7, 7);
  r.built_from = Eigen::MatrixXi::Ones(7, 7);
  for (int row = 0; row < 7; ++row)
    for (int col = 0; col < 7; ++col) {
      r.density(row, col) = (row * 7 + col) / 48.0;
      r.vel_x(row, col) = 1.0;
      r.vel_y(row, col) = 0.0;
    }
  return r;
}

}  // namespace

TEST_CASE("crop: identity rotation reads the neighborhood verbatim") {
  ContextRasters r = asymmetric_rasters();
  // Agent at the center of cell (3, 3).
  LocalContext lc = crop_local(r, Vec2(3.5, 3.5), 0.0, 3, 3);
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc)
      CHECK(lc.density(1 + dr, 1 + dc) == r.density(3 + dr, 3 + dc));
  CHECK(lc.vel_ax(0, 0) == doctest::Approx(1.0));
  CHECK(lc.vel_ay(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("crop: quarter-turn matches a brute-force rotation oracle") {
  ContextRasters r = asymmetric_rasters();
  const Vec2 center(3.5, 3.5);
  const double theta = kPi / 2;
  const int H = 3, W = 3;
  LocalContext lc = crop_local(r, center, theta, H, W);
  // Independent per-cell oracle evaluating the sampling rule directly.
  for (int row = 0; row < H; ++row)
    for (int col = 0; col < W; ++col) {
      const Vec2 base((col - W / 2) * 1.0, (row - H / 2) * 1.0);
      const Vec2 world = center + Vec2(std::cos(theta) * base.x() - std::sin(theta) * base.y(),
                                       std::sin(theta) * base.x() + std::cos(theta) * base.y());
      const int gc = static_cast<int>(std::floor(world.x()));
      const int gr = static_cast<int>(std::floor(world.y()));
      CHECK(lc.density(row, col) == r.density(gr, gc));
      // Velocity rotated into the agent frame by R(-pi/2): (1,0) -> (0,-1).
      CHECK(lc.vel_ax(row, col) == doctest::Approx(std::cos(theta) * 1.0));
      CHECK(lc.vel_ay(row, col) == doctest::Approx(-std::sin(theta) * 1.0));
    }
}

TEST_CASE("crop: out-of-grid cells read zero") {
  ContextRasters r = asymmetric_rasters();
  LocalContext lc = crop_local(r, Vec2(0.5, 0.5), 0.0, 5, 5);
  CHECK(lc.density(0, 0) == 0.0);  // below the grid
  CHECK(lc.vel_ax(0, 0) == 0.0);
  CHECK(lc.density(2, 2) == r.density(0, 0));
}

TEST_CASE("crop: even patch dims are rejected") {
  ContextRasters r = asymmetric_rasters();
  CHECK_THROWS_AS(crop_local(r, Vec2(3.5, 3.5), 0.0, 4, 3), std::invalid_argument);
  CHECK_THROWS_AS(crop_local(r, Vec2(3.5, 3.5), 0.0, 3, 4), std::invalid_argument);
}

TEST_CASE("crop equivariance on a rotation-symmetric pattern") {
  // A pattern invariant under 90-degree rotation about the grid center:
  // rotating the crop orientation by pi/2 leaves the density patch equal.
  GridSpec g;
  g.origin = Vec2(-3.5, -3.5);
  g.cell_size = 1.0;
  g.rows = 7;
  g.cols = 7;
  ContextRasters r;
  r.spec = g;
  r.density = Mat::Zero(7, 7);
  r.vel_x = Mat::Zero(7, 7);
  r.vel_y = Mat::Zero(7, 7);
  r.built_from = Eigen::MatrixXi::Ones(7, 7);
  for (int row = 0; row < 7; ++row)
    for (int col = 0; col < 7; ++col) {
      const double x = col - 3.0, y = row - 3.0;
      r.density(row, col) = (std::abs(x) + std::abs(y)) / 6.0;  // 4-fold symmetric
    }
  LocalContext a = crop_local(r, Vec2(0, 0), 0.0, 5, 5);
  LocalContext b = crop_local(r, Vec2(0, 0), kPi / 2, 5, 5);
  CHECK((a.density - b.density).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("raster archive round trip is bit-exact") {
  Rng rng(17);
  std::vector<Vec2> pts, vels;
  for (int i = 0; i < 40; ++i) {
    pts.push_back(Vec2(rng.uniform(0, 6), rng.uniform(0, 6)));
    vels.push_back(Vec2(rng.normal(), rng.normal()));
  }
  auto s = scene_from_points(pts, vels);
  ContextRasters r = build_context_rasters({s}, unit_grid(6, 6));
  r.overflow = 3;

  auto dir = std::filesystem::temp_directory_path() / "trajpred_raster_tests";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "rasters.bin").string();
  save_rasters(r, path);
  ContextRasters q = load_rasters(path);

  CHECK(q.spec.rows == r.spec.rows);
  CHECK(q.spec.cols == r.spec.cols);
  CHECK(q.spec.cell_size == r.spec.cell_size);
  CHECK(q.spec.origin == r.spec.origin);
  CHECK(std::memcmp(q.density.data(), r.density.data(), sizeof(double) * r.density.size()) == 0);
  CHECK(std::memcmp(q.vel_x.data(), r.vel_x.data(), sizeof(double) * r.vel_x.size()) == 0);
  CHECK(std::memcmp(q.vel_y.data(), r.vel_y.data(), sizeof(double) * r.vel_y.size()) == 0);
  CHECK(q.built_from == r.built_from);
  CHECK(q.overflow == 3);
  CHECK(q.empty_warning == r.empty_warning);

  // Saving the reloaded rasters reproduces the file byte-for-byte.
  const std::string path2 = (dir / "rasters2.bin").string();
  save_rasters(q, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
}
