#include "trajpred/context_raster.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace trajpred {

static_assert(std::endian::native == std::endian::little,
              "raster archive assumes little-endian storage");

namespace {

void validate(const GridSpec& spec) {
  require_arg(spec.cell_size > 0, "GridSpec: cell_size must be positive");
  require_arg(spec.rows >= 1 && spec.cols >= 1, "GridSpec: rows and cols must be >= 1");
}

template <typename Fn>
void for_each_state(const std::vector<Scene>& scenes, Fn&& fn) {
  for (const auto& scene : scenes)
    for (const auto& frame : scene.frames)
      for (const auto& [id, st] : frame.states) fn(st);
}

}  // namespace

ContextRasters build_context_rasters(const std::vector<Scene>& scenes, const GridSpec& spec) {
  validate(spec);
  ContextRasters out;
  out.spec = spec;
  out.density = Mat::Zero(spec.rows, spec.cols);
  out.vel_x = Mat::Zero(spec.rows, spec.cols);
  out.vel_y = Mat::Zero(spec.rows, spec.cols);
  out.built_from = Eigen::MatrixXi::Zero(spec.rows, spec.cols);

  Mat counts = Mat::Zero(spec.rows, spec.cols);
  for_each_state(scenes, [&](const AgentState& st) {
    auto cell = spec.cell_of(st.position);
    if (!cell) {
      ++out.overflow;
      return;
    }
    auto [r, c] = *cell;
    counts(r, c) += 1.0;
    out.built_from(r, c) += 1;
    out.vel_x(r, c) += st.velocity.x();
    out.vel_y(r, c) += st.velocity.y();
  });

  const double max_count = counts.maxCoeff();
  if (max_count > 0.0) {
    out.density = counts / max_count;
  } else {
    out.empty_warning = true;
  }
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c)
      if (out.built_from(r, c) > 0) {
        out.vel_x(r, c) /= out.built_from(r, c);
        out.vel_y(r, c) /= out.built_from(r, c);
      }
  return out;
}

Mat build_density_map(const std::vector<Scene>& scenes, const GridSpec& spec,
                      std::int64_t* overflow, bool* empty_warning) {
  ContextRasters r = build_context_rasters(scenes, spec);
  if (overflow) *overflow = r.overflow;
  if (empty_warning) *empty_warning = r.empty_warning;
  return r.density;
}

std::pair<Mat, Mat> build_velocity_field(const std::vector<Scene>& scenes, const GridSpec& spec) {
  ContextRasters r = build_context_rasters(scenes, spec);
  return {r.vel_x, r.vel_y};
}

GridSpec fit_grid(const std::vector<Scene>& scenes, double cell_size, double margin) {
  require_arg(cell_size > 0, "fit_grid: cell_size must be positive");
  double lo_x = 0, lo_y = 0, hi_x = 0, hi_y = 0;
  bool first = true;
  for_each_state(scenes, [&](const AgentState& st) {
    if (first) {
      lo_x = hi_x = st.position.x();
      lo_y = hi_y = st.position.y();
      first = false;
    } else {
      lo_x = std::min(lo_x, st.position.x());
      hi_x = std::max(hi_x, st.position.x());
      lo_y = std::min(lo_y, st.position.y());
      hi_y = std::max(hi_y, st.position.y());
    }
  });
  GridSpec spec;
  spec.cell_size = cell_size;
  spec.origin = Vec2(lo_x - margin, lo_y - margin);
  spec.cols = std::max(1, static_cast<int>(std::ceil((hi_x + margin - spec.origin.x()) / cell_size)) + 1);
  spec.rows = std::max(1, static_cast<int>(std::ceil((hi_y + margin - spec.origin.y()) / cell_size)) + 1);
  return spec;
}

LocalContext crop_local(const ContextRasters& rasters, const Vec2& center, double orientation,
                        int h, int w) {
  require_arg(h % 2 == 1 && w % 2 == 1, "crop_local: H and W must be odd");
  const double s = rasters.spec.cell_size;
  const int ch = h / 2, cw = w / 2;
  const double co = std::cos(orientation), si = std::sin(orientation);

  LocalContext out;
  out.center = center;
  out.orientation = orientation;
  out.density = Mat::Zero(h, w);
  out.vel_ax = Mat::Zero(h, w);
  out.vel_ay = Mat::Zero(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Vec2 base((c - cw) * s, (r - ch) * s);
      const Vec2 world = center + Vec2(co * base.x() - si * base.y(),
                                       si * base.x() + co * base.y());
      auto cell = rasters.spec.cell_of(world);
      if (!cell) continue;
      auto [gr, gc] = *cell;
      out.density(r, c) = rasters.density(gr, gc);
      const double vx = rasters.vel_x(gr, gc), vy = rasters.vel_y(gr, gc);
      // Rotate the sampled velocity into the agent frame: R(-orientation) * v.
      out.vel_ax(r, c) = co * vx + si * vy;
      out.vel_ay(r, c) = -si * vx + co * vy;
    }
  }
  return out;
}

namespace {

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ofstream& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

void put_mat(std::ofstream& out, const Mat& m) {
  put<std::int32_t>(out, static_cast<std::int32_t>(m.rows()));
  put<std::int32_t>(out, static_cast<std::int32_t>(m.cols()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
}

template <typename T>
T get(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), "load_rasters: truncated archive");
  return v;
}

Mat get_mat(std::ifstream& in) {
  const auto rows = get<std::int32_t>(in);
  const auto cols = get<std::int32_t>(in);
  require(rows >= 0 && cols >= 0, "load_rasters: bad matrix header");
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = get<double>(in);
  return m;
}

constexpr char kMagic[8] = {'T', 'P', 'R', 'A', 'S', 'T', '0', '1'};

}  // namespace

void save_rasters(const ContextRasters& rasters, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "save_rasters: cannot open '" + path + "'");
  put_bytes(out, kMagic, sizeof(kMagic));
  put<double>(out, rasters.spec.origin.x());
  put<double>(out, rasters.spec.origin.y());
  put<double>(out, rasters.spec.cell_size);
  put<std::int32_t>(out, rasters.spec.rows);
  put<std::int32_t>(out, rasters.spec.cols);
  put_mat(out, rasters.density);
  put_mat(out, rasters.vel_x);
  put_mat(out, rasters.vel_y);
  put<std::int32_t>(out, rasters.built_from.rows());
  put<std::int32_t>(out, rasters.built_from.cols());
  for (int r = 0; r < rasters.built_from.rows(); ++r)
    for (int c = 0; c < rasters.built_from.cols(); ++c)
      put<std::int64_t>(out, rasters.built_from(r, c));
  put<std::int64_t>(out, rasters.overflow);
  put<std::uint8_t>(out, rasters.empty_warning ? 1 : 0);
  require(out.good(), "save_rasters: write failed for '" + path + "'");
}

ContextRasters load_rasters(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_rasters: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kMagic, 8) == 0,
          "load_rasters: '" + path + "' is not a raster archive");
  ContextRasters r;
  r.spec.origin.x() = get<double>(in);
  r.spec.origin.y() = get<double>(in);
  r.spec.cell_size = get<double>(in);
  r.spec.rows = get<std::int32_t>(in);
  r.spec.cols = get<std::int32_t>(in);
  r.density = get_mat(in);
  r.vel_x = get_mat(in);
  r.vel_y = get_mat(in);
  const auto br = get<std::int32_t>(in);
  const auto bc = get<std::int32_t>(in);
  r.built_from.resize(br, bc);
  for (int i = 0; i < br; ++i)
    for (int j = 0; j < bc; ++j) r.built_from(i, j) = static_cast<int>(get<std::int64_t>(in));
  r.overflow = get<std::int64_t>(in);
  r.empty_warning = get<std::uint8_t>(in) != 0;
  return r;
}

}  // namespace trajpred
