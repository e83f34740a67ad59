#pragma once

#include <cstdint>
#include <optional>

#include "trajpred/data_model.hpp"

namespace trajpred {

// Grid cells are half-open [low, high) on both axes, so boundary points bin
// into the higher-index cell. Row index runs along y, column index along x.
struct GridSpec {
  Vec2 origin = Vec2::Zero();  // world coordinate of cell (0,0)'s low corner
  double cell_size = 1.0;
  int rows = 1;
  int cols = 1;

  std::optional<std::pair<int, int>> cell_of(const Vec2& p) const {
    const int c = static_cast<int>(std::floor((p.x() - origin.x()) / cell_size));
    const int r = static_cast<int>(std::floor((p.y() - origin.y()) / cell_size));
    if (r < 0 || r >= rows || c < 0 || c >= cols) return std::nullopt;
    return std::make_pair(r, c);
  }
};

// Global context built from the training split: max-normalized occupancy
// histogram plus per-cell mean velocity.
struct ContextRasters {
  GridSpec spec;
  Mat density;                 // rows x cols, values in [0, 1]
  Mat vel_x, vel_y;            // per-cell mean velocity; zero where unobserved
  Eigen::MatrixXi built_from;  // contributing observation count per cell
  std::int64_t overflow = 0;   // observations outside the grid
  bool empty_warning = false;  // set when no observation landed anywhere
};

// Agent-centered crop, rotated so the agent's moving direction is aligned
// with the patch axes; velocity vectors are expressed in the agent frame.
struct LocalContext {
  Mat density;        // H x W
  Mat vel_ax, vel_ay  /* agent-frame components */;
  Vec2 center = Vec2::Zero();
  double orientation = 0.0;
};

Mat build_density_map(const std::vector<Scene>& scenes, const GridSpec& spec,
                      std::int64_t* overflow = nullptr, bool* empty_warning = nullptr);

std::pair<Mat, Mat> build_velocity_field(const std::vector<Scene>& scenes, const GridSpec& spec);

// Density + velocity field + per-cell counts in one pass.
ContextRasters build_context_rasters(const std::vector<Scene>& scenes, const GridSpec& spec);

// Fits a grid around every observation in the scenes, with a margin (world
// units) on each side.
GridSpec fit_grid(const std::vector<Scene>& scenes, double cell_size, double margin);

// Samples an H x W patch (H, W odd) centered on `center`, rotated by
// `orientation`. Patch cell (r, c) reads the global cell containing
// center + R(orientation) * ((c - W/2) * s, (r - H/2) * s); out-of-grid
// samples read zero. Velocity samples are rotated into the agent frame.
LocalContext crop_local(const ContextRasters& rasters, const Vec2& center, double orientation,
                        int h, int w);

// Bit-exact binary archive.
void save_rasters(const ContextRasters& rasters, const std::string& path);
ContextRasters load_rasters(const std::string& path);

}  // namespace trajpred
