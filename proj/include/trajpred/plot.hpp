#pragma once

#include "trajpred/context_raster.hpp"
#include "trajpred/gdat.hpp"
#include "trajpred/model.hpp"

namespace trajpred {

// Minimal RGB raster canvas with a PNG writer; enough for prediction fans
// and attention overlays without an imaging dependency.
struct Canvas {
  int width = 0, height = 0;
  std::vector<unsigned char> rgb;

  Canvas(int w, int h, unsigned char r = 255, unsigned char g = 255, unsigned char b = 255);
  void blend(int x, int y, unsigned char r, unsigned char g, unsigned char b, double alpha);
  void line(double x0, double y0, double x1, double y1, unsigned char r, unsigned char g,
            unsigned char b, double alpha = 1.0);
  void disk(double cx, double cy, double radius, unsigned char r, unsigned char g,
            unsigned char b, double alpha = 1.0);
};

void write_png(const Canvas& canvas, const std::string& path);

// History (yellow), ground truth (blue), sample fan (green mask), the
// best sample (red), over the density map when available. Writes the image
// plus a structured sidecar with every plotted coordinate.
void render_prediction_plot(const PredictionCase& c, const PredictionSet& pred,
                            const std::string& png_path, const std::string& sidecar_path);

// Agent positions at the last history step with line weights from the
// captured last-round topological attention (averaged over heads).
void render_attention_overlay(const PredictionCase& c, const AttentionDump& dump,
                              const std::string& png_path, const std::string& sidecar_path);

}  // namespace trajpred
