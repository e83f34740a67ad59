#include "trajpred/plot.hpp"

#include <zlib.h>

#include <fstream>

#include "json.hpp"

namespace trajpred {

Canvas::Canvas(int w, int h, unsigned char r, unsigned char g, unsigned char b)
    : width(w), height(h), rgb(static_cast<std::size_t>(3) * w * h) {
  for (int i = 0; i < w * h; ++i) {
    rgb[3 * i] = r;
    rgb[3 * i + 1] = g;
    rgb[3 * i + 2] = b;
  }
}

void Canvas::blend(int x, int y, unsigned char r, unsigned char g, unsigned char b, double alpha) {
  if (x < 0 || x >= width || y < 0 || y >= height) return;
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
  rgb[i] = static_cast<unsigned char>(alpha * r + (1 - alpha) * rgb[i]);
  rgb[i + 1] = static_cast<unsigned char>(alpha * g + (1 - alpha) * rgb[i + 1]);
  rgb[i + 2] = static_cast<unsigned char>(alpha * b + (1 - alpha) * rgb[i + 2]);
}

void Canvas::line(double x0, double y0, double x1, double y1, unsigned char r, unsigned char g,
                  unsigned char b, double alpha) {
  const double dx = x1 - x0, dy = y1 - y0;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    blend(static_cast<int>(std::lround(x0 + t * dx)), static_cast<int>(std::lround(y0 + t * dy)),
          r, g, b, alpha);
  }
}

void Canvas::disk(double cx, double cy, double radius, unsigned char r, unsigned char g,
                  unsigned char b, double alpha) {
  const int lo_x = static_cast<int>(std::floor(cx - radius)), hi_x = static_cast<int>(std::ceil(cx + radius));
  const int lo_y = static_cast<int>(std::floor(cy - radius)), hi_y = static_cast<int>(std::ceil(cy + radius));
  for (int y = lo_y; y <= hi_y; ++y)
    for (int x = lo_x; x <= hi_x; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) blend(x, y, r, g, b, alpha);
}

namespace {

void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::ofstream& f, const char type[4], const std::vector<unsigned char>& data) {
  std::vector<unsigned char> head;
  put_u32_be(head, static_cast<std::uint32_t>(data.size()));
  f.write(reinterpret_cast<const char*>(head.data()), 4);
  std::vector<unsigned char> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  f.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  const std::uint32_t crc =
      static_cast<std::uint32_t>(crc32(0, body.data(), static_cast<uInt>(body.size())));
  std::vector<unsigned char> tail;
  put_u32_be(tail, crc);
  f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png(const Canvas& canvas, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "write_png: cannot open '" + path + "'");
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<unsigned char> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(canvas.width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(canvas.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(f, "IHDR", ihdr);

  // Filter byte 0 per scanline.
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(canvas.height) * (canvas.width * 3 + 1));
  for (int y = 0; y < canvas.height; ++y) {
    raw.push_back(0);
    const unsigned char* row = canvas.rgb.data() + static_cast<std::size_t>(3) * y * canvas.width;
    raw.insert(raw.end(), row, row + 3 * canvas.width);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> compressed(bound);
  require(compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) ==
              Z_OK,
          "write_png: deflate failed");
  compressed.resize(bound);
  put_chunk(f, "IDAT", compressed);
  put_chunk(f, "IEND", {});
  require(f.good(), "write_png: write failed for '" + path + "'");
}

namespace {

struct WorldToPixel {
  double lo_x = 0, lo_y = 0, scale = 1;
  int width = 0, height = 0;

  // y flips so larger world y is higher in the image.
  double px(const Vec2& p) const { return (p.x() - lo_x) * scale; }
  double py(const Vec2& p) const { return height - 1 - (p.y() - lo_y) * scale; }
};

WorldToPixel fit_view(std::vector<Vec2> points, const ContextRasters* rasters, int target = 640) {
  double lo_x = 0, lo_y = 0, hi_x = 1, hi_y = 1;
  bool first = true;
  auto grow = [&](const Vec2& p) {
    if (first) {
      lo_x = hi_x = p.x();
      lo_y = hi_y = p.y();
      first = false;
    } else {
      lo_x = std::min(lo_x, p.x());
      hi_x = std::max(hi_x, p.x());
      lo_y = std::min(lo_y, p.y());
      hi_y = std::max(hi_y, p.y());
    }
  };
  for (const auto& p : points) grow(p);
  if (rasters) {
    grow(rasters->spec.origin);
    grow(rasters->spec.origin + Vec2(rasters->spec.cols * rasters->spec.cell_size,
                                     rasters->spec.rows * rasters->spec.cell_size));
  }
  const double margin = 2.0;
  lo_x -= margin;
  lo_y -= margin;
  hi_x += margin;
  hi_y += margin;
  WorldToPixel w;
  w.lo_x = lo_x;
  w.lo_y = lo_y;
  w.scale = target / std::max(hi_x - lo_x, hi_y - lo_y);
  w.width = static_cast<int>(std::ceil((hi_x - lo_x) * w.scale)) + 1;
  w.height = static_cast<int>(std::ceil((hi_y - lo_y) * w.scale)) + 1;
  return w;
}

void draw_density(Canvas& canvas, const WorldToPixel& view, const ContextRasters& rasters) {
  for (int y = 0; y < canvas.height; ++y)
    for (int x = 0; x < canvas.width; ++x) {
      const Vec2 world(view.lo_x + x / view.scale,
                       view.lo_y + (canvas.height - 1 - y) / view.scale);
      auto cell = rasters.spec.cell_of(world);
      if (!cell) continue;
      const double d = rasters.density(cell->first, cell->second);
      if (d <= 0) continue;
      const auto shade = static_cast<unsigned char>(255 - 110 * d);
      canvas.blend(x, y, shade, shade, shade, 1.0);
    }
}

void draw_polyline(Canvas& canvas, const WorldToPixel& view, const std::vector<Vec2>& pts,
                   unsigned char r, unsigned char g, unsigned char b, double alpha) {
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    canvas.line(view.px(pts[i]), view.py(pts[i]), view.px(pts[i + 1]), view.py(pts[i + 1]), r, g,
                b, alpha);
}

nlohmann::json pts_json(const std::vector<Vec2>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

}  // namespace

void render_prediction_plot(const PredictionCase& c, const PredictionSet& pred,
                            const std::string& png_path, const std::string& sidecar_path) {
  require_arg(pred.samples.size() == static_cast<std::size_t>(c.num_agents()),
              "render_prediction_plot: prediction/case mismatch");
  std::vector<Vec2> all;
  for (int a = 0; a < c.num_agents(); ++a) {
    for (const auto& st : c.history[a]) all.push_back(st.position);
    for (const auto& st : c.future[a]) all.push_back(st.position);
    for (const auto& s : pred.samples[a])
      for (const auto& p : s.pos) all.push_back(p);
  }
  const ContextRasters* rasters = c.rasters ? c.rasters.get() : nullptr;
  WorldToPixel view = fit_view(all, rasters);
  Canvas canvas(view.width, view.height);
  if (rasters) draw_density(canvas, view, *rasters);

  nlohmann::json sidecar;
  sidecar["image"] = png_path;
  sidecar["scene"] = c.scene_name;
  sidecar["window_start"] = c.window_start;
  sidecar["mode"] = to_string(pred.mode);
  sidecar["k"] = pred.k;
  sidecar["agents"] = nlohmann::json::array();

  for (int a = 0; a < c.num_agents(); ++a) {
    std::vector<Vec2> hist, truth;
    for (const auto& st : c.history[a]) hist.push_back(st.position);
    for (const auto& st : c.future[a]) truth.push_back(st.position);

    // Sample fan: the predicted distribution as a translucent green mask.
    int best = 0;
    double best_ade = -1;
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t s = 0; s < pred.samples[a].size(); ++s) {
      const auto& traj = pred.samples[a][s];
      std::vector<Vec2> fan = {hist.back()};
      fan.insert(fan.end(), traj.pos.begin(), traj.pos.end());
      draw_polyline(canvas, view, fan, 30, 170, 80, 0.22);
      samples.push_back(pts_json(traj.pos));
      if (!truth.empty()) {
        double ade = 0;
        for (std::size_t t = 0; t < truth.size() && t < traj.pos.size(); ++t)
          ade += (traj.pos[t] - truth[t]).norm();
        if (best_ade < 0 || ade < best_ade) {
          best_ade = ade;
          best = static_cast<int>(s);
        }
      }
    }
    draw_polyline(canvas, view, hist, 240, 200, 20, 1.0);  // history: yellow
    if (!truth.empty()) {
      std::vector<Vec2> gt = {hist.back()};
      gt.insert(gt.end(), truth.begin(), truth.end());
      draw_polyline(canvas, view, gt, 40, 90, 235, 1.0);  // ground truth: blue
    }
    const auto& best_traj = pred.samples[a][best];
    std::vector<Vec2> bestline = {hist.back()};
    bestline.insert(bestline.end(), best_traj.pos.begin(), best_traj.pos.end());
    draw_polyline(canvas, view, bestline, 225, 40, 40, 1.0);  // best sample: red
    canvas.disk(view.px(hist.back()), view.py(hist.back()), 3.0, 20, 20, 20);

    nlohmann::json agent;
    agent["track_id"] = c.track_ids[a];
    agent["history"] = pts_json(hist);
    agent["truth"] = pts_json(truth);
    agent["samples"] = samples;
    agent["best_sample"] = best;
    sidecar["agents"].push_back(agent);
  }

  write_png(canvas, png_path);
  std::ofstream out(sidecar_path);
  require(out.good(), "render_prediction_plot: cannot open '" + sidecar_path + "'");
  out << sidecar.dump(2) << "\n";
}

void render_attention_overlay(const PredictionCase& c, const AttentionDump& dump,
                              const std::string& png_path, const std::string& sidecar_path) {
  require_arg(!dump.alpha.empty(), "render_attention_overlay: empty dump");
  const int last_round = static_cast<int>(dump.alpha.size()) - 1;
  const int last_t = static_cast<int>(dump.alpha[last_round].size()) - 1;
  require_arg(last_t >= 0, "render_attention_overlay: no timesteps captured");
  const auto& heads = dump.alpha[last_round][last_t];
  const int n = c.num_agents();

  std::vector<Vec2> pts;
  for (int a = 0; a < n; ++a) pts.push_back(c.history[a].back().position);
  WorldToPixel view = fit_view(pts, c.rasters ? c.rasters.get() : nullptr);
  Canvas canvas(view.width, view.height);
  if (c.rasters) draw_density(canvas, view, *c.rasters);

  // Mean attention over heads for each directed pair.
  Mat alpha = Mat::Zero(n, n);
  for (const auto& head : heads)
    for (const auto& row : head)
      for (std::size_t k = 0; k < row.members.size(); ++k)
        alpha(row.node, row.members[k]) += row.alpha[k] / static_cast<double>(heads.size());

  nlohmann::json sidecar;
  sidecar["image"] = png_path;
  sidecar["agents"] = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || alpha(i, j) <= 0) continue;
      canvas.line(view.px(pts[i]), view.py(pts[i]), view.px(pts[j]), view.py(pts[j]), 200, 60, 160,
                  std::min(1.0, 0.15 + 0.85 * alpha(i, j)));
    }
    canvas.disk(view.px(pts[i]), view.py(pts[i]), 4.0, 20, 20, 20);
    nlohmann::json agent;
    agent["track_id"] = c.track_ids[i];
    agent["position"] = {pts[i].x(), pts[i].y()};
    nlohmann::json arow = nlohmann::json::array();
    for (int j = 0; j < n; ++j) arow.push_back(alpha(i, j));
    agent["attention"] = arow;
    sidecar["agents"].push_back(agent);
  }
  write_png(canvas, png_path);
  std::ofstream out(sidecar_path);
  require(out.good(), "render_attention_overlay: cannot open '" + sidecar_path + "'");
  out << sidecar.dump(2) << "\n";
}

}  // namespace trajpred
