#include "trajpred/data_model.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace trajpred {

namespace fs = std::filesystem;

std::string to_string(AgentType t) {
  switch (t) {
    case AgentType::pedestrian: return "pedestrian";
    case AgentType::cyclist: return "cyclist";
    case AgentType::vehicle: return "vehicle";
  }
  return "pedestrian";
}

AgentType agent_type_from_string(const std::string& s) {
  if (s == "pedestrian") return AgentType::pedestrian;
  if (s == "cyclist") return AgentType::cyclist;
  if (s == "vehicle") return AgentType::vehicle;
  throw std::runtime_error("unknown agent_type '" + s + "'");
}

std::string to_string(Unit u) { return u == Unit::meters ? "meters" : "pixels"; }

Unit unit_from_string(const std::string& s) {
  if (s == "meters") return Unit::meters;
  if (s == "pixels") return Unit::pixels;
  throw std::runtime_error("unknown unit '" + s + "'");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct RawRow {
  long frame = 0;
  double timestamp = 0.0;
  std::string agent_id;
  AgentType type = AgentType::pedestrian;
  Vec2 pos = Vec2::Zero();
  std::optional<double> psi;
};

// Derives per-track velocities (backward difference, first frame backfilled)
// and, for vehicles without a heading, the finite-difference heading with
// carry-over across stationary steps.
void finalize_track(std::vector<AgentState*>& states, double dt) {
  const std::size_t n = states.size();
  if (n == 0) return;
  for (std::size_t k = 1; k < n; ++k)
    states[k]->velocity = (states[k]->position - states[k - 1]->position) / dt;
  states[0]->velocity = n > 1 ? states[1]->velocity : Vec2::Zero();

  constexpr double kSpeedEps = 1e-12;
  if (states[0]->type != AgentType::vehicle) return;
  bool any_missing = false;
  for (auto* s : states) any_missing = any_missing || !s->heading.has_value();
  if (!any_missing) return;
  // First pass: headings from motion. Second: carry across stationary steps.
  std::optional<double> carry;
  for (auto* s : states) {
    if (s->heading.has_value()) {
      carry = s->heading;
      continue;
    }
    if (s->velocity.norm() > kSpeedEps) {
      s->heading = wrap_angle(std::atan2(s->velocity.y(), s->velocity.x()));
      carry = s->heading;
    } else if (carry.has_value()) {
      s->heading = carry;
    }
  }
  // Leading stationary steps take the first resolved heading.
  std::optional<double> backfill;
  for (std::size_t k = n; k-- > 0;) {
    if (states[k]->heading.has_value())
      backfill = states[k]->heading;
    else
      states[k]->heading = backfill.value_or(0.0);
  }
}

Scene load_one_file(const std::string& path, const DatasetDescriptor& desc) {
  std::ifstream in(path);
  require(in.good(), "load_dataset: cannot open '" + path + "'");

  auto col_name = [&](const std::string& logical) {
    auto it = desc.columns.find(logical);
    return it == desc.columns.end() ? logical : it->second;
  };

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "load_dataset: '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv(line);
  auto col_index = [&](const std::string& logical, bool required) {
    const std::string name = col_name(logical);
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    require(!required, "load_dataset: '" + path + "' missing column '" + name + "'");
    return -1;
  };
  const int c_frame = col_index("frame_index", true);
  const int c_time = col_index("timestamp_s", true);
  const int c_id = col_index("agent_id", true);
  const int c_type = col_index("agent_type", true);
  const int c_x = col_index("x", true);
  const int c_y = col_index("y", true);
  const int c_psi = col_index("psi", false);

  std::vector<RawRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    auto fail = [&](const std::string& why) {
      throw std::runtime_error("load_dataset: " + path + ": line " + std::to_string(line_no) +
                               ": " + why);
    };
    const int needed = std::max({c_frame, c_time, c_id, c_type, c_x, c_y});
    if (static_cast<int>(f.size()) <= needed) fail("expected " + std::to_string(needed + 1) + " columns");
    RawRow r;
    try {
      r.frame = std::stol(f[c_frame]);
      r.timestamp = std::stod(f[c_time]);
      r.agent_id = f[c_id];
      r.type = agent_type_from_string(f[c_type]);
      r.pos = Vec2(std::stod(f[c_x]), std::stod(f[c_y]));
      if (c_psi >= 0 && static_cast<int>(f.size()) > c_psi && !f[c_psi].empty())
        r.psi = wrap_angle(std::stod(f[c_psi]));
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      fail(std::string("malformed row (") + e.what() + ")");
    }
    if (!std::isfinite(r.pos.x()) || !std::isfinite(r.pos.y()))
      fail("non-finite coordinates");
    rows.push_back(std::move(r));
  }
  require(!rows.empty(), "load_dataset: '" + path + "' has no data rows");

  // Frame index -> timestamp, in increasing frame order.
  std::map<long, double> frame_times;
  for (const auto& r : rows) {
    auto [it, inserted] = frame_times.emplace(r.frame, r.timestamp);
    if (!inserted)
      require(it->second == r.timestamp,
              "load_dataset: " + path + ": frame " + std::to_string(r.frame) +
                  " has conflicting timestamps");
  }
  std::vector<long> frame_ids;
  std::vector<double> times;
  for (auto& [fidx, ts] : frame_times) {
    frame_ids.push_back(fidx);
    times.push_back(ts);
  }
  require(times.size() >= 1, "load_dataset: no frames");
  double dt = desc.dt.value_or(times.size() > 1 ? times[1] - times[0] : 0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double gap = times[k] - times[k - 1];
    require(gap > 0, "load_dataset: " + path + ": non-increasing timestamps at frame " +
                         std::to_string(frame_ids[k]));
    if (std::abs(gap - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw std::runtime_error("load_dataset: " + path + ": non-uniform timestep between frames " +
                               std::to_string(frame_ids[k - 1]) + " and " +
                               std::to_string(frame_ids[k]) + " (gap " + fmt_double(gap) +
                               ", expected " + fmt_double(dt) + ")");
  }
  require(dt > 0 || times.size() == 1, "load_dataset: " + path + ": cannot determine dt");

  std::map<long, std::size_t> frame_pos;
  for (std::size_t k = 0; k < frame_ids.size(); ++k) frame_pos[frame_ids[k]] = k;

  Scene scene;
  scene.dt = dt;
  scene.unit = desc.unit;
  scene.name = fs::path(path).stem().string();
  scene.frames.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) scene.frames[k].timestamp = times[k];

  // Group rows per agent, ordered by frame; split non-contiguous runs.
  std::map<std::string, std::map<std::size_t, RawRow>> per_agent;
  for (auto& r : rows) {
    auto [it, inserted] = per_agent[r.agent_id].emplace(frame_pos[r.frame], r);
    require(inserted, "load_dataset: " + path + ": agent '" + r.agent_id +
                          "' appears twice in frame " + std::to_string(r.frame));
  }
  for (auto& [agent_id, by_frame] : per_agent) {
    std::vector<std::pair<std::size_t, RawRow>> seq(by_frame.begin(), by_frame.end());
    std::size_t run_start = 0;
    int run_no = 0;
    auto emit_run = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
      ++run_no;
      std::string track_id = run_no == 1 ? agent_id : agent_id + "#" + std::to_string(run_no);
      std::vector<AgentState*> track;
      for (std::size_t k = lo; k < hi; ++k) {
        const RawRow& r = seq[k].second;
        AgentState st;
        st.position = r.pos;
        st.heading = r.psi;
        st.agent_id = r.agent_id;
        st.type = r.type;
        auto [it, ins] = scene.frames[seq[k].first].states.emplace(track_id, st);
        require(ins, "load_dataset: duplicate track id " + track_id);
        track.push_back(&it->second);
      }
      finalize_track(track, dt);
    };
    for (std::size_t k = 1; k <= seq.size(); ++k) {
      if (k == seq.size() || seq[k].first != seq[k - 1].first + 1) {
        emit_run(run_start, k);
        run_start = k;
      }
    }
  }
  return scene;
}

}  // namespace

std::vector<Scene> load_dataset(const std::string& path, const DatasetDescriptor& desc) {
  require(fs::exists(path), "load_dataset: no such path '" + path + "'");
  std::vector<Scene> scenes;
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".csv") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    require(!files.empty(), "load_dataset: no .csv files in '" + path + "'");
    for (const auto& f : files) scenes.push_back(load_one_file(f, desc));
  } else {
    scenes.push_back(load_one_file(path, desc));
  }
  return scenes;
}

void save_scene(const Scene& scene, const std::string& path) {
  bool any_heading = false;
  for (const auto& fr : scene.frames)
    for (const auto& [id, st] : fr.states) any_heading = any_heading || st.heading.has_value();

  std::ofstream out(path);
  require(out.good(), "save_scene: cannot open '" + path + "'");
  out << "frame_index,timestamp_s,agent_id,agent_type,x,y";
  if (any_heading) out << ",psi";
  out << "\n";
  for (std::size_t k = 0; k < scene.frames.size(); ++k) {
    const Frame& fr = scene.frames[k];
    for (const auto& [track_id, st] : fr.states) {
      out << k << ',' << fmt_double(fr.timestamp) << ',' << st.agent_id << ','
          << to_string(st.type) << ',' << fmt_double(st.position.x()) << ','
          << fmt_double(st.position.y());
      if (any_heading) {
        out << ',';
        if (st.heading.has_value()) out << fmt_double(*st.heading);
      }
      out << "\n";
    }
  }
}

std::vector<PredictionCase> window_cases(const Scene& scene, int t_h, int t_f, int stride) {
  require_arg(t_h >= 2, "window_cases: T_h must be >= 2");
  require_arg(t_f >= 1, "window_cases: T_f must be >= 1");
  require_arg(stride >= 1, "window_cases: stride must be >= 1");
  const int total = t_h + t_f;
  const int frames = static_cast<int>(scene.frames.size());
  std::vector<PredictionCase> cases;
  if (frames < total) return cases;

  const Vec2 offset = scene_mean_position(scene);
  for (int s = 0; s + total <= frames; s += stride) {
    // Tracks present in every frame of the window.
    std::vector<std::string> ids;
    for (const auto& [id, st] : scene.frames[s].states) {
      bool everywhere = true;
      for (int k = 1; k < total && everywhere; ++k)
        everywhere = scene.frames[s + k].states.count(id) > 0;
      if (everywhere) ids.push_back(id);
    }
    if (ids.empty()) continue;
    PredictionCase c;
    c.track_ids = ids;
    c.dt = scene.dt;
    c.unit = scene.unit;
    c.scenario = scene.scenario;
    c.scene_name = scene.name;
    c.window_start = s;
    c.position_offset = offset;
    c.rasters = scene.rasters;
    c.history.resize(ids.size());
    c.future.resize(ids.size());
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (int k = 0; k < t_h; ++k) c.history[a].push_back(scene.frames[s + k].states.at(ids[a]));
      for (int k = 0; k < t_f; ++k)
        c.future[a].push_back(scene.frames[s + t_h + k].states.at(ids[a]));
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

Vec2 scene_mean_position(const Scene& scene) {
  Vec2 sum = Vec2::Zero();
  long n = 0;
  for (const auto& fr : scene.frames)
    for (const auto& [id, st] : fr.states) {
      sum += st.position;
      ++n;
    }
  return n > 0 ? Vec2(sum / static_cast<double>(n)) : Vec2::Zero();
}

}  // namespace trajpred
