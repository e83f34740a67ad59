#include "trajpred/synthetic.hpp"

namespace trajpred {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::corridor: return "corridor";
    case Scenario::crossing: return "crossing";
    case Scenario::arc: return "arc";
    case Scenario::mixed: return "mixed";
  }
  return "mixed";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "corridor") return Scenario::corridor;
  if (s == "crossing") return Scenario::crossing;
  if (s == "arc") return Scenario::arc;
  if (s == "mixed") return Scenario::mixed;
  throw std::runtime_error("unknown scenario '" + s + "'");
}

Vec2 PathPiece::pos(double s) const {
  if (kind == Kind::line) return p0 + s * dir;
  const double th = theta0 + sign * s / radius;
  return center + radius * Vec2(std::cos(th), std::sin(th));
}

double PathPiece::tangent(double s) const {
  if (kind == Kind::line) return std::atan2(dir.y(), dir.x());
  const double th = theta0 + sign * s / radius;
  return wrap_angle(th + sign * kPi / 2.0);
}

Vec2 SimPath::pos(double s) const {
  double rem = s;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (rem <= pieces[i].length || i + 1 == pieces.size()) return pieces[i].pos(rem);
    rem -= pieces[i].length;
  }
  return Vec2::Zero();
}

double SimPath::tangent(double s) const {
  double rem = s;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (rem <= pieces[i].length || i + 1 == pieces.size()) return pieces[i].tangent(rem);
    rem -= pieces[i].length;
  }
  return 0.0;
}

SimTrace simulate(std::vector<SimAgent> agents, int frames, double dt) {
  require_arg(frames >= 1 && dt > 0, "simulate: bad frame count or dt");
  const int n = static_cast<int>(agents.size());
  SimTrace trace;
  trace.position.assign(frames, std::vector<Vec2>(n));
  trace.heading.assign(frames, std::vector<double>(n));
  trace.speed.assign(frames, std::vector<double>(n));

  for (int f = 0; f < frames; ++f) {
    for (int i = 0; i < n; ++i) {
      trace.position[f][i] = agents[i].path.pos(agents[i].s);
      trace.heading[f][i] = agents[i].path.tangent(agents[i].s);
      trace.speed[f][i] = agents[i].v;
    }
    if (f + 1 == frames) break;
    for (int i = 0; i < n; ++i) {
      SimAgent& a = agents[i];
      double target = a.cruise;
      // Car following: back off when closing in on the leader along the path.
      if (a.leader >= 0) {
        const double gap = agents[a.leader].s - a.s;
        const double d_min = 4.0, headway = 1.0;
        if (gap < d_min + headway * a.v)
          target = std::min(target, std::max(0.0, (gap - d_min) / headway));
      }
      // Yielding: stop before the conflict point while a priority agent is
      // close to it and has not yet cleared it.
      if (a.conflict_s >= 0 && a.s < a.conflict_s) {
        bool threat = false;
        for (auto [other, other_conflict_s] : a.yield_to) {
          const double d_other = other_conflict_s - agents[other].s;
          if (d_other > -3.0 && d_other < a.yield_radius) threat = true;
        }
        if (threat) {
          const double room = a.conflict_s - a.stop_margin - a.s;
          target = room <= 0.25 ? 0.0
                                : std::min(target, std::sqrt(2.0 * a.accel * room));
        }
      }
      const double acc = std::clamp((target - a.v) / dt, -a.accel, a.accel);
      a.v = std::max(0.0, a.v + acc * dt);
      a.s += a.v * dt;
    }
  }
  return trace;
}

namespace {

SimPath line_path(const Vec2& p0, const Vec2& dir) {
  PathPiece p;
  p.kind = PathPiece::Kind::line;
  p.p0 = p0;
  p.dir = dir.normalized();
  return SimPath{{p}};
}

SimPath circle_path(const Vec2& center, double radius, double theta0) {
  PathPiece p;
  p.kind = PathPiece::Kind::arc;
  p.center = center;
  p.radius = radius;
  p.theta0 = theta0;
  p.sign = 1.0;
  return SimPath{{p}};
}

// Straight approach of length `entry_len` joining the circle tangentially at
// angle `phi`, then circulating counter-clockwise.
SimPath tangent_entry_path(const Vec2& center, double radius, double phi, double entry_len) {
  const Vec2 join = center + radius * Vec2(std::cos(phi), std::sin(phi));
  const Vec2 dir(-std::sin(phi), std::cos(phi));  // ccw tangent
  PathPiece entry;
  entry.kind = PathPiece::Kind::line;
  entry.p0 = join - entry_len * dir;
  entry.dir = dir;
  entry.length = entry_len;
  PathPiece arc;
  arc.kind = PathPiece::Kind::arc;
  arc.center = center;
  arc.radius = radius;
  arc.theta0 = phi;
  arc.sign = 1.0;
  return SimPath{{entry, arc}};
}

}  // namespace

std::vector<SimAgent> make_corridor(Rng& rng, int n_agents) {
  // One-way lanes along +x; agents spaced far enough apart that no
  // interaction rule engages, so velocities stay exactly constant.
  std::vector<SimAgent> agents;
  const double lane_w = 3.5;
  for (int i = 0; i < n_agents; ++i) {
    SimAgent a;
    const int lane = i % 3;
    a.path = line_path(Vec2(0.0, (lane - 1) * lane_w), Vec2(1.0, 0.0));
    a.s = -40.0 + 22.0 * (i / 3) + rng.uniform(0.0, 6.0);
    a.cruise = rng.uniform(4.0, 9.0);
    a.v = a.cruise;
    agents.push_back(a);
  }
  return agents;
}

std::vector<SimAgent> make_crossing(Rng& rng, int n_agents) {
  // Two one-way corridors meeting at the origin: +x traffic and +y traffic.
  // The corridor whose head arrives later yields to the other's head.
  const int n_a = std::max(1, n_agents / 2);
  const int n_b = std::max(1, n_agents - n_a);
  std::vector<SimAgent> agents;

  auto build_chain = [&](int count, const Vec2& dir, int index_base) {
    for (int i = 0; i < count; ++i) {
      SimAgent a;
      a.path = line_path(Vec2::Zero(), dir);
      a.cruise = rng.uniform(4.0, 8.0);
      a.v = a.cruise;
      const double arrive = rng.uniform(2.5, 5.0) + 11.0 * i / std::max(1.0, a.cruise);
      a.s = -a.cruise * arrive - 11.0 * i;
      if (i > 0) a.leader = index_base + i - 1;
      agents.push_back(a);
    }
  };
  build_chain(n_a, Vec2(1.0, 0.0), 0);
  build_chain(n_b, Vec2(0.0, 1.0), n_a);

  // Conflict point for both heads is the origin; arc length there is -s0.
  const double eta_a = -agents[0].s / agents[0].cruise;
  const double eta_b = -agents[n_a].s / agents[n_a].cruise;
  const int yielder = eta_a <= eta_b ? n_a : 0;
  const int priority = yielder == 0 ? n_a : 0;
  agents[yielder].conflict_s = -agents[yielder].s;
  agents[yielder].yield_to = {{priority, -agents[priority].s}};
  return agents;
}

std::vector<SimAgent> make_arc_merge(Rng& rng, int n_agents) {
  // Fixed circle so the density map and velocity field are sharp across the
  // dataset; four discrete entries like a real roundabout.
  const double radius = 15.0;
  const Vec2 center(0.0, 0.0);
  const double entry_len = 20.0;
  const double phi = (kPi / 2.0) * rng.uniform_int(0, 3);

  std::vector<SimAgent> agents;
  SimAgent merger;
  merger.path = tangent_entry_path(center, radius, phi, entry_len);
  merger.cruise = rng.uniform(4.0, 6.5);
  merger.v = merger.cruise;
  merger.s = entry_len - merger.cruise * rng.uniform(2.0, 4.5);
  merger.conflict_s = entry_len;
  agents.push_back(merger);

  const int n_circ = n_agents - 1;
  for (int i = 0; i < n_circ; ++i) {
    SimAgent c;
    // Bias circulating agents upstream of the merge point so roughly half
    // the scenes force a yield.
    const double behind = rng.uniform(-0.4, 2.2);
    const double theta0 = wrap_angle(phi - behind - 2.0 * kPi * i / std::max(1, n_circ));
    c.path = circle_path(center, radius, theta0);
    c.cruise = rng.uniform(4.0, 7.0);
    c.v = c.cruise;
    if (i > 0) c.leader = static_cast<int>(agents.size()) - 1;
    agents.push_back(c);
    // Their next arrival at the merge angle, measured in ccw arc length.
    double delta = phi - theta0;
    while (delta < 0) delta += 2.0 * kPi;
    agents[0].yield_to.emplace_back(static_cast<int>(agents.size()) - 1, radius * delta);
  }
  return agents;
}

namespace {

// Necessary feasibility conditions under the decoder's default bounds:
// per-step speed change within a_max, course-rate within the bicycle
// model's reachable set. Checked on pre-noise trajectories.
void check_feasible(const SimTrace& trace, double dt) {
  const double a_max = 4.0, omega_max = 0.6, l_r = 1.5, tol = 1e-6;
  const int frames = static_cast<int>(trace.position.size());
  const int n = frames > 0 ? static_cast<int>(trace.position[0].size()) : 0;
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f + 1 < frames; ++f) {
      const double dv = trace.speed[f + 1][i] - trace.speed[f][i];
      require(std::abs(dv) / dt <= a_max + tol, "generate_synthetic: accel bound violated");
      const double dchi = wrap_angle(trace.heading[f + 1][i] - trace.heading[f][i]);
      const double limit = trace.speed[f][i] / l_r + omega_max;
      require(std::abs(dchi) / dt <= limit + tol,
              "generate_synthetic: course-rate bound violated");
    }
  }
}

}  // namespace

std::vector<Scene> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  require_arg(spec.count >= 1, "generate_synthetic: count must be >= 1");
  require_arg(spec.min_agents >= 2 && spec.max_agents >= spec.min_agents,
              "generate_synthetic: need 2..N agents");
  require_arg(spec.frames >= 3 && spec.dt > 0, "generate_synthetic: bad frames/dt");
  require_arg(spec.noise_std >= 0, "generate_synthetic: negative noise");

  Rng rng(seed);
  std::vector<Scene> scenes;
  for (int sc = 0; sc < spec.count; ++sc) {
    Scenario kind = spec.scenario;
    if (kind == Scenario::mixed)
      kind = (sc % 2 == 0) ? Scenario::crossing : Scenario::arc;
    Rng scene_rng = rng.fork(static_cast<std::uint64_t>(sc));
    const int n_agents = scene_rng.uniform_int(spec.min_agents, spec.max_agents);

    std::vector<SimAgent> agents;
    switch (kind) {
      case Scenario::corridor: agents = make_corridor(scene_rng, n_agents); break;
      case Scenario::crossing: agents = make_crossing(scene_rng, n_agents); break;
      case Scenario::arc: agents = make_arc_merge(scene_rng, n_agents); break;
      case Scenario::mixed: break;
    }
    SimTrace trace = simulate(agents, spec.frames, spec.dt);
    check_feasible(trace, spec.dt);

    Scene scene;
    scene.dt = spec.dt;
    scene.unit = Unit::meters;
    scene.scenario = to_string(kind);
    scene.name = "synthetic_" + std::to_string(sc);
    scene.frames.resize(spec.frames);
    const int n = static_cast<int>(agents.size());
    for (int f = 0; f < spec.frames; ++f) {
      scene.frames[f].timestamp = f * spec.dt;
      for (int i = 0; i < n; ++i) {
        AgentState st;
        st.position = trace.position[f][i] +
                      Vec2(scene_rng.normal(0.0, spec.noise_std),
                           scene_rng.normal(0.0, spec.noise_std));
        st.heading = wrap_angle(trace.heading[f][i]);
        st.agent_id = "a" + std::to_string(i);
        st.type = AgentType::vehicle;
        scene.frames[f].states.emplace(st.agent_id, st);
      }
    }
    // Velocities by finite difference, matching the loader's convention.
    for (int i = 0; i < n; ++i) {
      const std::string id = "a" + std::to_string(i);
      for (int f = 1; f < spec.frames; ++f) {
        scene.frames[f].states.at(id).velocity =
            (scene.frames[f].states.at(id).position - scene.frames[f - 1].states.at(id).position) /
            spec.dt;
      }
      scene.frames[0].states.at(id).velocity =
          spec.frames > 1 ? scene.frames[1].states.at(id).velocity : Vec2::Zero();
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace trajpred
