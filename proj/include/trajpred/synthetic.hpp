#pragma once

#include "trajpred/data_model.hpp"
#include "trajpred/rng.hpp"

namespace trajpred {

// Rule-based interactive scenes standing in for non-redistributable
// benchmarks: corridor cruising, crossing with negotiation, and a
// roundabout-like arc merge with yielding. Agents follow fixed geometric
// paths with bounded longitudinal dynamics, so every generated trajectory
// is feasible under the decoder's default control bounds (asserted at
// generation, pre-noise).
enum class Scenario { corridor, crossing, arc, mixed };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct SyntheticSpec {
  Scenario scenario = Scenario::mixed;
  int count = 200;        // scenes to generate
  int min_agents = 2;
  int max_agents = 6;
  double noise_std = 0.05;  // position observation noise (m)
  int frames = 14;          // scene length (T_h + T_f for single-window scenes)
  double dt = 0.5;
};

// --- simulation internals, exposed for tests -------------------------------

struct PathPiece {
  enum class Kind { line, arc } kind = Kind::line;
  Vec2 p0 = Vec2::Zero();     // line start
  Vec2 dir = Vec2::UnitX();   // line unit direction
  Vec2 center = Vec2::Zero(); // arc center
  double radius = 1.0;
  double theta0 = 0.0;        // arc start angle
  double sign = 1.0;          // +1 ccw, -1 cw
  double length = 1e9;        // piece arc length

  Vec2 pos(double s) const;
  double tangent(double s) const;
};

struct SimPath {
  std::vector<PathPiece> pieces;
  Vec2 pos(double s) const;
  double tangent(double s) const;
};

struct SimAgent {
  SimPath path;
  double s = 0.0;
  double v = 0.0;
  double cruise = 5.0;
  double accel = 2.0;  // behavior accel/decel magnitude (< decoder a_max)
  int leader = -1;     // car-following target on the same path, -1 none
  double conflict_s = -1.0;  // own arc length at the conflict point; < 0 never yields
  std::vector<std::pair<int, double>> yield_to;  // (agent, their arc length at conflict)
  double yield_radius = 10.0;
  double stop_margin = 2.5;
  AgentType type = AgentType::vehicle;
};

struct SimTrace {
  // [frame][agent]
  std::vector<std::vector<Vec2>> position;
  std::vector<std::vector<double>> heading;
  std::vector<std::vector<double>> speed;
};

SimTrace simulate(std::vector<SimAgent> agents, int frames, double dt);

std::vector<SimAgent> make_corridor(Rng& rng, int n_agents);
std::vector<SimAgent> make_crossing(Rng& rng, int n_agents);
std::vector<SimAgent> make_arc_merge(Rng& rng, int n_agents);

// ---------------------------------------------------------------------------

std::vector<Scene> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace trajpred
