#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trajpred/common.hpp"

namespace trajpred {

struct ContextRasters;  // context_raster.hpp

enum class AgentType { pedestrian, cyclist, vehicle };
enum class Unit { meters, pixels };

std::string to_string(AgentType t);
AgentType agent_type_from_string(const std::string& s);
std::string to_string(Unit u);
Unit unit_from_string(const std::string& s);

struct AgentState {
  Vec2 position = Vec2::Zero();
  std::optional<double> heading;  // radians in (-pi, pi]; absent for pedestrians
  Vec2 velocity = Vec2::Zero();   // units/s, finite-difference derived
  std::string agent_id;           // original id from the source file
  AgentType type = AgentType::pedestrian;
};

// One timestep: states keyed by track id. Track ids equal the agent id,
// with "#k" appended for the k-th contiguous run when an agent's frames
// have gaps (tracks are split, never interpolated).
struct Frame {
  double timestamp = 0.0;
  std::map<std::string, AgentState> states;
};

struct Scene {
  std::vector<Frame> frames;  // uniformly spaced timestamps
  double dt = 0.0;
  Unit unit = Unit::meters;
  std::string name;
  std::string scenario;  // synthetic scenario tag; empty for file data
  std::shared_ptr<const ContextRasters> rasters;
};

// A prediction problem: N agents co-present through T_h + T_f frames.
struct PredictionCase {
  std::vector<std::string> track_ids;
  std::vector<std::vector<AgentState>> history;  // [agent][0..T_h)
  std::vector<std::vector<AgentState>> future;   // [agent][0..T_f); empty at pure test time
  double dt = 0.0;
  Unit unit = Unit::meters;
  std::string scenario;
  std::string scene_name;
  int window_start = 0;
  Vec2 position_offset = Vec2::Zero();  // scene mean position, for feature normalization
  std::shared_ptr<const ContextRasters> rasters;

  int num_agents() const { return static_cast<int>(track_ids.size()); }
  int t_h() const { return history.empty() ? 0 : static_cast<int>(history[0].size()); }
  int t_f() const { return future.empty() ? 0 : static_cast<int>(future[0].size()); }
};

// Declares how to read a trajectory file. Column names may be remapped;
// dt, when present, is validated against the file's timestamps.
struct DatasetDescriptor {
  std::optional<double> dt;
  Unit unit = Unit::meters;
  std::map<std::string, std::string> columns;  // logical name -> header name
};

// Reads one comma-delimited trajectory file (or every *.csv in a directory,
// sorted by name) into scenes. Agents appearing in non-contiguous frames are
// split into separate tracks.
std::vector<Scene> load_dataset(const std::string& path, const DatasetDescriptor& desc = {});

// Writes a scene in the same format load_dataset reads. The psi column is
// emitted when any state carries a heading.
void save_scene(const Scene& scene, const std::string& path);

// Slides a window of T_h + T_f frames with the given stride. Agents not
// co-present through a full window are dropped from that case; empty cases
// are omitted. A scene shorter than the window yields an empty list.
std::vector<PredictionCase> window_cases(const Scene& scene, int t_h, int t_f, int stride);

Vec2 scene_mean_position(const Scene& scene);

}  // namespace trajpred
