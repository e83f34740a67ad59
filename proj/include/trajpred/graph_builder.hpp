#pragma once

#include "trajpred/feature_extractor.hpp"

namespace trajpred {

enum class Window { history, future };

// Spatio-temporal graph over a fixed agent set: per-timestep node attributes
// (projected state || context features) and directed edge attributes
// (relation features). Edges exist in both directions or neither, decided
// per timestep by the distance threshold; attributes differ per direction.
struct STGraph {
  Window window = Window::history;
  int steps = 0;      // timesteps in this window
  int n = 0;          // agents
  double threshold = 0.0;
  std::vector<std::vector<ad::Var>> node_attrs;             // [t][i], node_dim x 1
  std::vector<std::vector<std::vector<int>>> neighbors;     // [t][i] -> sorted j != i
  std::vector<std::map<std::pair<int, int>, ad::Var>> edge_attrs;  // [t][(i,j)]
  std::vector<std::vector<Vec2>> positions;                 // [t][i]
};

// Node attribute projection input width is state_out + context_channels;
// the context block is zero when context features are disabled.
STGraph build_graph(nn::Binding& bind, const FeatureExtractor& fx, const nn::Linear& node_proj,
                    const PredictionCase& c, const FeatureBundle& fb, Window window,
                    double threshold);

// Adjacency as structured text, one line per (t, i): "t i: j j j".
std::string dump_adjacency(const STGraph& g);

}  // namespace trajpred
