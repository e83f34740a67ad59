#pragma once

#include <map>

#include "trajpred/context_raster.hpp"
#include "trajpred/data_model.hpp"
#include "trajpred/nn/layers.hpp"

namespace trajpred {

struct FeatureConfig {
  int state_hidden = 64;
  int state_out = 64;
  int relation_hidden = 64;
  int relation_out = 16;  // edge attribute width D_e
  int context_channels = 16;
  int context_layers = 5;
  int context_kernel = 5;
  double leaky_slope = 0.2;
};

// Per-agent state, per-pair relation and per-agent context embeddings.
// One parameter set shared across agents and timesteps.
struct FeatureExtractor {
  FeatureConfig cfg;
  nn::Mlp state_mlp;     // (x, y, vx, vy, psi, psi_present) -> state_out
  nn::Mlp relation_mlp;  // (dx, dy, |d|, atan2(dy, dx)) -> relation_out
  std::vector<nn::Param*> conv_w, conv_b;

  static FeatureExtractor create(nn::ParamStore& store, const FeatureConfig& cfg, Rng& rng);

  // Positions are shifted by `offset` before embedding; velocity and heading
  // pass through unchanged. Missing heading is zero-filled with a cleared
  // presence flag.
  ad::Var embed_state(nn::Binding& bind, const AgentState& st, const Vec2& offset) const;

  // Relative block of j w.r.t. i: Cartesian offsets plus the polar form.
  // Order-sensitive: (i, j) and (j, i) differ.
  static Eigen::Vector4d relation_input(const Vec2& pos_i, const Vec2& pos_j);
  ad::Var embed_relation(nn::Binding& bind, const AgentState& si, const AgentState& sj) const;

  // Stacks density + agent-frame velocity patches into H x W x 3, runs the
  // conv stack and pools to a context_channels vector.
  ad::Var embed_context(nn::Binding& bind, const LocalContext& local) const;
  // Final pre-pooling maps, channel-major (context_channels * H * W) x 1.
  ad::Var context_maps(nn::Binding& bind, const LocalContext& local) const;
};

// State and context embeddings for every agent and timestep of a case
// (history then future), computed once and shared by both graphs.
// relation features are attached per-edge at graph build time.
struct FeatureBundle {
  std::vector<std::vector<ad::Var>> state_feat;    // [agent][t], t in [0, T_h + T_f)
  std::vector<std::vector<ad::Var>> context_feat;  // empty when context is off
  bool has_context = false;
};

// `t_f_limit`: number of future steps to embed (0 at test time).
FeatureBundle compute_features(nn::Binding& bind, const FeatureExtractor& fx,
                               const PredictionCase& c, bool use_context, int patch_h, int patch_w,
                               int t_f_limit);

// Moving direction used to orient local crops: velocity direction when the
// agent is moving, else its heading, else 0.
double moving_direction(const AgentState& st);

}  // namespace trajpred
