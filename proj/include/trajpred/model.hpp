#pragma once

#include "trajpred/decoder.hpp"
#include "trajpred/gdat.hpp"
#include "trajpred/generative_loss.hpp"

namespace trajpred {

// Ablation modes: T = trajectories only (displacement decoding),
// T+C adds context rasters, T+C-noattn forces uniform attention,
// T+C-kin is the full model with the bicycle-constraint decoder.
enum class Mode { T, TC, TC_NoAttn, TC_Kin };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);
inline bool mode_uses_context(Mode m) { return m != Mode::T; }
inline bool mode_kinematic(Mode m) { return m == Mode::TC_Kin; }
inline bool mode_uniform_attention(Mode m) { return m == Mode::TC_NoAttn; }

enum class Phase { train, test };

struct ModelConfig {
  FeatureConfig feature;
  GdatConfig gdat;
  DecoderConfig decoder;
  int patch_h = 31;
  int patch_w = 31;
  double distance_threshold = 10.0;
  Mode mode = Mode::TC_Kin;
  std::uint64_t init_seed = 1;

  void apply_mode() { gdat.uniform_attention = mode_uniform_attention(mode); }
};

struct PredictedTraj {
  std::vector<Vec2> pos;        // T_f positions
  std::vector<double> psi;      // headings (course of the step in displacement mode)
  std::vector<double> v, beta;  // kinematic internals; empty in displacement mode
  std::vector<Vec2> controls;   // saturated (vdot, betadot); empty in displacement mode
};

struct PredictionSet {
  std::vector<std::string> track_ids;
  std::vector<std::vector<PredictedTraj>> samples;  // [agent][k]
  Mode mode = Mode::TC_Kin;
  Phase phase = Phase::test;
  int k = 0;
  std::uint64_t seed = 0;
};

struct Model {
  ModelConfig cfg;
  nn::ParamStore params;
  FeatureExtractor fx;
  nn::Linear node_proj;  // [state_feat || context_feat] -> node_dim
  Gdat gdat;
  Decoder dec;

  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  static std::unique_ptr<Model> create(ModelConfig cfg);

  // History summaries for a case (the test-time encoder path).
  std::vector<ad::Var> history_summaries(nn::Binding& bind, const PredictionCase& c,
                                         AttentionDump* dump = nullptr) const;

  struct TrainForward {
    ad::Var recon, kl, mmd, loss;
    std::vector<ad::Var> posterior_means;  // per agent
    std::vector<ad::Var> z_samples;
  };
  // Full training pass over a batch of cases: history + future graphs,
  // posterior sampling (one z per agent), decoding, and the three loss
  // terms pooled across the batch.
  TrainForward train_forward(nn::Binding& bind, const std::vector<const PredictionCase*>& batch,
                             const LossWeights& weights, const MmdConfig& mmd_cfg, Rng& noise,
                             bool allow_degenerate_weights = false) const;

  // K future trajectories per agent. Train phase samples z from the
  // posterior (requires futures); test phase samples the standard-normal
  // prior. Deterministic given the seed.
  PredictionSet sample_predictions(const PredictionCase& c, int k, Phase phase,
                                   std::uint64_t seed, AttentionDump* dump = nullptr) const;

  // Single deterministic rollout with z = 0 (prior mean); used for
  // validation tracking.
  std::vector<std::vector<Vec2>> predict_mean(const PredictionCase& c) const;
};

// Decodes one agent with a given latent sample; shared by sampling paths.
PredictedTraj decode_agent(const Model& m, nn::Binding& bind, const ad::Var& summary,
                           const ad::Var& z, const AgentState& last, int t_f, double dt);

}  // namespace trajpred
