#pragma once

#include "trajpred/graph_builder.hpp"

namespace trajpred {

struct GdatConfig {
  int node_dim = 64;       // attribute width, fixed across message-passing rounds
  int edge_dim = 16;
  int heads = 4;           // topological heads; node_dim must divide evenly
  int rounds = 2;          // message-passing rounds (>= 2 reaches 2nd-order interactions)
  int temporal_heads = 4;  // summaries averaged across heads
  int latent_dim = 32;
  int enc_hidden = 128;
  double leaky_slope = 0.2;
  bool uniform_attention = false;  // ablation: equal topological and temporal coefficients
};

// Captured attention coefficients for dumps and tests.
struct AttentionDump {
  // alpha[round][t][head][i] -> (member list incl. self as -1-terminated? no:
  // members[k] == i marks the self entry), aligned with coefficients.
  struct Row {
    int node = 0;
    std::vector<int> members;  // neighbor indices; includes `node` itself (self-loop)
    std::vector<double> alpha;
  };
  std::vector<std::vector<std::vector<std::vector<Row>>>> alpha;  // [round][t][head][i]
  // beta[agent][head][t] over this graph's segment.
  std::vector<std::vector<std::vector<double>>> beta;
};

// Kernel-based attention over one neighborhood (Eq. style:
// alpha_j ∝ exp(-(lambda * ||v_i - v_j||^2 + mu * ||e_ij||^2))), row-normalized.
// `edges[k]` may be an invalid Var for the self entry (treated as zero norm).
// With `uniform`, coefficients are 1/|members| regardless of attributes.
ad::Var topo_attention_row(nn::Binding& bind, const ad::Var& v_i,
                           const std::vector<ad::Var>& members_v,
                           const std::vector<ad::Var>& edges, const ad::Var& lambda,
                           const ad::Var& mu, bool uniform);

// One head's node update: sum_j f_act(alpha_j * (W_n v_j)), canonical order.
ad::Var topo_head_update(const ad::Var& alpha, const std::vector<ad::Var>& projected,
                         double slope);

// Temporal attention over a segment: beta = softmax_t(f_act(v_t . w)),
// summary = sum_t beta_t * v_t.  Returns (beta, summary).
std::pair<ad::Var, ad::Var> temporal_attention_head(nn::Binding& bind,
                                                    const std::vector<ad::Var>& seq,
                                                    const ad::Var& w, double slope, bool uniform);

struct Gdat {
  GdatConfig cfg;
  struct TopoHead {
    nn::Param* w_n = nullptr;        // (node_dim / heads) x node_dim
    nn::Param* lambda_raw = nullptr; // softplus-reparameterized, init at softplus^-1(1)
    nn::Param* mu_raw = nullptr;
  };
  std::vector<std::vector<TopoHead>> topo;  // [round][head]
  std::vector<nn::Param*> w_temp_hist, w_temp_fut;  // temporal score vectors per head
  nn::Mlp encoder;  // [v_h || v_f] -> latent posterior mean

  static Gdat create(nn::ParamStore& store, const GdatConfig& cfg, Rng& rng);

  // Runs all rounds of topological attention then the temporal layer for
  // this graph's segment; returns one summary per agent.
  std::vector<ad::Var> encode_graph(nn::Binding& bind, const STGraph& g,
                                    AttentionDump* dump = nullptr) const;

  // Posterior mean of z (identity covariance). Requires a valid future
  // summary: the encoding function only exists on the training path.
  ad::Var posterior_mean(nn::Binding& bind, const ad::Var& v_hist, const ad::Var& v_fut) const;
};

}  // namespace trajpred
