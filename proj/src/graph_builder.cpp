#include "trajpred/graph_builder.hpp"

#include <sstream>

namespace trajpred {

STGraph build_graph(nn::Binding& bind, const FeatureExtractor& fx, const nn::Linear& node_proj,
                    const PredictionCase& c, const FeatureBundle& fb, Window window,
                    double threshold) {
  require_arg(threshold > 0, "build_graph: threshold must be positive");
  const int n = c.num_agents();
  const int t0 = window == Window::history ? 0 : c.t_h();
  const int steps = window == Window::history ? c.t_h() : c.t_f();
  require_arg(steps > 0, "build_graph: empty window");
  for (int a = 0; a < n; ++a)
    require_arg(static_cast<int>(fb.state_feat[a].size()) >= t0 + steps,
                "build_graph: features not computed for this window");

  STGraph g;
  g.window = window;
  g.steps = steps;
  g.n = n;
  g.threshold = threshold;
  g.node_attrs.resize(steps);
  g.neighbors.resize(steps);
  g.edge_attrs.resize(steps);
  g.positions.resize(steps);

  const int ctx_dim = fx.cfg.context_channels;
  for (int s = 0; s < steps; ++s) {
    const int t = t0 + s;
    g.positions[s].resize(n);
    g.neighbors[s].resize(n);
    std::vector<const AgentState*> states(n);
    for (int i = 0; i < n; ++i) {
      const AgentState& st = t < c.t_h() ? c.history[i][t] : c.future[i][t - c.t_h()];
      states[i] = &st;
      g.positions[s][i] = st.position;
      ad::Var ctx = fb.has_context
                        ? fb.context_feat[i][t]
                        : bind.tape().constant(Mat::Zero(ctx_dim, 1));
      g.node_attrs[s].push_back(
          node_proj(bind, ad::concat_rows({fb.state_feat[i][t], ctx})));
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        if ((g.positions[s][i] - g.positions[s][j]).norm() > threshold) continue;
        g.neighbors[s][i].push_back(j);
        g.edge_attrs[s].emplace(std::make_pair(i, j),
                                fx.embed_relation(bind, *states[i], *states[j]));
      }
    }
  }
  return g;
}

std::string dump_adjacency(const STGraph& g) {
  std::ostringstream out;
  for (int t = 0; t < g.steps; ++t)
    for (int i = 0; i < g.n; ++i) {
      out << t << ' ' << i << ':';
      for (int j : g.neighbors[t][i]) out << ' ' << j;
      out << '\n';
    }
  return out.str();
}

}  // namespace trajpred
