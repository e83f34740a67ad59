#include "trajpred/gdat.hpp"

namespace trajpred {

namespace {

// softplus(x) = 1 at x = ln(e - 1).
const double kSoftplusOneInv = std::log(std::exp(1.0) - 1.0);

}  // namespace

Gdat Gdat::create(nn::ParamStore& store, const GdatConfig& cfg, Rng& rng) {
  require_arg(cfg.heads >= 1 && cfg.node_dim % cfg.heads == 0,
              "Gdat: node_dim must be divisible by heads");
  require_arg(cfg.rounds >= 1, "Gdat: rounds must be >= 1");
  Gdat g;
  g.cfg = cfg;
  const int head_dim = cfg.node_dim / cfg.heads;
  for (int r = 0; r < cfg.rounds; ++r) {
    std::vector<TopoHead> heads;
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string base = "gdat.round" + std::to_string(r) + ".head" + std::to_string(h);
      TopoHead th;
      th.w_n = store.create(base + ".w_n", head_dim, cfg.node_dim);
      nn::init_uniform_fan_in(th.w_n, cfg.node_dim, rng);
      th.lambda_raw = store.create(base + ".lambda_raw", 1, 1);
      th.mu_raw = store.create(base + ".mu_raw", 1, 1);
      th.lambda_raw->value(0, 0) = kSoftplusOneInv;
      th.mu_raw->value(0, 0) = kSoftplusOneInv;
      heads.push_back(th);
    }
    g.topo.push_back(std::move(heads));
  }
  for (int h = 0; h < cfg.temporal_heads; ++h) {
    nn::Param* wh = store.create("gdat.temporal.hist.head" + std::to_string(h) + ".w",
                                 cfg.node_dim, 1);
    nn::Param* wf = store.create("gdat.temporal.fut.head" + std::to_string(h) + ".w",
                                 cfg.node_dim, 1);
    nn::init_uniform_fan_in(wh, cfg.node_dim, rng);
    nn::init_uniform_fan_in(wf, cfg.node_dim, rng);
    g.w_temp_hist.push_back(wh);
    g.w_temp_fut.push_back(wf);
  }
  g.encoder = nn::Mlp::create(store, "encoder",
                              {2 * cfg.node_dim, cfg.enc_hidden, cfg.enc_hidden, cfg.latent_dim},
                              cfg.leaky_slope, rng);
  return g;
}

ad::Var topo_attention_row(nn::Binding& bind, const ad::Var& v_i,
                           const std::vector<ad::Var>& members_v,
                           const std::vector<ad::Var>& edges, const ad::Var& lambda,
                           const ad::Var& mu, bool uniform) {
  const int m = static_cast<int>(members_v.size());
  require_arg(m >= 1 && edges.size() == members_v.size(),
              "topo_attention_row: member/edge mismatch");
  if (uniform) {
    return bind.tape().constant(Mat::Constant(m, 1, 1.0 / m));
  }
  std::vector<ad::Var> logits;
  logits.reserve(m);
  for (int k = 0; k < m; ++k) {
    ad::Var kernel = ad::mul_sv(lambda, ad::sqdist(v_i, members_v[k]));
    if (edges[k].valid()) {
      kernel = ad::add(kernel, ad::mul_sv(mu, ad::sqnorm(edges[k])));
    }
    logits.push_back(ad::neg(kernel));
  }
  return ad::softmax(ad::stack_scalars(logits));
}

ad::Var topo_head_update(const ad::Var& alpha, const std::vector<ad::Var>& projected,
                         double slope) {
  require_arg(alpha.rows() == static_cast<int>(projected.size()),
              "topo_head_update: alpha/member mismatch");
  std::vector<ad::Var> terms;
  terms.reserve(projected.size());
  for (std::size_t k = 0; k < projected.size(); ++k) {
    ad::Var a_k = ad::slice_rows(alpha, static_cast<int>(k), 1);
    terms.push_back(ad::leaky_relu(ad::mul_sv(a_k, projected[k]), slope));
  }
  return ad::canonical_sum(terms);
}

std::pair<ad::Var, ad::Var> temporal_attention_head(nn::Binding& bind,
                                                    const std::vector<ad::Var>& seq,
                                                    const ad::Var& w, double slope, bool uniform) {
  const int steps = static_cast<int>(seq.size());
  require_arg(steps >= 1, "temporal_attention_head: empty segment");
  ad::Var beta;
  if (uniform) {
    beta = bind.tape().constant(Mat::Constant(steps, 1, 1.0 / steps));
  } else {
    std::vector<ad::Var> scores;
    scores.reserve(steps);
    for (const auto& v : seq) scores.push_back(ad::leaky_relu(ad::dot(v, w), slope));
    beta = ad::softmax(ad::stack_scalars(scores));
  }
  std::vector<ad::Var> terms;
  terms.reserve(steps);
  for (int t = 0; t < steps; ++t)
    terms.push_back(ad::mul_sv(ad::slice_rows(beta, t, 1), seq[t]));
  return {beta, ad::sum_of(terms)};
}

std::vector<ad::Var> Gdat::encode_graph(nn::Binding& bind, const STGraph& g,
                                        AttentionDump* dump) const {
  std::vector<std::vector<ad::Var>> attrs = g.node_attrs;  // [t][i]
  if (dump) {
    dump->alpha.assign(cfg.rounds, {});
    dump->beta.assign(g.n, {});
  }

  for (int r = 0; r < cfg.rounds; ++r) {
    if (dump) dump->alpha[r].assign(g.steps, {});
    std::vector<std::vector<ad::Var>> next(g.steps);
    for (int t = 0; t < g.steps; ++t) {
      if (dump) dump->alpha[r][t].assign(cfg.heads, {});
      std::vector<std::vector<ad::Var>> head_out(g.n);
      for (int h = 0; h < cfg.heads; ++h) {
        const TopoHead& th = topo[r][h];
        ad::Var w_n = bind(th.w_n);
        ad::Var lambda = ad::softplus(bind(th.lambda_raw));
        ad::Var mu = ad::softplus(bind(th.mu_raw));
        // Shared projections W_n v_j, one per node.
        std::vector<ad::Var> projected(g.n);
        for (int j = 0; j < g.n; ++j) projected[j] = ad::matmul(w_n, attrs[t][j]);
        for (int i = 0; i < g.n; ++i) {
          // Self-loop with zero edge attribute keeps isolated nodes alive.
          std::vector<int> members{i};
          for (int j : g.neighbors[t][i]) members.push_back(j);
          std::vector<ad::Var> mv, me, mp;
          for (int j : members) {
            mv.push_back(attrs[t][j]);
            mp.push_back(projected[j]);
            me.push_back(j == i ? ad::Var() : g.edge_attrs[t].at({i, j}));
          }
          ad::Var alpha =
              topo_attention_row(bind, attrs[t][i], mv, me, lambda, mu, cfg.uniform_attention);
          head_out[i].push_back(topo_head_update(alpha, mp, cfg.leaky_slope));
          if (dump) {
            AttentionDump::Row row;
            row.node = i;
            row.members = members;
            const Mat& a = alpha.value();
            row.alpha.assign(a.data(), a.data() + a.size());
            dump->alpha[r][t][h].push_back(std::move(row));
          }
        }
      }
      next[t].resize(g.n);
      for (int i = 0; i < g.n; ++i) next[t][i] = ad::concat_rows(head_out[i]);
    }
    attrs = std::move(next);
  }

  const auto& w_temp = g.window == Window::history ? w_temp_hist : w_temp_fut;
  std::vector<ad::Var> summaries(g.n);
  for (int i = 0; i < g.n; ++i) {
    std::vector<ad::Var> seq(g.steps);
    for (int t = 0; t < g.steps; ++t) seq[t] = attrs[t][i];
    std::vector<ad::Var> head_sums;
    if (dump) dump->beta[i].assign(w_temp.size(), {});
    for (std::size_t h = 0; h < w_temp.size(); ++h) {
      auto [beta, summary] =
          temporal_attention_head(bind, seq, bind(w_temp[h]), cfg.leaky_slope,
                                  cfg.uniform_attention);
      head_sums.push_back(summary);
      if (dump) {
        const Mat& b = beta.value();
        dump->beta[i][h].assign(b.data(), b.data() + b.size());
      }
    }
    summaries[i] = ad::scale(ad::sum_of(head_sums), 1.0 / static_cast<double>(head_sums.size()));
  }
  return summaries;
}

ad::Var Gdat::posterior_mean(nn::Binding& bind, const ad::Var& v_hist,
                             const ad::Var& v_fut) const {
  require(v_fut.valid(),
          "posterior_mean: future summary unavailable; the encoding function is a "
          "training-only path (use the prior at test time)");
  return encoder(bind, ad::concat_rows({v_hist, v_fut}));
}

}  // namespace trajpred
