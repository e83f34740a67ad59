#include "trajpred/feature_extractor.hpp"

namespace trajpred {

FeatureExtractor FeatureExtractor::create(nn::ParamStore& store, const FeatureConfig& cfg,
                                          Rng& rng) {
  FeatureExtractor fx;
  fx.cfg = cfg;
  fx.state_mlp = nn::Mlp::create(store, "state_mlp", {6, cfg.state_hidden, cfg.state_hidden, cfg.state_out},
                                 cfg.leaky_slope, rng);
  fx.relation_mlp = nn::Mlp::create(
      store, "relation_mlp", {4, cfg.relation_hidden, cfg.relation_hidden, cfg.relation_out},
      cfg.leaky_slope, rng);
  const int k = cfg.context_kernel;
  for (int l = 0; l < cfg.context_layers; ++l) {
    const int c_in = l == 0 ? 3 : cfg.context_channels;
    nn::Param* w = store.create("context_cnn.conv" + std::to_string(l) + ".w",
                                cfg.context_channels, c_in * k * k);
    nn::Param* b = store.create("context_cnn.conv" + std::to_string(l) + ".b",
                                cfg.context_channels, 1);
    nn::init_uniform_fan_in(w, c_in * k * k, rng);
    nn::init_uniform_fan_in(b, c_in * k * k, rng);
    fx.conv_w.push_back(w);
    fx.conv_b.push_back(b);
  }
  return fx;
}

ad::Var FeatureExtractor::embed_state(nn::Binding& bind, const AgentState& st,
                                      const Vec2& offset) const {
  Mat in(6, 1);
  in(0, 0) = st.position.x() - offset.x();
  in(1, 0) = st.position.y() - offset.y();
  in(2, 0) = st.velocity.x();
  in(3, 0) = st.velocity.y();
  in(4, 0) = st.heading.value_or(0.0);
  in(5, 0) = st.heading.has_value() ? 1.0 : 0.0;
  require(in.allFinite(), "embed_state: non-finite input for agent '" + st.agent_id + "'");
  return state_mlp(bind, bind.tape().constant(std::move(in)));
}

Eigen::Vector4d FeatureExtractor::relation_input(const Vec2& pos_i, const Vec2& pos_j) {
  const Vec2 d = pos_j - pos_i;
  Eigen::Vector4d in;
  in(0) = d.x();
  in(1) = d.y();
  in(2) = d.norm();
  in(3) = (d.x() == 0.0 && d.y() == 0.0) ? 0.0 : std::atan2(d.y(), d.x());
  return in;
}

ad::Var FeatureExtractor::embed_relation(nn::Binding& bind, const AgentState& si,
                                         const AgentState& sj) const {
  Mat in = relation_input(si.position, sj.position);
  require(in.allFinite(), "embed_relation: non-finite input");
  return relation_mlp(bind, bind.tape().constant(std::move(in)));
}

namespace {

Mat stack_patches(const LocalContext& local) {
  const int h = static_cast<int>(local.density.rows());
  const int w = static_cast<int>(local.density.cols());
  require_arg(local.vel_ax.rows() == h && local.vel_ax.cols() == w &&
                  local.vel_ay.rows() == h && local.vel_ay.cols() == w,
              "embed_context: patch shape mismatch");
  Mat x(3 * h * w, 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      x(r * w + c, 0) = local.density(r, c);
      x(h * w + r * w + c, 0) = local.vel_ax(r, c);
      x(2 * h * w + r * w + c, 0) = local.vel_ay(r, c);
    }
  return x;
}

}  // namespace

ad::Var FeatureExtractor::context_maps(nn::Binding& bind, const LocalContext& local) const {
  const int h = static_cast<int>(local.density.rows());
  const int w = static_cast<int>(local.density.cols());
  ad::Var x = bind.tape().constant(stack_patches(local));
  for (std::size_t l = 0; l < conv_w.size(); ++l) {
    const int c_in = l == 0 ? 3 : cfg.context_channels;
    x = ad::conv2d_same(x, bind(conv_w[l]), bind(conv_b[l]), c_in, h, w, cfg.context_channels,
                        cfg.context_kernel);
    x = ad::leaky_relu(x, cfg.leaky_slope);
  }
  return x;
}

ad::Var FeatureExtractor::embed_context(nn::Binding& bind, const LocalContext& local) const {
  const int hw = static_cast<int>(local.density.rows() * local.density.cols());
  return ad::channel_mean(context_maps(bind, local), cfg.context_channels, hw);
}

double moving_direction(const AgentState& st) {
  if (st.velocity.norm() > 1e-9) return std::atan2(st.velocity.y(), st.velocity.x());
  return st.heading.value_or(0.0);
}

FeatureBundle compute_features(nn::Binding& bind, const FeatureExtractor& fx,
                               const PredictionCase& c, bool use_context, int patch_h, int patch_w,
                               int t_f_limit) {
  require_arg(t_f_limit >= 0 && t_f_limit <= c.t_f(), "compute_features: bad t_f_limit");
  const int n = c.num_agents();
  const int total = c.t_h() + t_f_limit;
  FeatureBundle fb;
  fb.has_context = use_context;
  fb.state_feat.resize(n);
  if (use_context) {
    require(c.rasters != nullptr, "compute_features: case has no context rasters");
    fb.context_feat.resize(n);
  }
  for (int a = 0; a < n; ++a) {
    for (int t = 0; t < total; ++t) {
      const AgentState& st = t < c.t_h() ? c.history[a][t] : c.future[a][t - c.t_h()];
      fb.state_feat[a].push_back(fx.embed_state(bind, st, c.position_offset));
      if (use_context) {
        LocalContext local =
            crop_local(*c.rasters, st.position, moving_direction(st), patch_h, patch_w);
        fb.context_feat[a].push_back(fx.embed_context(bind, local));
      }
    }
  }
  return fb;
}

}  // namespace trajpred
