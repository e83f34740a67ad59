#include "trajpred/model.hpp"

namespace trajpred {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::T: return "T";
    case Mode::TC: return "T+C";
    case Mode::TC_NoAttn: return "T+C-noattn";
    case Mode::TC_Kin: return "T+C-kin";
  }
  return "T+C-kin";
}

Mode mode_from_string(const std::string& s) {
  if (s == "T") return Mode::T;
  if (s == "T+C") return Mode::TC;
  if (s == "T+C-noattn") return Mode::TC_NoAttn;
  if (s == "T+C-kin") return Mode::TC_Kin;
  throw std::runtime_error("unknown mode '" + s + "' (expected T, T+C, T+C-noattn, T+C-kin)");
}

std::unique_ptr<Model> Model::create(ModelConfig cfg) {
  cfg.apply_mode();
  require_arg(cfg.patch_h % 2 == 1 && cfg.patch_w % 2 == 1, "ModelConfig: patch dims must be odd");
  require_arg(cfg.feature.state_out == cfg.gdat.node_dim,
              "ModelConfig: state feature width must match node_dim");
  require_arg(cfg.feature.relation_out == cfg.gdat.edge_dim,
              "ModelConfig: relation feature width must match edge_dim");
  auto m = std::make_unique<Model>();
  m->cfg = cfg;
  Rng rng(cfg.init_seed);
  m->fx = FeatureExtractor::create(m->params, cfg.feature, rng);
  m->node_proj = nn::Linear::create(m->params, "node_proj",
                                    cfg.feature.state_out + cfg.feature.context_channels,
                                    cfg.gdat.node_dim, rng);
  m->gdat = Gdat::create(m->params, cfg.gdat, rng);
  m->dec = Decoder::create(m->params, cfg.decoder, rng);
  return m;
}

std::vector<ad::Var> Model::history_summaries(nn::Binding& bind, const PredictionCase& c,
                                              AttentionDump* dump) const {
  FeatureBundle fb = compute_features(bind, fx, c, mode_uses_context(cfg.mode), cfg.patch_h,
                                      cfg.patch_w, /*t_f_limit=*/0);
  STGraph hg = build_graph(bind, fx, node_proj, c, fb, Window::history, cfg.distance_threshold);
  return gdat.encode_graph(bind, hg, dump);
}

Model::TrainForward Model::train_forward(nn::Binding& bind,
                                         const std::vector<const PredictionCase*>& batch,
                                         const LossWeights& weights, const MmdConfig& mmd_cfg,
                                         Rng& noise, bool allow_degenerate_weights) const {
  weights.validate(allow_degenerate_weights);
  require_arg(!batch.empty(), "train_forward: empty batch");

  TrainForward out;
  std::vector<std::vector<ad::Var>> pred_x, pred_y;
  std::vector<std::vector<Vec2>> truth;
  const int latent_dim = cfg.gdat.latent_dim;

  for (const PredictionCase* cp : batch) {
    const PredictionCase& c = *cp;
    require_arg(c.t_f() >= 1, "train_forward: case has no future window");
    FeatureBundle fb = compute_features(bind, fx, c, mode_uses_context(cfg.mode), cfg.patch_h,
                                        cfg.patch_w, c.t_f());
    STGraph hg = build_graph(bind, fx, node_proj, c, fb, Window::history, cfg.distance_threshold);
    STGraph fg = build_graph(bind, fx, node_proj, c, fb, Window::future, cfg.distance_threshold);
    std::vector<ad::Var> vh = gdat.encode_graph(bind, hg);
    std::vector<ad::Var> vf = gdat.encode_graph(bind, fg);

    for (int a = 0; a < c.num_agents(); ++a) {
      ad::Var mu = gdat.posterior_mean(bind, vh[a], vf[a]);
      out.posterior_means.push_back(mu);
      // One posterior sample per agent: z = mu + eps, eps ~ N(0, I).
      Mat eps(latent_dim, 1);
      for (int i = 0; i < latent_dim; ++i) eps(i, 0) = noise.normal();
      ad::Var z = ad::add(mu, bind.tape().constant(std::move(eps)));
      out.z_samples.push_back(z);

      const AgentState& last = c.history[a].back();
      std::vector<ad::Var> xs, ys;
      if (mode_kinematic(cfg.mode)) {
        auto roll = dec.rollout_kinematic(bind, vh[a], z, init_kinematic_state(last, cfg.decoder.l_r),
                                          c.t_f(), c.dt);
        xs = roll.x;
        ys = roll.y;
      } else {
        auto roll = dec.rollout_displacement(bind, vh[a], z, last.position, c.t_f());
        xs = roll.x;
        ys = roll.y;
      }
      pred_x.push_back(std::move(xs));
      pred_y.push_back(std::move(ys));
      std::vector<Vec2> tr;
      for (const auto& st : c.future[a]) tr.push_back(st.position);
      truth.push_back(std::move(tr));
    }
  }

  out.recon = reconstruction_loss(pred_x, pred_y, truth);
  out.kl = kl_term(out.posterior_means);
  if (weights.beta != 0.0) {
    // Aggregate posterior vs a fresh prior draw of equal size.
    Mat prior(latent_dim, static_cast<int>(out.z_samples.size()));
    for (int j = 0; j < prior.cols(); ++j)
      for (int i = 0; i < latent_dim; ++i) prior(i, j) = noise.normal();
    out.mmd = mmd_vstat_op(out.z_samples, prior, mmd_cfg);
  }
  out.loss = total_loss(out.recon, out.kl, out.mmd, weights);
  return out;
}

PredictedTraj decode_agent(const Model& m, nn::Binding& bind, const ad::Var& summary,
                           const ad::Var& z, const AgentState& last, int t_f, double dt) {
  PredictedTraj out;
  if (mode_kinematic(m.cfg.mode)) {
    auto roll = m.dec.rollout_kinematic(bind, summary, z,
                                        init_kinematic_state(last, m.cfg.decoder.l_r), t_f, dt);
    for (int t = 0; t < t_f; ++t) {
      out.pos.emplace_back(roll.x[t].scalar(), roll.y[t].scalar());
      out.psi.push_back(roll.psi[t].scalar());
      out.v.push_back(roll.v[t].scalar());
      out.beta.push_back(roll.beta[t].scalar());
      out.controls.emplace_back(roll.vdot[t].scalar(), roll.betadot[t].scalar());
    }
  } else {
    auto roll = m.dec.rollout_displacement(bind, summary, z, last.position, t_f);
    Vec2 prev = last.position;
    for (int t = 0; t < t_f; ++t) {
      Vec2 p(roll.x[t].scalar(), roll.y[t].scalar());
      Vec2 step = p - prev;
      out.pos.push_back(p);
      out.psi.push_back(step.norm() > 1e-12 ? std::atan2(step.y(), step.x()) : 0.0);
      prev = p;
    }
  }
  return out;
}

PredictionSet Model::sample_predictions(const PredictionCase& c, int k, Phase phase,
                                        std::uint64_t seed, AttentionDump* dump) const {
  require_arg(k >= 1, "sample_predictions: K must be >= 1");
  const int t_f = c.t_f();
  require_arg(t_f >= 1 || phase == Phase::test, "sample_predictions: case has no future window");

  PredictionSet out;
  out.track_ids = c.track_ids;
  out.mode = cfg.mode;
  out.phase = phase;
  out.k = k;
  out.seed = seed;
  out.samples.resize(c.num_agents());

  Rng rng(seed);
  ad::Tape tape(false);
  nn::Binding bind(tape);
  const int latent_dim = cfg.gdat.latent_dim;

  std::vector<ad::Var> vh;
  std::vector<ad::Var> mu(c.num_agents());
  if (phase == Phase::train) {
    FeatureBundle fb = compute_features(bind, fx, c, mode_uses_context(cfg.mode), cfg.patch_h,
                                        cfg.patch_w, c.t_f());
    STGraph hg = build_graph(bind, fx, node_proj, c, fb, Window::history, cfg.distance_threshold);
    STGraph fg = build_graph(bind, fx, node_proj, c, fb, Window::future, cfg.distance_threshold);
    vh = gdat.encode_graph(bind, hg, dump);
    std::vector<ad::Var> vf = gdat.encode_graph(bind, fg);
    for (int a = 0; a < c.num_agents(); ++a) mu[a] = gdat.posterior_mean(bind, vh[a], vf[a]);
  } else {
    vh = history_summaries(bind, c, dump);
  }

  const int horizon = t_f >= 1 ? t_f : 0;
  for (int a = 0; a < c.num_agents(); ++a) {
    for (int s = 0; s < k; ++s) {
      Mat zv(latent_dim, 1);
      for (int i = 0; i < latent_dim; ++i) zv(i, 0) = rng.normal();
      ad::Var z = phase == Phase::train ? ad::add(mu[a], tape.constant(std::move(zv)))
                                        : tape.constant(std::move(zv));
      out.samples[a].push_back(
          decode_agent(*this, bind, vh[a], z, c.history[a].back(), horizon, c.dt));
    }
  }
  return out;
}

std::vector<std::vector<Vec2>> Model::predict_mean(const PredictionCase& c) const {
  ad::Tape tape(false);
  nn::Binding bind(tape);
  std::vector<ad::Var> vh = history_summaries(bind, c);
  ad::Var z0 = tape.constant(Mat::Zero(cfg.gdat.latent_dim, 1));
  std::vector<std::vector<Vec2>> out;
  for (int a = 0; a < c.num_agents(); ++a)
    out.push_back(decode_agent(*this, bind, vh[a], z0, c.history[a].back(), c.t_f(), c.dt).pos);
  return out;
}

}  // namespace trajpred
