#include "trajpred/evaluation.hpp"

#include <fstream>

#include "json.hpp"

namespace trajpred {

namespace {

struct Accum {
  double ade_best = 0, fde_best = 0, ade_mean = 0, fde_mean = 0;
  long agents = 0;
};

void score_agent(const std::vector<PredictedTraj>& samples, const std::vector<AgentState>& truth,
                 int horizon, Accum& acc) {
  double best_ade = 0;
  double best_fde = 0;
  bool first = true;
  double sum_ade = 0, sum_fde = 0;
  for (const auto& s : samples) {
    double err_sum = 0;
    for (int t = 0; t < horizon; ++t)
      err_sum += (s.pos[t] - truth[t].position).norm();
    const double ade = err_sum / horizon;
    const double fde = (s.pos[horizon - 1] - truth[horizon - 1].position).norm();
    sum_ade += ade;
    sum_fde += fde;
    if (first || ade < best_ade) {
      best_ade = ade;
      best_fde = fde;
      first = false;
    }
  }
  const double k = static_cast<double>(samples.size());
  acc.ade_best += best_ade;
  acc.fde_best += best_fde;
  acc.ade_mean += sum_ade / k;
  acc.fde_mean += sum_fde / k;
  acc.agents += 1;
}

HorizonMetrics finalize(const Accum& a, int horizon) {
  HorizonMetrics m;
  m.horizon = horizon;
  m.agents = a.agents;
  if (a.agents > 0) {
    m.ade_best = a.ade_best / a.agents;
    m.fde_best = a.fde_best / a.agents;
    m.ade_mean = a.ade_mean / a.agents;
    m.fde_mean = a.fde_mean / a.agents;
  }
  return m;
}

}  // namespace

MetricsReport ade_fde(const std::vector<PredictionCase>& cases,
                      const std::vector<PredictionSet>& predictions,
                      const std::vector<int>& horizons, const std::string& method) {
  require_arg(cases.size() == predictions.size(), "ade_fde: case/prediction count mismatch");
  require_arg(!horizons.empty(), "ade_fde: no horizons");

  MetricsReport rep;
  rep.method = method;
  rep.k = predictions.empty() ? 0 : predictions[0].k;

  for (int h : horizons) {
    require_arg(h >= 1, "ade_fde: horizon must be >= 1");
    Accum overall;
    std::map<std::string, Accum> per_scenario;
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
      const PredictionCase& c = cases[ci];
      const PredictionSet& p = predictions[ci];
      require_arg(h <= c.t_f(), "ade_fde: horizon " + std::to_string(h) +
                                    " exceeds future window T_f = " + std::to_string(c.t_f()));
      require_arg(p.samples.size() == static_cast<std::size_t>(c.num_agents()),
                  "ade_fde: prediction/case agent mismatch");
      for (int a = 0; a < c.num_agents(); ++a) {
        require_arg(!p.samples[a].empty() &&
                        static_cast<int>(p.samples[a][0].pos.size()) >= h,
                    "ade_fde: sample shorter than horizon");
        score_agent(p.samples[a], c.future[a], h, overall);
        if (!c.scenario.empty()) score_agent(p.samples[a], c.future[a], h, per_scenario[c.scenario]);
      }
    }
    rep.overall.push_back(finalize(overall, h));
    for (auto& [tag, acc] : per_scenario) rep.by_scenario[tag].push_back(finalize(acc, h));
  }
  return rep;
}

PredictionSet baseline_cvm(const PredictionCase& c) {
  require_arg(c.t_h() >= 2, "baseline_cvm: need at least 2 history steps");
  PredictionSet out;
  out.track_ids = c.track_ids;
  out.k = 1;
  out.phase = Phase::test;
  out.samples.resize(c.num_agents());
  for (int a = 0; a < c.num_agents(); ++a) {
    const auto& hist = c.history[a];
    const Vec2 v = (hist.back().position - hist[hist.size() - 2].position) / c.dt;
    PredictedTraj tr;
    for (int t = 1; t <= c.t_f(); ++t) {
      tr.pos.push_back(hist.back().position + v * (t * c.dt));
      tr.psi.push_back(v.norm() > 1e-12 ? std::atan2(v.y(), v.x()) : 0.0);
    }
    out.samples[a].push_back(std::move(tr));
  }
  return out;
}

std::pair<double, double> ols_fit(const std::vector<double>& t, const std::vector<double>& y) {
  require_arg(t.size() == y.size() && t.size() >= 2, "ols_fit: need >= 2 points");
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double denom = n * stt - st * st;
  require(std::abs(denom) > 1e-12, "ols_fit: degenerate time axis");
  const double slope = (n * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / n;
  return {slope, intercept};
}

PredictionSet baseline_lr(const PredictionCase& c) {
  require_arg(c.t_h() >= 2, "baseline_lr: need at least 2 history steps");
  PredictionSet out;
  out.track_ids = c.track_ids;
  out.k = 1;
  out.phase = Phase::test;
  out.samples.resize(c.num_agents());
  for (int a = 0; a < c.num_agents(); ++a) {
    std::vector<double> ts, xs, ys;
    for (int t = 0; t < c.t_h(); ++t) {
      ts.push_back(t * c.dt);
      xs.push_back(c.history[a][t].position.x());
      ys.push_back(c.history[a][t].position.y());
    }
    auto [sx, ix] = ols_fit(ts, xs);
    auto [sy, iy] = ols_fit(ts, ys);
    PredictedTraj tr;
    for (int t = 1; t <= c.t_f(); ++t) {
      const double tt = (c.t_h() - 1 + t) * c.dt;
      tr.pos.emplace_back(sx * tt + ix, sy * tt + iy);
      tr.psi.push_back(std::atan2(sy, sx));
    }
    out.samples[a].push_back(std::move(tr));
  }
  return out;
}

void save_report_csv(const MetricsReport& rep, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "save_report_csv: cannot open '" + path + "'");
  out << "method,scenario,horizon,k,ade_best,fde_best,ade_mean,fde_mean,agents\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto emit = [&](const std::string& scenario, const HorizonMetrics& m) {
    out << rep.method << ',' << scenario << ',' << m.horizon << ',' << rep.k << ','
        << fmt(m.ade_best) << ',' << fmt(m.fde_best) << ',' << fmt(m.ade_mean) << ','
        << fmt(m.fde_mean) << ',' << m.agents << "\n";
  };
  for (const auto& m : rep.overall) emit("all", m);
  for (const auto& [tag, ms] : rep.by_scenario)
    for (const auto& m : ms) emit(tag, m);
}

void save_report_json(const MetricsReport& rep, const std::string& path) {
  nlohmann::json j;
  j["method"] = rep.method;
  j["k"] = rep.k;
  auto pack = [](const std::vector<HorizonMetrics>& ms) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : ms)
      arr.push_back({{"horizon", m.horizon},
                     {"ade_best", m.ade_best},
                     {"fde_best", m.fde_best},
                     {"ade_mean", m.ade_mean},
                     {"fde_mean", m.fde_mean},
                     {"agents", m.agents}});
    return arr;
  };
  j["overall"] = pack(rep.overall);
  for (const auto& [tag, ms] : rep.by_scenario) j["by_scenario"][tag] = pack(ms);
  std::ofstream out(path);
  require(out.good(), "save_report_json: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace trajpred
