#pragma once

#include "trajpred/model.hpp"

namespace trajpred {

struct HorizonMetrics {
  int horizon = 0;       // in future steps
  double ade_best = 0;   // best-of-K, per-agent selection by that sample's ADE
  double fde_best = 0;   // FDE of the ADE-selected sample
  double ade_mean = 0;   // mean over K samples
  double fde_mean = 0;
  long agents = 0;
};

struct MetricsReport {
  std::vector<HorizonMetrics> overall;
  std::map<std::string, std::vector<HorizonMetrics>> by_scenario;
  int k = 0;
  std::string method;  // mode string or baseline name
};

// ADE at horizon h: mean Euclidean position error over steps 1..h.
// FDE at horizon h: error at step h (equals ADE over the single step h).
// With K samples, best-of-K selects per agent the sample minimizing its own
// ADE at that horizon; the mean variant averages over all K.
MetricsReport ade_fde(const std::vector<PredictionCase>& cases,
                      const std::vector<PredictionSet>& predictions,
                      const std::vector<int>& horizons, const std::string& method);

// Constant-velocity baseline: last-step finite-difference velocity
// extrapolated linearly. Requires >= 2 history steps.
PredictionSet baseline_cvm(const PredictionCase& c);

// Per-axis ordinary least squares over (timestamp, coordinate) of the
// history, evaluated at the future timestamps.
PredictionSet baseline_lr(const PredictionCase& c);

// Plain OLS slope/intercept used by baseline_lr; exposed for verification.
std::pair<double, double> ols_fit(const std::vector<double>& t, const std::vector<double>& y);

void save_report_csv(const MetricsReport& rep, const std::string& path);
void save_report_json(const MetricsReport& rep, const std::string& path);

}  // namespace trajpred
