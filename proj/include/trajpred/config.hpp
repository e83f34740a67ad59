#pragma once

#include "json.hpp"
#include "trajpred/model.hpp"
#include "trajpred/synthetic.hpp"
#include "trajpred/training.hpp"

namespace trajpred {

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "files"
  std::string path;                  // trajectory file or directory when source == "files"
  DatasetDescriptor descriptor;
  int t_h = 4;
  int t_f = 10;
  int stride = 1;
};

struct RasterConfig {
  double cell_size = 1.0;
  bool auto_bounds = true;  // fit the grid around the training observations
  double margin = 5.0;
  Vec2 origin = Vec2::Zero();
  int rows = 1, cols = 1;
};

struct EvalConfig {
  int k = 20;
  std::vector<int> horizons;  // defaults to {1..t_f} when empty
};

// One config file drives every subcommand; all defaults overridable via
// JSON, TRAJPRED_SECTION__KEY environment variables, and CLI flags.
struct RunConfig {
  DataConfig data;
  RasterConfig raster;
  ModelConfig model;
  SyntheticSpec synthetic;
  TrainConfig train;
  EvalConfig eval;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // Parses the file (or defaults when path is empty) and applies
  // environment overrides.
  static RunConfig load(const std::string& path);

  std::vector<int> horizons() const {
    if (!eval.horizons.empty()) return eval.horizons;
    std::vector<int> out;
    for (int h = 1; h <= data.t_f; ++h) out.push_back(h);
    return out;
  }
};

// TRAJPRED_SECTION__KEY=value; values parsed as JSON when possible,
// otherwise taken as strings.
void apply_env_overrides(nlohmann::json& j, const std::string& prefix = "TRAJPRED_");

// FNV-1a 64-bit over a file's bytes, hex-encoded; used in run manifests.
std::string file_hash(const std::string& path);

}  // namespace trajpred
