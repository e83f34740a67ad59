#pragma once

#include "trajpred/config.hpp"

namespace trajpred {

// Subcommands: preprocess, train, eval, predict, plot. Every run writes a
// manifest (config snapshot + seed + output hashes) into its --out directory.
int run_cli(int argc, char** argv);

// Data pipeline shared by the subcommands: scenes -> split -> rasters from
// the training split only -> windowed cases per split.
struct Prepared {
  std::vector<Scene> train_scenes, val_scenes, test_scenes;
  std::shared_ptr<const ContextRasters> rasters;
  std::vector<PredictionCase> train_cases, val_cases, test_cases;
};

Prepared prepare_data(const RunConfig& cfg);
void write_prepared(const Prepared& prep, const RunConfig& cfg, const std::string& out_dir,
                    std::vector<std::string>& outputs);
Prepared load_prepared(const std::string& dir);

}  // namespace trajpred
