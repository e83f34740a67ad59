#pragma once

#include "trajpred/evaluation.hpp"
#include "trajpred/model.hpp"

namespace trajpred {

struct TrainConfig {
  int batch_size = 64;
  int epochs = 100;
  double lr = 1e-3;       // Adam, constant rate
  double clip = 0.0;      // gradient clipping, 0 = off
  std::uint64_t seed = 1;
  LossWeights weights;
  MmdConfig mmd;
  bool allow_degenerate_weights = false;  // test-harness constraint suspension
  double split_train = 0.7, split_val = 0.1, split_test = 0.2;
};

struct EpochLog {
  int epoch = 0;
  double recon = 0, kl = 0, mmd = 0, total = 0;
  double val_ade = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_ade = 0;
};

// Deterministic seeded split of scenes into train/val/test.
struct SceneSplit {
  std::vector<Scene> train, val, test;
};
SceneSplit split_scenes(std::vector<Scene> scenes, double f_train, double f_val, double f_test,
                        std::uint64_t seed);

// End-to-end optimization loop. Leaves the model at its best-validation
// parameters. Aborts with the offending epoch on a non-finite loss.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig cfg);
  TrainResult fit(const std::vector<PredictionCase>& train_cases,
                  const std::vector<PredictionCase>& val_cases);

 private:
  double validation_ade(const std::vector<PredictionCase>& val_cases) const;
  Model& model_;
  TrainConfig cfg_;
};

void save_loss_log(const std::vector<EpochLog>& log, const std::string& path);

// Checkpoint archive: named parameter arrays + a JSON metadata blob
// (config snapshot, seed). Bit-exact round trip.
void save_checkpoint(const std::string& path, const nn::ParamStore& store,
                     const std::string& meta_json);
// Loads values into an existing store; every archive entry must match an
// existing parameter's name and shape. Returns the metadata blob.
std::string load_checkpoint(const std::string& path, nn::ParamStore& store);
// Reads only the metadata blob, skipping parameter data.
std::string read_checkpoint_meta(const std::string& path);

}  // namespace trajpred
