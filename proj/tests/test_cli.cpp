#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "trajpred/cli.hpp"
#include "trajpred/plot.hpp"

using namespace trajpred;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_args(std::vector<std::string> args) {
  std::vector<char*> argv;
  args.insert(args.begin(), "trajpred");
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "trajpred_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir) {
  json j;
  j["data"] = {{"source", "synthetic"}, {"t_h", 4}, {"t_f", 5}};
  j["synthetic"] = {{"scenario", "crossing"}, {"count", 10}, {"frames", 9},
                    {"min_agents", 2}, {"max_agents", 3}, {"noise_std", 0.05}, {"dt", 0.5}};
  j["raster"] = {{"cell_size", 3.0}, {"margin", 3.0}};
  j["model"] = {{"node_dim", 12}, {"edge_dim", 6},  {"topo_heads", 2},
                {"rounds", 2},    {"temporal_heads", 2}, {"latent_dim", 6},
                {"enc_hidden", 12}, {"gru_hidden", 12}, {"init_hidden", 12},
                {"state_hidden", 12}, {"relation_hidden", 12}, {"context_channels", 3},
                {"patch", 5}, {"distance_threshold", 30.0}, {"mode", "T+C-kin"}};
  j["train"] = {{"batch_size", 8}, {"epochs", 2}, {"seed", 4}};
  j["eval"] = {{"k", 3}};
  const std::string path = (dir / "config.json").string();
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("unknown flags exit nonzero") {
  CHECK(run_args({"eval", "--frobnicate"}) != 0);
  CHECK(run_args({"definitely-not-a-subcommand"}) != 0);
}

TEST_CASE("full pipeline: preprocess -> train -> eval -> predict -> plot") {
  fs::path root = fresh_dir("pipeline");
  const std::string config = write_config(root);

  // preprocess: deterministic artifacts.
  const std::string pre1 = (root / "pre1").string();
  const std::string pre2 = (root / "pre2").string();
  REQUIRE(run_args({"preprocess", "--config", config, "--out", pre1}) == 0);
  REQUIRE(run_args({"preprocess", "--config", config, "--out", pre2}) == 0);
  CHECK(fs::exists(pre1 + "/rasters.bin"));
  CHECK(fs::exists(pre1 + "/cases.json"));
  CHECK(fs::exists(pre1 + "/manifest.json"));
  CHECK(slurp(pre1 + "/rasters.bin") == slurp(pre2 + "/rasters.bin"));
  CHECK(slurp(pre1 + "/manifest.json") == slurp(pre2 + "/manifest.json"));

  // Missing upstream artifact: helpful error, nonzero exit.
  CHECK(run_args({"train", "--config", config, "--data", (root / "nope").string(), "--out",
                  (root / "t0").string()}) != 0);

  // train
  const std::string run1 = (root / "run1").string();
  REQUIRE(run_args({"train", "--config", config, "--data", pre1, "--out", run1}) == 0);
  CHECK(fs::exists(run1 + "/checkpoint.bin"));
  CHECK(fs::exists(run1 + "/loss_log.csv"));
  CHECK(fs::exists(run1 + "/manifest.json"));

  // Reproducibility: identical seed, identical artifacts.
  const std::string run2 = (root / "run2").string();
  REQUIRE(run_args({"train", "--config", config, "--data", pre1, "--out", run2}) == 0);
  CHECK(slurp(run1 + "/loss_log.csv") == slurp(run2 + "/loss_log.csv"));
  CHECK(slurp(run1 + "/checkpoint.bin") == slurp(run2 + "/checkpoint.bin"));

  // eval: metrics reports + combined table + manifest.
  const std::string ev1 = (root / "ev1").string();
  REQUIRE(run_args({"eval", "--config", config, "--data", pre1, "--ckpt",
                    run1 + "/checkpoint.bin", "--out", ev1}) == 0);
  CHECK(fs::exists(ev1 + "/report_model.json"));
  CHECK(fs::exists(ev1 + "/report_cvm.csv"));
  CHECK(fs::exists(ev1 + "/report_lr.csv"));
  CHECK(fs::exists(ev1 + "/table.csv"));
  const std::string ev2 = (root / "ev2").string();
  REQUIRE(run_args({"eval", "--config", config, "--data", pre1, "--ckpt",
                    run1 + "/checkpoint.bin", "--out", ev2}) == 0);
  CHECK(slurp(ev1 + "/report_model.json") == slurp(ev2 + "/report_model.json"));

  // The manifest records hashes of every artifact.
  json manifest = json::parse(slurp(ev1 + "/manifest.json"));
  CHECK(manifest.at("subcommand") == "eval");
  CHECK(manifest.at("outputs").size() == 7);

  // predict: dump rows are (t, x, y, psi) per case/agent/sample.
  const std::string pr = (root / "pred").string();
  REQUIRE(run_args({"predict", "--config", config, "--data", pre1, "--ckpt",
                    run1 + "/checkpoint.bin", "--k", "2", "--out", pr}) == 0);
  std::ifstream dump(pr + "/predictions.csv");
  std::string header;
  std::getline(dump, header);
  CHECK(header == "case,scene,window_start,track_id,sample,t,x,y,psi");
  int rows = 0;
  std::string line;
  while (std::getline(dump, line)) ++rows;
  CHECK(rows > 0);
  CHECK(rows % 5 == 0);  // multiple of T_f

  // plot: image + sidecar whose coordinates equal the prediction dump's.
  const std::string pl = (root / "plot").string();
  REQUIRE(run_args({"plot", "--config", config, "--data", pre1, "--ckpt",
                    run1 + "/checkpoint.bin", "--k", "2", "--case", "0", "--out", pl}) == 0);
  CHECK(fs::exists(pl + "/prediction.png"));
  CHECK(fs::file_size(pl + "/prediction.png") > 100);
  CHECK(fs::exists(pl + "/attention.png"));
  CHECK(fs::exists(pl + "/attention.json"));

  json sidecar = json::parse(slurp(pl + "/prediction.json"));
  REQUIRE(!sidecar.at("agents").empty());
  // Sidecar coordinates match the prediction dump for case 0 (same seed rules).
  std::ifstream dump2(pr + "/predictions.csv");
  std::getline(dump2, header);
  std::map<std::pair<std::string, int>, std::vector<Vec2>> dump_samples;
  while (std::getline(dump2, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f[0] != "0") continue;
    dump_samples[{f[3], std::stoi(f[4])}].emplace_back(std::stod(f[6]), std::stod(f[7]));
  }
  for (const auto& agent : sidecar.at("agents")) {
    const std::string id = agent.at("track_id");
    const auto& samples = agent.at("samples");
    for (int s = 0; s < static_cast<int>(samples.size()); ++s) {
      const auto& expect = dump_samples.at({id, s});
      REQUIRE(samples[s].size() == expect.size());
      for (std::size_t t = 0; t < expect.size(); ++t) {
        CHECK(samples[s][t][0].get<double>() == expect[t].x());
        CHECK(samples[s][t][1].get<double>() == expect[t].y());
      }
    }
  }

  // eval metrics match a direct library call bit-for-bit.
  Prepared prep = load_prepared(pre1);
  RunConfig cfg = RunConfig::load(config);
  auto model = Model::create(cfg.model);
  load_checkpoint(run1 + "/checkpoint.bin", model->params);
  std::vector<PredictionSet> preds;
  for (std::size_t i = 0; i < prep.test_cases.size(); ++i)
    preds.push_back(model->sample_predictions(prep.test_cases[i], cfg.eval.k, Phase::test,
                                              cfg.train.seed + i));
  MetricsReport direct = ade_fde(prep.test_cases, preds, cfg.horizons(), "T+C-kin");
  json from_cli = json::parse(slurp(ev1 + "/report_model.json"));
  for (std::size_t h = 0; h < direct.overall.size(); ++h) {
    CHECK(from_cli.at("overall")[h].at("ade_best").get<double>() == direct.overall[h].ade_best);
    CHECK(from_cli.at("overall")[h].at("fde_best").get<double>() == direct.overall[h].fde_best);
  }
}

TEST_CASE("environment overrides reach the config") {
  json j;
  j["train"] = {{"epochs", 7}};
  setenv("TRAJPRED_TRAIN__EPOCHS", "11", 1);
  setenv("TRAJPRED_MODEL__MODE", "\"T\"", 1);
  apply_env_overrides(j);
  unsetenv("TRAJPRED_TRAIN__EPOCHS");
  unsetenv("TRAJPRED_MODEL__MODE");
  CHECK(j.at("train").at("epochs") == 11);
  CHECK(j.at("model").at("mode") == "T");
}

TEST_CASE("png writer emits a valid signature and nonzero payload") {
  Canvas canvas(40, 30);
  canvas.line(0, 0, 39, 29, 255, 0, 0);
  canvas.disk(20, 15, 4, 0, 255, 0);
  auto dir = fresh_dir("png");
  const std::string path = (dir / "img.png").string();
  write_png(canvas, path);
  std::string bytes = slurp(path);
  REQUIRE(bytes.size() > 50);
  CHECK(static_cast<unsigned char>(bytes[0]) == 0x89);
  CHECK(bytes.substr(1, 3) == "PNG");
  CHECK(bytes.find("IHDR") != std::string::npos);
  CHECK(bytes.find("IDAT") != std::string::npos);
  CHECK(bytes.find("IEND") != std::string::npos);
}

TEST_CASE("mode flag switches the ablation for training runs") {
  fs::path root = fresh_dir("modes");
  const std::string config = write_config(root);
  const std::string out = (root / "runT").string();
  REQUIRE(run_args({"train", "--config", config, "--mode", "T", "--out", out}) == 0);
  json manifest = json::parse(slurp(out + "/manifest.json"));
  CHECK(manifest.at("config").at("model").at("mode") == "T");
}
