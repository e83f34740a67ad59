#include "trajpred/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "trajpred/plot.hpp"

namespace trajpred {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void attach_rasters(std::vector<Scene>& scenes, std::shared_ptr<const ContextRasters> rasters) {
  for (auto& s : scenes) s.rasters = rasters;
}

std::vector<PredictionCase> window_all(const std::vector<Scene>& scenes, const DataConfig& d) {
  std::vector<PredictionCase> cases;
  for (const auto& s : scenes) {
    auto cs = window_cases(s, d.t_h, d.t_f, d.stride);
    cases.insert(cases.end(), cs.begin(), cs.end());
  }
  return cases;
}

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const RunConfig& cfg, const std::vector<std::string>& outputs) {
  json m;
  m["subcommand"] = subcommand;
  m["seed"] = cfg.train.seed;
  m["config"] = cfg.to_json();
  json files = json::object();
  for (const auto& path : outputs)
    files[fs::relative(path, out_dir).string()] = file_hash(path);
  m["outputs"] = files;
  std::ofstream out(out_dir + "/manifest.json");
  require(out.good(), "cannot write manifest in '" + out_dir + "'");
  out << m.dump(2) << "\n";
}

json attention_to_json(const AttentionDump& dump) {
  json j;
  j["alpha"] = json::array();
  for (const auto& round : dump.alpha) {
    json jr = json::array();
    for (const auto& step : round) {
      json jt = json::array();
      for (const auto& head : step) {
        json jh = json::array();
        for (const auto& row : head)
          jh.push_back({{"node", row.node}, {"members", row.members}, {"alpha", row.alpha}});
        jt.push_back(jh);
      }
      jr.push_back(jt);
    }
    j["alpha"].push_back(jr);
  }
  j["beta"] = dump.beta;
  return j;
}

std::unique_ptr<Model> model_from_checkpoint(const std::string& ckpt_path, RunConfig& cfg) {
  // The checkpoint's config snapshot is authoritative for the model shape.
  json meta = json::parse(read_checkpoint_meta(ckpt_path));
  RunConfig ck_cfg = RunConfig::from_json(meta.at("config"));
  cfg.model = ck_cfg.model;
  auto model = Model::create(cfg.model);
  load_checkpoint(ckpt_path, model->params);
  return model;
}

int cmd_preprocess(const RunConfig& cfg, const std::string& out_dir) {
  Prepared prep = prepare_data(cfg);
  fs::create_directories(out_dir);
  std::vector<std::string> outputs;
  write_prepared(prep, cfg, out_dir, outputs);
  write_manifest(out_dir, "preprocess", cfg, outputs);
  std::cout << "preprocess: " << prep.train_cases.size() << " train / " << prep.val_cases.size()
            << " val / " << prep.test_cases.size() << " test cases -> " << out_dir << "\n";
  return 0;
}

int cmd_train(RunConfig cfg, const std::string& data_dir, const std::string& out_dir) {
  Prepared prep = data_dir.empty() ? prepare_data(cfg) : load_prepared(data_dir);
  require(!prep.train_cases.empty(), "train: no training cases");
  fs::create_directories(out_dir);

  auto model = Model::create(cfg.model);
  Trainer trainer(*model, cfg.train);
  TrainResult result = trainer.fit(prep.train_cases, prep.val_cases);

  std::vector<std::string> outputs;
  const std::string log_path = out_dir + "/loss_log.csv";
  save_loss_log(result.log, log_path);
  outputs.push_back(log_path);

  json meta;
  meta["config"] = cfg.to_json();
  meta["seed"] = cfg.train.seed;
  meta["best_epoch"] = result.best_epoch;
  meta["best_val_ade"] = result.best_val_ade;
  const std::string ckpt_path = out_dir + "/checkpoint.bin";
  save_checkpoint(ckpt_path, model->params, meta.dump());
  outputs.push_back(ckpt_path);

  write_manifest(out_dir, "train", cfg, outputs);
  std::cout << "train: best val ADE " << result.best_val_ade << " at epoch " << result.best_epoch
            << " -> " << ckpt_path << "\n";
  return 0;
}

std::vector<PredictionSet> predict_all(const Model& model, const std::vector<PredictionCase>& cases,
                                       int k, std::uint64_t seed) {
  std::vector<PredictionSet> preds;
  for (std::size_t i = 0; i < cases.size(); ++i)
    preds.push_back(model.sample_predictions(cases[i], k, Phase::test, seed + i));
  return preds;
}

int cmd_eval(RunConfig cfg, const std::string& data_dir, const std::string& ckpt,
             const std::string& out_dir) {
  auto model = model_from_checkpoint(ckpt, cfg);
  Prepared prep = data_dir.empty() ? prepare_data(cfg) : load_prepared(data_dir);
  require(!prep.test_cases.empty(), "eval: no test cases");
  fs::create_directories(out_dir);

  const auto horizons = cfg.horizons();
  auto preds = predict_all(*model, prep.test_cases, cfg.eval.k, cfg.train.seed);
  MetricsReport model_rep =
      ade_fde(prep.test_cases, preds, horizons, to_string(cfg.model.mode));

  std::vector<PredictionSet> cvm, lr;
  for (const auto& c : prep.test_cases) {
    cvm.push_back(baseline_cvm(c));
    lr.push_back(baseline_lr(c));
  }
  MetricsReport cvm_rep = ade_fde(prep.test_cases, cvm, horizons, "CVM");
  MetricsReport lr_rep = ade_fde(prep.test_cases, lr, horizons, "LR");

  std::vector<std::string> outputs;
  for (const auto& [name, rep] :
       {std::pair<std::string, const MetricsReport*>{"model", &model_rep},
        {"cvm", &cvm_rep},
        {"lr", &lr_rep}}) {
    const std::string csv = out_dir + "/report_" + name + ".csv";
    const std::string js = out_dir + "/report_" + name + ".json";
    save_report_csv(*rep, csv);
    save_report_json(*rep, js);
    outputs.push_back(csv);
    outputs.push_back(js);
  }

  // Pivot table: rows = horizon, columns = method (best-of-K ADE / FDE).
  const std::string table_path = out_dir + "/table.csv";
  {
    std::ofstream out(table_path);
    out << "horizon";
    for (const auto* rep : {&cvm_rep, &lr_rep, &model_rep})
      out << ',' << rep->method << "_ade," << rep->method << "_fde";
    out << "\n";
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      out << horizons[h];
      for (const auto* rep : {&cvm_rep, &lr_rep, &model_rep})
        out << ',' << rep->overall[h].ade_best << ',' << rep->overall[h].fde_best;
      out << "\n";
    }
  }
  outputs.push_back(table_path);

  write_manifest(out_dir, "eval", cfg, outputs);
  std::cout << "eval: " << prep.test_cases.size() << " cases; model ADE@max "
            << model_rep.overall.back().ade_best << " vs CVM " << cvm_rep.overall.back().ade_best
            << " -> " << out_dir << "\n";
  return 0;
}

int cmd_predict(RunConfig cfg, const std::string& data_dir, const std::string& ckpt,
                const std::string& out_dir) {
  auto model = model_from_checkpoint(ckpt, cfg);
  Prepared prep = data_dir.empty() ? prepare_data(cfg) : load_prepared(data_dir);
  require(!prep.test_cases.empty(), "predict: no test cases");
  fs::create_directories(out_dir);

  const std::string dump_path = out_dir + "/predictions.csv";
  std::ofstream out(dump_path);
  require(out.good(), "predict: cannot open '" + dump_path + "'");
  out << "case,scene,window_start,track_id,sample,t,x,y,psi\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto preds = predict_all(*model, prep.test_cases, cfg.eval.k, cfg.train.seed);
  for (std::size_t i = 0; i < prep.test_cases.size(); ++i) {
    const auto& c = prep.test_cases[i];
    const auto& p = preds[i];
    for (int a = 0; a < c.num_agents(); ++a)
      for (int s = 0; s < p.k; ++s) {
        const auto& traj = p.samples[a][s];
        for (std::size_t t = 0; t < traj.pos.size(); ++t)
          out << i << ',' << c.scene_name << ',' << c.window_start << ',' << c.track_ids[a] << ','
              << s << ',' << t + 1 << ',' << fmt(traj.pos[t].x()) << ',' << fmt(traj.pos[t].y())
              << ',' << fmt(traj.psi[t]) << "\n";
      }
  }
  out.close();

  std::vector<std::string> outputs{dump_path};
  write_manifest(out_dir, "predict", cfg, outputs);
  std::cout << "predict: wrote " << dump_path << "\n";
  return 0;
}

int cmd_plot(RunConfig cfg, const std::string& data_dir, const std::string& ckpt, int case_index,
             const std::string& out_dir) {
  auto model = model_from_checkpoint(ckpt, cfg);
  Prepared prep = data_dir.empty() ? prepare_data(cfg) : load_prepared(data_dir);
  require(!prep.test_cases.empty(), "plot: no test cases");
  require(case_index >= 0 && case_index < static_cast<int>(prep.test_cases.size()),
          "plot: case index out of range (have " + std::to_string(prep.test_cases.size()) +
              " test cases)");
  fs::create_directories(out_dir);
  const PredictionCase& c = prep.test_cases[case_index];

  AttentionDump dump;
  PredictionSet pred = model->sample_predictions(c, cfg.eval.k, Phase::test,
                                                 cfg.train.seed + case_index, &dump);

  std::vector<std::string> outputs;
  const std::string pred_png = out_dir + "/prediction.png";
  const std::string pred_sidecar = out_dir + "/prediction.json";
  render_prediction_plot(c, pred, pred_png, pred_sidecar);
  outputs.push_back(pred_png);
  outputs.push_back(pred_sidecar);

  const std::string attn_png = out_dir + "/attention.png";
  const std::string attn_sidecar = out_dir + "/attention_overlay.json";
  render_attention_overlay(c, dump, attn_png, attn_sidecar);
  outputs.push_back(attn_png);
  outputs.push_back(attn_sidecar);

  const std::string attn_dump_path = out_dir + "/attention.json";
  std::ofstream adump(attn_dump_path);
  adump << attention_to_json(dump).dump(2) << "\n";
  adump.close();
  outputs.push_back(attn_dump_path);

  write_manifest(out_dir, "plot", cfg, outputs);
  std::cout << "plot: wrote " << pred_png << "\n";
  return 0;
}

}  // namespace

Prepared prepare_data(const RunConfig& cfg) {
  std::vector<Scene> scenes;
  if (cfg.data.source == "synthetic") {
    scenes = generate_synthetic(cfg.synthetic, cfg.train.seed);
  } else if (cfg.data.source == "files") {
    require(!cfg.data.path.empty(), "prepare_data: data.path required for source=files");
    scenes = load_dataset(cfg.data.path, cfg.data.descriptor);
  } else {
    throw std::runtime_error("prepare_data: unknown data source '" + cfg.data.source + "'");
  }

  SceneSplit split = split_scenes(std::move(scenes), cfg.train.split_train, cfg.train.split_val,
                                  cfg.train.split_test, cfg.train.seed);

  // Rasters come from the training split only and are shared everywhere.
  GridSpec grid;
  if (cfg.raster.auto_bounds) {
    grid = fit_grid(split.train, cfg.raster.cell_size, cfg.raster.margin);
  } else {
    grid.origin = cfg.raster.origin;
    grid.cell_size = cfg.raster.cell_size;
    grid.rows = cfg.raster.rows;
    grid.cols = cfg.raster.cols;
  }
  auto rasters = std::make_shared<ContextRasters>(build_context_rasters(split.train, grid));

  Prepared prep;
  prep.rasters = rasters;
  prep.train_scenes = std::move(split.train);
  prep.val_scenes = std::move(split.val);
  prep.test_scenes = std::move(split.test);
  attach_rasters(prep.train_scenes, rasters);
  attach_rasters(prep.val_scenes, rasters);
  attach_rasters(prep.test_scenes, rasters);
  prep.train_cases = window_all(prep.train_scenes, cfg.data);
  prep.val_cases = window_all(prep.val_scenes, cfg.data);
  prep.test_cases = window_all(prep.test_scenes, cfg.data);
  return prep;
}

void write_prepared(const Prepared& prep, const RunConfig& cfg, const std::string& out_dir,
                    std::vector<std::string>& outputs) {
  fs::create_directories(out_dir + "/scenes");
  json index;
  index["t_h"] = cfg.data.t_h;
  index["t_f"] = cfg.data.t_f;
  index["stride"] = cfg.data.stride;
  index["unit"] = to_string(cfg.data.descriptor.unit);
  index["scenes"] = json::array();
  auto dump_split = [&](const std::vector<Scene>& scenes, const std::string& split) {
    for (const auto& s : scenes) {
      const std::string rel = "scenes/" + s.name + ".csv";
      const std::string path = out_dir + "/" + rel;
      save_scene(s, path);
      outputs.push_back(path);
      index["scenes"].push_back(
          {{"file", rel}, {"name", s.name}, {"scenario", s.scenario}, {"split", split},
           {"dt", s.dt}});
    }
  };
  dump_split(prep.train_scenes, "train");
  dump_split(prep.val_scenes, "val");
  dump_split(prep.test_scenes, "test");

  const std::string raster_path = out_dir + "/rasters.bin";
  save_rasters(*prep.rasters, raster_path);
  outputs.push_back(raster_path);

  const std::string index_path = out_dir + "/cases.json";
  std::ofstream out(index_path);
  require(out.good(), "write_prepared: cannot open '" + index_path + "'");
  out << index.dump(2) << "\n";
  outputs.push_back(index_path);
}

Prepared load_prepared(const std::string& dir) {
  std::ifstream in(dir + "/cases.json");
  require(in.good(), "load_prepared: missing artifact '" + dir +
                         "/cases.json' (run preprocess first)");
  json index;
  in >> index;

  Prepared prep;
  require(fs::exists(dir + "/rasters.bin"),
          "load_prepared: missing artifact '" + dir + "/rasters.bin'");
  prep.rasters = std::make_shared<ContextRasters>(load_rasters(dir + "/rasters.bin"));

  DataConfig d;
  d.t_h = index.at("t_h").get<int>();
  d.t_f = index.at("t_f").get<int>();
  d.stride = index.at("stride").get<int>();
  const Unit unit = unit_from_string(index.at("unit").get<std::string>());

  for (const auto& entry : index.at("scenes")) {
    DatasetDescriptor desc;
    desc.dt = entry.at("dt").get<double>();
    desc.unit = unit;
    std::vector<Scene> loaded = load_dataset(dir + "/" + entry.at("file").get<std::string>(), desc);
    Scene s = std::move(loaded[0]);
    s.name = entry.at("name").get<std::string>();
    s.scenario = entry.at("scenario").get<std::string>();
    s.rasters = prep.rasters;
    const std::string split = entry.at("split").get<std::string>();
    auto& bucket = split == "train" ? prep.train_scenes
                   : split == "val" ? prep.val_scenes
                                    : prep.test_scenes;
    bucket.push_back(std::move(s));
  }
  prep.train_cases = window_all(prep.train_scenes, d);
  prep.val_cases = window_all(prep.val_scenes, d);
  prep.test_cases = window_all(prep.test_scenes, d);
  return prep;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Graph double-attention trajectory prediction"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, ckpt_path, mode_str;
  std::uint64_t seed = 0;
  bool seed_set = false, mode_set = false;
  int k = 0, case_index = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; }, "seed override");
    cmd->add_option_function<std::string>(
        "--mode", [&](const std::string& v) { mode_str = v; mode_set = true; },
        "ablation mode: T, T+C, T+C-noattn, T+C-kin");
    cmd->add_option("--k", k, "samples per agent (overrides eval.k)");
  };

  CLI::App* pre = app.add_subcommand("preprocess", "generate/ingest scenes, build rasters");
  add_common(pre);
  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train);
  train->add_option("--data", data_dir, "preprocessed data directory");
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint (ADE/FDE + baselines)");
  add_common(ev);
  ev->add_option("--data", data_dir, "preprocessed data directory");
  ev->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  CLI::App* pr = app.add_subcommand("predict", "dump sampled trajectories");
  add_common(pr);
  pr->add_option("--data", data_dir, "preprocessed data directory");
  pr->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  CLI::App* pl = app.add_subcommand("plot", "render prediction fan + attention overlay");
  add_common(pl);
  pl->add_option("--data", data_dir, "preprocessed data directory");
  pl->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  pl->add_option("--case", case_index, "test case index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg = RunConfig::load(config_path);
    if (seed_set) {
      cfg.train.seed = seed;
      cfg.model.init_seed = seed;
    }
    if (mode_set) {
      cfg.model.mode = mode_from_string(mode_str);
      cfg.model.apply_mode();
    }
    if (k > 0) cfg.eval.k = k;

    if (pre->parsed()) return cmd_preprocess(cfg, out_dir);
    if (train->parsed()) return cmd_train(cfg, data_dir, out_dir);
    if (ev->parsed()) return cmd_eval(cfg, data_dir, ckpt_path, out_dir);
    if (pr->parsed()) return cmd_predict(cfg, data_dir, ckpt_path, out_dir);
    if (pl->parsed()) return cmd_plot(cfg, data_dir, ckpt_path, case_index, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace trajpred
