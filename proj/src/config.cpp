#include "trajpred/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

extern char** environ;

namespace trajpred {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

json section(const json& j, const std::string& key) {
  return j.contains(key) ? j.at(key) : json::object();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;

  const json d = section(j, "data");
  cfg.data.source = get_or<std::string>(d, "source", cfg.data.source);
  cfg.data.path = get_or<std::string>(d, "path", cfg.data.path);
  if (d.contains("dt")) cfg.data.descriptor.dt = d.at("dt").get<double>();
  cfg.data.descriptor.unit = unit_from_string(get_or<std::string>(d, "unit", "meters"));
  if (d.contains("columns"))
    for (auto& [k, v] : d.at("columns").items())
      cfg.data.descriptor.columns[k] = v.get<std::string>();
  cfg.data.t_h = get_or<int>(d, "t_h", cfg.data.t_h);
  cfg.data.t_f = get_or<int>(d, "t_f", cfg.data.t_f);
  cfg.data.stride = get_or<int>(d, "stride", cfg.data.stride);

  const json r = section(j, "raster");
  cfg.raster.cell_size = get_or<double>(r, "cell_size", cfg.raster.cell_size);
  cfg.raster.auto_bounds = get_or<bool>(r, "auto_bounds", cfg.raster.auto_bounds);
  cfg.raster.margin = get_or<double>(r, "margin", cfg.raster.margin);
  if (r.contains("origin")) {
    cfg.raster.origin.x() = r.at("origin").at(0).get<double>();
    cfg.raster.origin.y() = r.at("origin").at(1).get<double>();
  }
  cfg.raster.rows = get_or<int>(r, "rows", cfg.raster.rows);
  cfg.raster.cols = get_or<int>(r, "cols", cfg.raster.cols);

  const json m = section(j, "model");
  auto& mc = cfg.model;
  mc.gdat.node_dim = get_or<int>(m, "node_dim", mc.gdat.node_dim);
  mc.gdat.edge_dim = get_or<int>(m, "edge_dim", mc.gdat.edge_dim);
  mc.gdat.heads = get_or<int>(m, "topo_heads", mc.gdat.heads);
  mc.gdat.rounds = get_or<int>(m, "rounds", mc.gdat.rounds);
  mc.gdat.temporal_heads = get_or<int>(m, "temporal_heads", mc.gdat.temporal_heads);
  mc.gdat.latent_dim = get_or<int>(m, "latent_dim", mc.gdat.latent_dim);
  mc.gdat.enc_hidden = get_or<int>(m, "enc_hidden", mc.gdat.enc_hidden);
  mc.gdat.leaky_slope = get_or<double>(m, "leaky_slope", mc.gdat.leaky_slope);
  mc.feature.state_hidden = get_or<int>(m, "state_hidden", mc.feature.state_hidden);
  mc.feature.state_out = mc.gdat.node_dim;
  mc.feature.relation_hidden = get_or<int>(m, "relation_hidden", mc.feature.relation_hidden);
  mc.feature.relation_out = mc.gdat.edge_dim;
  mc.feature.context_channels = get_or<int>(m, "context_channels", mc.feature.context_channels);
  mc.feature.context_layers = get_or<int>(m, "context_layers", mc.feature.context_layers);
  mc.feature.context_kernel = get_or<int>(m, "context_kernel", mc.feature.context_kernel);
  mc.feature.leaky_slope = mc.gdat.leaky_slope;
  mc.patch_h = get_or<int>(m, "patch_h", get_or<int>(m, "patch", mc.patch_h));
  mc.patch_w = get_or<int>(m, "patch_w", get_or<int>(m, "patch", mc.patch_w));
  mc.distance_threshold = get_or<double>(m, "distance_threshold", mc.distance_threshold);
  mc.decoder.node_dim = mc.gdat.node_dim;
  mc.decoder.latent_dim = mc.gdat.latent_dim;
  mc.decoder.gru_hidden = get_or<int>(m, "gru_hidden", mc.decoder.gru_hidden);
  mc.decoder.init_hidden = get_or<int>(m, "init_hidden", mc.decoder.init_hidden);
  mc.decoder.leaky_slope = mc.gdat.leaky_slope;
  mc.decoder.bounds.a_max = get_or<double>(m, "a_max", mc.decoder.bounds.a_max);
  mc.decoder.bounds.omega_max = get_or<double>(m, "omega_max", mc.decoder.bounds.omega_max);
  mc.decoder.l_r = get_or<double>(m, "l_r", mc.decoder.l_r);
  mc.decoder.substeps = get_or<int>(m, "substeps", mc.decoder.substeps);
  mc.mode = mode_from_string(get_or<std::string>(m, "mode", to_string(mc.mode)));

  const json s = section(j, "synthetic");
  cfg.synthetic.scenario =
      scenario_from_string(get_or<std::string>(s, "scenario", to_string(cfg.synthetic.scenario)));
  cfg.synthetic.count = get_or<int>(s, "count", cfg.synthetic.count);
  cfg.synthetic.min_agents = get_or<int>(s, "min_agents", cfg.synthetic.min_agents);
  cfg.synthetic.max_agents = get_or<int>(s, "max_agents", cfg.synthetic.max_agents);
  cfg.synthetic.noise_std = get_or<double>(s, "noise_std", cfg.synthetic.noise_std);
  cfg.synthetic.frames = get_or<int>(s, "frames", cfg.synthetic.frames);
  cfg.synthetic.dt = get_or<double>(s, "dt", cfg.synthetic.dt);

  const json t = section(j, "train");
  cfg.train.batch_size = get_or<int>(t, "batch_size", cfg.train.batch_size);
  cfg.train.epochs = get_or<int>(t, "epochs", cfg.train.epochs);
  cfg.train.lr = get_or<double>(t, "lr", cfg.train.lr);
  cfg.train.clip = get_or<double>(t, "clip", cfg.train.clip);
  cfg.train.seed = get_or<std::uint64_t>(t, "seed", cfg.train.seed);
  cfg.train.weights.gamma = get_or<double>(t, "gamma", cfg.train.weights.gamma);
  cfg.train.weights.alpha = get_or<double>(t, "alpha", cfg.train.weights.alpha);
  cfg.train.weights.beta = get_or<double>(t, "beta", cfg.train.weights.beta);
  cfg.train.mmd.kernel =
      mmd_kernel_from_string(get_or<std::string>(t, "mmd_kernel", to_string(cfg.train.mmd.kernel)));
  cfg.train.mmd.scale = get_or<double>(t, "mmd_scale", 2.0 * cfg.model.gdat.latent_dim);
  if (t.contains("split")) {
    cfg.train.split_train = t.at("split").at(0).get<double>();
    cfg.train.split_val = t.at("split").at(1).get<double>();
    cfg.train.split_test = t.at("split").at(2).get<double>();
  }
  cfg.model.init_seed = cfg.train.seed;

  const json e = section(j, "eval");
  cfg.eval.k = get_or<int>(e, "k", cfg.eval.k);
  if (e.contains("horizons")) cfg.eval.horizons = e.at("horizons").get<std::vector<int>>();

  cfg.model.apply_mode();
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["data"] = {{"source", data.source}, {"path", data.path},
               {"unit", to_string(data.descriptor.unit)}, {"t_h", data.t_h},
               {"t_f", data.t_f}, {"stride", data.stride}};
  if (data.descriptor.dt) j["data"]["dt"] = *data.descriptor.dt;
  if (!data.descriptor.columns.empty()) {
    json cols = json::object();
    for (const auto& [k, v] : data.descriptor.columns) cols[k] = v;
    j["data"]["columns"] = cols;
  }
  j["raster"] = {{"cell_size", raster.cell_size}, {"auto_bounds", raster.auto_bounds},
                 {"margin", raster.margin}, {"origin", {raster.origin.x(), raster.origin.y()}},
                 {"rows", raster.rows}, {"cols", raster.cols}};
  j["model"] = {{"node_dim", model.gdat.node_dim}, {"edge_dim", model.gdat.edge_dim},
                {"topo_heads", model.gdat.heads}, {"rounds", model.gdat.rounds},
                {"temporal_heads", model.gdat.temporal_heads},
                {"latent_dim", model.gdat.latent_dim}, {"enc_hidden", model.gdat.enc_hidden},
                {"leaky_slope", model.gdat.leaky_slope},
                {"state_hidden", model.feature.state_hidden},
                {"relation_hidden", model.feature.relation_hidden},
                {"context_channels", model.feature.context_channels},
                {"context_layers", model.feature.context_layers},
                {"context_kernel", model.feature.context_kernel},
                {"patch_h", model.patch_h}, {"patch_w", model.patch_w},
                {"distance_threshold", model.distance_threshold},
                {"gru_hidden", model.decoder.gru_hidden},
                {"init_hidden", model.decoder.init_hidden},
                {"a_max", model.decoder.bounds.a_max},
                {"omega_max", model.decoder.bounds.omega_max}, {"l_r", model.decoder.l_r},
                {"substeps", model.decoder.substeps}, {"mode", to_string(model.mode)}};
  j["synthetic"] = {{"scenario", to_string(synthetic.scenario)}, {"count", synthetic.count},
                    {"min_agents", synthetic.min_agents}, {"max_agents", synthetic.max_agents},
                    {"noise_std", synthetic.noise_std}, {"frames", synthetic.frames},
                    {"dt", synthetic.dt}};
  j["train"] = {{"batch_size", train.batch_size}, {"epochs", train.epochs}, {"lr", train.lr},
                {"clip", train.clip}, {"seed", train.seed}, {"gamma", train.weights.gamma},
                {"alpha", train.weights.alpha}, {"beta", train.weights.beta},
                {"mmd_kernel", to_string(train.mmd.kernel)}, {"mmd_scale", train.mmd.scale},
                {"split", {train.split_train, train.split_val, train.split_test}}};
  j["eval"] = {{"k", eval.k}};
  if (!eval.horizons.empty()) j["eval"]["horizons"] = eval.horizons;
  return j;
}

void apply_env_overrides(nlohmann::json& j, const std::string& prefix) {
  for (char** env = environ; *env != nullptr; ++env) {
    std::string entry(*env);
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(prefix.size(), eq - prefix.size());
    const std::string value = entry.substr(eq + 1);
    const auto sep = key.find("__");
    if (sep == std::string::npos) continue;
    std::string sec = key.substr(0, sep);
    std::string name = key.substr(sep + 2);
    for (auto& ch : sec) ch = static_cast<char>(std::tolower(ch));
    for (auto& ch : name) ch = static_cast<char>(std::tolower(ch));
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    j[sec][name] = parsed;
  }
}

RunConfig RunConfig::load(const std::string& path) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open '" + path + "'");
    in >> j;
  }
  apply_env_overrides(j);
  return from_json(j);
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "file_hash: cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in.good()) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace trajpred
