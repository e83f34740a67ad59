#include "trajpred/training.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace trajpred {

SceneSplit split_scenes(std::vector<Scene> scenes, double f_train, double f_val, double f_test,
                        std::uint64_t seed) {
  require_arg(std::abs(f_train + f_val + f_test - 1.0) < 1e-9,
              "split_scenes: fractions must sum to 1");
  Rng rng(seed);
  rng.shuffle(scenes);
  const std::size_t n = scenes.size();
  const std::size_t n_train = static_cast<std::size_t>(f_train * n);
  const std::size_t n_val = static_cast<std::size_t>(f_val * n);
  SceneSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train)
      out.train.push_back(std::move(scenes[i]));
    else if (i < n_train + n_val)
      out.val.push_back(std::move(scenes[i]));
    else
      out.test.push_back(std::move(scenes[i]));
  }
  return out;
}

Trainer::Trainer(Model& model, TrainConfig cfg) : model_(model), cfg_(cfg) {
  cfg_.weights.validate(cfg_.allow_degenerate_weights);
  require_arg(cfg_.batch_size >= 1 && cfg_.epochs >= 1, "Trainer: bad batch size or epochs");
}

double Trainer::validation_ade(const std::vector<PredictionCase>& val_cases) const {
  if (val_cases.empty()) return 0.0;
  double err = 0.0;
  long agents = 0;
  for (const auto& c : val_cases) {
    auto pred = model_.predict_mean(c);
    for (int a = 0; a < c.num_agents(); ++a) {
      double e = 0.0;
      for (int t = 0; t < c.t_f(); ++t) e += (pred[a][t] - c.future[a][t].position).norm();
      err += e / c.t_f();
      ++agents;
    }
  }
  return agents > 0 ? err / agents : 0.0;
}

TrainResult Trainer::fit(const std::vector<PredictionCase>& train_cases,
                         const std::vector<PredictionCase>& val_cases) {
  require_arg(!train_cases.empty(), "Trainer::fit: no training cases");
  nn::Adam opt({cfg_.lr, 0.9, 0.999, 1e-8, cfg_.clip});
  Rng order_rng(cfg_.seed);
  Rng noise_rng = order_rng.fork(0x6e6f697365ull);

  TrainResult result;
  std::vector<Mat> best_values;

  std::vector<int> order(train_cases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    order_rng.shuffle(order);
    double ep_recon = 0, ep_kl = 0, ep_mmd = 0, ep_total = 0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      std::vector<const PredictionCase*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg_.batch_size); ++i)
        batch.push_back(&train_cases[order[i]]);

      ad::Tape tape;
      nn::Binding bind(tape);
      model_.params.zero_grad();
      auto fwd = model_.train_forward(bind, batch, cfg_.weights, cfg_.mmd, noise_rng,
                                      cfg_.allow_degenerate_weights);
      const double total = fwd.loss.scalar();
      if (!std::isfinite(total))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      tape.backward(fwd.loss);
      bind.flush_grads();
      opt.step(model_.params);

      ep_recon += fwd.recon.scalar();
      ep_kl += fwd.kl.scalar();
      ep_mmd += fwd.mmd.valid() ? fwd.mmd.scalar() : 0.0;
      ep_total += total;
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.recon = ep_recon / batches;
    log.kl = ep_kl / batches;
    log.mmd = ep_mmd / batches;
    log.total = ep_total / batches;
    log.val_ade = validation_ade(val_cases);
    result.log.push_back(log);

    if (result.best_epoch < 0 || log.val_ade < result.best_val_ade) {
      result.best_epoch = epoch;
      result.best_val_ade = log.val_ade;
      best_values.clear();
      for (const auto& p : model_.params.all()) best_values.push_back(p->value);
    }
  }

  // Leave the model at the best-validation parameters.
  if (!best_values.empty()) {
    std::size_t i = 0;
    for (const auto& p : model_.params.all()) p->value = best_values[i++];
  }
  return result;
}

void save_loss_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "save_loss_log: cannot open '" + path + "'");
  out << "epoch,recon,kl,mmd,total,val_ade\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& l : log)
    out << l.epoch << ',' << fmt(l.recon) << ',' << fmt(l.kl) << ',' << fmt(l.mmd) << ','
        << fmt(l.total) << ',' << fmt(l.val_ade) << "\n";
}

namespace {

constexpr char kCkptMagic[8] = {'T', 'P', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const nn::ParamStore& store,
                     const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "save_checkpoint: cannot open '" + path + "'");
  out.write(kCkptMagic, 8);
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(static_cast<std::uint32_t>(store.all().size()));
  for (const auto& p : store.all()) {
    put_u32(static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(static_cast<std::uint32_t>(p->value.rows()));
    put_u32(static_cast<std::uint32_t>(p->value.cols()));
    for (int c = 0; c < p->value.cols(); ++c)
      for (int r = 0; r < p->value.rows(); ++r)
        out.write(reinterpret_cast<const char*>(&p->value(r, c)), sizeof(double));
  }
  put_u32(static_cast<std::uint32_t>(meta_json.size()));
  out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  require(out.good(), "save_checkpoint: write failed for '" + path + "'");
}

std::string read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "read_checkpoint_meta: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kCkptMagic, 8) == 0,
          "read_checkpoint_meta: '" + path + "' is not a checkpoint");
  auto get_u32 = [&]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    require(in.good(), "read_checkpoint_meta: truncated archive");
    return v;
  };
  const std::uint32_t count = get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32();
    in.seekg(name_len, std::ios::cur);
    const std::uint32_t rows = get_u32();
    const std::uint32_t cols = get_u32();
    in.seekg(static_cast<std::streamoff>(rows) * cols * sizeof(double), std::ios::cur);
    require(in.good(), "read_checkpoint_meta: truncated archive");
  }
  const std::uint32_t meta_len = get_u32();
  std::string meta(meta_len, '\0');
  in.read(meta.data(), meta_len);
  require(in.good(), "read_checkpoint_meta: truncated metadata");
  return meta;
}

std::string load_checkpoint(const std::string& path, nn::ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kCkptMagic, 8) == 0,
          "load_checkpoint: '" + path + "' is not a checkpoint");
  auto get_u32 = [&]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    require(in.good(), "load_checkpoint: truncated archive");
    return v;
  };
  const std::uint32_t count = get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32();
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = get_u32();
    const std::uint32_t cols = get_u32();
    nn::Param* p = store.find(name);
    require(p != nullptr, "load_checkpoint: unknown parameter '" + name +
                              "' (checkpoint does not match this model configuration)");
    require(p->value.rows() == static_cast<int>(rows) && p->value.cols() == static_cast<int>(cols),
            "load_checkpoint: shape mismatch for '" + name + "'");
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t r = 0; r < rows; ++r) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        p->value(r, c) = v;
      }
    require(in.good(), "load_checkpoint: truncated parameter data");
  }
  const std::uint32_t meta_len = get_u32();
  std::string meta(meta_len, '\0');
  in.read(meta.data(), meta_len);
  require(in.good(), "load_checkpoint: truncated metadata");
  return meta;
}

}  // namespace trajpred
