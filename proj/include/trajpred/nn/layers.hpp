#pragma once

#include <vector>

#include "trajpred/nn/params.hpp"

namespace trajpred::nn {

struct Linear {
  Param* w = nullptr;
  Param* b = nullptr;

  static Linear create(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
    Linear l;
    l.w = store.create(name + ".w", out, in);
    l.b = store.create(name + ".b", out, 1);
    init_uniform_fan_in(l.w, in, rng);
    // Bias init off zero keeps pre-activations away from the rectifier kink.
    init_uniform_fan_in(l.b, in, rng);
    return l;
  }

  ad::Var operator()(Binding& bind, const ad::Var& x) const {
    return ad::affine(bind(w), x, bind(b));
  }
};

// Fully connected stack; leaky-rectifier hidden activations, linear output.
struct Mlp {
  std::vector<Linear> layers;
  double slope = 0.2;

  static Mlp create(ParamStore& store, const std::string& name, const std::vector<int>& dims,
                    double slope, Rng& rng) {
    require_arg(dims.size() >= 2, "Mlp: need at least input and output dims");
    Mlp m;
    m.slope = slope;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      m.layers.push_back(
          Linear::create(store, name + ".l" + std::to_string(i), dims[i], dims[i + 1], rng));
    return m;
  }

  ad::Var operator()(Binding& bind, ad::Var x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](bind, x);
      if (i + 1 < layers.size()) x = ad::leaky_relu(x, slope);
    }
    return x;
  }
};

// Gated recurrent unit cell (reset-before-candidate formulation).
struct GruCell {
  int input_dim = 0;
  int hidden_dim = 0;
  Param *wz = nullptr, *uz = nullptr, *bz = nullptr;
  Param *wr = nullptr, *ur = nullptr, *br = nullptr;
  Param *wn = nullptr, *un = nullptr, *bn = nullptr;

  static GruCell create(ParamStore& store, const std::string& name, int input_dim, int hidden_dim,
                        Rng& rng) {
    GruCell g;
    g.input_dim = input_dim;
    g.hidden_dim = hidden_dim;
    auto mk = [&](const std::string& n, int rows, int cols, int fan) {
      Param* p = store.create(name + "." + n, rows, cols);
      init_uniform_fan_in(p, fan, rng);
      return p;
    };
    g.wz = mk("wz", hidden_dim, input_dim, input_dim);
    g.uz = mk("uz", hidden_dim, hidden_dim, hidden_dim);
    g.bz = mk("bz", hidden_dim, 1, hidden_dim);
    g.wr = mk("wr", hidden_dim, input_dim, input_dim);
    g.ur = mk("ur", hidden_dim, hidden_dim, hidden_dim);
    g.br = mk("br", hidden_dim, 1, hidden_dim);
    g.wn = mk("wn", hidden_dim, input_dim, input_dim);
    g.un = mk("un", hidden_dim, hidden_dim, hidden_dim);
    g.bn = mk("bn", hidden_dim, 1, hidden_dim);
    return g;
  }

  ad::Var step(Binding& bind, const ad::Var& x, const ad::Var& h) const {
    using namespace ad;
    Var z = sigmoid(add(affine(bind(wz), x, bind(bz)), matmul(bind(uz), h)));
    Var r = sigmoid(add(affine(bind(wr), x, bind(br)), matmul(bind(ur), h)));
    Var n = tanh_(add(affine(bind(wn), x, bind(bn)), cmul(r, matmul(bind(un), h))));
    // h' = (1 - z) .* n + z .* h
    Var one = bind.tape().constant(Mat::Ones(hidden_dim, 1));
    return add(cmul(sub(one, z), n), cmul(z, h));
  }
};

}  // namespace trajpred::nn
