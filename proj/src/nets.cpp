#include "autoseries/nets.hpp"

#include <cmath>

#include "autoseries/rng.hpp"

namespace autoseries {

std::string to_string(CellKind k) {
  switch (k) {
    case CellKind::Rnn: return "rnn";
    case CellKind::Lstm: return "lstm";
    case CellKind::Gru: return "gru";
  }
  return "rnn";
}

std::string to_string(AttentionKind k) { return k == AttentionKind::Self ? "self" : "none"; }

std::string to_string(SimKind k) {
  switch (k) {
    case SimKind::RelEuclid: return "rel_euclid";
    case SimKind::Cosine: return "cosine";
    case SimKind::Both: return "both";
  }
  return "rel_euclid";
}

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "rnn") return CellKind::Rnn;
  if (s == "lstm") return CellKind::Lstm;
  if (s == "gru") return CellKind::Gru;
  throw DomainError("unknown cell kind '" + s + "'");
}

AttentionKind attention_kind_from_string(const std::string& s) {
  if (s == "none") return AttentionKind::None;
  if (s == "self") return AttentionKind::Self;
  throw DomainError("unknown attention kind '" + s + "'");
}

SimKind sim_kind_from_string(const std::string& s) {
  if (s == "rel_euclid") return SimKind::RelEuclid;
  if (s == "cosine") return SimKind::Cosine;
  if (s == "both") return SimKind::Both;
  throw DomainError("unknown similarity kind '" + s + "'");
}

void NetConfig::validate() const {
  if (h_enc < 1 || h_enc > 32) throw DomainError("net config: h_enc must lie in [1, 32]");
  const int dec_lo = channel_dim == 1 ? 1 : channel_dim;
  const int dec_hi = channel_dim == 1 ? 32 : 4 * channel_dim;
  if (h_dec < dec_lo || h_dec > dec_hi) {
    throw DomainError("net config: h_dec must lie in [" + std::to_string(dec_lo) + ", " +
                      std::to_string(dec_hi) + "]");
  }
  if (est_layers < 1 || est_layers > 5) throw DomainError("net config: est_layers in [1, 5]");
  if (clas_layers < 1 || clas_layers > 5) throw DomainError("net config: clas_layers in [1, 5]");
  if (est_nodes < 8 || est_nodes > 128) throw DomainError("net config: est_nodes in [8, 128]");
  if (clas_nodes < 8 || clas_nodes > 128) throw DomainError("net config: clas_nodes in [8, 128]");
  if (mixture_components < 1) throw DomainError("net config: mixture count must be >= 1");
  if (channel_dim < 1) throw DomainError("net config: channel_dim must be >= 1");
}

namespace nets {

namespace {

int gate_multiple(CellKind k) {
  switch (k) {
    case CellKind::Rnn: return 1;
    case CellKind::Lstm: return 4;
    case CellKind::Gru: return 3;
  }
  return 1;
}

void cell_shapes(std::vector<WeightShape>& out, const std::string& prefix, CellKind kind,
                 int in_dim, int hidden) {
  const int g = gate_multiple(kind);
  out.push_back({prefix + ".wx", in_dim, g * hidden});
  out.push_back({prefix + ".wh", hidden, g * hidden});
  if (kind == CellKind::Gru) {
    out.push_back({prefix + ".bx", 1, g * hidden});
    out.push_back({prefix + ".bh", 1, g * hidden});
  } else {
    out.push_back({prefix + ".b", 1, g * hidden});
  }
}

void mlp_shapes(std::vector<WeightShape>& out, const std::string& prefix, int in_dim, int layers,
                int nodes, int out_dim) {
  int cur = in_dim;
  for (int l = 0; l < layers; ++l) {
    out.push_back({prefix + ".w" + std::to_string(l), cur, nodes});
    out.push_back({prefix + ".b" + std::to_string(l), 1, nodes});
    cur = nodes;
  }
  out.push_back({prefix + ".out_w", cur, out_dim});
  out.push_back({prefix + ".out_b", 1, out_dim});
}

void check_finite(const ad::Tensor& t, const char* where) {
  for (const double v : t.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string(where) + ": non-finite value");
  }
}

// One recurrent step; for LSTM `state2` carries the cell state.
ad::Tensor cell_step(const BoundWeights& w, const std::string& prefix, CellKind kind,
                     const ad::Tensor& x, ad::Tensor& state, ad::Tensor& state2) {
  switch (kind) {
    case CellKind::Rnn:
      state = ad::rnn_step(x, state, w.at(prefix + ".wx"), w.at(prefix + ".wh"),
                           w.at(prefix + ".b"));
      return state;
    case CellKind::Lstm: {
      const int hs = state.cols();
      auto packed = ad::lstm_step(x, state, state2, w.at(prefix + ".wx"), w.at(prefix + ".wh"),
                                  w.at(prefix + ".b"));
      state = ad::slice(packed, 0, 0, 1, hs);
      state2 = ad::slice(packed, 0, hs, 1, hs);
      return state;
    }
    case CellKind::Gru:
      state = ad::gru_step(x, state, w.at(prefix + ".wx"), w.at(prefix + ".wh"),
                           w.at(prefix + ".bx"), w.at(prefix + ".bh"));
      return state;
  }
  throw DomainError("cell_step: unknown cell kind");
}

ad::Tensor mlp_forward(const BoundWeights& w, const std::string& prefix, int layers,
                       const ad::Tensor& input) {
  ad::Tensor cur = input;
  for (int l = 0; l < layers; ++l) {
    cur = ad::tanh(ad::add(ad::matmul(cur, w.at(prefix + ".w" + std::to_string(l))),
                           w.at(prefix + ".b" + std::to_string(l))));
  }
  return ad::add(ad::matmul(cur, w.at(prefix + ".out_w")), w.at(prefix + ".out_b"));
}

}  // namespace

std::vector<WeightShape> weight_shapes(const NetConfig& cfg) {
  cfg.validate();
  std::vector<WeightShape> out;
  cell_shapes(out, "enc", cfg.encoder_kind, cfg.channel_dim, cfg.h_enc);
  out.push_back({"dec.init_w", cfg.h_enc, cfg.h_dec});
  out.push_back({"dec.init_b", 1, cfg.h_dec});
  cell_shapes(out, "dec", cfg.decoder_kind, cfg.channel_dim, cfg.h_dec);
  out.push_back({"dec.out_w", cfg.h_dec, cfg.channel_dim});
  out.push_back({"dec.out_b", 1, cfg.channel_dim});
  mlp_shapes(out, "est", cfg.latent_dim(), cfg.est_layers, cfg.est_nodes,
             cfg.mixture_components);
  mlp_shapes(out, "clas", cfg.h_enc, cfg.clas_layers, cfg.clas_nodes, 1);
  return out;
}

ModelWeights init_weights(const NetConfig& cfg, std::uint64_t seed) {
  ModelWeights out;
  for (const auto& shape : weight_shapes(cfg)) {
    Rng rng(derive_seed(seed, shape.name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape.rows));
    Param p;
    p.rows = shape.rows;
    p.cols = shape.cols;
    p.data.resize(static_cast<std::size_t>(shape.rows) * shape.cols);
    for (auto& v : p.data) v = rng.uniform(-bound, bound);
    out.tensors.emplace(shape.name, std::move(p));
  }
  return out;
}

const ad::Tensor& BoundWeights::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw Error("weights: missing tensor '" + name + "'");
  return it->second;
}

BoundWeights bind(const ModelWeights& weights, ad::Tape* tape) {
  BoundWeights out;
  for (const auto& [name, p] : weights.tensors) {
    out.tensors.emplace(name, tape ? tape->param(p.rows, p.cols, p.data)
                                   : ad::Tensor::leaf(p.rows, p.cols, p.data));
  }
  return out;
}

ad::Tensor series_tensor(const TimeSeries& series) {
  const int n = series.length();
  const int d = series.dim();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(n) * d);
  for (const auto& row : series.values) flat.insert(flat.end(), row.begin(), row.end());
  return ad::Tensor::leaf(n, d, std::move(flat));
}

EncodeResult encode(const BoundWeights& w, const NetConfig& cfg, const TimeSeries& series) {
  if (series.length() < 1) throw DomainError("encode: series must be non-empty");
  if (series.dim() != cfg.channel_dim) {
    throw ShapeError("encode: series dimension " + std::to_string(series.dim()) +
                     " does not match channel_dim " + std::to_string(cfg.channel_dim));
  }
  EncodeResult out;
  ad::Tensor h = ad::Tensor::fill(1, cfg.h_enc, 0.0);
  ad::Tensor c = ad::Tensor::fill(1, cfg.h_enc, 0.0);
  out.states.reserve(series.values.size());
  for (const auto& row : series.values) {
    const ad::Tensor x = ad::Tensor::leaf(1, cfg.channel_dim, row);
    out.states.push_back(cell_step(w, "enc", cfg.encoder_kind, x, h, c));
    check_finite(out.states.back(), "encode");
  }
  out.h = out.states.back();
  return out;
}

ad::Tensor attend(const std::vector<ad::Tensor>& states) {
  if (states.empty()) throw DomainError("attend: needs at least one state");
  if (states.size() == 1) return states.front();
  const int s = states.front().cols();
  const ad::Tensor stack = ad::concat(states, 0);  // T x S
  const ad::Tensor query = states.back();
  auto scores = ad::scale(ad::matmul(stack, ad::transpose(query)), 1.0 / std::sqrt(s));
  auto weights = ad::softmax(ad::transpose(scores));  // 1 x T
  return ad::matmul(weights, stack);                  // 1 x S
}

ad::Tensor latent_state(const BoundWeights& w, const NetConfig& cfg, const TimeSeries& series) {
  EncodeResult enc = encode(w, cfg, series);
  return cfg.attention == AttentionKind::Self ? attend(enc.states) : enc.h;
}

ad::Tensor decode(const BoundWeights& w, const NetConfig& cfg, const ad::Tensor& h, int steps) {
  if (steps < 1) throw DomainError("decode: steps must be >= 1");
  ad::Tensor state = ad::add(ad::matmul(h, w.at("dec.init_w")), w.at("dec.init_b"));
  ad::Tensor c = ad::Tensor::fill(1, cfg.h_dec, 0.0);
  ad::Tensor feedback = ad::Tensor::fill(1, cfg.channel_dim, 0.0);
  std::vector<ad::Tensor> outputs;
  outputs.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    cell_step(w, "dec", cfg.decoder_kind, feedback, state, c);
    feedback = ad::add(ad::matmul(state, w.at("dec.out_w")), w.at("dec.out_b"));
    check_finite(feedback, "decode");
    outputs.push_back(feedback);
  }
  return outputs.size() == 1 ? outputs.front() : ad::concat(outputs, 0);
}

ad::Tensor similarity(const ad::Tensor& x, const ad::Tensor& x_rec, SimKind kind) {
  if (x.rows() != x_rec.rows() || x.cols() != x_rec.cols()) {
    throw ShapeError("similarity: inputs must share shape");
  }
  const int n = x.rows() * x.cols();
  auto xf = ad::reshape(x, 1, n);
  auto rf = ad::reshape(x_rec, 1, n);
  constexpr double kFloor = 1e-12;
  constexpr double kCeil = 1e300;
  auto norm_x = ad::clamp(ad::sqrt(ad::sum(ad::square(xf))), kFloor, kCeil);
  ad::Tensor rel, cos;
  if (kind != SimKind::Cosine) {
    auto dist = ad::sqrt(ad::sum(ad::square(ad::sub(xf, rf))));
    rel = ad::div(dist, norm_x);
  }
  if (kind != SimKind::RelEuclid) {
    auto norm_r = ad::clamp(ad::sqrt(ad::sum(ad::square(rf))), kFloor, kCeil);
    auto dot = ad::sum(ad::mul(xf, rf));
    cos = ad::div(dot, ad::clamp(ad::mul(norm_x, norm_r), kFloor, kCeil));
  }
  if (kind == SimKind::RelEuclid) return rel;
  if (kind == SimKind::Cosine) return cos;
  return ad::concat({rel, cos}, 1);
}

ad::Tensor estimate(const BoundWeights& w, const NetConfig& cfg, const ad::Tensor& y) {
  if (y.rows() != 1 || y.cols() != cfg.latent_dim()) {
    throw ShapeError("estimate: input must be 1 x " + std::to_string(cfg.latent_dim()));
  }
  return ad::softmax(mlp_forward(w, "est", cfg.est_layers, y));
}

ad::Tensor classify(const BoundWeights& w, const NetConfig& cfg, const ad::Tensor& h) {
  if (h.rows() != 1 || h.cols() != cfg.h_enc) {
    throw ShapeError("classify: input must be 1 x " + std::to_string(cfg.h_enc));
  }
  return ad::sigmoid(mlp_forward(w, "clas", cfg.clas_layers, h));
}

nlohmann::json netconfig_to_json(const NetConfig& cfg) {
  return nlohmann::json{{"encoder", to_string(cfg.encoder_kind)},
                        {"decoder", to_string(cfg.decoder_kind)},
                        {"attention", to_string(cfg.attention)},
                        {"h_enc", cfg.h_enc},
                        {"h_dec", cfg.h_dec},
                        {"similarity", to_string(cfg.sim_kind)},
                        {"est_layers", cfg.est_layers},
                        {"est_nodes", cfg.est_nodes},
                        {"clas_layers", cfg.clas_layers},
                        {"clas_nodes", cfg.clas_nodes},
                        {"mixture_components", cfg.mixture_components},
                        {"channel_dim", cfg.channel_dim}};
}

NetConfig netconfig_from_json(const nlohmann::json& j) {
  NetConfig cfg;
  cfg.encoder_kind = cell_kind_from_string(j.at("encoder").get<std::string>());
  cfg.decoder_kind = cell_kind_from_string(j.at("decoder").get<std::string>());
  cfg.attention = attention_kind_from_string(j.at("attention").get<std::string>());
  cfg.h_enc = j.at("h_enc").get<int>();
  cfg.h_dec = j.at("h_dec").get<int>();
  cfg.sim_kind = sim_kind_from_string(j.at("similarity").get<std::string>());
  cfg.est_layers = j.at("est_layers").get<int>();
  cfg.est_nodes = j.at("est_nodes").get<int>();
  cfg.clas_layers = j.at("clas_layers").get<int>();
  cfg.clas_nodes = j.at("clas_nodes").get<int>();
  cfg.mixture_components = j.at("mixture_components").get<int>();
  cfg.channel_dim = j.at("channel_dim").get<int>();
  cfg.validate();
  return cfg;
}

nlohmann::json weights_to_json(const ModelWeights& w) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : w.tensors) {
    j[name] = {{"shape", {p.rows, p.cols}}, {"data", p.data}};
  }
  return j;
}

ModelWeights weights_from_json(const nlohmann::json& j) {
  ModelWeights out;
  for (const auto& [name, jt] : j.items()) {
    Param p;
    p.rows = jt.at("shape").at(0).get<int>();
    p.cols = jt.at("shape").at(1).get<int>();
    p.data = jt.at("data").get<std::vector<double>>();
    if (p.data.size() != static_cast<std::size_t>(p.rows) * p.cols) {
      throw ParseError("weights: tensor '" + name + "' data does not match its shape");
    }
    out.tensors.emplace(name, std::move(p));
  }
  return out;
}

}  // namespace nets
}  // namespace autoseries
