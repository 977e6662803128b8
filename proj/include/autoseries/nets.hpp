#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoseries/data.hpp"
#include "autoseries/tensor.hpp"

namespace autoseries {

enum class CellKind { Rnn, Lstm, Gru };
enum class AttentionKind { None, Self };
enum class SimKind { RelEuclid, Cosine, Both };

std::string to_string(CellKind k);
std::string to_string(AttentionKind k);
std::string to_string(SimKind k);
CellKind cell_kind_from_string(const std::string& s);
AttentionKind attention_kind_from_string(const std::string& s);
SimKind sim_kind_from_string(const std::string& s);

// The trainable pipeline shape. Latent width S = h_enc; the estimation
// network ends in a softmax over `mixture_components`, the classifier in a
// single sigmoid unit.
struct NetConfig {
  CellKind encoder_kind = CellKind::Gru;
  CellKind decoder_kind = CellKind::Gru;
  AttentionKind attention = AttentionKind::None;
  int h_enc = 16;
  int h_dec = 16;
  SimKind sim_kind = SimKind::RelEuclid;
  int est_layers = 2;
  int est_nodes = 32;
  int clas_layers = 2;
  int clas_nodes = 32;
  int mixture_components = 2;
  int channel_dim = 1;

  int sim_dim() const { return sim_kind == SimKind::Both ? 2 : 1; }
  int latent_dim() const { return h_enc + sim_dim(); }
  void validate() const;
};

namespace nets {

struct Param {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
};

// All weight/bias tensors, keyed by name ("enc.wx", "dec.out_w", ...).
// The map ordering fixes the initialization draw order.
struct ModelWeights {
  std::map<std::string, Param> tensors;
};

struct WeightShape {
  std::string name;
  int rows = 0;
  int cols = 0;
};
std::vector<WeightShape> weight_shapes(const NetConfig& cfg);

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor, seeded.
ModelWeights init_weights(const NetConfig& cfg, std::uint64_t seed);

// Weights materialized as tensors: on a tape as differentiable params for
// training, or as frozen leaves when tape is null.
struct BoundWeights {
  std::map<std::string, ad::Tensor> tensors;
  const ad::Tensor& at(const std::string& name) const;
};
BoundWeights bind(const ModelWeights& weights, ad::Tape* tape);

// T x D value matrix of a series as a constant leaf.
ad::Tensor series_tensor(const TimeSeries& series);

struct EncodeResult {
  ad::Tensor h;                   // final hidden state, 1 x h_enc
  std::vector<ad::Tensor> states; // per-step hidden states
};

// Unrolls the encoder cell over the observations in order; variable lengths
// need no reconfiguration. Throws NumericError when the recurrence leaves
// the finite range.
EncodeResult encode(const BoundWeights& w, const NetConfig& cfg, const TimeSeries& series);

// Scaled dot-product self-attention with the final state as query:
// h = sum_t softmax(<s_T, s_t>/sqrt(S))_t s_t.
ad::Tensor attend(const std::vector<ad::Tensor>& states);

// Pipeline latent: attention output when enabled, else the final state.
ad::Tensor latent_state(const BoundWeights& w, const NetConfig& cfg, const TimeSeries& series);

// Autoregressive decoder: hidden state seeded from a learned projection of
// h, unrolled `steps` times feeding back its own readout. Returns steps x D.
ad::Tensor decode(const BoundWeights& w, const NetConfig& cfg, const ad::Tensor& h, int steps);

// Reconstruction-similarity features on flattened series: relative
// Euclidean distance, cosine similarity, or both. Norms are floored at
// 1e-12.
ad::Tensor similarity(const ad::Tensor& x, const ad::Tensor& x_rec, SimKind kind);

// Estimation network: tanh MLP ending in a softmax over H components.
ad::Tensor estimate(const BoundWeights& w, const NetConfig& cfg, const ad::Tensor& y);

// Auxiliary classifier: tanh MLP ending in one sigmoid output.
ad::Tensor classify(const BoundWeights& w, const NetConfig& cfg, const ad::Tensor& h);

nlohmann::json netconfig_to_json(const NetConfig& cfg);
NetConfig netconfig_from_json(const nlohmann::json& j);
nlohmann::json weights_to_json(const ModelWeights& w);
ModelWeights weights_from_json(const nlohmann::json& j);

}  // namespace nets
}  // namespace autoseries
