#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "autoseries/errors.hpp"

namespace autoseries::ad {

class Tape;
struct Node;

// Dense 2-d tensor of doubles with reverse-mode autodiff. A Tensor is a
// cheap handle; the node graph behind it is reference counted. Gradients are
// tracked only for tensors created through Tape::param and anything computed
// from them; pure-value computation never touches a tape.
class Tensor {
 public:
  Tensor() = default;

  // Leaf without gradient tracking.
  static Tensor leaf(int rows, int cols, std::vector<double> values);
  static Tensor fill(int rows, int cols, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  int rows() const;
  int cols() const;
  std::size_t size() const;
  const std::vector<double>& values() const;
  double at(int r, int c) const;
  double item() const;  // requires shape 1x1
  bool requires_grad() const;
  std::int64_t id() const;

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend class Tape;
  friend struct OpAccess;
};

using GradientMap = std::unordered_map<std::int64_t, Tensor>;

// Ordered record of the primitive operations of one differentiable
// computation. Insertion order is a topological order by construction; the
// backward pass replays it in reverse. A tape is confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable leaf registered on this tape.
  Tensor param(int rows, int cols, std::vector<double> values);

  std::size_t op_count() const { return ops_.size(); }
  void clear();

 private:
  std::vector<std::shared_ptr<Node>> ops_;
  std::vector<std::shared_ptr<Node>> params_;

  friend struct OpAccess;
  friend GradientMap backward(const Tensor&, Tape&);
};

// Runs the reverse pass for a scalar loss recorded on `tape`. Returns one
// gradient tensor per registered param; params the loss never touched map to
// zeros.
GradientMap backward(const Tensor& loss, Tape& tape);

// Elementwise binary ops. The second operand may have the same shape as the
// first, or broadcast as a 1x1 scalar, a 1xC row, or an Rx1 column.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int row0, int col0, int rows, int cols);
Tensor reshape(const Tensor& a, int rows, int cols);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor softmax(const Tensor& a);  // per row over the last axis
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor scale(const Tensor& a, double factor);
Tensor add_const(const Tensor& a, double value);
Tensor neg(const Tensor& a);

// Fused recurrent cell steps. Inputs are row vectors: x is 1xD, h and c are
// 1xH. Weight layouts: rnn wx DxH, wh HxH, b 1xH; lstm wx Dx4H, wh Hx4H,
// b 1x4H with gate order i|f|g|o, output packs [h'|c'] as 1x2H; gru wx Dx3H,
// wh Hx3H, bx/bh 1x3H with gate order z|r|n.
Tensor rnn_step(const Tensor& x, const Tensor& h, const Tensor& wx, const Tensor& wh,
                const Tensor& b);
Tensor lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& wx,
                 const Tensor& wh, const Tensor& b);
Tensor gru_step(const Tensor& x, const Tensor& h, const Tensor& wx, const Tensor& wh,
                const Tensor& bx, const Tensor& bh);

// Batched Gaussian-mixture sample energy: phi 1xH, mu Hxd, sigma (H*d)xd
// (H stacked dxd covariance blocks), y Nxd. Returns Nx1 energies
// -log sum_h phi_h N(y_i; mu_h, sigma_h), evaluated through Cholesky
// factorizations and log-sum-exp.
Tensor gmm_energy(const Tensor& phi, const Tensor& mu, const Tensor& sigma, const Tensor& y);

// Max relative error between the reverse-mode gradient and central finite
// differences, taken over every coordinate of every param. `build` is called
// with freshly bound params for every evaluation and must return a scalar.
struct ParamSpec {
  int rows = 1;
  int cols = 1;
  std::vector<double> values;
};
double grad_check(const std::function<Tensor(Tape&, std::vector<Tensor>&)>& build,
                  std::vector<ParamSpec> params, double eps);

}  // namespace autoseries::ad
