#include "autoseries/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>

#include "autoseries/linalg.hpp"

namespace autoseries::ad {

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> val;
  std::vector<double> grad;
  bool requires_grad = false;
  Tape* tape = nullptr;
  std::int64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<double> attrs;  // op constants (factors, offsets, broadcast kind)
  std::vector<double> aux;    // saved forward intermediates for fused ops
  void (*backward_fn)(Node&) = nullptr;
  const char* op = "leaf";

  std::size_t size() const { return val.size(); }
};

struct OpAccess {
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
  static std::vector<std::shared_ptr<Node>>& ops(Tape& t) { return t.ops_; }
  static std::vector<std::shared_ptr<Node>>& params(Tape& t) { return t.params_; }
};

namespace {

std::atomic<std::int64_t> g_next_id{1};

std::string shape_str(const Node& n) {
  std::ostringstream os;
  os << n.rows << "x" << n.cols;
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const Node& a, const Node& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

std::shared_ptr<Node> make_leaf(int rows, int cols, std::vector<double> values) {
  if (rows < 1 || cols < 1) throw ShapeError("tensor: shape entries must be positive");
  if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ShapeError("tensor: data length does not match shape");
  }
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->val = std::move(values);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Creates the output node of a primitive, wiring gradient tracking and tape
// recording when any input is differentiable.
std::shared_ptr<Node> make_result(const char* op, int rows, int cols,
                                  std::vector<std::shared_ptr<Node>> parents,
                                  void (*backward_fn)(Node&)) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->rows = rows;
  n->cols = cols;
  n->val.resize(static_cast<std::size_t>(rows) * cols);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  Tape* tape = nullptr;
  bool rg = false;
  for (const auto& p : parents) {
    if (!p->requires_grad) continue;
    rg = true;
    if (tape != nullptr && p->tape != nullptr && p->tape != tape) {
      throw ShapeError(std::string(op) + ": operands belong to different tapes");
    }
    if (p->tape != nullptr) tape = p->tape;
  }
  n->parents = std::move(parents);
  if (rg) {
    n->requires_grad = true;
    n->tape = tape;
    n->backward_fn = backward_fn;
    if (tape != nullptr) OpAccess::ops(*tape).push_back(n);
  }
  return n;
}

// ---- broadcasting for elementwise binary ops ------------------------------

enum class Bcast : int { Same = 0, Scalar = 1, Row = 2, Col = 3 };

Bcast bcast_kind(const char* op, const Node& a, const Node& b) {
  if (a.rows == b.rows && a.cols == b.cols) return Bcast::Same;
  if (b.rows == 1 && b.cols == 1) return Bcast::Scalar;
  if (b.rows == 1 && b.cols == a.cols) return Bcast::Row;
  if (b.cols == 1 && b.rows == a.rows) return Bcast::Col;
  shape_fail(op, a, b);
}

inline std::size_t bindex(Bcast k, int i, int j, int cols) {
  switch (k) {
    case Bcast::Same: return static_cast<std::size_t>(i) * cols + j;
    case Bcast::Scalar: return 0;
    case Bcast::Row: return static_cast<std::size_t>(j);
    case Bcast::Col: return static_cast<std::size_t>(i);
  }
  return 0;
}

template <typename FwdFn, typename BackFn>
Tensor binary_op(const char* op, const Tensor& ta, const Tensor& tb, FwdFn fwd, BackFn) {
  const auto& a = OpAccess::node(ta);
  const auto& b = OpAccess::node(tb);
  const Bcast k = bcast_kind(op, *a, *b);
  auto out = make_result(op, a->rows, a->cols, {a, b}, BackFn::run);
  out->attrs = {static_cast<double>(static_cast<int>(k))};
  const int r = a->rows, c = a->cols;
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      const std::size_t ia = static_cast<std::size_t>(i) * c + j;
      out->val[ia] = fwd(a->val[ia], b->val[bindex(k, i, j, c)]);
    }
  }
  return OpAccess::wrap(out);
}

struct AddBack {
  static void run(Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    const Bcast k = static_cast<Bcast>(static_cast<int>(n.attrs[0]));
    const int r = n.rows, c = n.cols;
    if (a.requires_grad) {
      for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i];
    }
    if (b.requires_grad) {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          b.grad[bindex(k, i, j, c)] += n.grad[static_cast<std::size_t>(i) * c + j];
    }
  }
};

struct SubBack {
  static void run(Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    const Bcast k = static_cast<Bcast>(static_cast<int>(n.attrs[0]));
    const int r = n.rows, c = n.cols;
    if (a.requires_grad) {
      for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i];
    }
    if (b.requires_grad) {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          b.grad[bindex(k, i, j, c)] -= n.grad[static_cast<std::size_t>(i) * c + j];
    }
  }
};

struct MulBack {
  static void run(Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    const Bcast k = static_cast<Bcast>(static_cast<int>(n.attrs[0]));
    const int r = n.rows, c = n.cols;
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        const std::size_t ia = static_cast<std::size_t>(i) * c + j;
        const std::size_t ib = bindex(k, i, j, c);
        if (a.requires_grad) a.grad[ia] += n.grad[ia] * b.val[ib];
        if (b.requires_grad) b.grad[ib] += n.grad[ia] * a.val[ia];
      }
    }
  }
};

struct DivBack {
  static void run(Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    const Bcast k = static_cast<Bcast>(static_cast<int>(n.attrs[0]));
    const int r = n.rows, c = n.cols;
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        const std::size_t ia = static_cast<std::size_t>(i) * c + j;
        const std::size_t ib = bindex(k, i, j, c);
        const double inv = 1.0 / b.val[ib];
        if (a.requires_grad) a.grad[ia] += n.grad[ia] * inv;
        if (b.requires_grad) b.grad[ib] -= n.grad[ia] * a.val[ia] * inv * inv;
      }
    }
  }
};

// ---- unary elementwise -----------------------------------------------------

template <typename FwdFn>
Tensor unary_op(const char* op, const Tensor& ta, FwdFn fwd, void (*back)(Node&),
                std::vector<double> attrs = {}) {
  const auto& a = OpAccess::node(ta);
  auto out = make_result(op, a->rows, a->cols, {a}, back);
  out->attrs = std::move(attrs);
  for (std::size_t i = 0; i < a->size(); ++i) out->val[i] = fwd(a->val[i]);
  return OpAccess::wrap(out);
}

}  // namespace

// ---- Tensor / Tape ----------------------------------------------------------

Tensor Tensor::leaf(int rows, int cols, std::vector<double> values) {
  return Tensor(make_leaf(rows, cols, std::move(values)));
}

Tensor Tensor::fill(int rows, int cols, double value) {
  return leaf(rows, cols,
              std::vector<double>(static_cast<std::size_t>(rows) * cols, value));
}

Tensor Tensor::scalar(double value) { return leaf(1, 1, {value}); }

int Tensor::rows() const { return node_->rows; }
int Tensor::cols() const { return node_->cols; }
std::size_t Tensor::size() const { return node_->size(); }
const std::vector<double>& Tensor::values() const { return node_->val; }
double Tensor::at(int r, int c) const {
  return node_->val[static_cast<std::size_t>(r) * node_->cols + c];
}
double Tensor::item() const {
  if (node_->rows != 1 || node_->cols != 1) {
    throw ShapeError("item: tensor is " + shape_str(*node_) + ", expected 1x1");
  }
  return node_->val[0];
}
bool Tensor::requires_grad() const { return node_->requires_grad; }
std::int64_t Tensor::id() const { return node_->id; }

Tensor Tape::param(int rows, int cols, std::vector<double> values) {
  auto n = make_leaf(rows, cols, std::move(values));
  n->requires_grad = true;
  n->tape = this;
  params_.push_back(n);
  return OpAccess::wrap(std::move(n));
}

void Tape::clear() {
  ops_.clear();
  params_.clear();
}

GradientMap backward(const Tensor& loss, Tape& tape) {
  const auto& root = OpAccess::node(loss);
  if (root->rows != 1 || root->cols != 1) {
    throw ShapeError("backward: loss is " + shape_str(*root) + ", expected scalar 1x1");
  }
  if (!root->requires_grad || root->tape != &tape) {
    throw ShapeError("backward: loss is not recorded on this tape");
  }
  auto& ops = OpAccess::ops(tape);
  auto& params = OpAccess::params(tape);
  for (auto& n : ops) n->grad.assign(n->size(), 0.0);
  for (auto& n : params) n->grad.assign(n->size(), 0.0);
  root->grad[0] = 1.0;
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    Node& n = **it;
    if (n.backward_fn != nullptr) n.backward_fn(n);
  }
  GradientMap out;
  out.reserve(params.size());
  for (auto& p : params) {
    out.emplace(p->id, Tensor::leaf(p->rows, p->cols, p->grad));
  }
  return out;
}

// ---- binary ops -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op("add", a, b, [](double x, double y) { return x + y; }, AddBack{});
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op("sub", a, b, [](double x, double y) { return x - y; }, SubBack{});
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op("mul", a, b, [](double x, double y) { return x * y; }, MulBack{});
}
Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op("div", a, b, [](double x, double y) { return x / y; }, DivBack{});
}

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  const auto& a = OpAccess::node(ta);
  const auto& b = OpAccess::node(tb);
  if (a->cols != b->rows) shape_fail("matmul", *a, *b);
  const int m = a->rows, k = a->cols, n = b->cols;
  auto out = make_result("matmul", m, n, {a, b}, +[](Node& nd) {
    Node& a = *nd.parents[0];
    Node& b = *nd.parents[1];
    const int m = a.rows, k = a.cols, n = b.cols;
    if (a.requires_grad) {
      // da = g . b^T
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          double s = 0.0;
          const std::size_t gi = static_cast<std::size_t>(i) * n;
          const std::size_t bp = static_cast<std::size_t>(p) * n;
          for (int j = 0; j < n; ++j) s += nd.grad[gi + j] * b.val[bp + j];
          a.grad[static_cast<std::size_t>(i) * k + p] += s;
        }
      }
    }
    if (b.requires_grad) {
      // db = a^T . g
      for (int i = 0; i < m; ++i) {
        const std::size_t ai = static_cast<std::size_t>(i) * k;
        const std::size_t gi = static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
          const double av = a.val[ai + p];
          if (av == 0.0) continue;
          const std::size_t bp = static_cast<std::size_t>(p) * n;
          for (int j = 0; j < n; ++j) b.grad[bp + j] += av * nd.grad[gi + j];
        }
      }
    }
  });
  for (int i = 0; i < m; ++i) {
    const std::size_t ai = static_cast<std::size_t>(i) * k;
    const std::size_t oi = static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a->val[ai + p];
      if (av == 0.0) continue;
      const std::size_t bp = static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) out->val[oi + j] += av * b->val[bp + j];
    }
  }
  return OpAccess::wrap(out);
}

Tensor transpose(const Tensor& ta) {
  const auto& a = OpAccess::node(ta);
  auto out = make_result("transpose", a->cols, a->rows, {a}, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    const int r = n.rows, c = n.cols;  // transposed dims
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        a.grad[static_cast<std::size_t>(j) * r + i] += n.grad[static_cast<std::size_t>(i) * c + j];
  });
  for (int i = 0; i < a->rows; ++i)
    for (int j = 0; j < a->cols; ++j)
      out->val[static_cast<std::size_t>(j) * a->rows + i] =
          a->val[static_cast<std::size_t>(i) * a->cols + j];
  return OpAccess::wrap(out);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(OpAccess::node(p));
  int rows = parents[0]->rows, cols = parents[0]->cols;
  for (std::size_t i = 1; i < parents.size(); ++i) {
    const Node& p = *parents[i];
    if (axis == 0) {
      if (p.cols != cols) shape_fail("concat", *parents[0], p);
      rows += p.rows;
    } else {
      if (p.rows != rows) shape_fail("concat", *parents[0], p);
      cols += p.cols;
    }
  }
  auto out = make_result("concat", rows, cols, std::move(parents), +[](Node& n) {
    const int axis = static_cast<int>(n.attrs[0]);
    std::size_t off = 0;
    if (axis == 0) {
      for (auto& pp : n.parents) {
        Node& p = *pp;
        if (p.requires_grad) {
          for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] += n.grad[off + i];
        }
        off += p.size();
      }
    } else {
      int col0 = 0;
      for (auto& pp : n.parents) {
        Node& p = *pp;
        if (p.requires_grad) {
          for (int i = 0; i < p.rows; ++i)
            for (int j = 0; j < p.cols; ++j)
              p.grad[static_cast<std::size_t>(i) * p.cols + j] +=
                  n.grad[static_cast<std::size_t>(i) * n.cols + col0 + j];
        }
        col0 += p.cols;
      }
    }
  });
  out->attrs = {static_cast<double>(axis)};
  if (axis == 0) {
    std::size_t off = 0;
    for (const auto& p : out->parents) {
      std::memcpy(out->val.data() + off, p->val.data(), p->size() * sizeof(double));
      off += p->size();
    }
  } else {
    int col0 = 0;
    for (const auto& p : out->parents) {
      for (int i = 0; i < p->rows; ++i)
        for (int j = 0; j < p->cols; ++j)
          out->val[static_cast<std::size_t>(i) * cols + col0 + j] =
              p->val[static_cast<std::size_t>(i) * p->cols + j];
      col0 += p->cols;
    }
  }
  return OpAccess::wrap(out);
}

Tensor slice(const Tensor& ta, int row0, int col0, int rows, int cols) {
  const auto& a = OpAccess::node(ta);
  if (row0 < 0 || col0 < 0 || rows < 1 || cols < 1 || row0 + rows > a->rows ||
      col0 + cols > a->cols) {
    throw ShapeError("slice: block out of range for " + shape_str(*a));
  }
  auto out = make_result("slice", rows, cols, {a}, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    const int row0 = static_cast<int>(n.attrs[0]);
    const int col0 = static_cast<int>(n.attrs[1]);
    for (int i = 0; i < n.rows; ++i)
      for (int j = 0; j < n.cols; ++j)
        a.grad[static_cast<std::size_t>(row0 + i) * a.cols + col0 + j] +=
            n.grad[static_cast<std::size_t>(i) * n.cols + j];
  });
  out->attrs = {static_cast<double>(row0), static_cast<double>(col0)};
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out->val[static_cast<std::size_t>(i) * cols + j] =
          a->val[static_cast<std::size_t>(row0 + i) * a->cols + col0 + j];
  return OpAccess::wrap(out);
}

Tensor reshape(const Tensor& ta, int rows, int cols) {
  const auto& a = OpAccess::node(ta);
  if (static_cast<std::size_t>(rows) * cols != a->size()) {
    throw ShapeError("reshape: size mismatch for " + shape_str(*a));
  }
  auto out = make_result("reshape", rows, cols, {a}, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i];
  });
  out->val = a->val;
  return OpAccess::wrap(out);
}

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& ta) {
  const auto& a = OpAccess::node(ta);
  auto out = make_result("sum", 1, 1, {a}, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < a.size(); ++i) a.grad[i] += n.grad[0];
  });
  double s = 0.0;
  for (const double v : a->val) s += v;
  out->val[0] = s;
  return OpAccess::wrap(out);
}

Tensor mean(const Tensor& ta) {
  const auto& a = OpAccess::node(ta);
  auto out = make_result("mean", 1, 1, {a}, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    const double g = n.grad[0] / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) a.grad[i] += g;
  });
  double s = 0.0;
  for (const double v : a->val) s += v;
  out->val[0] = s / static_cast<double>(a->size());
  return OpAccess::wrap(out);
}

// ---- unary ops -----------------------------------------------------------------

Tensor tanh(const Tensor& a) {
  return unary_op("tanh", a, [](double x) { return std::tanh(x); }, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < n.size(); ++i)
      a.grad[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op("sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  +[](Node& n) {
                    Node& a = *n.parents[0];
                    if (!a.requires_grad) return;
                    for (std::size_t i = 0; i < n.size(); ++i)
                      a.grad[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
                  });
}

Tensor exp(const Tensor& a) {
  return unary_op("exp", a, [](double x) { return std::exp(x); }, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i] * n.val[i];
  });
}

Tensor log(const Tensor& ta) {
  const auto& a = OpAccess::node(ta);
  for (const double v : a->val) {
    if (!(v > 0.0)) throw NumericError("log: non-positive input");
  }
  return unary_op("log", ta, [](double x) { return std::log(x); }, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i] / a.val[i];
  });
}

Tensor square(const Tensor& a) {
  return unary_op("square", a, [](double x) { return x * x; }, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += 2.0 * n.grad[i] * a.val[i];
  });
}

Tensor sqrt(const Tensor& ta) {
  const auto& a = OpAccess::node(ta);
  for (const double v : a->val) {
    if (v < 0.0) throw NumericError("sqrt: negative input");
  }
  return unary_op("sqrt", ta, [](double x) { return std::sqrt(x); }, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += 0.5 * n.grad[i] / n.val[i];
  });
}

Tensor softmax(const Tensor& ta) {
  const auto& a = OpAccess::node(ta);
  auto out = make_result("softmax", a->rows, a->cols, {a}, +[](Node& n) {
    Node& a = *n.parents[0];
    if (!a.requires_grad) return;
    const int r = n.rows, c = n.cols;
    for (int i = 0; i < r; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += n.grad[base + j] * n.val[base + j];
      for (int j = 0; j < c; ++j)
        a.grad[base + j] += n.val[base + j] * (n.grad[base + j] - dot);
    }
  });
  const int r = a->rows, c = a->cols;
  for (int i = 0; i < r; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * c;
    double mx = a->val[base];
    for (int j = 1; j < c; ++j) mx = std::max(mx, a->val[base + j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      out->val[base + j] = std::exp(a->val[base + j] - mx);
      z += out->val[base + j];
    }
    for (int j = 0; j < c; ++j) out->val[base + j] /= z;
  }
  return OpAccess::wrap(out);
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("clamp: lo must not exceed hi");
  return unary_op(
      "clamp", a,
      [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      +[](Node& n) {
        Node& a = *n.parents[0];
        if (!a.requires_grad) return;
        const double lo = n.attrs[0], hi = n.attrs[1];
        for (std::size_t i = 0; i < n.size(); ++i) {
          if (a.val[i] > lo && a.val[i] < hi) a.grad[i] += n.grad[i];
        }
      },
      {lo, hi});
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      "scale", a, [factor](double x) { return factor * x; },
      +[](Node& n) {
        Node& a = *n.parents[0];
        if (!a.requires_grad) return;
        const double f = n.attrs[0];
        for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += f * n.grad[i];
      },
      {factor});
}

Tensor add_const(const Tensor& a, double value) {
  return unary_op(
      "add_const", a, [value](double x) { return x + value; },
      +[](Node& n) {
        Node& a = *n.parents[0];
        if (!a.requires_grad) return;
        for (std::size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i];
      },
      {value});
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

// ---- fused recurrent cells -----------------------------------------------------

namespace {

void check_row(const char* op, const Node& t, int cols, const char* what) {
  if (t.rows != 1 || t.cols != cols) {
    throw ShapeError(std::string(op) + ": " + what + " is " + shape_str(t) + ", expected 1x" +
                     std::to_string(cols));
  }
}

}  // namespace

Tensor rnn_step(const Tensor& tx, const Tensor& th, const Tensor& twx, const Tensor& twh,
                const Tensor& tb) {
  const auto& x = OpAccess::node(tx);
  const auto& h = OpAccess::node(th);
  const auto& wx = OpAccess::node(twx);
  const auto& wh = OpAccess::node(twh);
  const auto& b = OpAccess::node(tb);
  const int d = x->cols, hs = h->cols;
  if (x->rows != 1 || h->rows != 1) throw ShapeError("rnn_step: x and h must be row vectors");
  if (wx->rows != d || wx->cols != hs || wh->rows != hs || wh->cols != hs) {
    shape_fail("rnn_step", *wx, *wh);
  }
  check_row("rnn_step", *b, hs, "bias");
  auto out = make_result("rnn_step", 1, hs, {x, h, wx, wh, b}, +[](Node& n) {
    Node& x = *n.parents[0];
    Node& h = *n.parents[1];
    Node& wx = *n.parents[2];
    Node& wh = *n.parents[3];
    Node& b = *n.parents[4];
    const int d = x.cols, hs = h.cols;
    std::vector<double> dpre(hs);
    for (int j = 0; j < hs; ++j) dpre[j] = n.grad[j] * (1.0 - n.val[j] * n.val[j]);
    if (b.requires_grad)
      for (int j = 0; j < hs; ++j) b.grad[j] += dpre[j];
    if (x.requires_grad)
      for (int p = 0; p < d; ++p) {
        double s = 0.0;
        for (int j = 0; j < hs; ++j) s += dpre[j] * wx.val[static_cast<std::size_t>(p) * hs + j];
        x.grad[p] += s;
      }
    if (wx.requires_grad)
      for (int p = 0; p < d; ++p) {
        const double xv = x.val[p];
        if (xv == 0.0) continue;
        for (int j = 0; j < hs; ++j) wx.grad[static_cast<std::size_t>(p) * hs + j] += xv * dpre[j];
      }
    if (h.requires_grad)
      for (int p = 0; p < hs; ++p) {
        double s = 0.0;
        for (int j = 0; j < hs; ++j) s += dpre[j] * wh.val[static_cast<std::size_t>(p) * hs + j];
        h.grad[p] += s;
      }
    if (wh.requires_grad)
      for (int p = 0; p < hs; ++p) {
        const double hv = h.val[p];
        if (hv == 0.0) continue;
        for (int j = 0; j < hs; ++j) wh.grad[static_cast<std::size_t>(p) * hs + j] += hv * dpre[j];
      }
  });
  std::vector<double> pre(b->val);
  for (int p = 0; p < d; ++p) {
    const double xv = x->val[p];
    if (xv == 0.0) continue;
    for (int j = 0; j < hs; ++j) pre[j] += xv * wx->val[static_cast<std::size_t>(p) * hs + j];
  }
  for (int p = 0; p < hs; ++p) {
    const double hv = h->val[p];
    if (hv == 0.0) continue;
    for (int j = 0; j < hs; ++j) pre[j] += hv * wh->val[static_cast<std::size_t>(p) * hs + j];
  }
  for (int j = 0; j < hs; ++j) out->val[j] = std::tanh(pre[j]);
  return OpAccess::wrap(out);
}

Tensor lstm_step(const Tensor& tx, const Tensor& th, const Tensor& tc, const Tensor& twx,
                 const Tensor& twh, const Tensor& tb) {
  const auto& x = OpAccess::node(tx);
  const auto& h = OpAccess::node(th);
  const auto& c = OpAccess::node(tc);
  const auto& wx = OpAccess::node(twx);
  const auto& wh = OpAccess::node(twh);
  const auto& b = OpAccess::node(tb);
  const int d = x->cols, hs = h->cols;
  if (x->rows != 1 || h->rows != 1 || c->rows != 1 || c->cols != hs) {
    throw ShapeError("lstm_step: x, h, c must be row vectors with matching width");
  }
  if (wx->rows != d || wx->cols != 4 * hs || wh->rows != hs || wh->cols != 4 * hs) {
    shape_fail("lstm_step", *wx, *wh);
  }
  check_row("lstm_step", *b, 4 * hs, "bias");
  // output packs [h'|c']; aux saves i|f|g|o|tanh(c')
  auto out = make_result("lstm_step", 1, 2 * hs, {x, h, c, wx, wh, b}, +[](Node& n) {
    Node& x = *n.parents[0];
    Node& h = *n.parents[1];
    Node& c = *n.parents[2];
    Node& wx = *n.parents[3];
    Node& wh = *n.parents[4];
    Node& b = *n.parents[5];
    const int d = x.cols, hs = h.cols;
    const double* gi = n.aux.data();
    const double* gf = gi + hs;
    const double* gg = gf + hs;
    const double* go = gg + hs;
    const double* tc2 = go + hs;
    std::vector<double> dpre(4 * hs);
    for (int j = 0; j < hs; ++j) {
      const double gh = n.grad[j];
      double dc = n.grad[hs + j] + gh * go[j] * (1.0 - tc2[j] * tc2[j]);
      const double di = dc * gg[j];
      const double df = dc * c.val[j];
      const double dg = dc * gi[j];
      const double do_ = gh * tc2[j];
      dpre[j] = di * gi[j] * (1.0 - gi[j]);
      dpre[hs + j] = df * gf[j] * (1.0 - gf[j]);
      dpre[2 * hs + j] = dg * (1.0 - gg[j] * gg[j]);
      dpre[3 * hs + j] = do_ * go[j] * (1.0 - go[j]);
      if (c.requires_grad) c.grad[j] += dc * gf[j];
    }
    if (b.requires_grad)
      for (int j = 0; j < 4 * hs; ++j) b.grad[j] += dpre[j];
    if (x.requires_grad)
      for (int p = 0; p < d; ++p) {
        double s = 0.0;
        for (int j = 0; j < 4 * hs; ++j)
          s += dpre[j] * wx.val[static_cast<std::size_t>(p) * 4 * hs + j];
        x.grad[p] += s;
      }
    if (wx.requires_grad)
      for (int p = 0; p < d; ++p) {
        const double xv = x.val[p];
        if (xv == 0.0) continue;
        for (int j = 0; j < 4 * hs; ++j)
          wx.grad[static_cast<std::size_t>(p) * 4 * hs + j] += xv * dpre[j];
      }
    if (h.requires_grad)
      for (int p = 0; p < hs; ++p) {
        double s = 0.0;
        for (int j = 0; j < 4 * hs; ++j)
          s += dpre[j] * wh.val[static_cast<std::size_t>(p) * 4 * hs + j];
        h.grad[p] += s;
      }
    if (wh.requires_grad)
      for (int p = 0; p < hs; ++p) {
        const double hv = h.val[p];
        if (hv == 0.0) continue;
        for (int j = 0; j < 4 * hs; ++j)
          wh.grad[static_cast<std::size_t>(p) * 4 * hs + j] += hv * dpre[j];
      }
  });
  std::vector<double> pre(b->val);
  for (int p = 0; p < d; ++p) {
    const double xv = x->val[p];
    if (xv == 0.0) continue;
    for (int j = 0; j < 4 * hs; ++j)
      pre[j] += xv * wx->val[static_cast<std::size_t>(p) * 4 * hs + j];
  }
  for (int p = 0; p < hs; ++p) {
    const double hv = h->val[p];
    if (hv == 0.0) continue;
    for (int j = 0; j < 4 * hs; ++j)
      pre[j] += hv * wh->val[static_cast<std::size_t>(p) * 4 * hs + j];
  }
  out->aux.resize(5 * hs);
  double* gi = out->aux.data();
  double* gf = gi + hs;
  double* gg = gf + hs;
  double* go = gg + hs;
  double* tc2 = go + hs;
  for (int j = 0; j < hs; ++j) {
    gi[j] = 1.0 / (1.0 + std::exp(-pre[j]));
    gf[j] = 1.0 / (1.0 + std::exp(-pre[hs + j]));
    gg[j] = std::tanh(pre[2 * hs + j]);
    go[j] = 1.0 / (1.0 + std::exp(-pre[3 * hs + j]));
    const double cn = gf[j] * c->val[j] + gi[j] * gg[j];
    tc2[j] = std::tanh(cn);
    out->val[j] = go[j] * tc2[j];
    out->val[hs + j] = cn;
  }
  return OpAccess::wrap(out);
}

Tensor gru_step(const Tensor& tx, const Tensor& th, const Tensor& twx, const Tensor& twh,
                const Tensor& tbx, const Tensor& tbh) {
  const auto& x = OpAccess::node(tx);
  const auto& h = OpAccess::node(th);
  const auto& wx = OpAccess::node(twx);
  const auto& wh = OpAccess::node(twh);
  const auto& bx = OpAccess::node(tbx);
  const auto& bh = OpAccess::node(tbh);
  const int d = x->cols, hs = h->cols;
  if (x->rows != 1 || h->rows != 1) throw ShapeError("gru_step: x and h must be row vectors");
  if (wx->rows != d || wx->cols != 3 * hs || wh->rows != hs || wh->cols != 3 * hs) {
    shape_fail("gru_step", *wx, *wh);
  }
  check_row("gru_step", *bx, 3 * hs, "input bias");
  check_row("gru_step", *bh, 3 * hs, "hidden bias");
  // aux saves z|r|n|ah_n
  auto out = make_result("gru_step", 1, hs, {x, h, wx, wh, bx, bh}, +[](Node& nd) {
    Node& x = *nd.parents[0];
    Node& h = *nd.parents[1];
    Node& wx = *nd.parents[2];
    Node& wh = *nd.parents[3];
    Node& bx = *nd.parents[4];
    Node& bh = *nd.parents[5];
    const int d = x.cols, hs = h.cols;
    const double* z = nd.aux.data();
    const double* r = z + hs;
    const double* nn = r + hs;
    const double* ahn = nn + hs;
    std::vector<double> dax(3 * hs), dah(3 * hs);
    for (int j = 0; j < hs; ++j) {
      const double g = nd.grad[j];
      const double dz = g * (h.val[j] - nn[j]);
      const double dn = g * (1.0 - z[j]);
      if (h.requires_grad) h.grad[j] += g * z[j];
      const double dpn = dn * (1.0 - nn[j] * nn[j]);
      const double dr = dpn * ahn[j];
      dax[2 * hs + j] = dpn;
      dah[2 * hs + j] = dpn * r[j];
      dax[j] = dah[j] = dz * z[j] * (1.0 - z[j]);
      dax[hs + j] = dah[hs + j] = dr * r[j] * (1.0 - r[j]);
    }
    if (bx.requires_grad)
      for (int j = 0; j < 3 * hs; ++j) bx.grad[j] += dax[j];
    if (bh.requires_grad)
      for (int j = 0; j < 3 * hs; ++j) bh.grad[j] += dah[j];
    if (x.requires_grad)
      for (int p = 0; p < d; ++p) {
        double s = 0.0;
        for (int j = 0; j < 3 * hs; ++j)
          s += dax[j] * wx.val[static_cast<std::size_t>(p) * 3 * hs + j];
        x.grad[p] += s;
      }
    if (wx.requires_grad)
      for (int p = 0; p < d; ++p) {
        const double xv = x.val[p];
        if (xv == 0.0) continue;
        for (int j = 0; j < 3 * hs; ++j)
          wx.grad[static_cast<std::size_t>(p) * 3 * hs + j] += xv * dax[j];
      }
    if (h.requires_grad)
      for (int p = 0; p < hs; ++p) {
        double s = 0.0;
        for (int j = 0; j < 3 * hs; ++j)
          s += dah[j] * wh.val[static_cast<std::size_t>(p) * 3 * hs + j];
        h.grad[p] += s;
      }
    if (wh.requires_grad)
      for (int p = 0; p < hs; ++p) {
        const double hv = h.val[p];
        if (hv == 0.0) continue;
        for (int j = 0; j < 3 * hs; ++j)
          wh.grad[static_cast<std::size_t>(p) * 3 * hs + j] += hv * dah[j];
      }
  });
  std::vector<double> ax(bx->val), ah(bh->val);
  for (int p = 0; p < d; ++p) {
    const double xv = x->val[p];
    if (xv == 0.0) continue;
    for (int j = 0; j < 3 * hs; ++j)
      ax[j] += xv * wx->val[static_cast<std::size_t>(p) * 3 * hs + j];
  }
  for (int p = 0; p < hs; ++p) {
    const double hv = h->val[p];
    if (hv == 0.0) continue;
    for (int j = 0; j < 3 * hs; ++j)
      ah[j] += hv * wh->val[static_cast<std::size_t>(p) * 3 * hs + j];
  }
  out->aux.resize(4 * hs);
  double* z = out->aux.data();
  double* r = z + hs;
  double* nn = r + hs;
  double* ahn = nn + hs;
  for (int j = 0; j < hs; ++j) {
    z[j] = 1.0 / (1.0 + std::exp(-(ax[j] + ah[j])));
    r[j] = 1.0 / (1.0 + std::exp(-(ax[hs + j] + ah[hs + j])));
    ahn[j] = ah[2 * hs + j];
    nn[j] = std::tanh(ax[2 * hs + j] + r[j] * ahn[j]);
    out->val[j] = (1.0 - z[j]) * nn[j] + z[j] * h->val[j];
  }
  return OpAccess::wrap(out);
}

// ---- fused GMM energy -----------------------------------------------------------

Tensor gmm_energy(const Tensor& tphi, const Tensor& tmu, const Tensor& tsigma,
                  const Tensor& ty) {
  const auto& phi = OpAccess::node(tphi);
  const auto& mu = OpAccess::node(tmu);
  const auto& sigma = OpAccess::node(tsigma);
  const auto& y = OpAccess::node(ty);
  const int hcount = phi->cols;
  const int dim = mu->cols;
  const int n = y->rows;
  if (phi->rows != 1) throw ShapeError("gmm_energy: phi must be 1xH");
  if (mu->rows != hcount) shape_fail("gmm_energy", *phi, *mu);
  if (sigma->rows != hcount * dim || sigma->cols != dim) shape_fail("gmm_energy", *mu, *sigma);
  if (y->cols != dim) shape_fail("gmm_energy", *mu, *y);

  auto out = make_result("gmm_energy", n, 1, {phi, mu, sigma, y}, +[](Node& nd) {
    Node& phi = *nd.parents[0];
    Node& mu = *nd.parents[1];
    Node& sigma = *nd.parents[2];
    Node& y = *nd.parents[3];
    const int hcount = phi.cols, dim = mu.cols, n = y.rows;
    const double* w = nd.aux.data();              // n x H posteriors
    const double* inv = w + static_cast<std::size_t>(n) * hcount;  // H dxd inverses
    std::vector<double> delta(dim), v(dim);
    for (int i = 0; i < n; ++i) {
      const double g = nd.grad[i];
      if (g == 0.0) continue;
      for (int h = 0; h < hcount; ++h) {
        const double wih = w[static_cast<std::size_t>(i) * hcount + h];
        if (wih == 0.0) continue;
        const double* ih = inv + static_cast<std::size_t>(h) * dim * dim;
        for (int k = 0; k < dim; ++k)
          delta[k] = y.val[static_cast<std::size_t>(i) * dim + k] -
                     mu.val[static_cast<std::size_t>(h) * dim + k];
        for (int k = 0; k < dim; ++k) {
          double s = 0.0;
          for (int l = 0; l < dim; ++l) s += ih[static_cast<std::size_t>(k) * dim + l] * delta[l];
          v[k] = s;
        }
        if (y.requires_grad)
          for (int k = 0; k < dim; ++k)
            y.grad[static_cast<std::size_t>(i) * dim + k] += g * wih * v[k];
        if (mu.requires_grad)
          for (int k = 0; k < dim; ++k)
            mu.grad[static_cast<std::size_t>(h) * dim + k] -= g * wih * v[k];
        if (phi.requires_grad) phi.grad[h] -= g * wih / std::max(phi.val[h], 1e-300);
        if (sigma.requires_grad) {
          double* sg = sigma.grad.data() + static_cast<std::size_t>(h) * dim * dim;
          for (int k = 0; k < dim; ++k)
            for (int l = 0; l < dim; ++l)
              sg[static_cast<std::size_t>(k) * dim + l] +=
                  g * 0.5 * wih *
                  (ih[static_cast<std::size_t>(k) * dim + l] - v[k] * v[l]);
        }
      }
    }
  });

  constexpr double kLog2Pi = 1.8378770664093453;
  std::vector<double> logdet(hcount);
  std::vector<double> invs(static_cast<std::size_t>(hcount) * dim * dim);
  for (int h = 0; h < hcount; ++h) {
    // read the symmetrized block so the op is differentiable in every entry
    std::vector<double> block(static_cast<std::size_t>(dim) * dim);
    for (int k = 0; k < dim; ++k)
      for (int l = 0; l < dim; ++l)
        block[static_cast<std::size_t>(k) * dim + l] =
            0.5 * (sigma->val[(static_cast<std::size_t>(h) * dim + k) * dim + l] +
                   sigma->val[(static_cast<std::size_t>(h) * dim + l) * dim + k]);
    const std::vector<double> l = linalg::cholesky(block, dim);
    logdet[h] = linalg::cholesky_logdet(l, dim);
    const std::vector<double> inv = linalg::cholesky_inverse(l, dim);
    std::copy(inv.begin(), inv.end(), invs.begin() + static_cast<std::size_t>(h) * dim * dim);
  }
  out->aux.resize(static_cast<std::size_t>(n) * hcount + invs.size());
  double* w = out->aux.data();
  std::copy(invs.begin(), invs.end(), w + static_cast<std::size_t>(n) * hcount);
  std::vector<double> logp(hcount), delta(dim);
  for (int i = 0; i < n; ++i) {
    for (int h = 0; h < hcount; ++h) {
      const double* ih = invs.data() + static_cast<std::size_t>(h) * dim * dim;
      for (int k = 0; k < dim; ++k)
        delta[k] = y->val[static_cast<std::size_t>(i) * dim + k] -
                   mu->val[static_cast<std::size_t>(h) * dim + k];
      double q = 0.0;
      for (int k = 0; k < dim; ++k) {
        double s = 0.0;
        for (int l = 0; l < dim; ++l) s += ih[static_cast<std::size_t>(k) * dim + l] * delta[l];
        q += s * delta[k];
      }
      logp[h] = std::log(std::max(phi->val[h], 1e-300)) -
                0.5 * (dim * kLog2Pi + logdet[h] + q);
    }
    double mx = logp[0];
    for (int h = 1; h < hcount; ++h) mx = std::max(mx, logp[h]);
    double z = 0.0;
    for (int h = 0; h < hcount; ++h) z += std::exp(logp[h] - mx);
    const double e = -(mx + std::log(z));
    out->val[i] = e;
    for (int h = 0; h < hcount; ++h)
      w[static_cast<std::size_t>(i) * hcount + h] = std::exp(logp[h] + e);
  }
  return OpAccess::wrap(out);
}

// ---- gradient checking -----------------------------------------------------------

double grad_check(const std::function<Tensor(Tape&, std::vector<Tensor>&)>& build,
                  std::vector<ParamSpec> params, double eps) {
  if (!(eps > 0.0)) throw DomainError("grad_check: eps must be positive");
  const auto eval = [&](const std::vector<ParamSpec>& ps) {
    Tape tape;
    std::vector<Tensor> bound;
    bound.reserve(ps.size());
    for (const auto& s : ps) bound.push_back(tape.param(s.rows, s.cols, s.values));
    const Tensor loss = build(tape, bound);
    const double v = loss.item();
    if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite");
    return v;
  };

  Tape tape;
  std::vector<Tensor> bound;
  bound.reserve(params.size());
  for (const auto& s : params) bound.push_back(tape.param(s.rows, s.cols, s.values));
  const Tensor loss = build(tape, bound);
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: objective is not finite");
  const GradientMap grads = backward(loss, tape);

  double max_err = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::vector<double>& analytic = grads.at(bound[p].id()).values();
    for (std::size_t k = 0; k < params[p].values.size(); ++k) {
      std::vector<ParamSpec> ps = params;
      ps[p].values[k] += eps;
      const double fp = eval(ps);
      ps[p].values[k] -= 2.0 * eps;
      const double fm = eval(ps);
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = std::abs(analytic[k] - numeric) /
                         std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace autoseries::ad
