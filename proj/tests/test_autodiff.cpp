#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "autoseries/rng.hpp"
#include "autoseries/tensor.hpp"

using namespace autoseries;
namespace t = autoseries::ad;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Weighted sum against a seed-determined random matrix, so reductions do not
// hide structure (e.g. softmax rows summing to one). Regenerating from the
// seed keeps the weights identical across repeated builds of the same graph.
t::Tensor weighted(const t::Tensor& x, std::uint64_t wseed) {
  Rng rng(wseed);
  std::vector<double> w(x.size());
  for (auto& v : w) v = rng.uniform(-2.0, 2.0);
  return t::sum(t::mul(x, t::Tensor::leaf(x.rows(), x.cols(), w)));
}

}  // namespace

TEST_CASE("primitive forward examples") {
  auto x = t::Tensor::scalar(0.0);
  CHECK(t::tanh(x).item() == 0.0);

  auto s = t::softmax(t::Tensor::leaf(1, 2, {0.0, 0.0}));
  CHECK(s.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

  auto a = t::Tensor::leaf(2, 3, {1, 2, 3, 4, 5, 6});
  auto b = t::Tensor::leaf(3, 1, {1, 1, 1});
  auto c = t::matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 1);
  CHECK(c.at(0, 0) == 6.0);
  CHECK(c.at(1, 0) == 15.0);
}

TEST_CASE("shape mismatch names the primitive and shapes") {
  auto a = t::Tensor::leaf(2, 3, {1, 2, 3, 4, 5, 6});
  auto b = t::Tensor::leaf(4, 1, {1, 1, 1, 1});
  try {
    t::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x1") != std::string::npos);
  }
  CHECK_THROWS_AS(t::add(a, b), ShapeError);
}

TEST_CASE("backward basics") {
  SUBCASE("d(x*x)/dx = 2x") {
    t::Tape tape;
    auto x = tape.param(1, 1, {3.0});
    auto loss = t::mul(x, x);
    auto grads = t::backward(loss, tape);
    CHECK(grads.at(x.id()).item() == doctest::Approx(6.0).epsilon(1e-14));
  }
  SUBCASE("sum(sigmoid(x)) at 0 gives 0.25 per entry") {
    t::Tape tape;
    auto x = tape.param(1, 4, {0, 0, 0, 0});
    auto loss = t::sum(t::sigmoid(x));
    auto grads = t::backward(loss, tape);
    for (int j = 0; j < 4; ++j)
      CHECK(grads.at(x.id()).at(0, j) == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("disconnected leaf gets zero gradient") {
    t::Tape tape;
    auto x = tape.param(1, 1, {2.0});
    auto unused = tape.param(1, 3, {1.0, 2.0, 3.0});
    auto loss = t::square(x);
    auto grads = t::backward(loss, tape);
    for (int j = 0; j < 3; ++j) CHECK(grads.at(unused.id()).at(0, j) == 0.0);
  }
  SUBCASE("non-scalar loss rejected") {
    t::Tape tape;
    auto x = tape.param(1, 3, {1.0, 2.0, 3.0});
    auto y = t::square(x);
    CHECK_THROWS_AS(t::backward(y, tape), ShapeError);
  }
}

TEST_CASE("grad_check on a quadratic is tight") {
  const auto build = [](t::Tape&, std::vector<t::Tensor>& p) {
    return t::sum(t::square(p[0]));
  };
  const double err = t::grad_check(build, {{1, 3, {0.7, -1.3, 2.1}}}, 1e-5);
  CHECK(err < 1e-7);
}

TEST_CASE("grad_check of a constant function is exactly zero") {
  const auto build = [](t::Tape&, std::vector<t::Tensor>& p) {
    return t::sum(t::mul(p[0], t::Tensor::fill(1, 2, 0.0)));
  };
  CHECK(t::grad_check(build, {{1, 2, {0.3, 0.4}}}, 1e-5) == 0.0);
}

TEST_CASE("grad_check rejects bad eps and non-finite objectives") {
  const auto build = [](t::Tape&, std::vector<t::Tensor>& p) { return t::sum(p[0]); };
  CHECK_THROWS_AS(t::grad_check(build, {{1, 1, {1.0}}}, 0.0), DomainError);
  const auto bad = [](t::Tape&, std::vector<t::Tensor>& p) {
    return t::div(p[0], t::Tensor::scalar(0.0));
  };
  CHECK_THROWS_AS(t::grad_check(bad, {{1, 1, {1.0}}}, 1e-5), NumericError);
}

TEST_CASE("every primitive matches central finite differences over 100+ seeds") {
  int seeds_run = 0;
  for (std::uint64_t seed = 1; seed <= 108; ++seed) {
    Rng rng(derive_seed(9001, "fdprop", seed));
    const int r = static_cast<int>(rng.uniform_int(1, 3));
    const int c = static_cast<int>(rng.uniform_int(1, 4));

    const auto p = [&](int rr, int cc, double lo, double hi) {
      return t::ParamSpec{rr, cc, random_values(rng, static_cast<std::size_t>(rr) * cc, lo, hi)};
    };

    struct Case {
      const char* name;
      std::function<t::Tensor(t::Tape&, std::vector<t::Tensor>&)> build;
      std::vector<t::ParamSpec> params;
    };
    std::vector<Case> cases;
    const std::uint64_t wrng = derive_seed(seed, "weights");

    cases.push_back({"add",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::add(p[0], p[1]), wrng);
                     },
                     {p(r, c, -1, 1), p(r, c, -1, 1)}});
    cases.push_back({"add_row_broadcast",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::add(p[0], p[1]), wrng);
                     },
                     {p(r, c, -1, 1), p(1, c, -1, 1)}});
    cases.push_back({"sub_col_broadcast",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::sub(p[0], p[1]), wrng);
                     },
                     {p(r, c, -1, 1), p(r, 1, -1, 1)}});
    cases.push_back({"mul_scalar_broadcast",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::mul(p[0], p[1]), wrng);
                     },
                     {p(r, c, -1, 1), p(1, 1, -1, 1)}});
    cases.push_back({"div",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::div(p[0], p[1]), wrng);
                     },
                     {p(r, c, -1, 1), p(r, c, 0.5, 2.0)}});
    cases.push_back({"matmul",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::matmul(p[0], p[1]), wrng);
                     },
                     {p(r, 3, -1, 1), p(3, c, -1, 1)}});
    cases.push_back({"transpose",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::transpose(p[0]), wrng);
                     },
                     {p(r, c, -1, 1)}});
    cases.push_back({"concat_rows",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::concat({p[0], p[1]}, 0), wrng);
                     },
                     {p(r, c, -1, 1), p(2, c, -1, 1)}});
    cases.push_back({"concat_cols",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::concat({p[0], p[1]}, 1), wrng);
                     },
                     {p(r, c, -1, 1), p(r, 2, -1, 1)}});
    cases.push_back({"slice",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::slice(p[0], 0, 0, 1, p[0].cols()), wrng);
                     },
                     {p(r, c, -1, 1)}});
    cases.push_back({"reshape",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::reshape(p[0], p[0].cols(), p[0].rows()), wrng);
                     },
                     {p(r, c, -1, 1)}});
    cases.push_back({"sum", [](t::Tape&, std::vector<t::Tensor>& p) { return t::sum(p[0]); },
                     {p(r, c, -1, 1)}});
    cases.push_back({"mean", [](t::Tape&, std::vector<t::Tensor>& p) { return t::mean(p[0]); },
                     {p(r, c, -1, 1)}});
    cases.push_back({"tanh",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::tanh(p[0]), wrng);
                     },
                     {p(r, c, -2, 2)}});
    cases.push_back({"sigmoid",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::sigmoid(p[0]), wrng);
                     },
                     {p(r, c, -2, 2)}});
    cases.push_back({"exp",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::exp(p[0]), wrng);
                     },
                     {p(r, c, -1, 1)}});
    cases.push_back({"log",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::log(p[0]), wrng);
                     },
                     {p(r, c, 0.2, 3.0)}});
    cases.push_back({"square",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::square(p[0]), wrng);
                     },
                     {p(r, c, -1, 1)}});
    cases.push_back({"sqrt",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::sqrt(p[0]), wrng);
                     },
                     {p(r, c, 0.2, 3.0)}});
    cases.push_back({"softmax",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::softmax(p[0]), wrng);
                     },
                     {p(r, c, -2, 2)}});
    cases.push_back({"clamp",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::clamp(p[0], -0.5, 0.5), wrng);
                     },
                     {p(r, c, -2, 2)}});
    cases.push_back({"scale",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::scale(p[0], -1.7), wrng);
                     },
                     {p(r, c, -1, 1)}});
    cases.push_back({"add_const",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::add_const(p[0], 0.3), wrng);
                     },
                     {p(r, c, -1, 1)}});

    const int d = 2, hs = 3;
    cases.push_back({"rnn_step",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::rnn_step(p[0], p[1], p[2], p[3], p[4]), wrng);
                     },
                     {p(1, d, -1, 1), p(1, hs, -1, 1), p(d, hs, -1, 1), p(hs, hs, -1, 1),
                      p(1, hs, -1, 1)}});
    cases.push_back({"lstm_step",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::lstm_step(p[0], p[1], p[2], p[3], p[4], p[5]), wrng);
                     },
                     {p(1, d, -1, 1), p(1, hs, -1, 1), p(1, hs, -1, 1), p(d, 4 * hs, -1, 1),
                      p(hs, 4 * hs, -1, 1), p(1, 4 * hs, -1, 1)}});
    cases.push_back({"gru_step",
                     [&](t::Tape&, std::vector<t::Tensor>& p) {
                       return weighted(t::gru_step(p[0], p[1], p[2], p[3], p[4], p[5]), wrng);
                     },
                     {p(1, d, -1, 1), p(1, hs, -1, 1), p(d, 3 * hs, -1, 1), p(hs, 3 * hs, -1, 1),
                      p(1, 3 * hs, -1, 1), p(1, 3 * hs, -1, 1)}});

    // gmm_energy over a random 2-component mixture in 2-d
    {
      const int dim = 2, H = 2, n = 3;
      std::vector<double> sigma;
      for (int h = 0; h < H; ++h) {
        const double a = rng.uniform(-0.6, 0.6), bb = rng.uniform(-0.6, 0.6);
        const double cc = rng.uniform(-0.6, 0.6), dd = rng.uniform(-0.6, 0.6);
        // A A^T + I, flattened row-major
        sigma.push_back(a * a + bb * bb + 1.0);
        sigma.push_back(a * cc + bb * dd);
        sigma.push_back(a * cc + bb * dd);
        sigma.push_back(cc * cc + dd * dd + 1.0);
      }
      cases.push_back({"gmm_energy",
                       [&](t::Tape&, std::vector<t::Tensor>& p) {
                         return weighted(t::gmm_energy(p[0], p[1], p[2], p[3]), wrng);
                       },
                       {p(1, H, 0.2, 0.8), p(H, dim, -1, 1),
                        t::ParamSpec{H * dim, dim, sigma}, p(n, dim, -2, 2)}});
    }

    const std::size_t pick = rng.next_u64() % cases.size();
    auto& cse = cases[pick];
    const double err = t::grad_check(cse.build, cse.params, 1e-5);
    INFO("seed ", seed, " op ", std::string(cse.name), " err ", err);
    CHECK(err < 1e-5);
    ++seeds_run;
  }
  CHECK(seeds_run >= 100);
}

TEST_CASE("backward is deterministic: identical tapes give bitwise-identical gradients") {
  const auto run = [](std::vector<double>& out) {
    t::Tape tape;
    auto w = tape.param(3, 3, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8, 0.9});
    auto x = t::Tensor::leaf(1, 3, {1.0, 2.0, 3.0});
    auto h = t::tanh(t::matmul(x, w));
    auto loss = t::mean(t::square(h));
    auto grads = t::backward(loss, tape);
    out = grads.at(w.id()).values();
  };
  std::vector<double> g1, g2;
  run(g1);
  run(g2);
  REQUIRE(g1.size() == g2.size());
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("fused lstm step matches a composed reference forward") {
  Rng rng(42);
  const int d = 2, hs = 2;
  auto x = t::Tensor::leaf(1, d, random_values(rng, d));
  auto h = t::Tensor::leaf(1, hs, random_values(rng, hs));
  auto c = t::Tensor::leaf(1, hs, random_values(rng, hs));
  auto wx = t::Tensor::leaf(d, 4 * hs, random_values(rng, d * 4 * hs));
  auto wh = t::Tensor::leaf(hs, 4 * hs, random_values(rng, hs * 4 * hs));
  auto b = t::Tensor::leaf(1, 4 * hs, random_values(rng, 4 * hs));

  auto packed = t::lstm_step(x, h, c, wx, wh, b);

  auto pre = t::add(t::add(t::matmul(x, wx), t::matmul(h, wh)), b);
  auto gi = t::sigmoid(t::slice(pre, 0, 0, 1, hs));
  auto gf = t::sigmoid(t::slice(pre, 0, hs, 1, hs));
  auto gg = t::tanh(t::slice(pre, 0, 2 * hs, 1, hs));
  auto go = t::sigmoid(t::slice(pre, 0, 3 * hs, 1, hs));
  auto cn = t::add(t::mul(gf, c), t::mul(gi, gg));
  auto hn = t::mul(go, t::tanh(cn));

  for (int j = 0; j < hs; ++j) {
    CHECK(packed.at(0, j) == doctest::Approx(hn.at(0, j)).epsilon(1e-14));
    CHECK(packed.at(0, hs + j) == doctest::Approx(cn.at(0, j)).epsilon(1e-14));
  }
}

TEST_CASE("gmm_energy equals a hand-built single-gaussian log density") {
  // standard normal in 1-d: E(0) = 0.5*ln(2*pi)
  auto phi = t::Tensor::leaf(1, 1, {1.0});
  auto mu = t::Tensor::leaf(1, 1, {0.0});
  auto sigma = t::Tensor::leaf(1, 1, {1.0});
  auto y = t::Tensor::leaf(2, 1, {0.0, 1.0});
  auto e = t::gmm_energy(phi, mu, sigma, y);
  CHECK(e.at(0, 0) == doctest::Approx(0.9189385332046727).epsilon(1e-12));
  CHECK(e.at(1, 0) == doctest::Approx(1.4189385332046727).epsilon(1e-12));
}
