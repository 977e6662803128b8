#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "autoseries/gmm.hpp"
#include "autoseries/rng.hpp"
#include "autoseries/tensor.hpp"

using namespace autoseries;

namespace {

// Naive mixture density without Cholesky: Gauss-Jordan inverse and a
// cofactor-free determinant via elimination, adequate for d <= 4.
double naive_det(std::vector<double> a, int d) {
  double det = 1.0;
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r) {
      if (std::abs(a[r * d + col]) > std::abs(a[piv * d + col])) piv = r;
    }
    if (piv != col) {
      for (int c = 0; c < d; ++c) std::swap(a[col * d + c], a[piv * d + c]);
      det = -det;
    }
    det *= a[col * d + col];
    for (int r = col + 1; r < d; ++r) {
      const double f = a[r * d + col] / a[col * d + col];
      for (int c = col; c < d; ++c) a[r * d + c] -= f * a[col * d + c];
    }
  }
  return det;
}

std::vector<double> naive_inverse(std::vector<double> a, int d) {
  std::vector<double> inv(d * d, 0.0);
  for (int k = 0; k < d; ++k) inv[k * d + k] = 1.0;
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r) {
      if (std::abs(a[r * d + col]) > std::abs(a[piv * d + col])) piv = r;
    }
    for (int c = 0; c < d; ++c) {
      std::swap(a[col * d + c], a[piv * d + c]);
      std::swap(inv[col * d + c], inv[piv * d + c]);
    }
    const double p = a[col * d + col];
    for (int c = 0; c < d; ++c) {
      a[col * d + c] /= p;
      inv[col * d + c] /= p;
    }
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = a[r * d + col];
      for (int c = 0; c < d; ++c) {
        a[r * d + c] -= f * a[col * d + c];
        inv[r * d + c] -= f * inv[col * d + c];
      }
    }
  }
  return inv;
}

double naive_mixture_density(const gmm::GMMParams& p, const std::vector<double>& y) {
  const int d = p.dim();
  double density = 0.0;
  for (int h = 0; h < p.components; ++h) {
    const std::vector<double> inv = naive_inverse(p.sigma[h], d);
    const double det = naive_det(p.sigma[h], d);
    double q = 0.0;
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) {
        q += (y[k] - p.mu[h][k]) * inv[k * d + l] * (y[l] - p.mu[h][l]);
      }
    }
    density += p.phi[h] * std::exp(-0.5 * q) /
               std::sqrt(std::pow(6.283185307179586, d) * det);
  }
  return density;
}

gmm::GMMParams random_gmm(Rng& rng, int d, int hc) {
  gmm::GMMParams p;
  p.components = hc;
  p.eps = 1e-6;
  std::vector<double> raw(hc);
  double s = 0.0;
  for (auto& v : raw) {
    v = rng.uniform(0.2, 1.0);
    s += v;
  }
  for (int h = 0; h < hc; ++h) {
    p.phi.push_back(raw[h] / s);
    std::vector<double> mu(d);
    for (auto& v : mu) v = rng.uniform(-2, 2);
    p.mu.push_back(mu);
    // A A^T + 0.3 I keeps conditioning mild
    std::vector<double> a(d * d);
    for (auto& v : a) v = rng.uniform(-1, 1);
    std::vector<double> sig(d * d, 0.0);
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) {
        for (int m = 0; m < d; ++m) sig[k * d + l] += a[k * d + m] * a[l * d + m];
      }
      sig[k * d + k] += 0.3;
    }
    p.sigma.push_back(sig);
  }
  return p;
}

}  // namespace

TEST_CASE("m_step weighted-moments examples") {
  SUBCASE("H=1, Y={0,2}, gamma=1") {
    auto p = gmm::m_step({{0.0}, {2.0}}, {{1.0}, {1.0}}, 1e-6);
    CHECK(p.phi[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.mu[0][0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.sigma[0][0] == doctest::Approx(1.0 + 1e-6).epsilon(1e-12));
  }
  SUBCASE("uniform responsibilities give uniform phi") {
    auto p = gmm::m_step({{0.0}, {1.0}, {2.0}}, {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, 1e-6);
    CHECK(p.phi[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p.phi[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("identical samples leave only the regularizer on the diagonal") {
    auto p = gmm::m_step({{3.0, -1.0}, {3.0, -1.0}}, {{1.0}, {1.0}}, 1e-6);
    CHECK(p.sigma[0][0] == 1e-6);
    CHECK(p.sigma[0][3] == 1e-6);
    CHECK(p.sigma[0][1] == 0.0);
  }
  SUBCASE("non-simplex responsibilities rejected") {
    CHECK_THROWS_AS(gmm::m_step({{0.0}}, {{0.7, 0.7}}, 1e-6), DomainError);
    CHECK_THROWS_AS(gmm::m_step({{0.0}}, {{-0.1, 1.1}}, 1e-6), DomainError);
  }
}

TEST_CASE("m_step matches a brute-force oracle on random instances") {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    const int d = static_cast<int>(rng.uniform_int(1, 4));
    const int hc = static_cast<int>(rng.uniform_int(1, 4));
    std::vector<std::vector<double>> y(n, std::vector<double>(d));
    for (auto& row : y) {
      for (auto& v : row) v = rng.uniform(-3, 3);
    }
    std::vector<std::vector<double>> gamma(n, std::vector<double>(hc));
    for (auto& row : gamma) {
      double s = 0.0;
      for (auto& v : row) {
        v = rng.uniform(0.01, 1.0);
        s += v;
      }
      for (auto& v : row) v /= s;
    }
    const auto p = gmm::m_step(y, gamma, 1e-6);

    for (int h = 0; h < hc; ++h) {
      double mass = 0.0;
      for (int i = 0; i < n; ++i) mass += gamma[i][h];
      CHECK(std::abs(p.phi[h] - mass / n) < 1e-9);
      for (int k = 0; k < d; ++k) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += gamma[i][h] * y[i][k];
        mu /= mass;
        CHECK(std::abs(p.mu[h][k] - mu) < 1e-9);
        for (int l = 0; l < d; ++l) {
          double cov = 0.0;
          for (int i = 0; i < n; ++i) {
            double muk = 0.0, mul = 0.0;
            for (int j = 0; j < n; ++j) {
              muk += gamma[j][h] * y[j][k];
              mul += gamma[j][h] * y[j][l];
            }
            muk /= mass;
            mul /= mass;
            cov += gamma[i][h] * (y[i][k] - muk) * (y[i][l] - mul);
          }
          cov = cov / mass + (k == l ? 1e-6 : 0.0);
          CHECK(std::abs(p.sigma[h][k * d + l] - cov) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("m_step output is a valid mixture for arbitrary simplex responsibilities") {
  Rng rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(2, 10));
    const int d = static_cast<int>(rng.uniform_int(1, 3));
    const int hc = static_cast<int>(rng.uniform_int(1, 4));
    std::vector<std::vector<double>> y(n, std::vector<double>(d));
    for (auto& row : y) {
      for (auto& v : row) v = rng.uniform(-2, 2);
    }
    std::vector<std::vector<double>> gamma(n, std::vector<double>(hc, 0.0));
    for (int i = 0; i < n; ++i) {
      // occasionally hard assignments, to exercise empty components
      if (rng.bernoulli(0.5)) {
        gamma[i][rng.uniform_int(0, hc - 1)] = 1.0;
      } else {
        double s = 0.0;
        for (auto& v : gamma[i]) {
          v = rng.uniform(0.0, 1.0);
          s += v;
        }
        for (auto& v : gamma[i]) v /= s;
      }
    }
    const auto p = gmm::m_step(y, gamma, 1e-6);
    double phi_sum = 0.0;
    for (const double f : p.phi) {
      CHECK(f >= 0.0);
      phi_sum += f;
    }
    CHECK(phi_sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int h = 0; h < hc; ++h) {
      for (int k = 0; k < d; ++k) {
        for (int l = 0; l < d; ++l) {
          CHECK(p.sigma[h][k * d + l] == doctest::Approx(p.sigma[h][l * d + k]).epsilon(1e-12));
        }
      }
      // positive definite: energy evaluation must not throw
      CHECK_NOTHROW(gmm::energy(p, y[0]));
    }
  }
}

TEST_CASE("energy matches the closed form for a standard normal") {
  gmm::GMMParams p;
  p.components = 1;
  p.phi = {1.0};
  p.mu = {{0.0}};
  p.sigma = {{1.0}};
  CHECK(gmm::energy(p, {0.0}) == doctest::Approx(0.9189385332046727).epsilon(1e-12));
  CHECK(gmm::energy(p, {1.0}) == doctest::Approx(1.4189385332046727).epsilon(1e-12));
}

TEST_CASE("exp(-energy) equals the naive mixture density") {
  Rng rng(31);
  for (int rep = 0; rep < 300; ++rep) {
    const int d = static_cast<int>(rng.uniform_int(1, 4));
    const int hc = static_cast<int>(rng.uniform_int(1, 4));
    const auto p = random_gmm(rng, d, hc);
    std::vector<double> y(d);
    for (auto& v : y) v = rng.uniform(-3, 3);
    const double e = gmm::energy(p, y);
    const double density = naive_mixture_density(p, y);
    CHECK(std::abs(std::exp(-e) - density) <= 1e-9 * std::max(1.0, density));
  }
}

TEST_CASE("energy rejects dimension mismatch") {
  gmm::GMMParams p;
  p.components = 1;
  p.phi = {1.0};
  p.mu = {{0.0, 0.0}};
  p.sigma = {{1.0, 0.0, 0.0, 1.0}};
  CHECK_THROWS_AS(gmm::energy(p, {0.0}), ShapeError);
}

TEST_CASE("fit_em recovers two well-separated clusters") {
  Rng rng(47);
  std::vector<std::vector<double>> y;
  std::vector<double> c0 = {-5.0, -5.0}, c1 = {5.0, 5.0};
  std::vector<double> mean0(2, 0.0), mean1(2, 0.0);
  for (int i = 0; i < 60; ++i) {
    std::vector<double> a = {c0[0] + 0.1 * rng.normal(), c0[1] + 0.1 * rng.normal()};
    std::vector<double> b = {c1[0] + 0.1 * rng.normal(), c1[1] + 0.1 * rng.normal()};
    for (int k = 0; k < 2; ++k) {
      mean0[k] += a[k] / 60.0;
      mean1[k] += b[k] / 60.0;
    }
    y.push_back(a);
    y.push_back(b);
  }
  const auto p = gmm::fit_em(y, 2, 100, 5);
  // match components to centroids by proximity
  const bool flip = std::abs(p.mu[0][0] - c1[0]) < std::abs(p.mu[0][0] - c0[0]);
  const auto& m0 = flip ? p.mu[1] : p.mu[0];
  const auto& m1 = flip ? p.mu[0] : p.mu[1];
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(m0[k] - mean0[k]) < 1e-3);
    CHECK(std::abs(m1[k] - mean1[k]) < 1e-3);
  }
}

TEST_CASE("fit_em with H=1 reproduces one m_step with unit responsibilities") {
  Rng rng(53);
  std::vector<std::vector<double>> y(20, std::vector<double>(2));
  for (auto& row : y) {
    for (auto& v : row) v = rng.uniform(-1, 1);
  }
  const auto p = gmm::fit_em(y, 1, 50, 3);
  const auto direct = gmm::m_step(y, std::vector<std::vector<double>>(20, {1.0}), 1e-6);
  for (int k = 0; k < 2; ++k) CHECK(p.mu[0][k] == doctest::Approx(direct.mu[0][k]).epsilon(1e-12));
  for (int k = 0; k < 4; ++k) {
    CHECK(p.sigma[0][k] == doctest::Approx(direct.sigma[0][k]).epsilon(1e-12));
  }
}

TEST_CASE("fit_em log-likelihood is non-decreasing") {
  Rng rng(61);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(6, 30));
    const int d = static_cast<int>(rng.uniform_int(1, 3));
    const int hc = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<std::vector<double>> y(n, std::vector<double>(d));
    for (auto& row : y) {
      for (auto& v : row) v = rng.uniform(-4, 4);
    }
    std::vector<double> trace;
    gmm::fit_em(y, hc, 40, derive_seed(61, "em", rep), &trace);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i] >= trace[i - 1] - 1e-10);
    }
  }
}

TEST_CASE("fit_em rejects N < H") {
  CHECK_THROWS_AS(gmm::fit_em({{0.0}, {1.0}}, 3, 10, 1), Error);
}

TEST_CASE("parallel and serial E-step / fit_em agree exactly") {
  Rng rng(71);
  std::vector<std::vector<double>> y(64, std::vector<double>(3));
  for (auto& row : y) {
    for (auto& v : row) v = rng.uniform(-2, 2);
  }
  const auto p = gmm::fit_em(y, 3, 30, 9);
  const auto q = gmm::fit_em_serial(y, 3, 30, 9);
  CHECK(p.phi == q.phi);
  CHECK(p.mu == q.mu);
  CHECK(p.sigma == q.sigma);
  const auto ep = gmm::e_step(p, y);
  const auto eq = gmm::e_step_serial(p, y);
  CHECK(ep.loglik == eq.loglik);
  CHECK(ep.responsibilities == eq.responsibilities);
}

TEST_CASE("energy differentiates through the m_step graph") {
  // loss = mean energy of a batch under its own batch-level mixture
  const int n = 5, d = 2, hc = 2;
  Rng rng(83);
  std::vector<double> yv(n * d), gv;
  for (auto& v : yv) v = rng.uniform(-1.5, 1.5);
  for (int i = 0; i < n; ++i) {
    const double a = rng.uniform(0.1, 0.9);
    gv.push_back(a);
    gv.push_back(1.0 - a);
  }
  const auto build = [&](ad::Tape&, std::vector<ad::Tensor>& p) {
    auto gamma = ad::softmax(p[1]);  // keep rows on the simplex while perturbed
    auto params = gmm::m_step_graph(p[0], gamma, 1e-6);
    return ad::mean(gmm::energy_graph(params, p[0]));
  };
  const double err =
      ad::grad_check(build, {{n, d, yv}, {n, hc, gv}}, 1e-5);
  CHECK(err < 1e-3);
}
