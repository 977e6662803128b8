#include "autoseries/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autoseries/linalg.hpp"
#include "autoseries/par.hpp"
#include "autoseries/rng.hpp"

namespace autoseries::gmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check_rows(const std::vector<std::vector<double>>& rows, const char* what) {
  if (rows.empty()) throw DomainError(std::string(what) + ": needs at least one row");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) throw ShapeError(std::string(what) + ": ragged rows");
  }
}

// log density of component h at y, using a prefactored Cholesky
double log_component_density(const std::vector<double>& l, double logdet,
                             const std::vector<double>& mu, const std::vector<double>& y) {
  const std::size_t d = mu.size();
  std::vector<double> delta(d);
  for (std::size_t k = 0; k < d; ++k) delta[k] = y[k] - mu[k];
  const std::vector<double> z = linalg::solve_lower(l, d, delta);
  double q = 0.0;
  for (const double v : z) q += v * v;
  return -0.5 * (static_cast<double>(d) * kLog2Pi + logdet + q);
}

struct Factored {
  std::vector<std::vector<double>> chol;
  std::vector<double> logdet;
};

Factored factor(const GMMParams& params) {
  Factored f;
  const std::size_t d = static_cast<std::size_t>(params.dim());
  f.chol.reserve(params.components);
  f.logdet.reserve(params.components);
  for (int h = 0; h < params.components; ++h) {
    std::vector<double> l;
    try {
      l = linalg::cholesky(params.sigma[h], d);
    } catch (const linalg::CholeskyError&) {
      throw SingularityError("gmm: covariance of component " + std::to_string(h) +
                             " is singular despite regularization");
    }
    f.logdet.push_back(linalg::cholesky_logdet(l, d));
    f.chol.push_back(std::move(l));
  }
  return f;
}

EStep e_step_impl(const GMMParams& params, const std::vector<std::vector<double>>& y,
                  bool parallel) {
  check_rows(y, "e_step");
  const std::size_t n = y.size();
  const int hc = params.components;
  const Factored f = factor(params);
  EStep out;
  out.responsibilities.assign(n, std::vector<double>(hc));
  std::vector<double> per_sample(n);
  const auto body = [&](std::size_t i) {
    std::vector<double> logp(hc);
    for (int h = 0; h < hc; ++h) {
      logp[h] = std::log(std::max(params.phi[h], 1e-300)) +
                log_component_density(f.chol[h], f.logdet[h], params.mu[h], y[i]);
    }
    double mx = logp[0];
    for (int h = 1; h < hc; ++h) mx = std::max(mx, logp[h]);
    double z = 0.0;
    for (int h = 0; h < hc; ++h) z += std::exp(logp[h] - mx);
    per_sample[i] = mx + std::log(z);
    for (int h = 0; h < hc; ++h) {
      out.responsibilities[i][h] = std::exp(logp[h] - per_sample[i]);
    }
  };
  if (parallel) {
    par::parallel_for(n, body);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
  // serial reduction in index order keeps the sum identical for any thread count
  for (std::size_t i = 0; i < n; ++i) out.loglik += per_sample[i];
  return out;
}

GMMParams fit_em_impl(const std::vector<std::vector<double>>& y, int components, int iters,
                      std::uint64_t seed, std::vector<double>* trace, bool parallel) {
  check_rows(y, "fit_em");
  const std::size_t n = y.size();
  if (components < 1) throw DomainError("fit_em: components must be >= 1");
  if (n < static_cast<std::size_t>(components)) {
    throw Error("fit_em: fewer samples (" + std::to_string(n) + ") than components (" +
                std::to_string(components) + ")");
  }
  const std::size_t d = y.front().size();

  // Means from H distinct random points, chosen distance-weighted so that
  // separated modes get separated starts; covariances start at the per-dim
  // data variance so the first E-step is informative at any data scale.
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(n) - 1)));
  std::vector<double> d2(n);
  while (chosen.size() < static_cast<std::size_t>(components)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const std::size_t c : chosen) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double dv = y[i][k] - y[c][k];
          s += dv * dv;
        }
        best = std::min(best, s);
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    if (pick >= n || d2[pick] == 0.0) {
      // duplicates everywhere; fall back to the first unused index
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
  }
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += y[i][k];
  }
  for (std::size_t k = 0; k < d; ++k) mean[k] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double dv = y[i][k] - mean[k];
      var[k] += dv * dv;
    }
  }
  GMMParams params;
  params.components = components;
  params.eps = 1e-6;
  params.phi.assign(components, 1.0 / components);
  std::vector<double> sigma0(d * d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    sigma0[k * d + k] = std::max(var[k] / static_cast<double>(n), 1e-6);
  }
  for (int h = 0; h < components; ++h) {
    params.mu.push_back(y[chosen[h]]);
    params.sigma.push_back(sigma0);
  }

  double prev_ll = -std::numeric_limits<double>::infinity();
  GMMParams prev_params = params;
  for (int it = 0; it < iters; ++it) {
    const EStep es = e_step_impl(params, y, parallel);
    if (es.loglik < prev_ll) {
      // tiny regressions can appear because the M-step re-adds eps I; keep
      // the previous parameters so the trace stays non-decreasing
      params = prev_params;
      break;
    }
    if (trace) trace->push_back(es.loglik);
    if (es.loglik - prev_ll < 1e-8) break;
    prev_ll = es.loglik;
    prev_params = params;
    params = m_step(y, es.responsibilities, params.eps);
  }
  return params;
}

}  // namespace

GMMParams m_step(const std::vector<std::vector<double>>& y,
                 const std::vector<std::vector<double>>& gamma, double eps) {
  check_rows(y, "m_step");
  check_rows(gamma, "m_step responsibilities");
  if (y.size() != gamma.size()) throw ShapeError("m_step: y and gamma row counts differ");
  const std::size_t n = y.size();
  const std::size_t d = y.front().size();
  const std::size_t hc = gamma.front().size();
  for (const auto& row : gamma) {
    double s = 0.0;
    for (const double g : row) {
      if (g < -1e-12) throw DomainError("m_step: responsibilities must be non-negative");
      s += g;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw DomainError("m_step: responsibility row does not lie on the simplex");
    }
  }

  GMMParams out;
  out.components = static_cast<int>(hc);
  out.eps = eps;
  out.phi.assign(hc, 0.0);
  out.mu.assign(hc, std::vector<double>(d, 0.0));
  out.sigma.assign(hc, std::vector<double>(d * d, 0.0));

  std::vector<double> mass(hc, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < hc; ++h) mass[h] += gamma[i][h];
  }
  std::vector<double> batch_mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) batch_mean[k] += y[i][k];
  }
  for (std::size_t k = 0; k < d; ++k) batch_mean[k] /= static_cast<double>(n);

  for (std::size_t h = 0; h < hc; ++h) {
    out.phi[h] = mass[h] / static_cast<double>(n);
    if (mass[h] < 1e-12) {
      out.mu[h] = batch_mean;
      for (std::size_t k = 0; k < d; ++k) out.sigma[h][k * d + k] = 1.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) out.mu[h][k] += gamma[i][h] * y[i][k];
    }
    for (std::size_t k = 0; k < d; ++k) out.mu[h][k] /= mass[h];
    std::vector<double> delta(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) delta[k] = y[i][k] - out.mu[h][k];
      for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t l = 0; l <= k; ++l) {
          out.sigma[h][k * d + l] += gamma[i][h] * delta[k] * delta[l];
        }
      }
    }
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t l = 0; l <= k; ++l) {
        out.sigma[h][k * d + l] /= mass[h];
        out.sigma[h][l * d + k] = out.sigma[h][k * d + l];
      }
      out.sigma[h][k * d + k] += eps;
    }
  }
  return out;
}

double energy(const GMMParams& params, const std::vector<double>& y) {
  if (static_cast<int>(y.size()) != params.dim()) {
    throw ShapeError("energy: sample dimension " + std::to_string(y.size()) +
                     " does not match mixture dimension " + std::to_string(params.dim()));
  }
  const Factored f = factor(params);
  std::vector<double> logp(params.components);
  for (int h = 0; h < params.components; ++h) {
    logp[h] = std::log(std::max(params.phi[h], 1e-300)) +
              log_component_density(f.chol[h], f.logdet[h], params.mu[h], y);
  }
  double mx = logp[0];
  for (int h = 1; h < params.components; ++h) mx = std::max(mx, logp[h]);
  double z = 0.0;
  for (int h = 0; h < params.components; ++h) z += std::exp(logp[h] - mx);
  return -(mx + std::log(z));
}

EStep e_step(const GMMParams& params, const std::vector<std::vector<double>>& y) {
  return e_step_impl(params, y, true);
}

EStep e_step_serial(const GMMParams& params, const std::vector<std::vector<double>>& y) {
  return e_step_impl(params, y, false);
}

GMMParams fit_em(const std::vector<std::vector<double>>& y, int components, int iters,
                 std::uint64_t seed, std::vector<double>* loglik_trace) {
  return fit_em_impl(y, components, iters, seed, loglik_trace, true);
}

GMMParams fit_em_serial(const std::vector<std::vector<double>>& y, int components, int iters,
                        std::uint64_t seed, std::vector<double>* loglik_trace) {
  return fit_em_impl(y, components, iters, seed, loglik_trace, false);
}

GraphParams m_step_graph(const ad::Tensor& y, const ad::Tensor& gamma, double eps) {
  const int n = y.rows();
  const int d = y.cols();
  const int hc = gamma.cols();
  if (gamma.rows() != n) throw ShapeError("m_step_graph: y and gamma row counts differ");

  // column masses: 1xH = ones(1xN) . gamma, guarded away from zero
  auto ones = ad::Tensor::fill(1, n, 1.0);
  auto mass = ad::add_const(ad::matmul(ones, gamma), 1e-12);
  GraphParams out;
  out.phi = ad::scale(mass, 1.0 / static_cast<double>(n));
  // means: (gamma^T . y) / mass^T, column-broadcast over d
  out.mu = ad::div(ad::matmul(ad::transpose(gamma), y), ad::transpose(mass));

  std::vector<double> eye(static_cast<std::size_t>(d) * d, 0.0);
  for (int k = 0; k < d; ++k) eye[static_cast<std::size_t>(k) * d + k] = eps;
  const auto eps_eye = ad::Tensor::leaf(d, d, eye);

  std::vector<ad::Tensor> blocks;
  blocks.reserve(hc);
  for (int h = 0; h < hc; ++h) {
    auto mu_h = ad::slice(out.mu, h, 0, 1, d);
    auto dev = ad::sub(y, mu_h);                       // N x d, row broadcast
    auto g_h = ad::slice(gamma, 0, h, n, 1);           // N x 1
    auto weighted = ad::mul(dev, g_h);                 // column broadcast
    auto scatter = ad::matmul(ad::transpose(weighted), dev);  // d x d
    auto mass_h = ad::slice(mass, 0, h, 1, 1);
    blocks.push_back(ad::add(ad::div(scatter, mass_h), eps_eye));
  }
  out.sigma = blocks.size() == 1 ? blocks[0] : ad::concat(blocks, 0);
  return out;
}

ad::Tensor energy_graph(const GraphParams& params, const ad::Tensor& y) {
  return ad::gmm_energy(params.phi, params.mu, params.sigma, y);
}

}  // namespace autoseries::gmm
