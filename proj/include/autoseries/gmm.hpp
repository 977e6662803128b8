#pragma once

#include <cstdint>
#include <vector>

#include "autoseries/errors.hpp"
#include "autoseries/tensor.hpp"

namespace autoseries::gmm {

// Mixture parameters as estimated from responsibilities. sigma rows are
// row-major d x d blocks, one per component, already regularized by eps on
// the diagonal.
struct GMMParams {
  int components = 0;
  std::vector<double> phi;
  std::vector<std::vector<double>> mu;
  std::vector<std::vector<double>> sigma;
  double eps = 1e-6;

  int dim() const { return mu.empty() ? 0 : static_cast<int>(mu.front().size()); }
};

// Responsibility-weighted moment estimation:
//   phi_h  = sum_i gamma_ih / N
//   mu_h   = sum_i gamma_ih y_i / sum_i gamma_ih
//   sigma_h = sum_i gamma_ih (y_i - mu_h)(y_i - mu_h)^T / sum_i gamma_ih + eps I
// A component with responsibility mass below 1e-12 falls back to the batch
// mean with identity covariance.
GMMParams m_step(const std::vector<std::vector<double>>& y,
                 const std::vector<std::vector<double>>& gamma, double eps);

// Sample energy -log sum_h phi_h N(y; mu_h, sigma_h), via Cholesky
// factorization and log-sum-exp.
double energy(const GMMParams& params, const std::vector<double>& y);

// Per-sample posterior responsibilities and the total log-likelihood.
struct EStep {
  std::vector<std::vector<double>> responsibilities;
  double loglik = 0.0;
};
EStep e_step(const GMMParams& params, const std::vector<std::vector<double>>& y);
EStep e_step_serial(const GMMParams& params, const std::vector<std::vector<double>>& y);

// Full EM from H distinct random starting points. Stops after `iters` rounds
// or when the log-likelihood gain drops below 1e-8; a step that fails to
// improve is rolled back so the returned parameters and the recorded trace
// are non-decreasing. Pass `loglik_trace` to observe per-iteration values.
GMMParams fit_em(const std::vector<std::vector<double>>& y, int components, int iters,
                 std::uint64_t seed, std::vector<double>* loglik_trace = nullptr);
GMMParams fit_em_serial(const std::vector<std::vector<double>>& y, int components, int iters,
                        std::uint64_t seed, std::vector<double>* loglik_trace = nullptr);

// Differentiable twin of m_step/energy for training graphs. y is N x d,
// gamma is N x H (rows on the simplex); phi comes back 1 x H, mu H x d and
// sigma as H stacked d x d blocks.
struct GraphParams {
  ad::Tensor phi;
  ad::Tensor mu;
  ad::Tensor sigma;
};
GraphParams m_step_graph(const ad::Tensor& y, const ad::Tensor& gamma, double eps);
ad::Tensor energy_graph(const GraphParams& params, const ad::Tensor& y);

}  // namespace autoseries::gmm
