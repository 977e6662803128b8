#include "autoseries/linalg.hpp"

#include <cmath>

namespace autoseries::linalg {

std::vector<double> cholesky(const std::vector<double>& a, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= l[j * n + k] * l[j * n + k];
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw CholeskyError("cholesky: matrix is not positive definite");
    }
    const double ljj = std::sqrt(diag);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = s / ljj;
    }
  }
  return l;
}

std::vector<double> solve_lower(const std::vector<double>& l, std::size_t n,
                                const std::vector<double>& b) {
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
    y[i] = s / l[i * n + i];
  }
  return y;
}

std::vector<double> solve_lower_transposed(const std::vector<double>& l, std::size_t n,
                                           const std::vector<double>& y) {
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * x[k];
    x[ii] = s / l[ii * n + ii];
  }
  return x;
}

std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                   const std::vector<double>& b) {
  return solve_lower_transposed(l, n, solve_lower(l, n, b));
}

double cholesky_logdet(const std::vector<double>& l, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::log(l[i * n + i]);
  return 2.0 * s;
}

std::vector<double> cholesky_inverse(const std::vector<double>& l, std::size_t n) {
  std::vector<double> inv(n * n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const std::vector<double> col = cholesky_solve(l, n, e);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
    e[j] = 0.0;
  }
  return inv;
}

}  // namespace autoseries::linalg
