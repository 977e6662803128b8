#pragma once

#include <cstddef>
#include <vector>

#include "autoseries/errors.hpp"

namespace autoseries::linalg {

struct CholeskyError : autoseries::SingularityError {
  using autoseries::SingularityError::SingularityError;
};

// Lower Cholesky factor of a symmetric positive definite n x n matrix
// (row-major). Throws CholeskyError when a pivot is not strictly positive.
std::vector<double> cholesky(const std::vector<double>& a, std::size_t n);

// Solve L y = b with L lower triangular.
std::vector<double> solve_lower(const std::vector<double>& l, std::size_t n,
                                const std::vector<double>& b);

// Solve L^T x = y with L lower triangular.
std::vector<double> solve_lower_transposed(const std::vector<double>& l, std::size_t n,
                                           const std::vector<double>& y);

// Solve A x = b given the Cholesky factor L of A.
std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                   const std::vector<double>& b);

// log det(A) given the Cholesky factor L of A.
double cholesky_logdet(const std::vector<double>& l, std::size_t n);

// A^{-1} given the Cholesky factor L of A.
std::vector<double> cholesky_inverse(const std::vector<double>& l, std::size_t n);

}  // namespace autoseries::linalg
