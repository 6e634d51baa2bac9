#ifndef SEQLAB_NUM_LINALG_HPP
#define SEQLAB_NUM_LINALG_HPP

#include <vector>

#include "seqlab/num/matrix.hpp"

namespace seqlab::num {

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues (descending) and the matching orthonormal columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;  // column i pairs with values[i]
};

SymmetricEigen symmetric_eigen(const Matrix& a);

// Singular values of a general matrix (descending), via the Gram matrix.
std::vector<double> singular_values(const Matrix& a);

// Least squares: minimizes ||A x - b||_2 columnwise via the normal equations,
// falling back to an eigenvalue-truncated pseudo-inverse when the Gram matrix
// is rank deficient. `degenerate` reports that fallback.
struct LeastSquares {
  Matrix solution;  // A.cols() x b.cols()
  bool degenerate = false;
};

LeastSquares solve_least_squares(const Matrix& a, const Matrix& b,
                                 double rank_tolerance = 1e-10);

// Gaussian-elimination inverse; throws NumericError when singular.
Matrix inverse(const Matrix& a);

}  // namespace seqlab::num

#endif  // SEQLAB_NUM_LINALG_HPP
