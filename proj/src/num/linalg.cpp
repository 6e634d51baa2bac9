#include "seqlab/num/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace seqlab::num {

SymmetricEigen symmetric_eigen(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw ShapeError("symmetric_eigen: matrix is " + a.shape_str());
  }
  const std::size_t n = a.rows();
  Matrix d = a;
  Matrix v = Matrix::identity(n);

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += d(p, q) * d(p, q);
    if (off < 1e-30) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(d(p, q)) < 1e-300) continue;
        const double theta = (d(q, q) - d(p, p)) / (2.0 * d(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double dip = d(i, p), diq = d(i, q);
          d(i, p) = c * dip - s * diq;
          d(i, q) = s * dip + c * diq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double dpi = d(p, i), dqi = d(q, i);
          d(p, i) = c * dpi - s * dqi;
          d(q, i) = s * dpi + c * dqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return d(i, i) > d(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = d(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

std::vector<double> singular_values(const Matrix& a) {
  // Eigenvalues of the smaller Gram matrix.
  const bool tall = a.rows() >= a.cols();
  Matrix gram = tall ? matmul(transpose(a), a) : matmul(a, transpose(a));
  auto eig = symmetric_eigen(gram);
  std::vector<double> sv;
  sv.reserve(eig.values.size());
  for (double v : eig.values) sv.push_back(std::sqrt(std::max(0.0, v)));
  return sv;
}

LeastSquares solve_least_squares(const Matrix& a, const Matrix& b, double rank_tolerance) {
  if (a.rows() != b.rows()) {
    throw ShapeError("solve_least_squares: " + a.shape_str() + " vs " + b.shape_str());
  }
  const Matrix at = transpose(a);
  const Matrix gram = matmul(at, a);
  const Matrix rhs = matmul(at, b);
  auto eig = symmetric_eigen(gram);
  const double lead = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
  const double cutoff = lead * rank_tolerance;

  bool degenerate = false;
  // x = V diag(1/lambda) V^T rhs with small eigenvalues dropped.
  const std::size_t n = gram.rows();
  Matrix vt_rhs = matmul(transpose(eig.vectors), rhs);
  for (std::size_t i = 0; i < n; ++i) {
    if (eig.values[i] <= cutoff || eig.values[i] <= 0.0) {
      degenerate = true;
      for (std::size_t c = 0; c < vt_rhs.cols(); ++c) vt_rhs(i, c) = 0.0;
    } else {
      for (std::size_t c = 0; c < vt_rhs.cols(); ++c) vt_rhs(i, c) /= eig.values[i];
    }
  }
  return LeastSquares{matmul(eig.vectors, vt_rhs), degenerate};
}

Matrix inverse(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("inverse: matrix is " + a.shape_str());
  const std::size_t n = a.rows();
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    }
    if (std::abs(work(pivot, col)) < 1e-300) {
      throw NumericError("inverse: singular matrix");
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(work(pivot, c), work(col, c));
        std::swap(inv(pivot, c), inv(col, c));
      }
    }
    const double diag = work(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      work(col, c) /= diag;
      inv(col, c) /= diag;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = work(r, col);
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        work(r, c) -= factor * work(col, c);
        inv(r, c) -= factor * inv(col, c);
      }
    }
  }
  return inv;
}

}  // namespace seqlab::num
