#include "seqlab/num/matrix.hpp"

#include <cmath>
#include <utility>

namespace seqlab::num {

namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str());
  }
}

Matrix Matrix::constant(std::size_t rows, std::size_t cols, double value) {
  Matrix m(rows, cols);
  m.fill(value);
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(1, n, std::move(values));
}

Matrix Matrix::column_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(n, 1, std::move(values));
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Matrix::fill(double value) {
  for (double& v : data_) v = value;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + a.shape_str() + " * " +
                     b.shape_str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix out(m, n);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape("add", a, b);
  Matrix out = a;
  double* po = out.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape("sub", a, b);
  Matrix out = a;
  double* po = out.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape("hadamard", a, b);
  Matrix out = a;
  double* po = out.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
  return out;
}

Matrix scale(const Matrix& a, double c) {
  Matrix out = a;
  for (double& v : out.values()) v *= c;
  return out;
}

Matrix add_row_vector(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row_vector: bias " + row.shape_str() + " does not broadcast over " +
                     a.shape_str());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += row(0, j);
  return out;
}

Matrix row_scale(const Matrix& a, const Matrix& s) {
  if (s.cols() != 1 || s.rows() != a.rows()) {
    throw ShapeError("row_scale: scales " + s.shape_str() + " do not match rows of " +
                     a.shape_str());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double c = s(i, 0);
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) *= c;
  }
  return out;
}

Matrix row_sum(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j);
    out(i, 0) = acc;
  }
  return out;
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix sigmoid(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v = sigmoid_scalar(v);
  return out;
}

Matrix exp(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v = std::exp(v);
  return out;
}

Matrix log(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) {
    if (v <= 0.0) throw NumericError("log: non-positive input " + std::to_string(v));
    v = std::log(v);
  }
  return out;
}

Matrix relu(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

double reduce_sum(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return acc;
}

double reduce_mean(const Matrix& a) {
  if (a.size() == 0) throw NumericError("reduce_mean: empty matrix");
  return reduce_sum(a) / static_cast<double>(a.size());
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
  require_same_shape("mean_squared_error", a, b);
  if (a.size() == 0) throw NumericError("mean_squared_error: empty matrix");
  double acc = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(pa[i] - pb[i]));
  return m;
}

}  // namespace seqlab::num
