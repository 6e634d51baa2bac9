#ifndef SEQLAB_NUM_MATRIX_HPP
#define SEQLAB_NUM_MATRIX_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqlab::num {

// Thrown on dimension mismatches; the message names the operation and the
// offending shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major matrix of 64-bit reals. The only value type the kernel
// traffics in; vectors are 1xN or Nx1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix constant(std::size_t rows, std::size_t cols, double value);
  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::vector<double> values);
  static Matrix column_vector(std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

  bool all_finite() const;
  void fill(double value);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Kernel ops. Each returns a fresh matrix and throws ShapeError on
// incompatible operands.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

// Adds a 1xC row vector to every row of a. The only broadcast the kernel
// supports.
Matrix add_row_vector(const Matrix& a, const Matrix& row);

// Scales row r of a by s(r, 0); s must be Rx1.
Matrix row_scale(const Matrix& a, const Matrix& s);

// Rx1 vector of per-row sums.
Matrix row_sum(const Matrix& a);

Matrix sigmoid(const Matrix& a);
Matrix exp(const Matrix& a);
Matrix log(const Matrix& a);
Matrix relu(const Matrix& a);

double reduce_sum(const Matrix& a);
double reduce_mean(const Matrix& a);

// Mean over all entries of (a-b)^2.
double mean_squared_error(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

double sigmoid_scalar(double x);

}  // namespace seqlab::num

#endif  // SEQLAB_NUM_MATRIX_HPP
