#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tfcast {

/// Dense row-major matrix of doubles. Vectors are column matrices (n x 1);
/// a mini-batch is stored with one sample per column.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Nested-list literal, e.g. Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v);
  bool all_finite() const noexcept;

  /// Rows [first, first + count) as a new matrix.
  Matrix row_block(std::size_t first, std::size_t count) const;
  void set_row_block(std::size_t first, const Matrix& block);

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// out += a · bᵀ; used to accumulate weight gradients.
void matmul_nt_accumulate(const Matrix& a, const Matrix& b, Matrix& out);

Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix concat_rows(const Matrix& top, const Matrix& bottom);

/// a + column vector broadcast across every column of a.
Matrix add_column(const Matrix& a, const Matrix& column);
/// Column vector holding the sum of each row of a.
Matrix row_sums(const Matrix& a);

double sigmoid(double x) noexcept;
Matrix sigmoid(const Matrix& x);
Matrix tanh(const Matrix& x);
Matrix relu(const Matrix& x);

// Derivatives evaluated from the activation *output*: σ' = y(1 - y),
// tanh' = 1 - y².
Matrix sigmoid_derivative_from_output(const Matrix& y);
Matrix tanh_derivative_from_output(const Matrix& y);
// Derivatives evaluated at the pre-activation input.
Matrix sigmoid_derivative(const Matrix& x);
Matrix tanh_derivative(const Matrix& x);

/// Global L2 norm over every entry of every matrix.
double l2_norm(std::span<const Matrix* const> matrices);
double l2_norm(std::initializer_list<const Matrix*> matrices);
double frobenius_norm(const Matrix& m);

/// Largest singular value, by power iteration on aᵀa.
double spectral_norm(const Matrix& a, std::size_t iterations = 500);

}  // namespace tfcast
