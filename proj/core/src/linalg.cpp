#include "tfcast/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tfcast/errors.hpp"

namespace tfcast {
namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  std::ostringstream msg;
  msg << op << ": incompatible shapes " << a.shape_string() << " and " << b.shape_string();
  throw DimensionError(msg.str());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error(op, a, b);
}

template <typename F>
Matrix map(const Matrix& x, F f) {
  Matrix out(x.rows(), x.cols());
  auto in = x.values();
  auto dst = out.values();
  std::transform(in.begin(), in.end(), dst.begin(), f);
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: " + std::to_string(data_.size()) +
                         " values do not fill shape (" + std::to_string(rows_) + "x" +
                         std::to_string(cols_) + ")");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw DimensionError("Matrix: ragged initializer list");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
  if (first + count > rows_) {
    throw DimensionError("row_block: rows [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") out of range for " + shape_string());
  }
  Matrix out(count, cols_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_), count * cols_,
              out.data_.begin());
  return out;
}

void Matrix::set_row_block(std::size_t first, const Matrix& block) {
  if (block.cols_ != cols_ || first + block.rows_ > rows_) {
    throw DimensionError("set_row_block: block " + block.shape_string() + " at row " +
                         std::to_string(first) + " does not fit " + shape_string());
  }
  std::copy(block.data_.begin(), block.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(first * cols_));
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape("add", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape("subtract", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* src = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) dst[j] += aip * src[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  Matrix out(n, m);
  for (std::size_t p = 0; p < k; ++p) {
    const double* src = b.row_ptr(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double api = a(p, i);
      if (api == 0.0) continue;
      double* dst = out.row_ptr(i);
      for (std::size_t j = 0; j < m; ++j) dst[j] += api * src[j];
    }
  }
  return out;
}

void matmul_nt_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  if (out.rows() != a.rows() || out.cols() != b.rows()) shape_error("matmul_nt (output)", out, a);
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (k == 0) return;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row_ptr(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      out(i, j) += acc;
    }
  }
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.rows());
  matmul_nt_accumulate(a, b, out);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape("hadamard", a, b);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  if (top.cols() != bottom.cols()) shape_error("concat_rows", top, bottom);
  std::vector<double> data;
  data.reserve(top.size() + bottom.size());
  data.insert(data.end(), top.values().begin(), top.values().end());
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

Matrix add_column(const Matrix& a, const Matrix& column) {
  if (column.cols() != 1 || column.rows() != a.rows()) shape_error("add_column", a, column);
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double v = column[i];
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += v;
  }
  return out;
}

Matrix row_sums(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j);
    out[i] = acc;
  }
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) { return map(x, [](double v) { return sigmoid(v); }); }
Matrix tanh(const Matrix& x) { return map(x, [](double v) { return std::tanh(v); }); }
Matrix relu(const Matrix& x) { return map(x, [](double v) { return v > 0.0 ? v : 0.0; }); }

Matrix sigmoid_derivative_from_output(const Matrix& y) {
  return map(y, [](double s) { return s * (1.0 - s); });
}

Matrix tanh_derivative_from_output(const Matrix& y) {
  return map(y, [](double t) { return 1.0 - t * t; });
}

Matrix sigmoid_derivative(const Matrix& x) { return sigmoid_derivative_from_output(sigmoid(x)); }
Matrix tanh_derivative(const Matrix& x) { return tanh_derivative_from_output(tanh(x)); }

double l2_norm(std::span<const Matrix* const> matrices) {
  if (matrices.empty()) throw UsageError("l2_norm: empty list of matrices");
  double sum = 0.0;
  for (const Matrix* m : matrices)
    for (double v : m->values()) sum += v * v;
  return std::sqrt(sum);
}

double l2_norm(std::initializer_list<const Matrix*> matrices) {
  return l2_norm(std::span<const Matrix* const>(matrices.begin(), matrices.size()));
}

double frobenius_norm(const Matrix& m) {
  const Matrix* p = &m;
  return l2_norm(std::span<const Matrix* const>(&p, 1));
}

double spectral_norm(const Matrix& a, std::size_t iterations) {
  if (a.empty()) return 0.0;
  Matrix v(a.cols(), 1);
  // Deterministic, non-degenerate start vector.
  for (std::size_t i = 0; i < v.rows(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  double sigma = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    Matrix w = matmul_tn(a, matmul(a, v));
    const double n = frobenius_norm(w);
    if (n == 0.0) return 0.0;
    w *= 1.0 / n;
    v = std::move(w);
    sigma = frobenius_norm(matmul(a, v));
  }
  return sigma;
}

}  // namespace tfcast
