#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace heg {

// Dense row-major matrix of doubles. Row vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  bool all_finite() const;
  void fill(double v);
  std::string shape_string() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// Adds the 1 x cols row vector to every row.
void add_row_inplace(Matrix& m, const Matrix& row);
Matrix column_sums(const Matrix& m);
Matrix hadamard(const Matrix& a, const Matrix& b);

// Normalizes every column independently across the rows (softmax over the
// row axis), after subtracting the column maximum.
Matrix softmax_over_rows(const Matrix& m);
// Normalizes every row across its columns; used for class probabilities.
Matrix softmax_over_cols(const Matrix& m);

// Picks rows by index, in the order given.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

double max_abs(const Matrix& m);

// max |a-b| / max(|a|, |b|, floor) over entries.
double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

}  // namespace heg
