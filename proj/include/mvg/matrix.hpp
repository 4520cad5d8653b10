#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvg {

// Dense row-major matrix of doubles. Rows are node tokens throughout the
// fusion code, so row access is the common path.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  // Appends the rows of `other`; column counts must agree unless this is empty.
  void append_rows(const Matrix& other);
  Matrix slice_rows(std::size_t begin, std::size_t count) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T

void add_in_place(Matrix& dst, const Matrix& src);
void add_row_vector(Matrix& m, std::span<const double> v);
std::vector<double> column_sums(const Matrix& m);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace mvg
