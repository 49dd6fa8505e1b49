#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace bt {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Indices are 0-based.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  Vector column(std::size_t j) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Vector row_sums(const Matrix& m);
Vector col_sums(const Matrix& m);
double max_entry(const Matrix& m);
double min_entry(const Matrix& m);
// Largest |a_ij - b_ij|; throws DimensionMismatch on shape mismatch.
double max_abs_diff(const Matrix& a, const Matrix& b);
// Largest |a_ij - b_ij| / max(|a_ij|, |b_ij|), with 0/0 taken as 0.
double max_rel_diff(const Matrix& a, const Matrix& b);
double max_rel_diff(std::span<const double> a, std::span<const double> b);

}  // namespace bt
