#ifndef CPHMM_MATRIX_HPP
#define CPHMM_MATRIX_HPP

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace cphmm {

// Dense row-major matrix of doubles. Used for the n-by-M lattice tables.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return v_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return v_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    assert(i < rows_);
    return {v_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    assert(i < rows_);
    return {v_.data() + i * cols_, cols_};
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> v_;
};

}  // namespace cphmm

#endif  // CPHMM_MATRIX_HPP
