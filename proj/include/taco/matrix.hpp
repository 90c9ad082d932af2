#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "taco/error.hpp"

namespace taco {

/// Dense row-major matrix; row i is the vector with id i.
template <typename T>
class BasicMatrix {
 public:
  BasicMatrix() = default;

  BasicMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols) {}

  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "matrix storage holds " + std::to_string(values_.size()) +
                      " values, expected " + std::to_string(rows_ * cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const T> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<T> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  T operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  T& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  const std::vector<T>& values() const noexcept { return values_; }
  std::vector<T>& values() noexcept { return values_; }

  bool operator==(const BasicMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

/// n vectors of dimension d, 32-bit reals. rows() is n, cols() is d.
using DatasetMatrix = BasicMatrix<float>;
using IdMatrix = BasicMatrix<std::int32_t>;

}  // namespace taco
