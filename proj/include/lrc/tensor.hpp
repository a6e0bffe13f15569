#pragma once

// Dense row-major tensors and matrices.
//
// Storage is templated on the scalar type: weights and activations use
// float (Tensor / Matrix), the decomposition numerics use double
// (TensorD / MatrixD). Every contraction accumulates in double.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "lrc/error.hpp"

namespace lrc {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class BasicTensor {
public:
  using value_type = T;

  BasicTensor() : shape_{1}, data_(1, T{}) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(shape_product(shape_), T{});
  }

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    require(data_.size() == shape_product(shape_),
            "tensor data length does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  template <typename... I>
  T& operator()(I... idx) { return data_[offset({static_cast<std::size_t>(idx)...})]; }
  template <typename... I>
  const T& operator()(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicTensor&) const = default;

private:
  void check_shape() const {
    require(!shape_.empty(), "tensor shape must have at least one mode");
    for (auto d : shape_) require(d >= 1, "tensor dimensions must be >= 1");
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t mode = 0;
    for (auto i : idx) off = off * shape_[mode++] + i;
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
class BasicMatrix {
public:
  using value_type = T;

  BasicMatrix() : rows_(0), cols_(0) {}
  BasicMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "matrix data length does not match dimensions");
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  BasicMatrix transpose() const {
    BasicMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  template <typename U>
  BasicMatrix<U> cast() const {
    return BasicMatrix<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicMatrix&) const = default;

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;
using Matrix = BasicMatrix<float>;
using MatrixD = BasicMatrix<double>;

/// Mode-n unfolding. Rows index `mode`; columns run over the remaining modes
/// in cyclic order mode+1, ..., N-1, 0, ..., mode-1, row-major over that
/// sequence (mode+1 varies slowest, mode-1 fastest). For mode 0 this is the
/// plain row-major reshape.
template <typename T>
BasicMatrix<T> unfold(const BasicTensor<T>& t, std::size_t mode);

/// Exact inverse of unfold for the same mode and target shape.
template <typename T>
BasicTensor<T> fold(const BasicMatrix<T>& m, std::size_t mode, const Shape& target_shape);

/// t ×_mode m: replaces dimension `mode` (= m.cols()) by m.rows().
template <typename T>
BasicTensor<T> mode_n_product(const BasicTensor<T>& t, const BasicMatrix<T>& m, std::size_t mode);

template <typename T>
double frobenius_norm(const BasicTensor<T>& t);
template <typename T>
double frobenius_norm(const BasicMatrix<T>& m);

} // namespace lrc
