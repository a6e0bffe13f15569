#include "lrc/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace lrc {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

// Strides (in units of column index) that place each non-`mode` dimension of
// `shape` into the cyclic unfolding column order.
std::vector<std::size_t> cyclic_column_strides(const Shape& shape, std::size_t mode) {
  const std::size_t n = shape.size();
  std::vector<std::size_t> stride(n, 0);
  std::size_t s = 1;
  // fastest is mode-1, then mode-2, ..., wrapping around to mode+1 (slowest)
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t m = (mode + n - k) % n;
    stride[m] = s;
    s *= shape[m];
  }
  return stride;
}

template <typename F>
void for_each_index(const Shape& shape, F&& f) {
  std::vector<std::size_t> idx(shape.size(), 0);
  const std::size_t total = shape_product(shape);
  for (std::size_t lin = 0; lin < total; ++lin) {
    f(lin, idx);
    for (std::size_t k = shape.size(); k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
}

} // namespace

template <typename T>
BasicMatrix<T> unfold(const BasicTensor<T>& t, std::size_t mode) {
  require(mode < t.order(), "unfold: mode " + std::to_string(mode) + " out of range for order " +
                                std::to_string(t.order()));
  const auto& shape = t.shape();
  const auto stride = cyclic_column_strides(shape, mode);
  BasicMatrix<T> m(shape[mode], t.size() / shape[mode]);
  auto src = t.data();
  for_each_index(shape, [&](std::size_t lin, const std::vector<std::size_t>& idx) {
    std::size_t col = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) col += idx[k] * stride[k];
    m(idx[mode], col) = src[lin];
  });
  return m;
}

template <typename T>
BasicTensor<T> fold(const BasicMatrix<T>& m, std::size_t mode, const Shape& target_shape) {
  require(mode < target_shape.size(), "fold: mode out of range");
  const std::size_t total = shape_product(target_shape);
  require(m.rows() == target_shape[mode] && m.rows() * m.cols() == total,
          "fold: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
              " inconsistent with shape " + shape_string(target_shape) + " at mode " +
              std::to_string(mode));
  BasicTensor<T> t(target_shape);
  const auto stride = cyclic_column_strides(target_shape, mode);
  auto dst = t.data();
  for_each_index(target_shape, [&](std::size_t lin, const std::vector<std::size_t>& idx) {
    std::size_t col = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) col += idx[k] * stride[k];
    dst[lin] = m(idx[mode], col);
  });
  return t;
}

template <typename T>
BasicTensor<T> mode_n_product(const BasicTensor<T>& t, const BasicMatrix<T>& m, std::size_t mode) {
  require(mode < t.order(), "mode_n_product: mode out of range");
  require(m.cols() == t.dim(mode), "mode_n_product: matrix has " + std::to_string(m.cols()) +
                                       " columns but mode " + std::to_string(mode) + " has size " +
                                       std::to_string(t.dim(mode)));
  const auto& shape = t.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < mode; ++k) outer *= shape[k];
  for (std::size_t k = mode + 1; k < shape.size(); ++k) inner *= shape[k];
  const std::size_t in_dim = shape[mode];
  const std::size_t out_dim = m.rows();

  Shape out_shape = shape;
  out_shape[mode] = out_dim;
  BasicTensor<T> out(out_shape);
  auto src = t.data();
  auto dst = out.data();
  std::vector<double> acc(inner);
  for (std::size_t o = 0; o < outer; ++o) {
    const T* slab = src.data() + o * in_dim * inner;
    for (std::size_t i = 0; i < out_dim; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < in_dim; ++k) {
        const double w = m(i, k);
        if (w == 0.0) continue;
        const T* row = slab + k * inner;
        for (std::size_t j = 0; j < inner; ++j) acc[j] += w * static_cast<double>(row[j]);
      }
      T* out_row = dst.data() + (o * out_dim + i) * inner;
      for (std::size_t j = 0; j < inner; ++j) out_row[j] = static_cast<T>(acc[j]);
    }
  }
  return out;
}

template <typename T>
double frobenius_norm(const BasicTensor<T>& t) {
  double s = 0.0;
  for (auto v : t.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

template <typename T>
double frobenius_norm(const BasicMatrix<T>& m) {
  double s = 0.0;
  for (auto v : m.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

#define LRC_INSTANTIATE(T)                                                                   \
  template BasicMatrix<T> unfold(const BasicTensor<T>&, std::size_t);                        \
  template BasicTensor<T> fold(const BasicMatrix<T>&, std::size_t, const Shape&);            \
  template BasicTensor<T> mode_n_product(const BasicTensor<T>&, const BasicMatrix<T>&,       \
                                         std::size_t);                                       \
  template double frobenius_norm(const BasicTensor<T>&);                                     \
  template double frobenius_norm(const BasicMatrix<T>&);

LRC_INSTANTIATE(float)
LRC_INSTANTIATE(double)

#undef LRC_INSTANTIATE

} // namespace lrc
