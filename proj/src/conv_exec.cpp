#include "lrc/conv_exec.hpp"

#include <algorithm>
#include <string>

namespace lrc {

namespace {

void check_input(const Tensor& x, std::size_t channels, const char* what) {
  require(x.order() == 3, std::string(what) + ": input must be (C, H, W), got " + shape_string(x.shape()));
  require(x.dim(0) == channels, std::string(what) + ": input has " + std::to_string(x.dim(0)) +
                                    " channels, layer expects " + std::to_string(channels));
}

struct Geometry {
  std::size_t h, w, ho, wo;
};

Geometry geometry(const Tensor& x, std::size_t d, std::size_t stride, std::size_t padding) {
  const std::size_t h = x.dim(1), w = x.dim(2);
  return {h, w, conv_output_size(h, d, stride, padding), conv_output_size(w, d, stride, padding)};
}

// Input row/col for output position o and tap k, or -1 when it falls in padding.
inline long tap(std::size_t o, std::size_t k, std::size_t stride, std::size_t padding, std::size_t n) {
  const long p = static_cast<long>(o * stride + k) - static_cast<long>(padding);
  return (p < 0 || p >= static_cast<long>(n)) ? -1 : p;
}

// Backward of conv2d: accumulates kernel and input gradients.
void conv2d_backward(const Tensor& x, std::span<const float> kernel, std::size_t d, std::size_t s,
                     std::size_t t, std::size_t stride, std::size_t padding, const Tensor& d_y,
                     Tensor& d_kernel, Tensor& d_x) {
  const Geometry g = geometry(x, d, stride, padding);
  require(d_y.order() == 3 && d_y.dim(0) == t && d_y.dim(1) == g.ho && d_y.dim(2) == g.wo,
          "conv backward: upstream gradient shape " + shape_string(d_y.shape()) + " does not match output");
  std::vector<double> dk(d * d * s * t, 0.0);
  std::vector<double> dx(s * g.h * g.w, 0.0);
  auto xv = x.data();
  auto gy = d_y.data();
  std::vector<double> gcol(t);
  for (std::size_t oh = 0; oh < g.ho; ++oh)
    for (std::size_t ow = 0; ow < g.wo; ++ow) {
      bool any = false;
      for (std::size_t c = 0; c < t; ++c) {
        gcol[c] = gy[(c * g.ho + oh) * g.wo + ow];
        any = any || gcol[c] != 0.0;
      }
      if (!any) continue;
      for (std::size_t i = 0; i < d; ++i) {
        const long ih = tap(oh, i, stride, padding, g.h);
        if (ih < 0) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const long iw = tap(ow, j, stride, padding, g.w);
          if (iw < 0) continue;
          for (std::size_t c = 0; c < s; ++c) {
            const std::size_t xi = (c * g.h + static_cast<std::size_t>(ih)) * g.w + static_cast<std::size_t>(iw);
            const double xval = xv[xi];
            const std::size_t kbase = ((i * d + j) * s + c) * t;
            double acc = 0.0;
            for (std::size_t o = 0; o < t; ++o) {
              dk[kbase + o] += xval * gcol[o];
              acc += static_cast<double>(kernel[kbase + o]) * gcol[o];
            }
            dx[xi] += acc;
          }
        }
      }
    }
  d_kernel = Tensor({d, d, s, t}, std::vector<float>(dk.begin(), dk.end()));
  d_x = Tensor({s, g.h, g.w}, std::vector<float>(dx.begin(), dx.end()));
}

std::vector<float> transpose_data(const Matrix& m) { return m.transpose().values(); }

Matrix from_kernel_1x1(const Tensor& k, std::size_t rows, std::size_t cols, bool transposed) {
  Matrix m(rows, cols, std::vector<float>(k.data().begin(), k.data().end()));
  return transposed ? m.transpose() : m;
}

} // namespace

std::size_t conv_output_size(std::size_t n, std::size_t kernel, std::size_t stride, std::size_t padding) {
  require(stride >= 1, "conv stride must be >= 1");
  const long span = static_cast<long>(n + 2 * padding) - static_cast<long>(kernel);
  require(span >= 0, "conv output size would be non-positive (input " + std::to_string(n) + ", kernel " +
                         std::to_string(kernel) + ", padding " + std::to_string(padding) + ")");
  return static_cast<std::size_t>(span) / stride + 1;
}

Tensor conv2d(const Tensor& x, std::span<const float> kernel, std::size_t d, std::size_t s, std::size_t t,
              std::size_t stride, std::size_t padding) {
  check_input(x, s, "conv2d");
  require(kernel.size() == d * d * s * t, "conv2d: kernel size mismatch");
  const Geometry g = geometry(x, d, stride, padding);
  Tensor y({t, g.ho, g.wo});
  auto xv = x.data();
  auto yv = y.data();
  std::vector<double> acc(t);
  for (std::size_t oh = 0; oh < g.ho; ++oh)
    for (std::size_t ow = 0; ow < g.wo; ++ow) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        const long ih = tap(oh, i, stride, padding, g.h);
        if (ih < 0) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const long iw = tap(ow, j, stride, padding, g.w);
          if (iw < 0) continue;
          for (std::size_t c = 0; c < s; ++c) {
            const double xval = xv[(c * g.h + static_cast<std::size_t>(ih)) * g.w + static_cast<std::size_t>(iw)];
            if (xval == 0.0) continue;
            const float* krow = kernel.data() + ((i * d + j) * s + c) * t;
            for (std::size_t o = 0; o < t; ++o) acc[o] += static_cast<double>(krow[o]) * xval;
          }
        }
      }
      for (std::size_t o = 0; o < t; ++o) yv[(o * g.ho + oh) * g.wo + ow] = static_cast<float>(acc[o]);
    }
  return y;
}

Tensor conv2d_reference(const Tensor& x, const ConvLayerSpec& layer) {
  layer.validate();
  return conv2d(x, layer.kernel.data(), layer.kernel_size(), layer.in_channels(), layer.out_channels(),
                layer.stride, layer.padding);
}

Tensor conv2d_factorized(const Tensor& x, const FactorizedConv& f) {
  f.validate();
  check_input(x, f.in_channels(), "conv2d_factorized");
  const std::size_t s = f.in_channels(), t = f.out_channels(), r3 = f.rank3(), r4 = f.rank4();
  // u3 (S x R3) is already a (1, 1, S, R3) kernel; u4 needs a transpose to (1, 1, R4, T).
  const Tensor z = conv2d(x, f.u3.data(), 1, s, r3, 1, 0);
  const Tensor z2 = conv2d(z, f.core.data(), f.kernel_size(), r3, r4, f.stride, f.padding);
  const std::vector<float> u4t = transpose_data(f.u4);
  return conv2d(z2, u4t, 1, r4, t, 1, 0);
}

std::vector<float> fc_forward(std::span<const float> x, const FcLayerSpec& layer) {
  const Matrix& w = layer.weight;
  require(x.size() == w.rows(), "fc_forward: input length " + std::to_string(x.size()) + " != M = " +
                                    std::to_string(w.rows()));
  std::vector<double> y(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto row = w.row(i);
    for (std::size_t j = 0; j < w.cols(); ++j) y[j] += xi * static_cast<double>(row[j]);
  }
  return {y.begin(), y.end()};
}

std::vector<float> fc_factorized_forward(std::span<const float> x, const FactorizedFc& f) {
  f.validate();
  const std::vector<float> z = fc_forward(x, FcLayerSpec{f.a});
  return fc_forward(z, FcLayerSpec{f.b});
}

ConvGrad conv2d_reference_grad(const ConvLayerSpec& layer, const Tensor& x, const Tensor& d_y) {
  layer.validate();
  check_input(x, layer.in_channels(), "conv2d_reference_grad");
  ConvGrad g;
  conv2d_backward(x, layer.kernel.data(), layer.kernel_size(), layer.in_channels(), layer.out_channels(),
                  layer.stride, layer.padding, d_y, g.d_kernel, g.d_x);
  return g;
}

FactorizedConvGrad conv2d_factorized_grad(const FactorizedConv& f, const Tensor& x, const Tensor& d_y) {
  f.validate();
  check_input(x, f.in_channels(), "conv2d_factorized_grad");
  const std::size_t s = f.in_channels(), t = f.out_channels(), r3 = f.rank3(), r4 = f.rank4();
  const std::size_t d = f.kernel_size();

  const Tensor z = conv2d(x, f.u3.data(), 1, s, r3, 1, 0);
  const Tensor z2 = conv2d(z, f.core.data(), d, r3, r4, f.stride, f.padding);
  const std::vector<float> u4t = transpose_data(f.u4);

  FactorizedConvGrad g;
  Tensor d_u4t, d_z2, d_z;
  conv2d_backward(z2, u4t, 1, r4, t, 1, 0, d_y, d_u4t, d_z2);
  conv2d_backward(z, f.core.data(), d, r3, r4, f.stride, f.padding, d_z2, g.d_core, d_z);
  Tensor d_u3;
  conv2d_backward(x, f.u3.data(), 1, s, r3, 1, 0, d_z, d_u3, g.d_x);
  g.d_u3 = from_kernel_1x1(d_u3, s, r3, false);
  g.d_u4 = from_kernel_1x1(d_u4t, r4, t, true);
  return g;
}

FcGrad fc_grad(const FcLayerSpec& layer, std::span<const float> x, std::span<const float> d_y) {
  const Matrix& w = layer.weight;
  require(x.size() == w.rows() && d_y.size() == w.cols(), "fc_grad: shape mismatch");
  FcGrad g{Matrix(w.rows(), w.cols()), std::vector<float>(w.rows())};
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double acc = 0.0;
    auto row = w.row(i);
    for (std::size_t j = 0; j < w.cols(); ++j) {
      g.d_weight(i, j) = static_cast<float>(static_cast<double>(x[i]) * d_y[j]);
      acc += static_cast<double>(row[j]) * d_y[j];
    }
    g.d_x[i] = static_cast<float>(acc);
  }
  return g;
}

FactorizedFcGrad fc_factorized_grad(const FactorizedFc& f, std::span<const float> x, std::span<const float> d_y) {
  f.validate();
  require(x.size() == f.in_features() && d_y.size() == f.out_features(), "fc_factorized_grad: shape mismatch");
  const std::vector<float> z = fc_forward(x, FcLayerSpec{f.a});
  FcGrad gb = fc_grad(FcLayerSpec{f.b}, z, d_y);
  FcGrad ga = fc_grad(FcLayerSpec{f.a}, x, gb.d_x);
  return FactorizedFcGrad{std::move(ga.d_weight), std::move(gb.d_weight), std::move(ga.d_x)};
}

} // namespace lrc
