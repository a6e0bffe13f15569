#pragma once

// Forward and backward execution of plain and factorized conv / FC layers.
//
// Activations are channel-major (C, H, W). Kernels stay in (D, D, S, T)
// layout; index i runs along height and j along width. Taps that fall
// outside the input read as zero.

#include <cstddef>
#include <span>
#include <vector>

#include "lrc/decomp.hpp"
#include "lrc/tensor.hpp"

namespace lrc {

/// ⌊(n + 2P − D)/Δ⌋ + 1; throws if that is below 1.
std::size_t conv_output_size(std::size_t n, std::size_t kernel, std::size_t stride, std::size_t padding);

/// Raw convolution with a (D, D, S, T) kernel given as flat data.
Tensor conv2d(const Tensor& x, std::span<const float> kernel, std::size_t d, std::size_t s, std::size_t t,
              std::size_t stride, std::size_t padding);

Tensor conv2d_reference(const Tensor& x, const ConvLayerSpec& layer);

/// Three sublayers: 1x1 with u3ᵀ, DxD with the core, 1x1 with u4.
Tensor conv2d_factorized(const Tensor& x, const FactorizedConv& f);

std::vector<float> fc_forward(std::span<const float> x, const FcLayerSpec& layer);
std::vector<float> fc_factorized_forward(std::span<const float> x, const FactorizedFc& f);

struct ConvGrad {
  Tensor d_kernel;
  Tensor d_x;
};

struct FactorizedConvGrad {
  Matrix d_u3;
  Tensor d_core;
  Matrix d_u4;
  Tensor d_x;
};

struct FcGrad {
  Matrix d_weight;
  std::vector<float> d_x;
};

struct FactorizedFcGrad {
  Matrix d_a;
  Matrix d_b;
  std::vector<float> d_x;
};

ConvGrad conv2d_reference_grad(const ConvLayerSpec& layer, const Tensor& x, const Tensor& d_y);
FactorizedConvGrad conv2d_factorized_grad(const FactorizedConv& f, const Tensor& x, const Tensor& d_y);
FcGrad fc_grad(const FcLayerSpec& layer, std::span<const float> x, std::span<const float> d_y);
FactorizedFcGrad fc_factorized_grad(const FactorizedFc& f, std::span<const float> x, std::span<const float> d_y);

} // namespace lrc
