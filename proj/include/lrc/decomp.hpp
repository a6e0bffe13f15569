#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lrc/tensor.hpp"

namespace lrc {

/// Plain convolution: kernel laid out (D, D, S, T), square spatial window.
struct ConvLayerSpec {
  Tensor kernel;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t kernel_size() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(2); }
  std::size_t out_channels() const { return kernel.dim(3); }
  void validate() const;
  bool operator==(const ConvLayerSpec&) const = default;
};

/// TK-2 factorized convolution: a 1x1 conv S -> R3 (u3ᵀ), a DxD conv
/// R3 -> R4 (core, carrying the original stride/padding), a 1x1 conv
/// R4 -> T (u4).
struct FactorizedConv {
  Matrix u3;    // S x R3
  Tensor core;  // D x D x R3 x R4
  Matrix u4;    // T x R4
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t kernel_size() const { return core.dim(0); }
  std::size_t in_channels() const { return u3.rows(); }
  std::size_t out_channels() const { return u4.rows(); }
  std::size_t rank3() const { return u3.cols(); }
  std::size_t rank4() const { return u4.cols(); }
  /// S·R3 + D²·R3·R4 + T·R4
  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const FactorizedConv&) const = default;
};

/// yᵀ = xᵀ W with W of shape M x N.
struct FcLayerSpec {
  Matrix weight;

  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }
  bool operator==(const FcLayerSpec&) const = default;
};

/// Two-sublayer FC: z = xᵀ a, y = zᵀ b, with a = U·S (M x R), b = Vᵀ (R x N).
struct FactorizedFc {
  Matrix a;
  Matrix b;

  std::size_t in_features() const { return a.rows(); }
  std::size_t out_features() const { return b.cols(); }
  std::size_t rank() const { return a.cols(); }
  /// M·R + R·N
  std::size_t parameter_count() const { return a.size() + b.size(); }
  void validate() const;
  bool operator==(const FactorizedFc&) const = default;
};

/// Double-precision truncated SVD: returns (U_r·S_r, V_rᵀ).
std::pair<MatrixD, MatrixD> truncated_svd(const MatrixD& w, std::size_t rank);

FactorizedFc tsvd_truncate(const Matrix& w, std::size_t rank);

struct Tucker2Options {
  std::size_t max_iters = 50;
  double tol = 1e-7;
};

/// Result of a Tucker-2 fit with the relative reconstruction error after
/// HOSVD initialization (entry 0) and after each HOOI sweep.
struct Tucker2Fit {
  FactorizedConv factors;
  std::vector<double> error_history;
};

Tucker2Fit tucker2_fit(const Tensor& kernel, std::size_t r3, std::size_t r4,
                       const Tucker2Options& options = {});

FactorizedConv tucker2_decompose(const Tensor& kernel, std::size_t r3, std::size_t r4,
                                 std::size_t max_iters = 50, double tol = 1e-7);

/// core ×₃ u3 ×₄ u4, shape D x D x S x T.
Tensor tucker2_reconstruct(const FactorizedConv& f);

FactorizedConv factorize_conv_layer(const ConvLayerSpec& layer, std::size_t r3, std::size_t r4,
                                    const Tucker2Options& options = {});

FactorizedFc factorize_fc_layer(const FcLayerSpec& layer, std::size_t rank);

/// a · b
Matrix fc_reconstruct(const FactorizedFc& f);

} // namespace lrc
