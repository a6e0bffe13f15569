#include "lrc/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lrc/linalg.hpp"

namespace lrc {

namespace {

constexpr std::size_t kInMode = 2;   // S
constexpr std::size_t kOutMode = 3;  // T

void check_kernel(const Tensor& k) {
  require(k.order() == 4, "conv kernel must be 4-way (D, D, S, T), got " + shape_string(k.shape()));
  require(k.dim(0) == k.dim(1), "conv kernel must be square in its spatial modes");
  for (float v : k.data())
    if (!std::isfinite(v)) fail(ErrorCode::numeric, "conv kernel has non-finite entries");
}

double relative_error(const TensorD& ref, const TensorD& approx, double ref_norm) {
  double s = 0.0;
  auto a = ref.data();
  auto b = approx.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return ref_norm > 0.0 ? std::sqrt(s) / ref_norm : std::sqrt(s);
}

TensorD reconstruct_d(const TensorD& core, const MatrixD& u3, const MatrixD& u4) {
  return mode_n_product(mode_n_product(core, u3, kInMode), u4, kOutMode);
}

TensorD project_core(const TensorD& k, const MatrixD& u3, const MatrixD& u4) {
  return mode_n_product(mode_n_product(k, u3.transpose(), kInMode), u4.transpose(), kOutMode);
}

} // namespace

void ConvLayerSpec::validate() const {
  check_kernel(kernel);
  require(stride >= 1, "conv stride must be >= 1");
}

std::size_t FactorizedConv::parameter_count() const { return u3.size() + core.size() + u4.size(); }

void FactorizedConv::validate() const {
  require(core.order() == 4 && core.dim(0) == core.dim(1), "factorized conv core must be D x D x R3 x R4");
  require(u3.cols() == core.dim(2), "u3 columns must equal core R3");
  require(u4.cols() == core.dim(3), "u4 columns must equal core R4");
  require(u3.cols() >= 1 && u3.cols() <= u3.rows(), "R3 must lie in [1, S]");
  require(u4.cols() >= 1 && u4.cols() <= u4.rows(), "R4 must lie in [1, T]");
  require(stride >= 1, "conv stride must be >= 1");
}

void FactorizedFc::validate() const {
  require(a.cols() == b.rows(), "factorized fc inner ranks differ");
  require(a.cols() >= 1 && a.cols() <= std::min(a.rows(), b.cols()), "FC rank must lie in [1, min(M, N)]");
}

std::pair<MatrixD, MatrixD> truncated_svd(const MatrixD& w, std::size_t rank) {
  const std::size_t k = std::min(w.rows(), w.cols());
  require(rank >= 1 && rank <= k, "tsvd rank " + std::to_string(rank) + " outside [1, " +
                                      std::to_string(k) + "]");
  const SvdResult r = svd(w);
  MatrixD a(w.rows(), rank);
  MatrixD b(rank, w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < rank; ++j) a(i, j) = r.u(i, j) * r.s[j];
  for (std::size_t j = 0; j < rank; ++j)
    for (std::size_t c = 0; c < w.cols(); ++c) b(j, c) = r.vt(j, c);
  return {std::move(a), std::move(b)};
}

FactorizedFc tsvd_truncate(const Matrix& w, std::size_t rank) {
  auto [a, b] = truncated_svd(w.cast<double>(), rank);
  return FactorizedFc{a.cast<float>(), b.cast<float>()};
}

Tucker2Fit tucker2_fit(const Tensor& kernel, std::size_t r3, std::size_t r4,
                       const Tucker2Options& options) {
  check_kernel(kernel);
  const std::size_t s = kernel.dim(kInMode), t = kernel.dim(kOutMode);
  require(r3 >= 1 && r3 <= s, "R3 = " + std::to_string(r3) + " outside [1, " + std::to_string(s) + "]");
  require(r4 >= 1 && r4 <= t, "R4 = " + std::to_string(r4) + " outside [1, " + std::to_string(t) + "]");

  const TensorD k = kernel.cast<double>();
  const double k_norm = frobenius_norm(k);

  // truncated HOSVD initialization
  MatrixD u3 = leading_left_singular_vectors(unfold(k, kInMode), r3);
  MatrixD u4 = leading_left_singular_vectors(unfold(k, kOutMode), r4);
  TensorD core = project_core(k, u3, u4);

  Tucker2Fit fit;
  fit.error_history.push_back(relative_error(k, reconstruct_d(core, u3, u4), k_norm));

  for (std::size_t it = 0; it < options.max_iters; ++it) {
    const double previous = fit.error_history.back();
    if (previous == 0.0) break;
    const TensorD y3 = mode_n_product(k, u4.transpose(), kOutMode);
    MatrixD next_u3 = leading_left_singular_vectors(unfold(y3, kInMode), r3);
    const TensorD y4 = mode_n_product(k, next_u3.transpose(), kInMode);
    MatrixD next_u4 = leading_left_singular_vectors(unfold(y4, kOutMode), r4);
    TensorD next_core = project_core(k, next_u3, next_u4);
    const double err = relative_error(k, reconstruct_d(next_core, next_u3, next_u4), k_norm);
    u3 = std::move(next_u3);
    u4 = std::move(next_u4);
    core = std::move(next_core);
    fit.error_history.push_back(err);
    if (previous - err < options.tol) break;
  }

  fit.factors = FactorizedConv{u3.cast<float>(), core.cast<float>(), u4.cast<float>(), 1, 0};
  return fit;
}

FactorizedConv tucker2_decompose(const Tensor& kernel, std::size_t r3, std::size_t r4,
                                 std::size_t max_iters, double tol) {
  return tucker2_fit(kernel, r3, r4, Tucker2Options{max_iters, tol}).factors;
}

Tensor tucker2_reconstruct(const FactorizedConv& f) {
  f.validate();
  const TensorD full = reconstruct_d(f.core.cast<double>(), f.u3.cast<double>(), f.u4.cast<double>());
  return full.cast<float>();
}

FactorizedConv factorize_conv_layer(const ConvLayerSpec& layer, std::size_t r3, std::size_t r4,
                                    const Tucker2Options& options) {
  layer.validate();
  FactorizedConv f = tucker2_fit(layer.kernel, r3, r4, options).factors;
  f.stride = layer.stride;
  f.padding = layer.padding;
  return f;
}

FactorizedFc factorize_fc_layer(const FcLayerSpec& layer, std::size_t rank) {
  return tsvd_truncate(layer.weight, rank);
}

Matrix fc_reconstruct(const FactorizedFc& f) {
  return matmul(f.a.cast<double>(), f.b.cast<double>()).cast<float>();
}

} // namespace lrc
