#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lrc/tensor.hpp"

namespace lrc {

struct RankReport {
  std::string layer_id;
  std::size_t estimated_rank = 0;
  std::vector<double> singular_values;  // non-increasing
  std::vector<bool> retained_mask;      // always a prefix of true values
  double noise_sigma2 = 0.0;
  double threshold = 0.0;               // shrinkage threshold on singular values
  bool noiseless = false;               // true when the exact-rank branch was taken
};

enum class FourthModeRule { channel_ratio, vbmf_independent };

struct RankPolicy {
  FourthModeRule r4_rule = FourthModeRule::channel_ratio;
  std::size_t min_rank = 1;
  double rank_cap_fraction = 1.0;

  void validate() const;
};

/// Global analytic empirical variational-Bayes matrix factorization.
///
/// The noise variance is chosen by minimizing the empirical-VB free energy
/// over a bracket (log-spaced grid, then golden-section refinement). A
/// component is retained iff its singular value exceeds
///   σ · sqrt(M · (1 + τ̄)(1 + α/τ̄)),   α = L/M ≤ 1,
/// where τ̄ is the positive root of log(1+τ) + α·log(1+τ/α) = τ. That
/// threshold always lies above the noise bulk edge σ(√L + √M).
///
/// Exactly rank-deficient input (or a flat spectrum, where the σ search
/// degenerates) takes the noiseless branch: rank = #{s_i > 1e-6 · s_1}.
RankReport evbmf_rank(const MatrixD& m);

/// τ̄ for a given aspect ratio α ∈ (0, 1].
double evbmf_tau_bar(double alpha);

struct ConvRankSelection {
  std::size_t r3 = 1;
  std::size_t r4 = 1;
  RankReport mode3;
  RankReport mode4;  // only filled by the vbmf_independent rule
};

/// R₄ from R₃ under the channel-ratio rule: round-half-up(R₃·T/S), clamped.
std::size_t channel_ratio_rank(std::size_t r3, std::size_t s, std::size_t t, std::size_t min_rank);

ConvRankSelection select_conv_ranks(const Tensor& kernel, const RankPolicy& policy);

std::pair<std::size_t, RankReport> select_fc_rank(const Matrix& w, const RankPolicy& policy);

} // namespace lrc
