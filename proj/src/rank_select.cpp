#include "lrc/rank_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrc/linalg.hpp"

namespace lrc {

namespace {

constexpr double kNoiselessRel = 1e-6;
constexpr std::size_t kGridPoints = 400;
constexpr int kGoldenIters = 200;

std::size_t clamp_rank(std::size_t r, std::size_t lo, std::size_t hi) {
  return std::min(std::max(r, lo), hi);
}

double tau_of(double x, double alpha) {
  const double b = x - (1.0 + alpha);
  return 0.5 * (b + std::sqrt(std::max(0.0, b * b - 4.0 * alpha)));
}

// Empirical-VB free energy (scaled by 2/M, constants dropped) as a function
// of the noise variance, for the full spectrum of an L x M matrix (L ≤ M).
struct FreeEnergy {
  const std::vector<double>& s;
  double l, m, alpha, x_bar;

  double operator()(double sigma2) const {
    double f = 0.0;
    for (double sv : s) {
      const double x = sv * sv / (m * sigma2);
      if (x > x_bar) {
        const double tau = tau_of(x, alpha);
        f += x - tau + std::log((tau + 1.0) / x) + alpha * std::log(tau / alpha + 1.0);
      } else {
        // log(0) for exactly-zero components: skip, they only shift f by a constant
        f += x - (x > 0.0 ? std::log(x) : 0.0);
      }
    }
    // H = L components are always used, so the residual and (L-H) terms vanish.
    return f;
  }
};

double golden_section(const FreeEnergy& f, double lo, double hi) {
  // minimize over log σ²
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(lo), b = std::log(hi);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(std::exp(c)), fd = f(std::exp(d));
  for (int i = 0; i < kGoldenIters && (b - a) > 1e-12; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(std::exp(d));
    }
  }
  return std::exp(0.5 * (a + b));
}

} // namespace

void RankPolicy::validate() const {
  require(min_rank >= 1, "min_rank must be >= 1");
  require(rank_cap_fraction > 0.0 && rank_cap_fraction <= 1.0, "rank_cap_fraction must lie in (0, 1]");
}

double evbmf_tau_bar(double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, "evbmf_tau_bar: alpha must lie in (0, 1]");
  // ψ(τ) = log(1+τ) + α log(1+τ/α) − τ is positive just above √α and
  // eventually negative; bisect on the sign change.
  auto psi = [alpha](double tau) {
    return std::log1p(tau) + alpha * std::log1p(tau / alpha) - tau;
  };
  double lo = std::sqrt(alpha);
  double hi = 2.0 * lo;
  while (psi(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (psi(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

RankReport evbmf_rank(const MatrixD& input) {
  require(input.rows() >= 1 && input.cols() >= 1, "evbmf_rank: empty matrix");
  if (!all_finite(input)) fail(ErrorCode::numeric, "evbmf_rank: non-finite input");

  const bool transpose = input.rows() > input.cols();
  const double l = static_cast<double>(transpose ? input.cols() : input.rows());
  const double m = static_cast<double>(transpose ? input.rows() : input.cols());

  RankReport report;
  report.singular_values = singular_values(input);
  const auto& s = report.singular_values;
  const std::size_t h = s.size();
  report.retained_mask.assign(h, false);

  auto finish = [&](std::size_t rank) {
    report.estimated_rank = rank;
    for (std::size_t i = 0; i < rank; ++i) report.retained_mask[i] = true;
    return report;
  };

  if (s.front() == 0.0) {
    report.noiseless = true;
    return finish(0);
  }

  std::size_t numeric_rank = 0;
  while (numeric_rank < h && s[numeric_rank] > kNoiselessRel * s.front()) ++numeric_rank;
  const bool flat = s.back() >= (1.0 - kNoiselessRel) * s.front();
  if (numeric_rank < h || flat) {
    report.noiseless = true;
    report.threshold = kNoiselessRel * s.front();
    return finish(numeric_rank);
  }

  const double alpha = l / m;
  const double tau_bar = evbmf_tau_bar(alpha);
  const double x_bar = (1.0 + tau_bar) * (1.0 + alpha / tau_bar);

  // Bracket for σ²: the upper end attributes all energy to noise; the lower
  // end keeps the largest components that could still be pure noise.
  double energy = 0.0;
  for (double v : s) energy += v * v;
  const double upper = energy / (l * m);
  const std::size_t k_ub = static_cast<std::size_t>(
      std::min<double>(std::ceil(l / (1.0 + alpha)) - 1.0, static_cast<double>(h)));
  const std::size_t tail = std::min(k_ub, h - 1);
  double tail_mean = 0.0;
  for (std::size_t i = tail; i < h; ++i) tail_mean += s[i] * s[i];
  tail_mean /= static_cast<double>(h - tail);
  const double lower = std::max(s[tail] * s[tail] / (m * x_bar), tail_mean / m);

  if (!(lower > 0.0) || !(upper > lower)) {
    report.noiseless = true;
    report.threshold = kNoiselessRel * s.front();
    return finish(numeric_rank);
  }

  const FreeEnergy f{s, l, m, alpha, x_bar};
  const double log_lo = std::log(lower), log_hi = std::log(upper);
  std::size_t best = 0;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kGridPoints; ++i) {
    const double t = log_lo + (log_hi - log_lo) * static_cast<double>(i) / (kGridPoints - 1);
    const double v = f(std::exp(t));
    if (v < best_f) {
      best_f = v;
      best = i;
    }
  }
  const double step = (log_hi - log_lo) / (kGridPoints - 1);
  const double a = std::exp(log_lo + step * static_cast<double>(best == 0 ? 0 : best - 1));
  const double b = std::exp(log_lo + step * static_cast<double>(std::min(best + 1, kGridPoints - 1)));
  double sigma2 = golden_section(f, a, b);
  if (f(sigma2) > best_f) sigma2 = std::exp(log_lo + step * static_cast<double>(best));

  report.noise_sigma2 = sigma2;
  report.threshold = std::sqrt(m * sigma2 * x_bar);
  const double bulk_edge = std::sqrt(sigma2) * (std::sqrt(l) + std::sqrt(m));
  const double cut = std::max(report.threshold, bulk_edge);
  std::size_t rank = 0;
  while (rank < h && s[rank] > cut) ++rank;
  return finish(rank);
}

std::size_t channel_ratio_rank(std::size_t r3, std::size_t s, std::size_t t, std::size_t min_rank) {
  require(s >= 1 && t >= 1, "channel_ratio_rank: channel counts must be >= 1");
  // round half up of r3 * t / s in integer arithmetic
  const std::size_t r4 = (2 * r3 * t + s) / (2 * s);
  return clamp_rank(r4, min_rank, t);
}

ConvRankSelection select_conv_ranks(const Tensor& kernel, const RankPolicy& policy) {
  policy.validate();
  require(kernel.order() == 4 && kernel.dim(0) == kernel.dim(1), "select_conv_ranks: kernel must be D x D x S x T");
  const std::size_t s = kernel.dim(2), t = kernel.dim(3);
  const TensorD k = kernel.cast<double>();

  ConvRankSelection out;
  out.mode3 = evbmf_rank(unfold(k, 2));
  const auto cap = [&](std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(policy.rank_cap_fraction * n - 1e-9)));
  };
  out.r3 = clamp_rank(out.mode3.estimated_rank, policy.min_rank, std::min(cap(s), s));
  if (policy.r4_rule == FourthModeRule::channel_ratio) {
    out.r4 = channel_ratio_rank(out.r3, s, t, policy.min_rank);
  } else {
    out.mode4 = evbmf_rank(unfold(k, 3));
    out.r4 = clamp_rank(out.mode4.estimated_rank, policy.min_rank, std::min(cap(t), t));
  }
  return out;
}

std::pair<std::size_t, RankReport> select_fc_rank(const Matrix& w, const RankPolicy& policy) {
  policy.validate();
  RankReport r = evbmf_rank(w.cast<double>());
  const std::size_t rank = clamp_rank(r.estimated_rank, policy.min_rank, std::min(w.rows(), w.cols()));
  return {rank, std::move(r)};
}

} // namespace lrc
