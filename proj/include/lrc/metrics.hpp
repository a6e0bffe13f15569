#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrc/rank_select.hpp"

namespace lrc {

/// Exact integer ratio num/den.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Ratio&) const = default;
};

struct ParamCounts {
  std::uint64_t original = 0;
  std::uint64_t compressed = 0;

  Ratio ratio() const { return {original, compressed}; }
};

/// (D²ST, S·R3 + D²·R3·R4 + T·R4)
ParamCounts conv_param_counts(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4);

/// Multiply counts: T·S·D²·H′W′ over R3·S·HW + R3·R4·D²·H′W′ + T·R4·H′W′.
Ratio conv_speedup(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4, std::size_t h,
                   std::size_t w, std::size_t ho, std::size_t wo);

/// MN / (MR + RN); compression and speed-up coincide for FC layers.
Ratio fc_cr(std::size_t m, std::size_t n, std::size_t r);

/// Literal single-rank closed forms TSD²/(RS + RD² + TR) and
/// TSD²W′H′/(RSWH + RD²W′H′ + TRW′H′), kept for comparison with the exact
/// counts above. R3 stands in for R in the first two terms and R4 in the last.
double printed_conv_cr(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4);
double printed_conv_sr(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4, std::size_t h,
                       std::size_t w, std::size_t ho, std::size_t wo);

/// Top-1 accuracy in percent.
double top1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

enum class ReportLayerKind { conv, fc };

struct LayerReport {
  std::string id;
  ReportLayerKind kind = ReportLayerKind::conv;
  // conv: D, S, T, H, W, H', W'; fc: M, N
  std::size_t d = 0, s = 0, t = 0, h = 0, w = 0, ho = 0, wo = 0;
  std::size_t m = 0, n = 0;
  std::vector<std::size_t> ranks;  // conv: R3, R4; fc: R
  std::uint64_t p_original = 0;
  std::uint64_t p_compressed = 0;
  double cr = 0.0;
  double sr = 0.0;
};

struct CompressionReport {
  std::vector<LayerReport> layers;
  std::uint64_t p_original = 0;
  std::uint64_t p_compressed = 0;
  double top1_before = -1.0;  // negative: not measured
  double top1_after = -1.0;
  std::vector<RankReport> rank_reports;

  void validate() const;
};

LayerReport conv_layer_report(std::string id, std::size_t d, std::size_t s, std::size_t t, std::size_t r3,
                              std::size_t r4, std::size_t h, std::size_t w, std::size_t ho, std::size_t wo);
LayerReport fc_layer_report(std::string id, std::size_t m, std::size_t n, std::size_t r);

/// Sets the model totals from the per-layer entries.
void finalize_totals(CompressionReport& report);

/// P_original / P_compressed over the whole model.
double model_cr(const CompressionReport& report);

} // namespace lrc
