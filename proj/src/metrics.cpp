#include "lrc/metrics.hpp"

#include "lrc/error.hpp"

namespace lrc {

ParamCounts conv_param_counts(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4) {
  require(r3 >= 1 && r3 <= s && r4 >= 1 && r4 <= t, "conv ranks outside [1, S] x [1, T]");
  return {d * d * s * t, s * r3 + d * d * r3 * r4 + t * r4};
}

Ratio conv_speedup(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4, std::size_t h,
                   std::size_t w, std::size_t ho, std::size_t wo) {
  require(r3 >= 1 && r4 >= 1, "conv ranks must be >= 1");
  const std::uint64_t out_px = ho * wo;
  return {t * s * d * d * out_px, r3 * s * h * w + r3 * r4 * d * d * out_px + t * r4 * out_px};
}

Ratio fc_cr(std::size_t m, std::size_t n, std::size_t r) {
  require(r >= 1, "FC rank must be >= 1");
  return {m * n, m * r + r * n};
}

double printed_conv_cr(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4) {
  const double num = static_cast<double>(t * s * d * d);
  return num / static_cast<double>(r3 * s + r3 * d * d + t * r4);
}

double printed_conv_sr(std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4, std::size_t h,
                       std::size_t w, std::size_t ho, std::size_t wo) {
  const double out_px = static_cast<double>(ho * wo);
  const double num = static_cast<double>(t * s * d * d) * out_px;
  return num / (static_cast<double>(r3 * s * h * w) + static_cast<double>(r3 * d * d) * out_px +
                static_cast<double>(t * r4) * out_px);
}

double top1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  require(predictions.size() == labels.size(), "top1: prediction and label counts differ");
  require(!labels.empty(), "top1: no samples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

LayerReport conv_layer_report(std::string id, std::size_t d, std::size_t s, std::size_t t, std::size_t r3,
                              std::size_t r4, std::size_t h, std::size_t w, std::size_t ho, std::size_t wo) {
  LayerReport r;
  r.id = std::move(id);
  r.kind = ReportLayerKind::conv;
  r.d = d, r.s = s, r.t = t, r.h = h, r.w = w, r.ho = ho, r.wo = wo;
  r.ranks = {r3, r4};
  const ParamCounts p = conv_param_counts(d, s, t, r3, r4);
  r.p_original = p.original;
  r.p_compressed = p.compressed;
  r.cr = p.ratio().value();
  r.sr = conv_speedup(d, s, t, r3, r4, h, w, ho, wo).value();
  return r;
}

LayerReport fc_layer_report(std::string id, std::size_t m, std::size_t n, std::size_t rank) {
  LayerReport r;
  r.id = std::move(id);
  r.kind = ReportLayerKind::fc;
  r.m = m, r.n = n;
  r.ranks = {rank};
  const Ratio c = fc_cr(m, n, rank);
  r.p_original = c.num;
  r.p_compressed = c.den;
  r.cr = r.sr = c.value();
  return r;
}

void finalize_totals(CompressionReport& report) {
  report.p_original = report.p_compressed = 0;
  for (const auto& l : report.layers) {
    report.p_original += l.p_original;
    report.p_compressed += l.p_compressed;
  }
}

void CompressionReport::validate() const {
  std::uint64_t po = 0, pc = 0;
  for (const auto& l : layers) {
    require(l.cr > 0.0, "layer '" + l.id + "' has non-positive CR");
    po += l.p_original;
    pc += l.p_compressed;
  }
  require(po == p_original && pc == p_compressed, "report totals do not match per-layer sums");
}

double model_cr(const CompressionReport& report) {
  require(report.p_compressed > 0, "model_cr: compressed parameter count is zero");
  return static_cast<double>(report.p_original) / static_cast<double>(report.p_compressed);
}

} // namespace lrc
