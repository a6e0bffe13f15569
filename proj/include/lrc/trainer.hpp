#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "lrc/dataset.hpp"
#include "lrc/metrics.hpp"
#include "lrc/model.hpp"
#include "lrc/rank_select.hpp"
#include "lrc/regularizer.hpp"

namespace lrc {

struct LrStep {
  std::size_t epoch = 0;
  double rate = 0.1;
  bool operator==(const LrStep&) const = default;
};

struct TrainConfig {
  std::size_t epochs_overparam = 200;
  std::size_t epochs_lowrank = 60;
  std::size_t batch_size = 128;
  std::vector<LrStep> lr_schedule{{0, 0.1}, {100, 0.01}, {150, 0.001}};
  std::vector<LrStep> lr_schedule_lowrank{{0, 0.01}};  // phase 2, epochs counted from its start
  OrthoConfig ortho{};
  std::uint64_t seed = 0;
  bool keep_ortho_phase2 = false;

  /// Desk scale: 30 + 30 epochs at batch size 4.
  static TrainConfig desk();
  double learning_rate(std::size_t epoch) const;
  double lowrank_learning_rate(std::size_t epoch) const;
  void validate() const;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_history;  // per-epoch mean of the optimized loss
};

/// Mean cross-entropy over `batch` plus λ·Σ(L_R3 + L_R4); accumulates the
/// gradient of that loss into `grad` (see zero_grad).
double batch_loss_grad(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                       const OrthoConfig& ortho, ModelGrad& grad);

/// Phase 1: SGD on cross-entropy + λ·Σ(L_R3 + L_R4) over every factorized conv.
TrainResult train_overparam(Model model, const Dataset& data, const TrainConfig& cfg);

/// Phase 2: SGD on cross-entropy only, unless cfg.keep_ortho_phase2.
TrainResult retrain_lowrank(Model model, const Dataset& data, const TrainConfig& cfg);

struct ConvRanks {
  std::size_t r3 = 1;
  std::size_t r4 = 1;
};
using LayerRanks = std::variant<ConvRanks, std::size_t>;

/// Re-decompose every layer at the given ranks (one entry per layer): conv
/// layers by TK-2 of their dense kernel, FC layers by truncated SVD.
Model truncate_model(const Model& model, const std::vector<LayerRanks>& ranks);

/// Ranks chosen by VBMF for every layer, with the evidence behind them.
struct RankPlan {
  std::vector<LayerRanks> ranks;
  std::vector<RankReport> reports;
};
RankPlan plan_ranks(const Model& model, const RankPolicy& policy);

/// Per-layer counts for `compressed` against the dense version of `reference`.
CompressionReport build_report(const Model& reference, const Model& compressed);

/// Mean ‖UᵀU − I‖_F over the u3/u4 factors of all factorized conv layers.
double orthogonality_residual(const Model& model);

double evaluate_top1(const Model& model, const Dataset& data);

/// Mean cross-entropy over the dataset plus λ·Σ penalties.
double dataset_loss(const Model& model, const Dataset& data, const OrthoConfig& ortho);

struct PipelineResult {
  Model model;
  CompressionReport report;
  std::vector<double> history_overparam;
  std::vector<double> history_lowrank;
};

/// init -> phase 1 -> VBMF ranks -> truncation -> phase 2 -> report.
PipelineResult compress_pipeline(const Architecture& arch, const Dataset& data, const TrainConfig& cfg,
                                 const RankPolicy& policy);

} // namespace lrc
