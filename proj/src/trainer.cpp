#include "lrc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lrc/conv_exec.hpp"

namespace lrc {

namespace {

// Adds λ·∇(L_R3 + L_R4) to the factor gradients and returns Σ penalties.
double add_ortho_terms(const Model& model, ModelGrad& grad, const OrthoConfig& ortho, bool with_grad) {
  double total = 0.0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto* f = std::get_if<FactorizedConv>(&model.layers[i].block);
    if (!f) continue;
    const MatrixD u3 = f->u3.cast<double>(), u4 = f->u4.cast<double>();
    total += ortho_penalty(u3, ortho.rho) + ortho_penalty(u4, ortho.rho);
    if (!with_grad || ortho.lambda == 0.0 || ortho.rho == 0.0) continue;
    auto& g = std::get<FactorizedConv>(grad[i]);
    const MatrixD g3 = ortho_penalty_grad(u3, ortho.rho);
    const MatrixD g4 = ortho_penalty_grad(u4, ortho.rho);
    for (std::size_t k = 0; k < g3.size(); ++k) g.u3.data()[k] += static_cast<float>(ortho.lambda * g3.data()[k]);
    for (std::size_t k = 0; k < g4.size(); ++k) g.u4.data()[k] += static_cast<float>(ortho.lambda * g4.data()[k]);
  }
  return total;
}

double schedule_rate(const std::vector<LrStep>& schedule, std::size_t epoch) {
  double rate = schedule.front().rate;
  for (const auto& step : schedule)
    if (epoch >= step.epoch) rate = step.rate;
  return rate;
}

void validate_schedule(const std::vector<LrStep>& schedule, const std::string& what) {
  require(!schedule.empty(), what + " must not be empty");
  require(schedule.front().epoch == 0, what + " must start at epoch 0");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    require(schedule[i].rate > 0.0, "learning rates must be positive");
    if (i) require(schedule[i].epoch > schedule[i - 1].epoch, what + " epochs must strictly increase");
  }
}

TrainResult run_sgd(Model model, const Dataset& data, const TrainConfig& cfg, std::size_t epochs,
                    const std::vector<LrStep>& schedule, const OrthoConfig& ortho, std::uint64_t stream) {
  cfg.validate();
  require(data.size() > 0, "training needs a non-empty dataset");
  data.validate();
  model.validate();
  require(data.channels() == model.input.channels && data.height() == model.input.height &&
              data.width() == model.input.width,
          "dataset image shape does not match the model input");
  require(data.classes <= model.classes, "dataset has more classes than the model head");

  std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ull * stream));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = schedule_rate(schedule, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      ModelGrad grad = zero_grad(model);
      const double loss =
          batch_loss_grad(model, data, std::span<const std::size_t>(order).subspan(start, end - start), ortho, grad);
      if (!std::isfinite(loss)) fail(ErrorCode::numeric, "training loss became non-finite at epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(end - start);

      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto params = parameter_spans(model.layers[l].block);
        auto grads = parameter_spans(std::as_const(grad[l]));
        for (std::size_t p = 0; p < params.size(); ++p)
          for (std::size_t k = 0; k < params[p].size(); ++k)
            params[p][k] = static_cast<float>(params[p][k] - lr * grads[p][k]);
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  result.model = std::move(model);
  return result;
}

} // namespace

double batch_loss_grad(const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                       const OrthoConfig& ortho, ModelGrad& grad) {
  require(!batch.empty(), "batch_loss_grad: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<float> d_logits;
  double ce = 0.0;
  for (std::size_t idx : batch) {
    require(idx < data.size(), "batch_loss_grad: sample index out of range");
    const ForwardTrace tr = forward_trace(model, data.image(idx));
    ce += softmax_cross_entropy(tr.logits, data.labels[idx], &d_logits);
    for (auto& v : d_logits) v = static_cast<float>(v * inv);
    backward(model, tr, d_logits, grad);
  }
  ce *= inv;
  const double penalty = ortho.lambda > 0.0 ? add_ortho_terms(model, grad, ortho, true) : 0.0;
  return ce + ortho.lambda * penalty;
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs_overparam = 30;
  c.epochs_lowrank = 30;
  c.batch_size = 4;
  return c;
}

double TrainConfig::learning_rate(std::size_t epoch) const { return schedule_rate(lr_schedule, epoch); }

double TrainConfig::lowrank_learning_rate(std::size_t epoch) const {
  return schedule_rate(lr_schedule_lowrank, epoch);
}

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch_size must be >= 1");
  validate_schedule(lr_schedule, "lr_schedule");
  validate_schedule(lr_schedule_lowrank, "lr_schedule_lowrank");
  ortho.validate();
}

TrainResult train_overparam(Model model, const Dataset& data, const TrainConfig& cfg) {
  require(data.size() > 0, "train_overparam: empty dataset");
  return run_sgd(std::move(model), data, cfg, cfg.epochs_overparam, cfg.lr_schedule, cfg.ortho, 1);
}

TrainResult retrain_lowrank(Model model, const Dataset& data, const TrainConfig& cfg) {
  require(data.size() > 0, "retrain_lowrank: empty dataset");
  OrthoConfig ortho = cfg.ortho;
  if (!cfg.keep_ortho_phase2) ortho.lambda = 0.0;
  return run_sgd(std::move(model), data, cfg, cfg.epochs_lowrank, cfg.lr_schedule_lowrank, ortho, 2);
}

Model truncate_model(const Model& model, const std::vector<LayerRanks>& ranks) {
  require(ranks.size() == model.layers.size(), "truncate_model: need one rank entry per layer");
  Model out = model;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (layer.is_conv()) {
      const auto* r = std::get_if<ConvRanks>(&ranks[i]);
      require(r != nullptr, "truncate_model: conv layer '" + layer.name + "' needs (R3, R4)");
      std::size_t stride, padding;
      if (auto* c = std::get_if<ConvLayerSpec>(&layer.block)) {
        stride = c->stride, padding = c->padding;
      } else {
        const auto& f = std::get<FactorizedConv>(layer.block);
        stride = f.stride, padding = f.padding;
      }
      out.layers[i].block = factorize_conv_layer(ConvLayerSpec{dense_kernel(layer), stride, padding}, r->r3, r->r4);
    } else {
      const auto* r = std::get_if<std::size_t>(&ranks[i]);
      require(r != nullptr, "truncate_model: FC layer '" + layer.name + "' needs a single rank");
      out.layers[i].block = tsvd_truncate(dense_weight(layer), *r);
    }
  }
  return out;
}

RankPlan plan_ranks(const Model& model, const RankPolicy& policy) {
  RankPlan plan;
  for (const auto& layer : model.layers) {
    if (layer.is_conv()) {
      ConvRankSelection sel = select_conv_ranks(dense_kernel(layer), policy);
      sel.mode3.layer_id = layer.name + ".mode3";
      plan.reports.push_back(std::move(sel.mode3));
      if (policy.r4_rule == FourthModeRule::vbmf_independent) {
        sel.mode4.layer_id = layer.name + ".mode4";
        plan.reports.push_back(std::move(sel.mode4));
      }
      plan.ranks.emplace_back(ConvRanks{sel.r3, sel.r4});
    } else {
      auto [r, report] = select_fc_rank(dense_weight(layer), policy);
      report.layer_id = layer.name;
      plan.reports.push_back(std::move(report));
      plan.ranks.emplace_back(r);
    }
  }
  return plan;
}

CompressionReport build_report(const Model& reference, const Model& compressed) {
  require(reference.layers.size() == compressed.layers.size(), "build_report: models differ in depth");
  CompressionReport report;
  const auto geo = conv_geometry(compressed);
  for (std::size_t i = 0; i < compressed.layers.size(); ++i) {
    const Layer& l = compressed.layers[i];
    const Block& b = l.block;
    if (auto* f = std::get_if<FactorizedConv>(&b)) {
      const auto& g = geo[i];
      report.layers.push_back(conv_layer_report(l.name, f->kernel_size(), f->in_channels(), f->out_channels(),
                                                f->rank3(), f->rank4(), g.h, g.w, g.ho, g.wo));
    } else if (auto* c = std::get_if<ConvLayerSpec>(&b)) {
      // an unfactorized layer counts as the original: CR = SR = 1
      LayerReport r = conv_layer_report(l.name, c->kernel_size(), c->in_channels(), c->out_channels(), 1, 1,
                                        geo[i].h, geo[i].w, geo[i].ho, geo[i].wo);
      r.ranks.clear();
      r.p_compressed = r.p_original;
      r.cr = r.sr = 1.0;
      report.layers.push_back(std::move(r));
    } else if (auto* fc = std::get_if<FactorizedFc>(&b)) {
      report.layers.push_back(fc_layer_report(l.name, fc->in_features(), fc->out_features(), fc->rank()));
    } else {
      const auto& w = std::get<FcLayerSpec>(b).weight;
      LayerReport r = fc_layer_report(l.name, w.rows(), w.cols(), 1);
      r.ranks.clear();
      r.p_compressed = r.p_original;
      r.cr = r.sr = 1.0;
      report.layers.push_back(std::move(r));
    }
    require(report.layers.back().p_original == dense_parameter_count(reference.layers[i]),
            "build_report: layer '" + l.name + "' changed shape");
  }
  finalize_totals(report);
  return report;
}

double orthogonality_residual(const Model& model) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& l : model.layers)
    if (auto* f = std::get_if<FactorizedConv>(&l.block)) {
      sum += ortho_residual(f->u3) + ortho_residual(f->u4);
      n += 2;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double evaluate_top1(const Model& model, const Dataset& data) {
  require(data.size() > 0, "evaluate: empty dataset");
  std::vector<std::size_t> pred(data.size()), labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    pred[i] = argmax(forward(model, data.image(i)));
    labels[i] = data.labels[i];
  }
  return top1(pred, labels);
}

double dataset_loss(const Model& model, const Dataset& data, const OrthoConfig& ortho) {
  require(data.size() > 0, "dataset_loss: empty dataset");
  double ce = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    ce += softmax_cross_entropy(forward(model, data.image(i)), data.labels[i], nullptr);
  ce /= static_cast<double>(data.size());
  ModelGrad unused;
  return ce + ortho.lambda * add_ortho_terms(model, unused, ortho, false);
}

PipelineResult compress_pipeline(const Architecture& arch, const Dataset& data, const TrainConfig& cfg,
                                 const RankPolicy& policy) {
  cfg.validate();
  policy.validate();
  PipelineResult out;
  Model init = init_model(arch, cfg.seed);
  TrainResult phase1 = train_overparam(std::move(init), data, cfg);
  out.history_overparam = std::move(phase1.loss_history);

  RankPlan plan = plan_ranks(phase1.model, policy);
  Model truncated = truncate_model(phase1.model, plan.ranks);
  TrainResult phase2 = retrain_lowrank(std::move(truncated), data, cfg);
  out.history_lowrank = std::move(phase2.loss_history);

  out.report = build_report(phase1.model, phase2.model);
  out.report.rank_reports = std::move(plan.reports);
  out.report.top1_before = evaluate_top1(phase1.model, data);
  out.report.top1_after = evaluate_top1(phase2.model, data);
  out.model = std::move(phase2.model);
  return out;
}

} // namespace lrc
