#include "lrc/lrc.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "lrc/dataset.hpp"
#include "lrc/error.hpp"
#include "lrc/kv_config.hpp"
#include "lrc/model.hpp"
#include "lrc/model_io.hpp"
#include "lrc/report.hpp"
#include "lrc/trainer.hpp"

struct lrc_model {
  lrc::Model model;
};

struct lrc_dataset {
  lrc::Dataset data;
};

struct lrc_report {
  lrc::CompressionReport report;
};

namespace {

thread_local std::string g_last_error;

lrc_status to_status(lrc::ErrorCode code) {
  switch (code) {
  case lrc::ErrorCode::invalid_argument: return LRC_ERR_INVALID_ARGUMENT;
  case lrc::ErrorCode::io: return LRC_ERR_IO;
  case lrc::ErrorCode::format: return LRC_ERR_FORMAT;
  case lrc::ErrorCode::checksum_mismatch: return LRC_ERR_CHECKSUM;
  case lrc::ErrorCode::truncated_blob: return LRC_ERR_TRUNCATED;
  case lrc::ErrorCode::unknown_kind: return LRC_ERR_UNKNOWN_KIND;
  case lrc::ErrorCode::version_skew: return LRC_ERR_VERSION;
  case lrc::ErrorCode::numeric: return LRC_ERR_NUMERIC;
  }
  return LRC_ERR_INTERNAL;
}

template <class F>
lrc_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LRC_OK;
  } catch (const lrc::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LRC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LRC_ERR_INTERNAL;
  }
}

void require_ptr(const void* p, const char* what) {
  if (p == nullptr) lrc::fail(lrc::ErrorCode::invalid_argument, std::string("null argument: ") + what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

lrc::RankPolicy to_policy(const lrc_rank_policy* p) {
  lrc::RankPolicy policy;
  if (p != nullptr) {
    policy.r4_rule = p->r4_rule == LRC_R4_VBMF_INDEPENDENT ? lrc::FourthModeRule::vbmf_independent
                                                           : lrc::FourthModeRule::channel_ratio;
    policy.min_rank = p->min_rank;
    policy.rank_cap_fraction = p->rank_cap_fraction;
  }
  policy.validate();
  return policy;
}

void put_schedule(const std::vector<lrc::LrStep>& s, size_t* steps, size_t* epochs, double* rates) {
  if (s.size() > LRC_MAX_LR_STEPS) lrc::fail(lrc::ErrorCode::invalid_argument, "learning-rate schedule too long");
  *steps = s.size();
  for (std::size_t i = 0; i < LRC_MAX_LR_STEPS; ++i) {
    epochs[i] = i < s.size() ? s[i].epoch : 0;
    rates[i] = i < s.size() ? s[i].rate : 0.0;
  }
}

std::vector<lrc::LrStep> get_schedule(size_t steps, const size_t* epochs, const double* rates) {
  if (steps > LRC_MAX_LR_STEPS) lrc::fail(lrc::ErrorCode::invalid_argument, "learning-rate schedule too long");
  std::vector<lrc::LrStep> s;
  for (std::size_t i = 0; i < steps; ++i) s.push_back({epochs[i], rates[i]});
  return s;
}

void from_config(const lrc::TrainConfig& cfg, lrc_train_options* o) {
  o->epochs_overparam = cfg.epochs_overparam;
  o->epochs_lowrank = cfg.epochs_lowrank;
  o->batch_size = cfg.batch_size;
  put_schedule(cfg.lr_schedule, &o->lr_steps, o->lr_epochs, o->lr_rates);
  put_schedule(cfg.lr_schedule_lowrank, &o->lowrank_lr_steps, o->lowrank_lr_epochs, o->lowrank_lr_rates);
  o->rho = cfg.ortho.rho;
  o->lambda = cfg.ortho.lambda;
  o->seed = cfg.seed;
  o->keep_ortho_phase2 = cfg.keep_ortho_phase2 ? 1 : 0;
}

lrc::TrainConfig to_config(const lrc_train_options* o) {
  lrc::TrainConfig cfg;
  if (o == nullptr) return cfg;
  cfg.epochs_overparam = o->epochs_overparam;
  cfg.epochs_lowrank = o->epochs_lowrank;
  cfg.batch_size = o->batch_size;
  cfg.lr_schedule = get_schedule(o->lr_steps, o->lr_epochs, o->lr_rates);
  cfg.lr_schedule_lowrank = get_schedule(o->lowrank_lr_steps, o->lowrank_lr_epochs, o->lowrank_lr_rates);
  cfg.ortho.rho = o->rho;
  cfg.ortho.lambda = o->lambda;
  cfg.seed = o->seed;
  cfg.keep_ortho_phase2 = o->keep_ortho_phase2 != 0;
  cfg.validate();
  return cfg;
}

std::vector<lrc::LayerRanks> fixed_ranks(const lrc::Model& model, const lrc_compress_options& o) {
  std::vector<lrc::LayerRanks> ranks;
  for (const lrc::Layer& layer : model.layers) {
    if (layer.is_conv()) {
      lrc::Tensor k = lrc::dense_kernel(layer);
      std::size_t s = k.dim(2), t = k.dim(3);
      std::size_t r3 = o.r3 == 0 ? s : std::clamp<std::size_t>(o.r3, 1, s);
      std::size_t r4 = o.r4 == 0 ? t : std::clamp<std::size_t>(o.r4, 1, t);
      ranks.emplace_back(lrc::ConvRanks{r3, r4});
    } else {
      lrc::Matrix w = lrc::dense_weight(layer);
      std::size_t full = std::min(w.rows(), w.cols());
      ranks.emplace_back(o.fc_rank == 0 ? full : std::clamp<std::size_t>(o.fc_rank, 1, full));
    }
  }
  return ranks;
}

} // namespace

extern "C" {

const char* lrc_version(void) { return "0.1.0"; }

const char* lrc_last_error(void) { return g_last_error.c_str(); }

const char* lrc_status_name(lrc_status status) {
  switch (status) {
  case LRC_OK: return "ok";
  case LRC_ERR_INVALID_ARGUMENT: return "invalid argument";
  case LRC_ERR_IO: return "i/o error";
  case LRC_ERR_FORMAT: return "format error";
  case LRC_ERR_CHECKSUM: return "checksum mismatch";
  case LRC_ERR_TRUNCATED: return "truncated blob";
  case LRC_ERR_UNKNOWN_KIND: return "unknown layer kind";
  case LRC_ERR_VERSION: return "unsupported format version";
  case LRC_ERR_NUMERIC: return "numeric failure";
  case LRC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void lrc_string_free(char* s) { std::free(s); }

void lrc_rank_policy_default(lrc_rank_policy* policy) {
  if (policy == nullptr) return;
  lrc::RankPolicy p;
  policy->r4_rule = LRC_R4_CHANNEL_RATIO;
  policy->min_rank = p.min_rank;
  policy->rank_cap_fraction = p.rank_cap_fraction;
}

void lrc_train_options_default(lrc_train_options* options) {
  if (options != nullptr) from_config(lrc::TrainConfig{}, options);
}

void lrc_train_options_desk(lrc_train_options* options) {
  if (options != nullptr) from_config(lrc::TrainConfig::desk(), options);
}

lrc_status lrc_train_options_load(const char* path, lrc_train_options* options) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(options, "options");
    lrc::TrainConfig base = to_config(options);
    from_config(lrc::parse_train_config(lrc::read_kv_file(path), base), options);
  });
}

void lrc_synth_options_default(lrc_synth_options* options) {
  if (options == nullptr) return;
  lrc::SynthSpec s;
  options->count = s.count;
  options->classes = s.classes;
  options->channels = s.channels;
  options->height = s.height;
  options->width = s.width;
  options->margin = s.margin;
  options->noise = s.noise;
  options->seed = 0;
}

void lrc_compress_options_default(lrc_compress_options* options) {
  if (options == nullptr) return;
  options->auto_ranks = 1;
  options->r3 = 0;
  options->r4 = 0;
  options->fc_rank = 0;
  lrc_rank_policy_default(&options->policy);
  options->data = nullptr;
  lrc_train_options_desk(&options->train);
}

lrc_status lrc_model_init(const char* arch, uint64_t seed, lrc_model** out) {
  return guarded([&] {
    require_ptr(arch, "arch");
    require_ptr(out, "out");
    *out = new lrc_model{lrc::init_model(lrc::load_architecture(arch), seed)};
  });
}

lrc_status lrc_model_load(const char* dir, lrc_model** out) {
  return guarded([&] {
    require_ptr(dir, "dir");
    require_ptr(out, "out");
    *out = new lrc_model{lrc::load_model(dir)};
  });
}

lrc_status lrc_model_save(const lrc_model* model, const char* dir) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(dir, "dir");
    lrc::save_model(model->model, dir);
  });
}

lrc_status lrc_model_describe(const lrc_model* model, char** text) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(text, "text");
    const lrc::Model& m = model->model;
    std::ostringstream os;
    os << "input " << m.input.channels << "x" << m.input.height << "x" << m.input.width << ", classes "
       << m.classes << ", parameters " << m.parameter_count() << "\n";
    for (const lrc::Layer& layer : m.layers) {
      os << "  " << layer.name << " " << lrc::kind_name(layer.kind());
      std::visit(
          [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, lrc::ConvLayerSpec>) {
              os << " D=" << b.kernel_size() << " S=" << b.in_channels() << " T=" << b.out_channels();
            } else if constexpr (std::is_same_v<B, lrc::FactorizedConv>) {
              os << " D=" << b.core.dim(0) << " S=" << b.u3.rows() << " T=" << b.u4.rows() << " R3=" << b.rank3()
                 << " R4=" << b.rank4();
            } else if constexpr (std::is_same_v<B, lrc::FcLayerSpec>) {
              os << " M=" << b.weight.rows() << " N=" << b.weight.cols();
            } else {
              os << " M=" << b.a.rows() << " N=" << b.b.cols() << " R=" << b.rank();
            }
          },
          layer.block);
      std::size_t params = 0;
      for (auto span : lrc::parameter_spans(layer.block)) params += span.size();
      os << " params=" << params << "\n";
    }
    *text = dup_string(os.str());
  });
}

size_t lrc_model_layer_count(const lrc_model* model) { return model == nullptr ? 0 : model->model.layers.size(); }

size_t lrc_model_parameter_count(const lrc_model* model) {
  return model == nullptr ? 0 : model->model.parameter_count();
}

double lrc_model_ortho_residual(const lrc_model* model) {
  return model == nullptr ? 0.0 : lrc::orthogonality_residual(model->model);
}

size_t lrc_model_classes(const lrc_model* model) { return model == nullptr ? 0 : model->model.classes; }

void lrc_model_input(const lrc_model* model, size_t* channels, size_t* height, size_t* width) {
  if (model == nullptr) return;
  const lrc::InputShape& in = model->model.input;
  if (channels != nullptr) *channels = in.channels;
  if (height != nullptr) *height = in.height;
  if (width != nullptr) *width = in.width;
}

void lrc_model_free(lrc_model* model) { delete model; }

lrc_status lrc_dataset_load_cifar(const char* path, int cifar100, lrc_dataset** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    lrc::Dataset d = cifar100 ? lrc::load_cifar_file(path, lrc::CifarVariant::cifar100) : lrc::load_cifar10(path);
    *out = new lrc_dataset{std::move(d)};
  });
}

lrc_status lrc_dataset_synth(const lrc_synth_options* options, lrc_dataset** out) {
  return guarded([&] {
    require_ptr(options, "options");
    require_ptr(out, "out");
    lrc::SynthSpec s;
    s.count = options->count;
    s.classes = options->classes;
    s.channels = options->channels;
    s.height = options->height;
    s.width = options->width;
    s.margin = options->margin;
    s.noise = options->noise;
    *out = new lrc_dataset{lrc::synth_dataset(s, options->seed)};
  });
}

size_t lrc_dataset_size(const lrc_dataset* data) { return data == nullptr ? 0 : data->data.labels.size(); }

size_t lrc_dataset_label(const lrc_dataset* data, size_t index) {
  if (data == nullptr || index >= data->data.labels.size()) return 0;
  return data->data.labels[index];
}

void lrc_dataset_free(lrc_dataset* data) { delete data; }

lrc_status lrc_evaluate(const lrc_model* model, const lrc_dataset* data, double* top1) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(data, "data");
    require_ptr(top1, "top1");
    *top1 = lrc::evaluate_top1(model->model, data->data);
  });
}

lrc_status lrc_ranks(const lrc_model* model, const lrc_rank_policy* policy, char** text) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(text, "text");
    lrc::RankPlan plan = lrc::plan_ranks(model->model, to_policy(policy));
    std::ostringstream os;
    for (std::size_t i = 0; i < model->model.layers.size(); ++i) {
      os << model->model.layers[i].name << ": ";
      if (const auto* c = std::get_if<lrc::ConvRanks>(&plan.ranks[i]))
        os << "R3=" << c->r3 << " R4=" << c->r4 << "\n";
      else
        os << "R=" << std::get<std::size_t>(plan.ranks[i]) << "\n";
    }
    for (const lrc::RankReport& r : plan.reports) os << lrc::render_rank_report(r);
    *text = dup_string(os.str());
  });
}

lrc_status lrc_compress(const lrc_model* model, const lrc_compress_options* options, lrc_model** out,
                        lrc_report** report) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(options, "options");
    require_ptr(out, "out");
    const lrc::Model& src = model->model;
    lrc::RankPlan plan;
    if (options->auto_ranks) {
      plan = lrc::plan_ranks(src, to_policy(&options->policy));
    } else {
      plan.ranks = fixed_ranks(src, *options);
    }
    lrc::Model compressed = lrc::truncate_model(src, plan.ranks);
    lrc::CompressionReport rep;
    if (options->data != nullptr) {
      lrc::TrainConfig cfg = to_config(&options->train);
      double before = lrc::evaluate_top1(src, options->data->data);
      if (cfg.epochs_lowrank > 0) compressed = lrc::retrain_lowrank(std::move(compressed), options->data->data, cfg).model;
      rep = lrc::build_report(src, compressed);
      rep.top1_before = before;
      rep.top1_after = lrc::evaluate_top1(compressed, options->data->data);
    } else {
      rep = lrc::build_report(src, compressed);
    }
    rep.rank_reports = std::move(plan.reports);
    std::unique_ptr<lrc_report> r = report != nullptr ? std::make_unique<lrc_report>(lrc_report{std::move(rep)}) : nullptr;
    *out = new lrc_model{std::move(compressed)};
    if (report != nullptr) *report = r.release();
  });
}

lrc_status lrc_train(const lrc_model* model, const lrc_dataset* data, const lrc_train_options* options,
                     lrc_model** out, double* history, size_t capacity, size_t* history_len) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(data, "data");
    require_ptr(out, "out");
    lrc::TrainResult r = lrc::train_overparam(model->model, data->data, to_config(options));
    if (history != nullptr)
      std::copy_n(r.loss_history.begin(), std::min(capacity, r.loss_history.size()), history);
    if (history_len != nullptr) *history_len = r.loss_history.size();
    *out = new lrc_model{std::move(r.model)};
  });
}

lrc_status lrc_pipeline(const char* arch, const lrc_dataset* data, const lrc_train_options* options,
                        const lrc_rank_policy* policy, lrc_model** out, lrc_report** report) {
  return guarded([&] {
    require_ptr(arch, "arch");
    require_ptr(data, "data");
    require_ptr(out, "out");
    lrc::PipelineResult r =
        lrc::compress_pipeline(lrc::load_architecture(arch), data->data, to_config(options), to_policy(policy));
    std::unique_ptr<lrc_report> rep =
        report != nullptr ? std::make_unique<lrc_report>(lrc_report{std::move(r.report)}) : nullptr;
    *out = new lrc_model{std::move(r.model)};
    if (report != nullptr) *report = rep.release();
  });
}

lrc_status lrc_report_save(const lrc_report* report, const char* dir) {
  return guarded([&] {
    require_ptr(report, "report");
    require_ptr(dir, "dir");
    lrc::save_report(report->report, dir);
  });
}

lrc_status lrc_report_load(const char* dir, lrc_report** out) {
  return guarded([&] {
    require_ptr(dir, "dir");
    require_ptr(out, "out");
    *out = new lrc_report{lrc::load_report(dir)};
  });
}

lrc_status lrc_report_render(const lrc_report* report, int printed_formulas, char** text) {
  return guarded([&] {
    require_ptr(report, "report");
    require_ptr(text, "text");
    *text = dup_string(lrc::render_report(report->report, printed_formulas != 0));
  });
}

lrc_status lrc_report_json(const lrc_report* report, char** json) {
  return guarded([&] {
    require_ptr(report, "report");
    require_ptr(json, "json");
    *json = dup_string(lrc::report_to_json(report->report));
  });
}

double lrc_report_model_cr(const lrc_report* report) {
  return report == nullptr ? 0.0 : lrc::model_cr(report->report);
}

double lrc_report_top1_before(const lrc_report* report) {
  return report == nullptr ? -1.0 : report->report.top1_before;
}

double lrc_report_top1_after(const lrc_report* report) {
  return report == nullptr ? -1.0 : report->report.top1_after;
}

void lrc_report_free(lrc_report* report) { delete report; }

} // extern "C"
