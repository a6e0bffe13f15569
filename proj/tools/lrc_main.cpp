// lrc: command-line front end over the C interface.
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrc/lrc.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct Failure {
  lrc_status status;
};

int exit_code(lrc_status s) {
  switch (s) {
  case LRC_OK: return kExitOk;
  case LRC_ERR_INVALID_ARGUMENT: return kExitUsage;
  case LRC_ERR_NUMERIC: return kExitNumeric;
  case LRC_ERR_INTERNAL: return kExitInternal;
  default: return kExitIo;
  }
}

void check(lrc_status s) {
  if (s != LRC_OK) throw Failure{s};
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Model = Handle<lrc_model, lrc_model_free>;
using Data = Handle<lrc_dataset, lrc_dataset_free>;
using Report = Handle<lrc_report, lrc_report_free>;

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  lrc_string_free(s);
  return out;
}

struct DataArgs {
  std::string source;
  std::size_t samples = 200;
  double noise = 0.05;
  double margin = 1.0;
  std::uint64_t seed = 0;
  bool cifar100 = false;
};

void add_data_options(CLI::App* cmd, DataArgs& d, bool required) {
  cmd->add_option("--data", d.source, "CIFAR batch file/directory, or 'synth'")->required(required);
  cmd->add_option("--samples", d.samples, "synthetic sample count")->check(CLI::PositiveNumber);
  cmd->add_option("--noise", d.noise, "synthetic pixel noise std")->check(CLI::NonNegativeNumber);
  cmd->add_option("--margin", d.margin, "synthetic class-signal amplitude")->check(CLI::PositiveNumber);
  cmd->add_option("--data-seed", d.seed, "synthetic data seed");
  cmd->add_flag("--cifar100", d.cifar100, "parse a CIFAR-100 batch file");
}

// Synthetic data is shaped after `shape_of`.
void load_data(const DataArgs& d, const lrc_model* shape_of, Data& out) {
  if (d.source == "synth") {
    lrc_synth_options o;
    lrc_synth_options_default(&o);
    o.count = d.samples;
    o.noise = d.noise;
    o.margin = d.margin;
    o.seed = d.seed;
    o.classes = lrc_model_classes(shape_of);
    lrc_model_input(shape_of, &o.channels, &o.height, &o.width);
    check(lrc_dataset_synth(&o, out.out()));
  } else {
    check(lrc_dataset_load_cifar(d.source.c_str(), d.cifar100 ? 1 : 0, out.out()));
  }
}

lrc_r4_rule parse_policy(const std::string& s) {
  return s == "vbmf_independent" ? LRC_R4_VBMF_INDEPENDENT : LRC_R4_CHANNEL_RATIO;
}

void load_train(const std::string& config, std::optional<double> rho, std::optional<double> lambda,
                std::uint64_t seed, bool keep_ortho, lrc_train_options& t, bool desk = false) {
  if (desk)
    lrc_train_options_desk(&t);
  else
    lrc_train_options_default(&t);
  if (!config.empty()) check(lrc_train_options_load(config.c_str(), &t));
  if (rho) t.rho = *rho;
  if (lambda) t.lambda = *lambda;
  if (keep_ortho) t.keep_ortho_phase2 = 1;
  t.seed = seed;
}

void write_outputs(const Model& model, const Report* report, const std::string& dir) {
  check(lrc_model_save(model.get(), dir.c_str()));
  if (report != nullptr) {
    check(lrc_report_save(report->get(), dir.c_str()));
    char* text = nullptr;
    check(lrc_report_render(report->get(), 0, &text));
    std::cout << take(text);
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank compression of convolutional networks"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for initialization and training")->envname("LRC_SEED");

  std::string model_path, out_dir, policy = "channel_ratio", config, arch;
  std::size_t r3 = 0, r4 = 0, fc_rank = 0;
  std::optional<double> rho, lambda;
  bool auto_ranks = false, pipeline = false, paper_formula = false, keep_ortho = false;
  DataArgs data;
  const std::vector<std::string> policies{"channel_ratio", "vbmf_independent"};

  CLI::App* ranks = app.add_subcommand("ranks", "estimate per-layer ranks with VBMF");
  ranks->add_option("model", model_path, "model directory")->required();
  ranks->add_option("--policy", policy, "fourth-mode rank rule")->check(CLI::IsMember(policies));

  CLI::App* compress = app.add_subcommand("compress", "factorize a model at chosen or estimated ranks");
  compress->add_option("model", model_path, "model directory (architecture with --pipeline)")->required();
  compress->add_option("--out", out_dir, "output directory")->required();
  auto* r3_opt = compress->add_option("--r3", r3, "input-channel rank")->check(CLI::PositiveNumber);
  auto* r4_opt = compress->add_option("--r4", r4, "output-channel rank")->check(CLI::PositiveNumber);
  auto* fc_opt = compress->add_option("--fc-rank", fc_rank, "FC rank")->check(CLI::PositiveNumber);
  auto* auto_opt = compress->add_flag("--auto", auto_ranks, "estimate ranks with VBMF");
  auto_opt->excludes(r3_opt)->excludes(r4_opt)->excludes(fc_opt);
  compress->add_option("--rho", rho, "orthogonality weight")->check(CLI::NonNegativeNumber);
  compress->add_option("--lambda", lambda, "regularization weight")->check(CLI::NonNegativeNumber);
  compress->add_option("--policy", policy, "fourth-mode rank rule")->check(CLI::IsMember(policies));
  compress->add_option("--config", config, "training config (retraining schedule)");
  compress->add_flag("--keep-ortho-phase2", keep_ortho, "keep the orthogonality penalty while retraining");
  compress->add_flag("--pipeline", pipeline, "train from scratch, estimate ranks, truncate, retrain");
  add_data_options(compress, data, false);

  CLI::App* train = app.add_subcommand("train", "over-parameterized training");
  train->add_option("arch", arch, "architecture config or 'tinynet'")->required();
  train->add_option("--config", config, "training config")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--rho", rho, "orthogonality weight")->check(CLI::NonNegativeNumber);
  train->add_option("--lambda", lambda, "regularization weight")->check(CLI::NonNegativeNumber);
  train->add_option("--policy", policy, "fourth-mode rank rule")->check(CLI::IsMember(policies));
  train->add_flag("--keep-ortho-phase2", keep_ortho, "keep the orthogonality penalty while retraining");
  train->add_flag("--pipeline", pipeline, "continue with rank selection, truncation and retraining");
  add_data_options(train, data, true);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Top-1 accuracy of a model");
  evaluate->add_option("model", model_path, "model directory")->required();
  add_data_options(evaluate, data, true);

  CLI::App* report = app.add_subcommand("report", "render a compression report");
  report->add_option("dir", model_path, "report directory or file")->required();
  report->add_flag("--paper-formula", paper_formula, "single-rank closed-form CR/SR for conv layers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  lrc_rank_policy rank_policy;
  lrc_rank_policy_default(&rank_policy);
  rank_policy.r4_rule = parse_policy(policy);

  try {
    if (ranks->parsed()) {
      Model m;
      check(lrc_model_load(model_path.c_str(), m.out()));
      char* text = nullptr;
      check(lrc_ranks(m.get(), &rank_policy, &text));
      std::cout << take(text);
    } else if (compress->parsed() && pipeline) {
      if (data.source.empty()) data.source = "synth";
      lrc_train_options t;
      load_train(config, rho, lambda, seed, keep_ortho, t);
      Model shape;
      check(lrc_model_init(model_path.c_str(), seed, shape.out()));
      Data d;
      load_data(data, shape.get(), d);
      Model m;
      Report r;
      check(lrc_pipeline(model_path.c_str(), d.get(), &t, &rank_policy, m.out(), r.out()));
      write_outputs(m, &r, out_dir);
    } else if (compress->parsed()) {
      if (!auto_ranks && r3 == 0 && r4 == 0 && fc_rank == 0) auto_ranks = true;
      Model src;
      check(lrc_model_load(model_path.c_str(), src.out()));
      lrc_compress_options o;
      lrc_compress_options_default(&o);
      o.auto_ranks = auto_ranks ? 1 : 0;
      o.r3 = r3;
      o.r4 = r4;
      o.fc_rank = fc_rank;
      o.policy = rank_policy;
      load_train(config, rho, lambda, seed, keep_ortho, o.train, true);
      Data d;
      if (!data.source.empty()) {
        load_data(data, src.get(), d);
        o.data = d.get();
      }
      Model m;
      Report r;
      check(lrc_compress(src.get(), &o, m.out(), r.out()));
      write_outputs(m, &r, out_dir);
    } else if (train->parsed()) {
      lrc_train_options t;
      load_train(config, rho, lambda, seed, keep_ortho, t);
      Model init;
      check(lrc_model_init(arch.c_str(), seed, init.out()));
      Data d;
      load_data(data, init.get(), d);
      Model m;
      if (pipeline) {
        Report r;
        check(lrc_pipeline(arch.c_str(), d.get(), &t, &rank_policy, m.out(), r.out()));
        if (!out_dir.empty()) {
          write_outputs(m, &r, out_dir);
        } else {
          char* text = nullptr;
          check(lrc_report_render(r.get(), 0, &text));
          std::cout << take(text);
        }
      } else {
        std::vector<double> history(t.epochs_overparam);
        std::size_t len = 0;
        check(lrc_train(init.get(), d.get(), &t, m.out(), history.data(), history.size(), &len));
        for (std::size_t e = 0; e < len && e < history.size(); ++e)
          std::printf("epoch %zu loss %.6f\n", e + 1, history[e]);
        double top1 = 0.0;
        check(lrc_evaluate(m.get(), d.get(), &top1));
        std::printf("top1 %.2f\northo_residual %.6f\n", top1, lrc_model_ortho_residual(m.get()));
        if (!out_dir.empty()) write_outputs(m, nullptr, out_dir);
      }
    } else if (evaluate->parsed()) {
      Model m;
      check(lrc_model_load(model_path.c_str(), m.out()));
      Data d;
      load_data(data, m.get(), d);
      double top1 = 0.0;
      check(lrc_evaluate(m.get(), d.get(), &top1));
      std::printf("top1 %.2f\n", top1);
    } else if (report->parsed()) {
      Report r;
      check(lrc_report_load(model_path.c_str(), r.out()));
      char* text = nullptr;
      check(lrc_report_render(r.get(), paper_formula ? 1 : 0, &text));
      std::cout << take(text);
    }
  } catch (const Failure& f) {
    std::cerr << "lrc: " << lrc_status_name(f.status) << ": " << lrc_last_error() << "\n";
    return exit_code(f.status);
  }
  return kExitOk;
}
