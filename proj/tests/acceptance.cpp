// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   acceptance [path/to/lrc-cli] [criterion numbers...]

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "lrc/conv_exec.hpp"
#include "lrc/dataset.hpp"
#include "lrc/decomp.hpp"
#include "lrc/error.hpp"
#include "lrc/kv_config.hpp"
#include "lrc/metrics.hpp"
#include "lrc/model.hpp"
#include "lrc/model_io.hpp"
#include "lrc/rank_select.hpp"
#include "lrc/regularizer.hpp"
#include "lrc/report.hpp"
#include "lrc/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using oracle::Rng;
using oracle::Vec;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string g_cli;

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("lrc_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + g_cli + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

lrc::Tensor random_tensor(Rng& rng, lrc::Shape shape) {
  lrc::Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.uniform());
  return t;
}

// 1. Full-rank factorized forward equals the reference convolution.
Outcome lossless_full_rank() {
  Rng rng(1001);
  double worst = 0.0, worst_oracle = 0.0;
  const std::vector<std::size_t> ds{1, 3, 5}, chans{1, 3, 8, 16};
  for (int n = 0; n < 100; ++n) {
    const std::size_t d = rng.pick(ds), s = rng.pick(chans), t = rng.pick(chans);
    lrc::ConvLayerSpec layer{random_tensor(rng, {d, d, s, t}), rng.index(1, 2), rng.index(0, d / 2)};
    const std::size_t h = rng.index(d, d + 7), w = rng.index(d, d + 7);
    const lrc::Tensor x = random_tensor(rng, {s, h, w});
    const lrc::FactorizedConv f = lrc::factorize_conv_layer(layer, s, t);
    const lrc::Tensor ref = lrc::conv2d_reference(x, layer);
    const lrc::Tensor fac = lrc::conv2d_factorized(x, f);
    const Vec ref_v = oracle::to_vec(ref.data());
    worst = std::max(worst, oracle::max_rel_error(oracle::to_vec(fac.data()), ref_v));
    const Vec loops = oracle::conv(oracle::to_vec(x.data()), s, h, w, oracle::to_vec(layer.kernel.data()), d, t,
                                   layer.stride, layer.padding);
    worst_oracle = std::max(worst_oracle, oracle::max_rel_error(ref_v, loops));
  }
  return {worst < 1e-5 && worst_oracle < 1e-5,
          fmt("max rel err factorized vs reference %.2e, reference vs loop oracle %.2e", worst, worst_oracle)};
}

// 2. Truncation error equals the norm of the discarded singular values.
Outcome eckart_young() {
  Rng rng(1002);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    const std::size_t m = rng.index(1, 128), k = rng.index(1, 128), full = std::min(m, k);
    const std::size_t r = rng.index(1, full);
    Eigen::MatrixXd e(m, k);
    if (n % 2 == 0) {
      for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
    } else {
      const Vec u = oracle::random_orthonormal(rng, m, full), v = oracle::random_orthonormal(rng, k, full);
      e.setZero();
      for (std::size_t c = 0; c < full; ++c) {
        const double sv = std::pow(2.0, -static_cast<double>(c) / 4.0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) e(i, j) += sv * u[i * full + c] * v[j * full + c];
      }
    }
    lrc::MatrixD w(m, k);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) w(i, j) = e(i, j);
    const auto [a, b] = lrc::truncated_svd(w, r);
    double err2 = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        double v = w(i, j);
        for (std::size_t c = 0; c < r; ++c) v -= a(i, c) * b(c, j);
        err2 += v * v;
      }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues();
    double tail2 = 0.0;
    for (Eigen::Index i = static_cast<Eigen::Index>(r); i < sv.size(); ++i) tail2 += sv(i) * sv(i);
    const double err = std::sqrt(err2), tail = std::sqrt(tail2);
    const double rel = tail > 1e-12 * e.norm() ? std::abs(err - tail) / tail : err / e.norm();
    worst = std::max(worst, rel);
  }
  return {worst < 1e-5, fmt("max relative deviation from tail norm %.2e", worst)};
}

// 3. HOOI never increases the error; planted Tucker-2 kernels are recovered.
Outcome hooi() {
  Rng rng(1003);
  double worst_rise = 0.0;
  std::size_t sweeps = 0;
  for (int n = 0; n < 20; ++n) {
    const std::size_t d = rng.pick(std::vector<std::size_t>{1, 3, 5});
    const std::size_t s = rng.index(2, 16), t = rng.index(2, 16);
    const lrc::Tensor k = random_tensor(rng, {d, d, s, t});
    const lrc::Tucker2Fit fit = lrc::tucker2_fit(k, rng.index(1, s - 1), rng.index(1, t - 1), {50, 0.0});
    sweeps += fit.error_history.size() - 1;
    for (std::size_t i = 1; i < fit.error_history.size(); ++i)
      worst_rise = std::max(worst_rise, fit.error_history[i] - fit.error_history[i - 1]);
  }
  double worst_planted = 0.0;
  for (int n = 0; n < 20; ++n) {
    const std::size_t d = rng.pick(std::vector<std::size_t>{1, 3, 5});
    const std::size_t s = rng.index(2, 16), t = rng.index(2, 16), r3 = rng.index(1, s), r4 = rng.index(1, t);
    const Vec u3 = oracle::random_orthonormal(rng, s, r3), u4 = oracle::random_orthonormal(rng, t, r4);
    const Vec core = rng.normals(d * d * r3 * r4);
    const lrc::Tensor k({d, d, s, t}, oracle::to_float(oracle::tucker_kernel(u3, core, u4, d, s, t, r3, r4)));
    const lrc::Tucker2Fit fit = lrc::tucker2_fit(k, r3, r4);
    const lrc::FactorizedConv& f = fit.factors;
    const Vec back = oracle::tucker_kernel(oracle::to_vec(f.u3.data()), oracle::to_vec(f.core.data()),
                                           oracle::to_vec(f.u4.data()), d, s, t, r3, r4);
    worst_planted = std::max({worst_planted, fit.error_history.back(), oracle::rel_error(back, oracle::to_vec(k.data()))});
  }
  return {worst_rise <= 1e-9 && worst_planted < 1e-6,
          fmt("largest per-sweep rise %.2e over %zu sweeps, planted recovery error %.2e", worst_rise, sweeps,
              worst_planted)};
}

// 4. Analytic gradients against central differences (step 1e-3, double).
constexpr double kStep = 1e-3;

double grad_error(const std::vector<Vec>& analytic, const std::vector<Vec>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, oracle::rel_error(analytic[i], numeric[i]));
  return worst;
}

double check_factorized_conv(Rng& rng, std::size_t s, std::size_t t, std::size_t d, std::size_t r3, std::size_t r4,
                             std::size_t h, std::size_t stride, std::size_t pad) {
  lrc::FactorizedConv f{lrc::Matrix(s, r3), random_tensor(rng, {d, d, r3, r4}), lrc::Matrix(t, r4), stride, pad};
  for (float& v : f.u3.data()) v = static_cast<float>(rng.uniform());
  for (float& v : f.u4.data()) v = static_cast<float>(rng.uniform());
  const lrc::Tensor x = random_tensor(rng, {s, h, h});
  const std::size_t ho = oracle::out_size(h, d, stride, pad);
  const lrc::Tensor g = random_tensor(rng, {t, ho, ho});
  const lrc::FactorizedConvGrad an = lrc::conv2d_factorized_grad(f, x, g);

  Vec u3 = oracle::to_vec(f.u3.data()), core = oracle::to_vec(f.core.data()), u4 = oracle::to_vec(f.u4.data());
  Vec xv = oracle::to_vec(x.data());
  const Vec gv = oracle::to_vec(g.data());
  auto loss = [&] {
    const Vec y = oracle::conv(xv, s, h, h, oracle::tucker_kernel(u3, core, u4, d, s, t, r3, r4), d, t, stride, pad);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += y[i] * gv[i];
    return l;
  };
  std::vector<Vec> num{oracle::central_diff(u3, loss, kStep), oracle::central_diff(core, loss, kStep),
                       oracle::central_diff(u4, loss, kStep), oracle::central_diff(xv, loss, kStep)};
  return grad_error({oracle::to_vec(an.d_u3.data()), oracle::to_vec(an.d_core.data()), oracle::to_vec(an.d_u4.data()),
                     oracle::to_vec(an.d_x.data())},
                    num);
}

double check_factorized_fc(Rng& rng, std::size_t m, std::size_t n, std::size_t r) {
  lrc::FactorizedFc f{lrc::Matrix(m, r), lrc::Matrix(r, n)};
  for (float& v : f.a.data()) v = static_cast<float>(rng.uniform());
  for (float& v : f.b.data()) v = static_cast<float>(rng.uniform());
  const std::vector<float> x = oracle::to_float(rng.uniforms(m)), g = oracle::to_float(rng.uniforms(n));
  const lrc::FactorizedFcGrad an = lrc::fc_factorized_grad(f, x, g);
  Vec a = oracle::to_vec(f.a.data()), b = oracle::to_vec(f.b.data()), xv(x.begin(), x.end());
  auto loss = [&] {
    const Vec y = oracle::matvec_t(oracle::matvec_t(xv, a, m, r), b, r, n);
    double l = 0.0;
    for (std::size_t i = 0; i < n; ++i) l += y[i] * g[i];
    return l;
  };
  std::vector<Vec> num{oracle::central_diff(a, loss, kStep), oracle::central_diff(b, loss, kStep),
                       oracle::central_diff(xv, loss, kStep)};
  return grad_error({oracle::to_vec(an.d_a.data()), oracle::to_vec(an.d_b.data()), Vec(an.d_x.begin(), an.d_x.end())},
                    num);
}

double check_ortho(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = rng.index(1, 10), r = rng.index(1, n);
    const double rho = rng.uniform(0.01, 1.0);
    lrc::MatrixD u(n, r);
    for (double& v : u.data()) v = 0.5 * rng.normal();
    const lrc::MatrixD an = lrc::ortho_penalty_grad(u, rho);
    Vec p = oracle::to_vec(u.data());
    const Vec num = oracle::central_diff(p, [&] { return oracle::ortho_penalty(p, n, r, rho); }, kStep);
    worst = std::max(worst, oracle::rel_error(oracle::to_vec(an.data()), num));
  }
  return worst;
}

struct ModelCheck {
  double error = 0.0;
  double loss_gap = 0.0;
  std::size_t kinks = 0;
  std::size_t params = 0;
};

ModelCheck check_tinynet(std::uint64_t seed) {
  const lrc::Model model = lrc::init_model(lrc::Architecture::tinynet(2, 6), seed);
  lrc::SynthSpec spec;
  spec.count = 3;
  spec.height = spec.width = 6;
  const lrc::Dataset data = lrc::synth_dataset(spec, seed);
  const std::vector<std::size_t> batch{0, 1, 2};
  const lrc::OrthoConfig ortho{0.01, 1.0};
  lrc::ModelGrad grad = lrc::zero_grad(model);
  const double loss = lrc::batch_loss_grad(model, data, batch, ortho, grad);

  oracle::Shadow sh = oracle::shadow_of(model);
  std::vector<Vec> images;
  std::vector<std::size_t> labels;
  for (std::size_t i : batch) {
    images.push_back(oracle::to_vec(data.image(i).data()));
    labels.push_back(data.labels[i]);
  }
  std::vector<char> base;
  ModelCheck out;
  out.loss_gap = std::abs(oracle::shadow_loss(sh, images, labels, ortho.rho, ortho.lambda, &base) - loss) / std::abs(loss);
  // Central differences of the loss. A step that moves any rectifier input
  // across zero leaves the linear region the gradient describes; those
  // coordinates are re-differenced with the base gate pattern held fixed.
  std::vector<char> pattern;
  auto eval = [&](const std::vector<char>* frozen, bool& crossed) {
    pattern.clear();
    const double l = oracle::shadow_loss(sh, images, labels, ortho.rho, ortho.lambda, &pattern, frozen);
    crossed = crossed || pattern != base;
    return l;
  };
  for (std::size_t l = 0; l < sh.layers.size(); ++l) {
    const auto spans = lrc::parameter_spans(std::as_const(grad[l]));
    for (std::size_t p = 0; p < spans.size(); ++p) {
      Vec& theta = sh.layers[l].params[p];
      Vec num(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        bool crossed = false;
        theta[i] = keep + kStep;
        double fp = eval(nullptr, crossed);
        theta[i] = keep - kStep;
        double fm = eval(nullptr, crossed);
        if (crossed) {
          ++out.kinks;
          bool ignored = false;
          theta[i] = keep + kStep;
          fp = eval(&base, ignored);
          theta[i] = keep - kStep;
          fm = eval(&base, ignored);
        }
        theta[i] = keep;
        num[i] = (fp - fm) / (2.0 * kStep);
      }
      out.error = std::max(out.error, oracle::rel_error(oracle::to_vec(spans[p]), num));
      out.params += num.size();
    }
  }
  return out;
}

Outcome gradient_checks() {
  Rng rng(1004);
  const double conv = std::max(check_factorized_conv(rng, 3, 4, 3, 2, 3, 5, 1, 1),
                               check_factorized_conv(rng, 4, 5, 3, 3, 2, 7, 2, 0));
  const double fc = check_factorized_fc(rng, 7, 5, 3);
  const double ortho = check_ortho(rng);
  const ModelCheck net = check_tinynet(4);
  const double worst = std::max({conv, fc, ortho, net.error});
  return {worst < 1e-4 && net.loss_gap < 1e-5,
          fmt("rel err: factorized conv %.2e, factorized fc %.2e, ortho %.2e, TinyNet loss %.2e over %zu params "
              "(loss gap %.1e; %zu coordinates crossed a rectifier kink and used the fixed gate pattern)",
              conv, fc, ortho, net.error, net.params, net.loss_gap, net.kinks)};
}

// 5. VBMF recovers planted ranks.
Outcome vbmf_oracle() {
  const std::vector<std::size_t> ranks{1, 2, 4, 8};
  const std::vector<double> sigmas{0.0, 0.005, 0.01, 0.05};
  const std::size_t l = 64, m = 256;
  bool pass = true;
  std::string detail;
  for (std::size_t r : ranks) {
    std::vector<std::size_t> medians;
    std::string row = fmt("r=%zu exact%%:", r);
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      std::vector<std::size_t> est;
      std::size_t exact = 0;
      for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng(50000 + r * 1000 + si * 100 + trial);
        const Vec u = oracle::random_orthonormal(rng, l, r), v = oracle::random_orthonormal(rng, m, r);
        lrc::MatrixD y(l, m);
        for (std::size_t i = 0; i < l; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            double acc = sigmas[si] * rng.normal();
            for (std::size_t c = 0; c < r; ++c) acc += u[i * r + c] * v[j * r + c];
            y(i, j) = acc;
          }
        const std::size_t got = lrc::evbmf_rank(y).estimated_rank;
        est.push_back(got);
        exact += got == r;
      }
      std::sort(est.begin(), est.end());
      medians.push_back(est[est.size() / 2]);
      if (sigmas[si] <= 0.01 && exact < 95) pass = false;
      if (si > 0 && medians[si] > medians[si - 1]) pass = false;
      row += fmt(" %zu", exact);
    }
    row += fmt(" medians %zu/%zu/%zu/%zu; ", medians[0], medians[1], medians[2], medians[3]);
    detail += row;
  }
  return {pass, detail};
}

// 6. Closed-form counts against brute-force enumeration.
std::uint64_t enumerate_conv_mults(std::size_t ho, std::size_t wo, std::size_t d, std::size_t cin, std::size_t cout) {
  std::uint64_t n = 0;
  for (std::size_t y = 0; y < ho; ++y)
    for (std::size_t x = 0; x < wo; ++x)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          for (std::size_t o = 0; o < cout; ++o) n += cin;
  return n;
}

Outcome counting() {
  Rng rng(1006);
  std::size_t mismatches = 0;
  for (int p = 0; p < 200; ++p) {
    const std::size_t d = rng.pick(std::vector<std::size_t>{1, 3, 5, 7});
    const std::size_t s = rng.index(1, 32), t = rng.index(1, 32), r3 = rng.index(1, s), r4 = rng.index(1, t);
    const std::size_t stride = rng.index(1, 2), pad = rng.index(0, d / 2);
    const std::size_t h = rng.index(d, 16), w = rng.index(d, 16);
    const std::size_t ho = oracle::out_size(h, d, stride, pad), wo = oracle::out_size(w, d, stride, pad);

    const lrc::ConvLayerSpec dense{lrc::Tensor({d, d, s, t}), stride, pad};
    const lrc::FactorizedConv fac{lrc::Matrix(s, r3), lrc::Tensor({d, d, r3, r4}), lrc::Matrix(t, r4), stride, pad};
    std::uint64_t p_orig = 0, p_comp = 0;
    for (auto span : lrc::parameter_spans(lrc::Block{dense})) p_orig += span.size();
    for (auto span : lrc::parameter_spans(lrc::Block{fac})) p_comp += span.size();
    const std::uint64_t m_orig = enumerate_conv_mults(ho, wo, d, s, t);
    const std::uint64_t m_comp = enumerate_conv_mults(h, w, 1, s, r3) + enumerate_conv_mults(ho, wo, d, r3, r4) +
                                 enumerate_conv_mults(ho, wo, 1, r4, t);

    const lrc::ParamCounts pc = lrc::conv_param_counts(d, s, t, r3, r4);
    const lrc::Ratio sr = lrc::conv_speedup(d, s, t, r3, r4, h, w, ho, wo);
    const lrc::LayerReport rep = lrc::conv_layer_report("x", d, s, t, r3, r4, h, w, ho, wo);
    const bool ok = pc.original == p_orig && pc.compressed == p_comp && sr == lrc::Ratio{m_orig, m_comp} &&
                    rep.p_original == p_orig && rep.p_compressed == p_comp &&
                    rep.cr == static_cast<double>(p_orig) / static_cast<double>(p_comp) &&
                    rep.sr == static_cast<double>(m_orig) / static_cast<double>(m_comp);

    const std::size_t fm = rng.index(1, 64), fn = rng.index(1, 64), fr = rng.index(1, std::min(fm, fn));
    const lrc::FactorizedFc ff{lrc::Matrix(fm, fr), lrc::Matrix(fr, fn)};
    std::uint64_t f_comp = 0, f_mult = 0;
    for (auto span : lrc::parameter_spans(lrc::Block{ff})) f_comp += span.size();
    for (std::size_t i = 0; i < fm; ++i) f_mult += fr;  // xᵀa
    for (std::size_t i = 0; i < fr; ++i) f_mult += fn;  // zᵀb
    const bool fc_ok = lrc::fc_cr(fm, fn, fr) == lrc::Ratio{static_cast<std::uint64_t>(fm * fn), f_comp} &&
                       f_mult == f_comp;
    mismatches += !ok + !fc_ok;
  }
  const lrc::Ratio head = lrc::fc_cr(512, 10, 5);
  const bool head_ok = head == lrc::Ratio{5120, 2610};
  return {mismatches == 0 && head_ok,
          fmt("%zu mismatches over 200 conv + 200 fc points; FC 512x10 R=5 CR = %llu/%llu", mismatches,
              static_cast<unsigned long long>(head.num), static_cast<unsigned long long>(head.den))};
}

// 7. Orthogonal regularization shrinks the factor residual.
lrc::TrainConfig desk_config(std::uint64_t seed, double rho) {
  lrc::TrainConfig cfg = lrc::TrainConfig::desk();
  cfg.seed = seed;
  cfg.ortho.rho = rho;
  cfg.ortho.lambda = 1.0;
  return cfg;
}

lrc::Dataset desk_data(std::uint64_t seed) {
  lrc::SynthSpec spec;
  spec.count = 400;
  return lrc::synth_dataset(spec, seed);
}

Outcome orthogonality_efficacy() {
  std::vector<double> with, without;
  double min_top1 = 100.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const lrc::Dataset data = desk_data(seed);
    for (double rho : {0.01, 0.0}) {
      const lrc::TrainConfig cfg = desk_config(seed, rho);
      const lrc::TrainResult r = lrc::train_overparam(lrc::init_model(lrc::Architecture::tinynet(2), seed), data, cfg);
      (rho > 0.0 ? with : without).push_back(lrc::orthogonality_residual(r.model));
      min_top1 = std::min(min_top1, lrc::evaluate_top1(r.model, data));
    }
  }
  std::sort(with.begin(), with.end());
  std::sort(without.begin(), without.end());
  const double a = with[2], b = without[2];
  return {a <= 0.5 * b && min_top1 >= 95.0,
          fmt("median residual rho=0.01: %.4f, rho=0: %.4f (ratio %.3f); lowest training Top-1 %.2f%%", a, b, a / b,
              min_top1)};
}

// 8. End-to-end pipeline through the CLI.
Outcome pipeline() {
  if (g_cli.empty()) return {false, "no CLI path given"};
  const fs::path dir = scratch("pipeline");
  {
    std::ofstream cfg(dir / "desk.cfg");
    cfg << "epochs_overparam = 30\nepochs_lowrank = 30\nbatch_size = 4\n"
           "lr_schedule = 0:0.1\nlr_schedule_lowrank = 0:0.01\nrho = 0.01\nlambda = 1\n";
  }
  const std::string args = "--seed 7 compress tinynet --pipeline --data synth --samples 400 --config \"" +
                           (dir / "desk.cfg").string() + "\" --out ";
  const int rc1 = run_cli(args + "\"" + (dir / "a").string() + "\"");
  const int rc2 = run_cli(args + "\"" + (dir / "b").string() + "\"");
  if (rc1 != 0 || rc2 != 0) return {false, fmt("CLI exit codes %d, %d", rc1, rc2)};
  const bool same = slurp(dir / "a" / lrc::kReportJson) == slurp(dir / "b" / lrc::kReportJson) &&
                    slurp(dir / "a" / lrc::kReportText) == slurp(dir / "b" / lrc::kReportText) &&
                    slurp(dir / "a" / lrc::kBlobFile) == slurp(dir / "b" / lrc::kBlobFile);
  const lrc::CompressionReport rep = lrc::load_report(dir / "a");
  const double cr = lrc::model_cr(rep), gap = rep.top1_before - rep.top1_after;
  return {same && cr >= 2.0 && gap <= 2.0 && rep.top1_after >= 0.0,
          fmt("CR %.2fx, Top-1 phase 1 %.2f%%, after retraining %.2f%%, rerun %s", cr, rep.top1_before,
              rep.top1_after, same ? "bit-identical" : "DIFFERS")};
}

// 9. Model and CIFAR formats; corrupted inputs map to documented codes.
lrc::Model every_kind_model() {
  Rng rng(1009);
  auto mat = [&](std::size_t r, std::size_t c) {
    lrc::Matrix m(r, c);
    for (float& v : m.data()) v = static_cast<float>(rng.normal());
    return m;
  };
  lrc::Model m;
  m.input = {3, 6, 6};
  m.classes = 3;
  m.layers.push_back({"c0", lrc::ConvLayerSpec{random_tensor(rng, {3, 3, 3, 4}), 1, 1}});
  m.layers.push_back({"c1", lrc::FactorizedConv{mat(4, 2), random_tensor(rng, {3, 3, 2, 3}), mat(5, 3), 2, 1}});
  m.layers.push_back({"f0", lrc::FcLayerSpec{mat(5, 6)}});
  m.layers.push_back({"f1", lrc::FactorizedFc{mat(6, 2), mat(2, 3)}});
  m.validate();
  return m;
}

lrc::ErrorCode load_code(const fs::path& dir) {
  try {
    lrc::load_model(dir);
  } catch (const lrc::Error& e) {
    return e.code();
  }
  return static_cast<lrc::ErrorCode>(0);
}

lrc::ErrorCode cifar_code(const fs::path& file) {
  try {
    lrc::load_cifar_file(file);
  } catch (const lrc::Error& e) {
    return e.code();
  }
  return static_cast<lrc::ErrorCode>(0);
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Outcome formats() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const fs::path dir = scratch("formats");
  const lrc::Model m = every_kind_model();
  lrc::save_model(m, dir / "m");
  const lrc::Model back = lrc::load_model(dir / "m");
  expect(back == m, "round trip");
  lrc::save_model(back, dir / "m2");
  expect(slurp(dir / "m" / lrc::kBlobFile) == slurp(dir / "m2" / lrc::kBlobFile) &&
             slurp(dir / "m" / lrc::kManifestFile) == slurp(dir / "m2" / lrc::kManifestFile),
         "re-save bytes");

  auto corrupt = [&](const std::string& name, auto&& edit) {
    const fs::path d = dir / name;
    fs::remove_all(d);
    fs::copy(dir / "m", d);
    edit(d);
    return load_code(d);
  };
  const std::string blob = slurp(dir / "m" / lrc::kBlobFile);
  const std::string manifest = slurp(dir / "m" / lrc::kManifestFile);
  auto replace = [&](std::string text, const std::string& from, const std::string& to) {
    text.replace(text.find(from), from.size(), to);
    return text;
  };
  expect(corrupt("flip", [&](const fs::path& d) {
           std::string b = blob;
           b[b.size() / 2] = static_cast<char>(b[b.size() / 2] ^ 0x5a);
           write_bytes(d / lrc::kBlobFile, b);
         }) == lrc::ErrorCode::checksum_mismatch,
         "flipped blob byte");
  expect(corrupt("short", [&](const fs::path& d) { write_bytes(d / lrc::kBlobFile, blob.substr(0, blob.size() - 4)); }) ==
             lrc::ErrorCode::truncated_blob,
         "truncated blob");
  expect(corrupt("long", [&](const fs::path& d) { write_bytes(d / lrc::kBlobFile, blob + "xxxx"); }) ==
             lrc::ErrorCode::format,
         "oversized blob");
  expect(corrupt("version", [&](const fs::path& d) {
           write_bytes(d / lrc::kManifestFile, replace(manifest, "format_version = 1", "format_version = 99"));
         }) == lrc::ErrorCode::version_skew,
         "future version");
  expect(corrupt("kind", [&](const fs::path& d) {
           write_bytes(d / lrc::kManifestFile, replace(manifest, "kind = factorized_fc", "kind = depthwise"));
         }) == lrc::ErrorCode::unknown_kind,
         "unknown kind");
  expect(load_code(dir / "missing") == lrc::ErrorCode::io, "missing model");

  // CIFAR-10: two records, channel-major pixels after one label byte.
  std::string rec(2 * lrc::kCifar10RecordBytes, '\0');
  rec[0] = 7;
  std::fill(rec.begin() + 1, rec.begin() + 3073, static_cast<char>(255));
  rec[3073] = 3;
  for (std::size_t i = 0; i < 3072; ++i) rec[3074 + i] = static_cast<char>(i % 251);
  write_bytes(dir / "two.bin", rec);
  const lrc::Dataset ds = lrc::load_cifar_file(dir / "two.bin");
  bool layout = ds.size() == 2 && ds.labels[0] == 7 && ds.labels[1] == 3 && ds.channels() == 3 && ds.height() == 32 &&
                ds.width() == 32;
  if (layout) {
    const lrc::Tensor a = ds.image(0), b = ds.image(1);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
          layout = layout && a(c, y, x) == 1.0f;
          layout = layout && b(c, y, x) == static_cast<float>(((c * 32 + y) * 32 + x) % 251) / 255.0f;
        }
  }
  expect(layout, "CIFAR record layout");
  write_bytes(dir / "cut.bin", rec.substr(0, 3072));
  expect(cifar_code(dir / "cut.bin") == lrc::ErrorCode::format, "CIFAR length");
  std::string bad = rec;
  bad[0] = 10;
  write_bytes(dir / "label.bin", bad);
  expect(cifar_code(dir / "label.bin") == lrc::ErrorCode::format, "CIFAR label");
  expect(cifar_code(dir / "nothing.bin") == lrc::ErrorCode::io, "CIFAR missing");

  if (!g_cli.empty()) {
    const std::string q = "\"" + (dir / "flip").string() + "\"";
    expect(run_cli("evaluate " + q + " --data synth") == 3, "CLI exit 3 on corrupt model");
    expect(run_cli("evaluate \"" + (dir / "m").string() + "\" --data \"" + (dir / "cut.bin").string() + "\"") == 3,
           "CLI exit 3 on corrupt CIFAR");
    expect(run_cli("compress --no-such-flag") == 2, "CLI exit 2 on bad arguments");
    {
      std::ofstream cfg(dir / "hot.cfg");
      cfg << "epochs_overparam = 3\nbatch_size = 4\nlr_schedule = 0:1e30\n";
    }
    expect(run_cli("train tinynet --data synth --config \"" + (dir / "hot.cfg").string() + "\"") == 4,
           "CLI exit 4 on non-finite loss");
  }
  std::string detail = failures.empty() ? "round trip bit-exact, CIFAR layout, 10 corruption cases" : "failed:";
  for (const auto& f : failures) detail += " [" + f + "]";
  return {failures.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  double limit_s;  // 0: no runtime bound
};

} // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli = argv[1];
  std::vector<int> only;
  for (int i = 2; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  const std::vector<Criterion> all{
      {1, "full-rank factorized conv is lossless", lossless_full_rank, 60.0},
      {2, "Eckart-Young truncation error", eckart_young, 0.0},
      {3, "HOOI monotone, planted kernels recovered", hooi, 0.0},
      {4, "analytic gradients match finite differences", gradient_checks, 120.0},
      {5, "VBMF planted-rank recovery", vbmf_oracle, 0.0},
      {6, "CR/SR equal brute-force counts", counting, 0.0},
      {7, "orthogonal regularization efficacy", orthogonality_efficacy, 300.0},
      {8, "compress --pipeline end to end", pipeline, 0.0},
      {9, "format round trips and error codes", formats, 0.0},
  };

  int failed = 0;
  for (const Criterion& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0.0 && secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt("; runtime %.1f s exceeds %.0f s", secs, c.limit_s);
    }
    std::printf("criterion %d: %s  %s | %s (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  fs::remove_all(fs::temp_directory_path() / ("lrc_acceptance_" + std::to_string(::getpid())));
  return failed == 0 ? 0 : 1;
}
