#include "lrc/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lrc/conv_exec.hpp"

namespace lrc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void fill_uniform(std::span<float> v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : v) x = static_cast<float>(dist(rng));
}

std::size_t conv_in(const Block& b) {
  return std::visit(overloaded{[](const ConvLayerSpec& c) { return c.in_channels(); },
                               [](const FactorizedConv& c) { return c.in_channels(); },
                               [](const auto&) -> std::size_t { return 0; }},
                    b);
}

std::size_t block_out(const Block& b) {
  return std::visit(overloaded{[](const ConvLayerSpec& c) { return c.out_channels(); },
                               [](const FactorizedConv& c) { return c.out_channels(); },
                               [](const FcLayerSpec& c) { return c.out_features(); },
                               [](const FactorizedFc& c) { return c.out_features(); }},
                    b);
}

std::size_t fc_in(const Block& b) {
  return std::visit(overloaded{[](const FcLayerSpec& c) { return c.in_features(); },
                               [](const FactorizedFc& c) { return c.in_features(); },
                               [](const auto&) -> std::size_t { return 0; }},
                    b);
}

void relu_inplace(std::span<float> v) {
  for (auto& x : v) x = x > 0.0f ? x : 0.0f;
}

void relu_backward(std::span<float> grad, std::span<const float> pre) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(pre[i] > 0.0f)) grad[i] = 0.0f;
}

void add_into(std::span<float> dst, std::span<const float> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

} // namespace

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::factorized_conv: return "factorized_conv";
    case LayerKind::fc: return "fc";
    case LayerKind::factorized_fc: return "factorized_fc";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::conv;
  if (name == "factorized_conv") return LayerKind::factorized_conv;
  if (name == "fc") return LayerKind::fc;
  if (name == "factorized_fc") return LayerKind::factorized_fc;
  fail(ErrorCode::unknown_kind, "unknown layer kind '" + name + "'");
}

void Model::validate() const {
  require(classes >= 1, "model needs at least one class");
  require(!layers.empty(), "model has no layers");
  std::size_t channels = input.channels;
  std::size_t h = input.height, w = input.width;
  std::size_t i = 0;
  for (; i < layers.size() && layers[i].is_conv(); ++i) {
    const Block& b = layers[i].block;
    std::visit(overloaded{[](const ConvLayerSpec& c) { c.validate(); },
                          [](const FactorizedConv& c) { c.validate(); }, [](const auto&) {}},
               b);
    require(conv_in(b) == channels, "layer '" + layers[i].name + "' expects " + std::to_string(conv_in(b)) +
                                        " input channels, previous layer gives " + std::to_string(channels));
    const std::size_t d = std::holds_alternative<ConvLayerSpec>(b) ? std::get<ConvLayerSpec>(b).kernel_size()
                                                                  : std::get<FactorizedConv>(b).kernel_size();
    const std::size_t stride = std::visit(
        overloaded{[](const ConvLayerSpec& c) { return c.stride; }, [](const FactorizedConv& c) { return c.stride; },
                   [](const auto&) -> std::size_t { return 1; }},
        b);
    const std::size_t pad = std::visit(
        overloaded{[](const ConvLayerSpec& c) { return c.padding; }, [](const FactorizedConv& c) { return c.padding; },
                   [](const auto&) -> std::size_t { return 0; }},
        b);
    h = conv_output_size(h, d, stride, pad);
    w = conv_output_size(w, d, stride, pad);
    channels = block_out(b);
  }
  std::size_t features = i > 0 ? channels : input.channels * input.height * input.width;
  require(i < layers.size(), "model needs a fully-connected classification head");
  for (; i < layers.size(); ++i) {
    require(!layers[i].is_conv(), "conv layer '" + layers[i].name + "' after the fully-connected stage");
    const Block& b = layers[i].block;
    if (auto* f = std::get_if<FactorizedFc>(&b)) f->validate();
    require(fc_in(b) == features, "layer '" + layers[i].name + "' expects " + std::to_string(fc_in(b)) +
                                      " inputs, previous stage gives " + std::to_string(features));
    features = block_out(b);
  }
  require(features == classes, "classification head emits " + std::to_string(features) + " logits for " +
                                   std::to_string(classes) + " classes");
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    for (auto s : parameter_spans(l.block)) n += s.size();
  return n;
}

Architecture Architecture::tinynet(std::size_t classes, std::size_t image_size) {
  Architecture a;
  a.input = InputShape{3, image_size, image_size};
  a.convs = {ConvStage{16, 3, 1, 1}, ConvStage{32, 3, 1, 1}};
  a.classes = classes;
  return a;
}

void Architecture::validate() const {
  require(input.channels >= 1 && input.height >= 1 && input.width >= 1, "architecture input must be non-empty");
  require(classes >= 1, "architecture needs at least one class");
  std::size_t h = input.height, w = input.width;
  for (const auto& c : convs) {
    require(c.out_channels >= 1 && c.kernel >= 1 && c.stride >= 1, "invalid conv stage");
    h = conv_output_size(h, c.kernel, c.stride, c.padding);
    w = conv_output_size(w, c.kernel, c.stride, c.padding);
  }
  for (auto n : hidden_fc) require(n >= 1, "hidden FC width must be >= 1");
}

double xavier_bound(const Shape& shape) {
  // Matrices n x r: fan_in + fan_out = n + r. Cores (D, D, R3, R4):
  // receptive field D² times each channel count.
  double fans = 0.0;
  if (shape.size() == 2) {
    fans = static_cast<double>(shape[0] + shape[1]);
  } else {
    const double field = static_cast<double>(shape_product(shape) / (shape[shape.size() - 2] * shape.back()));
    fans = field * static_cast<double>(shape[shape.size() - 2] + shape.back());
  }
  return std::sqrt(6.0 / fans);
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.input = arch.input;
  m.classes = arch.classes;
  std::size_t channels = arch.input.channels;
  for (std::size_t i = 0; i < arch.convs.size(); ++i) {
    const auto& c = arch.convs[i];
    FactorizedConv f{Matrix(channels, channels), Tensor({c.kernel, c.kernel, channels, c.out_channels}),
                     Matrix(c.out_channels, c.out_channels), c.stride, c.padding};
    fill_uniform(f.u3.data(), xavier_bound({channels, channels}), rng);
    fill_uniform(f.core.data(), xavier_bound(f.core.shape()), rng);
    fill_uniform(f.u4.data(), xavier_bound({c.out_channels, c.out_channels}), rng);
    m.layers.push_back(Layer{"conv" + std::to_string(i), std::move(f)});
    channels = c.out_channels;
  }
  std::size_t features = arch.convs.empty() ? arch.input.channels * arch.input.height * arch.input.width : channels;
  std::vector<std::size_t> widths = arch.hidden_fc;
  widths.push_back(arch.classes);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::size_t r = std::min(features, widths[i]);
    FactorizedFc f{Matrix(features, r), Matrix(r, widths[i])};
    fill_uniform(f.a.data(), xavier_bound({features, r}), rng);
    fill_uniform(f.b.data(), xavier_bound({r, widths[i]}), rng);
    m.layers.push_back(Layer{"fc" + std::to_string(i), std::move(f)});
    features = widths[i];
  }
  return m;
}

std::vector<ConvGeometry> conv_geometry(const Model& model) {
  std::vector<ConvGeometry> out;
  std::size_t h = model.input.height, w = model.input.width;
  for (const auto& l : model.layers) {
    if (!l.is_conv()) break;
    std::size_t d, stride, pad;
    if (auto* c = std::get_if<ConvLayerSpec>(&l.block)) {
      d = c->kernel_size(), stride = c->stride, pad = c->padding;
    } else {
      const auto& f = std::get<FactorizedConv>(l.block);
      d = f.kernel_size(), stride = f.stride, pad = f.padding;
    }
    const std::size_t ho = conv_output_size(h, d, stride, pad), wo = conv_output_size(w, d, stride, pad);
    out.push_back({h, w, ho, wo});
    h = ho;
    w = wo;
  }
  return out;
}

Tensor dense_kernel(const Layer& layer) {
  if (auto* c = std::get_if<ConvLayerSpec>(&layer.block)) return c->kernel;
  if (auto* f = std::get_if<FactorizedConv>(&layer.block)) return tucker2_reconstruct(*f);
  fail(ErrorCode::invalid_argument, "layer '" + layer.name + "' is not a conv layer");
}

Matrix dense_weight(const Layer& layer) {
  if (auto* c = std::get_if<FcLayerSpec>(&layer.block)) return c->weight;
  if (auto* f = std::get_if<FactorizedFc>(&layer.block)) return fc_reconstruct(*f);
  fail(ErrorCode::invalid_argument, "layer '" + layer.name + "' is not an FC layer");
}

std::size_t dense_parameter_count(const Layer& layer) {
  return std::visit(
      overloaded{[](const ConvLayerSpec& c) { return c.kernel.size(); },
                 [](const FactorizedConv& f) {
                   return f.kernel_size() * f.kernel_size() * f.in_channels() * f.out_channels();
                 },
                 [](const FcLayerSpec& c) { return c.weight.size(); },
                 [](const FactorizedFc& f) { return f.in_features() * f.out_features(); }},
      layer.block);
}

std::vector<std::span<float>> parameter_spans(Block& block) {
  return std::visit(overloaded{[](ConvLayerSpec& c) { return std::vector<std::span<float>>{c.kernel.data()}; },
                               [](FactorizedConv& f) {
                                 return std::vector<std::span<float>>{f.u3.data(), f.core.data(), f.u4.data()};
                               },
                               [](FcLayerSpec& c) { return std::vector<std::span<float>>{c.weight.data()}; },
                               [](FactorizedFc& f) {
                                 return std::vector<std::span<float>>{f.a.data(), f.b.data()};
                               }},
                    block);
}

std::vector<std::span<const float>> parameter_spans(const Block& block) {
  auto spans = parameter_spans(const_cast<Block&>(block));
  return {spans.begin(), spans.end()};
}

Block zeros_like(const Block& block) {
  Block z = block;
  for (auto s : parameter_spans(z)) std::fill(s.begin(), s.end(), 0.0f);
  return z;
}

ForwardTrace forward_trace(const Model& model, const Tensor& image) {
  require(image.order() == 3 && image.dim(0) == model.input.channels && image.dim(1) == model.input.height &&
              image.dim(2) == model.input.width,
          "forward: image shape " + shape_string(image.shape()) + " does not match model input");
  ForwardTrace tr;
  Tensor act = image;
  std::size_t i = 0;
  for (; i < model.layers.size() && model.layers[i].is_conv(); ++i) {
    tr.conv_inputs.push_back(act);
    const Block& b = model.layers[i].block;
    Tensor out = std::holds_alternative<ConvLayerSpec>(b) ? conv2d_reference(act, std::get<ConvLayerSpec>(b))
                                                          : conv2d_factorized(act, std::get<FactorizedConv>(b));
    tr.conv_outputs.push_back(out);
    relu_inplace(out.data());
    act = std::move(out);
  }
  std::vector<float> feat;
  if (i > 0) {
    const std::size_t c = act.dim(0), hw = act.dim(1) * act.dim(2);
    feat.resize(c);
    auto v = act.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t k = 0; k < hw; ++k) s += v[ch * hw + k];
      feat[ch] = static_cast<float>(s / static_cast<double>(hw));
    }
  } else {
    feat.assign(act.data().begin(), act.data().end());
  }
  for (; i < model.layers.size(); ++i) {
    tr.fc_inputs.push_back(feat);
    const Block& b = model.layers[i].block;
    std::vector<float> out = std::holds_alternative<FcLayerSpec>(b)
                                 ? fc_forward(feat, std::get<FcLayerSpec>(b))
                                 : fc_factorized_forward(feat, std::get<FactorizedFc>(b));
    tr.fc_outputs.push_back(out);
    if (i + 1 < model.layers.size()) relu_inplace(out);
    feat = std::move(out);
  }
  tr.logits = std::move(feat);
  return tr;
}

std::vector<float> forward(const Model& model, const Tensor& image) { return forward_trace(model, image).logits; }

ModelGrad zero_grad(const Model& model) {
  ModelGrad g;
  g.reserve(model.layers.size());
  for (const auto& l : model.layers) g.push_back(zeros_like(l.block));
  return g;
}

void backward(const Model& model, const ForwardTrace& tr, std::span<const float> d_logits, ModelGrad& grad) {
  require(grad.size() == model.layers.size(), "backward: gradient does not match model");
  const std::size_t n_conv = tr.conv_inputs.size();
  const std::size_t n_layers = model.layers.size();
  std::vector<float> d(d_logits.begin(), d_logits.end());

  for (std::size_t i = n_layers; i-- > n_conv;) {
    const std::size_t k = i - n_conv;
    if (i + 1 < n_layers) relu_backward(d, tr.fc_outputs[k]);
    const Block& b = model.layers[i].block;
    if (auto* fc = std::get_if<FcLayerSpec>(&b)) {
      FcGrad g = fc_grad(*fc, tr.fc_inputs[k], d);
      add_into(std::get<FcLayerSpec>(grad[i]).weight.data(), g.d_weight.data());
      d = std::move(g.d_x);
    } else {
      const auto& f = std::get<FactorizedFc>(b);
      FactorizedFcGrad g = fc_factorized_grad(f, tr.fc_inputs[k], d);
      auto& dst = std::get<FactorizedFc>(grad[i]);
      add_into(dst.a.data(), g.d_a.data());
      add_into(dst.b.data(), g.d_b.data());
      d = std::move(g.d_x);
    }
  }
  if (n_conv == 0) return;

  // average-pool backward
  const Tensor& last = tr.conv_outputs.back();
  const std::size_t c = last.dim(0), hw = last.dim(1) * last.dim(2);
  Tensor dt(last.shape());
  auto dv = dt.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t k = 0; k < hw; ++k) dv[ch * hw + k] = d[ch] / static_cast<float>(hw);

  for (std::size_t i = n_conv; i-- > 0;) {
    relu_backward(dt.data(), tr.conv_outputs[i].data());
    const Block& b = model.layers[i].block;
    if (auto* conv = std::get_if<ConvLayerSpec>(&b)) {
      ConvGrad g = conv2d_reference_grad(*conv, tr.conv_inputs[i], dt);
      add_into(std::get<ConvLayerSpec>(grad[i]).kernel.data(), g.d_kernel.data());
      dt = std::move(g.d_x);
    } else {
      FactorizedConvGrad g = conv2d_factorized_grad(std::get<FactorizedConv>(b), tr.conv_inputs[i], dt);
      auto& dst = std::get<FactorizedConv>(grad[i]);
      add_into(dst.u3.data(), g.d_u3.data());
      add_into(dst.core.data(), g.d_core.data());
      add_into(dst.u4.data(), g.d_u4.data());
      dt = std::move(g.d_x);
    }
  }
}

double softmax_cross_entropy(std::span<const float> logits, std::size_t label, std::vector<float>* d_logits) {
  require(label < logits.size(), "label out of range for logits");
  double mx = logits[0];
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  double z = 0.0;
  for (float v : logits) z += std::exp(static_cast<double>(v) - mx);
  const double log_z = std::log(z) + mx;
  if (d_logits) {
    d_logits->resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
      (*d_logits)[i] = static_cast<float>(std::exp(static_cast<double>(logits[i]) - log_z) - (i == label ? 1.0 : 0.0));
  }
  return log_z - static_cast<double>(logits[label]);
}

std::size_t argmax(std::span<const float> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

} // namespace lrc
