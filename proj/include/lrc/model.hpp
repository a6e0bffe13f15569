#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lrc/decomp.hpp"
#include "lrc/tensor.hpp"

namespace lrc {

using Block = std::variant<ConvLayerSpec, FactorizedConv, FcLayerSpec, FactorizedFc>;

enum class LayerKind { conv, factorized_conv, fc, factorized_fc };

const char* kind_name(LayerKind kind);
LayerKind kind_from_name(const std::string& name);

struct Layer {
  std::string name;
  Block block;

  LayerKind kind() const { return static_cast<LayerKind>(block.index()); }
  bool is_conv() const { return kind() == LayerKind::conv || kind() == LayerKind::factorized_conv; }
  bool operator==(const Layer&) const = default;
};

struct InputShape {
  std::size_t channels = 3;
  std::size_t height = 8;
  std::size_t width = 8;
  bool operator==(const InputShape&) const = default;
};

/// Conv layers (each followed by a rectifier), global average pooling, then
/// FC layers with rectifiers between them. The last FC layer produces the
/// class logits fed to softmax cross-entropy. Without conv layers the
/// image is flattened into the first FC layer.
struct Model {
  InputShape input;
  std::size_t classes = 0;
  std::vector<Layer> layers;

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const Model&) const = default;
};

struct ConvStage {
  std::size_t out_channels = 16;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
};

struct Architecture {
  InputShape input;
  std::vector<ConvStage> convs;
  std::vector<std::size_t> hidden_fc;
  std::size_t classes = 2;

  /// 3 -> 16 -> 32 channels with 3x3 kernels, average pool, FC head.
  static Architecture tinynet(std::size_t classes = 2, std::size_t image_size = 8);
  void validate() const;
};

/// Full-rank factorized model (R3 = S, R4 = T, R = min(M, N)); every
/// factor and core drawn uniformly in ±sqrt(6 / (fan_in + fan_out)).
Model init_model(const Architecture& arch, std::uint64_t seed);

/// Xavier bound used by init_model for a tensor of the given shape.
double xavier_bound(const Shape& shape);

/// Spatial sizes around each conv layer (in layer order).
struct ConvGeometry {
  std::size_t h, w, ho, wo;
};
std::vector<ConvGeometry> conv_geometry(const Model& model);

/// Full (D, D, S, T) kernel of a conv layer, reconstructing factorized ones.
Tensor dense_kernel(const Layer& layer);
/// Full M x N weight of an FC layer.
Matrix dense_weight(const Layer& layer);
/// Parameter count of the uncompressed equivalent (D²ST or MN).
std::size_t dense_parameter_count(const Layer& layer);

/// Parameter tensors of a block, in serialization order
/// (kernel | u3, core, u4 | weight | a, b).
std::vector<std::span<float>> parameter_spans(Block& block);
std::vector<std::span<const float>> parameter_spans(const Block& block);

/// Block of the same kind and shapes with all parameters zero.
Block zeros_like(const Block& block);

struct ForwardTrace {
  std::vector<Tensor> conv_inputs;
  std::vector<Tensor> conv_outputs;  // before the rectifier
  std::vector<std::vector<float>> fc_inputs;
  std::vector<std::vector<float>> fc_outputs;  // before the rectifier
  std::vector<float> logits;
};

ForwardTrace forward_trace(const Model& model, const Tensor& image);
std::vector<float> forward(const Model& model, const Tensor& image);

/// Parameter gradients, one zero-initialised block per layer.
using ModelGrad = std::vector<Block>;
ModelGrad zero_grad(const Model& model);

/// Accumulate ∂loss/∂params into `grad` given ∂loss/∂logits.
void backward(const Model& model, const ForwardTrace& trace, std::span<const float> d_logits, ModelGrad& grad);

/// Softmax cross-entropy of one sample; optionally writes ∂/∂logits.
double softmax_cross_entropy(std::span<const float> logits, std::size_t label, std::vector<float>* d_logits);

std::size_t argmax(std::span<const float> v);

} // namespace lrc
