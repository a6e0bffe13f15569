#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrc/tensor.hpp"

namespace lrc {

/// Images (count, C, H, W) with pixels in [0, 1] and integer labels.
struct Dataset {
  Tensor images;
  std::vector<std::uint16_t> labels;
  std::size_t classes = 0;
  std::string split = "train";

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }
  /// Copy of sample i as a (C, H, W) tensor.
  Tensor image(std::size_t i) const;
  void validate() const;
};

enum class CifarVariant { cifar10, cifar100 };

inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;
inline constexpr std::size_t kCifar10RecordBytes = 1 + kCifarPixels;   // 3073
inline constexpr std::size_t kCifar100RecordBytes = 2 + kCifarPixels;  // 3074: coarse, fine

/// Parse one binary batch file. CIFAR-100 records carry (coarse, fine)
/// label bytes; the fine label is used.
Dataset load_cifar_file(const std::filesystem::path& path, CifarVariant variant = CifarVariant::cifar10);

/// A batch file, or a directory holding data_batch_{1..5}.bin (split
/// "train") or test_batch.bin (split "test").
Dataset load_cifar10(const std::filesystem::path& path, const std::string& split = "train");

struct SynthSpec {
  std::size_t count = 200;
  std::size_t classes = 2;
  std::size_t channels = 3;
  std::size_t height = 8;
  std::size_t width = 8;
  double margin = 1.0;  // amplitude of the class signal
  double noise = 0.05;  // per-pixel Gaussian noise std
};

/// Class-conditional Gaussian-blob images. Class c adds
/// margin · 0.25 · color_c ⊗ blob_c on a 0.5 grey background, where
/// color_c is a unit vector over channels and blob_c a Gaussian bump.
/// Pixels are clamped to [0, 1]. Deterministic for a given seed.
Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

/// The planted class templates (color ⊗ blob) used by synth_dataset; the
/// linear scores ⟨x − 0.5, template_c⟩ separate the classes.
std::vector<Tensor> synth_templates(const SynthSpec& spec, std::uint64_t seed);

} // namespace lrc
