#include "lrc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

namespace lrc {

Tensor Dataset::image(std::size_t i) const {
  require(i < size(), "dataset index out of range");
  const std::size_t c = channels(), h = height(), w = width(), n = c * h * w;
  auto src = images.data().subspan(i * n, n);
  return Tensor({c, h, w}, std::vector<float>(src.begin(), src.end()));
}

void Dataset::validate() const {
  require(images.order() == 4, "dataset images must be (count, C, H, W)");
  require(images.dim(0) == labels.size(), "dataset image and label counts differ");
  for (auto l : labels) require(l < classes, "dataset label " + std::to_string(l) + " out of range");
}

Dataset load_cifar_file(const std::filesystem::path& path, CifarVariant variant) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open CIFAR batch '" + path.string() + "'");
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const bool c100 = variant == CifarVariant::cifar100;
  const std::size_t record = c100 ? kCifar100RecordBytes : kCifar10RecordBytes;
  const std::size_t label_bytes = record - kCifarPixels;
  const std::size_t max_label = c100 ? 99 : 9;
  if (bytes.empty() || bytes.size() % record != 0)
    fail(ErrorCode::format, "CIFAR batch '" + path.string() + "' has " + std::to_string(bytes.size()) +
                                " bytes, not a positive multiple of " + std::to_string(record));

  const std::size_t count = bytes.size() / record;
  Dataset ds;
  ds.classes = max_label + 1;
  ds.images = Tensor({count, 3, 32, 32});
  ds.labels.resize(count);
  auto px = ds.images.data();
  for (std::size_t r = 0; r < count; ++r) {
    const unsigned char* rec = bytes.data() + r * record;
    const unsigned label = rec[label_bytes - 1];
    if (label > max_label)
      fail(ErrorCode::format, "CIFAR record " + std::to_string(r) + " has label " + std::to_string(label));
    ds.labels[r] = static_cast<std::uint16_t>(label);
    for (std::size_t k = 0; k < kCifarPixels; ++k)
      px[r * kCifarPixels + k] = static_cast<float>(rec[label_bytes + k]) / 255.0f;
  }
  return ds;
}

Dataset load_cifar10(const std::filesystem::path& path, const std::string& split) {
  if (!std::filesystem::is_directory(path)) {
    Dataset ds = load_cifar_file(path);
    ds.split = split;
    return ds;
  }
  std::vector<std::filesystem::path> files;
  if (split == "test") {
    files.push_back(path / "test_batch.bin");
  } else {
    for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
  }
  std::vector<Dataset> parts;
  std::size_t total = 0;
  for (const auto& f : files) {
    parts.push_back(load_cifar_file(f));
    total += parts.back().size();
  }
  Dataset ds;
  ds.classes = 10;
  ds.split = split;
  ds.images = Tensor({total, 3, 32, 32});
  auto dst = ds.images.data();
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.images.data().begin(), p.images.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.images.size();
    ds.labels.insert(ds.labels.end(), p.labels.begin(), p.labels.end());
  }
  return ds;
}

std::vector<Tensor> synth_templates(const SynthSpec& spec, std::uint64_t seed) {
  require(spec.classes >= 1 && spec.channels >= 1 && spec.height >= 1 && spec.width >= 1,
          "synthetic dataset dimensions must be >= 1");
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5DEADBEEFull);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sigma = std::max(1.0, static_cast<double>(std::max(spec.height, spec.width)) / 3.0);

  std::vector<Tensor> out;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    // ±e_k color directions first, random unit directions beyond that
    std::vector<double> color(spec.channels, 0.0);
    if (c < 2 * spec.channels) {
      color[c / 2] = (c % 2 == 0) ? 1.0 : -1.0;
    } else {
      double n2 = 0.0;
      for (auto& v : color) {
        v = normal(rng);
        n2 += v * v;
      }
      for (auto& v : color) v /= std::sqrt(n2);
    }
    const double ch = unit(rng) * static_cast<double>(spec.height - 1);
    const double cw = unit(rng) * static_cast<double>(spec.width - 1);
    Tensor t({spec.channels, spec.height, spec.width});
    for (std::size_t k = 0; k < spec.channels; ++k)
      for (std::size_t i = 0; i < spec.height; ++i)
        for (std::size_t j = 0; j < spec.width; ++j) {
          const double r2 = (i - ch) * (i - ch) + (j - cw) * (j - cw);
          t(k, i, j) = static_cast<float>(color[k] * std::exp(-r2 / (2.0 * sigma * sigma)));
        }
    out.push_back(std::move(t));
  }
  return out;
}

Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  require(spec.count >= 1, "synthetic dataset needs at least one sample");
  require(spec.noise >= 0.0 && spec.margin >= 0.0, "synthetic noise and margin must be non-negative");
  const std::vector<Tensor> templates = synth_templates(spec, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, spec.classes - 1);

  const std::size_t n = spec.channels * spec.height * spec.width;
  Dataset ds;
  ds.classes = spec.classes;
  ds.split = "synthetic";
  ds.images = Tensor({spec.count, spec.channels, spec.height, spec.width});
  ds.labels.resize(spec.count);
  auto px = ds.images.data();
  for (std::size_t s = 0; s < spec.count; ++s) {
    const std::size_t label = pick(rng);
    ds.labels[s] = static_cast<std::uint16_t>(label);
    auto tpl = templates[label].data();
    for (std::size_t k = 0; k < n; ++k) {
      const double v = 0.5 + 0.25 * spec.margin * tpl[k] + spec.noise * normal(rng);
      px[s * n + k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return ds;
}

} // namespace lrc
