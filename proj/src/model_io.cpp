#include "lrc/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <zlib.h>

namespace lrc {

namespace {

constexpr std::size_t kFloatBytes = 4;

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

void append_le(std::string& out, std::span<const float> values) {
  for (float f : values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
  }
}

void read_le(const std::string& blob, std::uint64_t offset, std::span<float> dst) {
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + offset);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[i * 4 + b]) << (8 * b);
    dst[i] = std::bit_cast<float>(bits);
  }
}

LayerRecord record_for(const Layer& layer) {
  LayerRecord r;
  r.name = layer.name;
  r.kind = layer.kind();
  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ConvLayerSpec>) {
          r.dims = {b.kernel_size(), b.in_channels(), b.out_channels()};
          r.stride = b.stride;
          r.padding = b.padding;
        } else if constexpr (std::is_same_v<B, FactorizedConv>) {
          r.dims = {b.kernel_size(), b.in_channels(), b.out_channels()};
          r.ranks = {b.rank3(), b.rank4()};
          r.stride = b.stride;
          r.padding = b.padding;
        } else if constexpr (std::is_same_v<B, FcLayerSpec>) {
          r.dims = {b.in_features(), b.out_features()};
        } else {
          r.dims = {b.in_features(), b.out_features()};
          r.ranks = {b.rank()};
        }
      },
      layer.block);
  return r;
}

// Allocate a zero block of the shapes a record describes.
Block block_for(const LayerRecord& r) {
  const bool conv = r.kind == LayerKind::conv || r.kind == LayerKind::factorized_conv;
  const bool factorized = r.kind == LayerKind::factorized_conv || r.kind == LayerKind::factorized_fc;
  if (r.dims.size() != (conv ? 3u : 2u))
    fail(ErrorCode::format, "layer '" + r.name + "': wrong number of dims for kind " + kind_name(r.kind));
  if (r.ranks.size() != (factorized ? (conv ? 2u : 1u) : 0u))
    fail(ErrorCode::format, "layer '" + r.name + "': wrong number of ranks for kind " + kind_name(r.kind));
  for (auto d : r.dims)
    if (d == 0) fail(ErrorCode::format, "layer '" + r.name + "': zero dimension");
  for (auto d : r.ranks)
    if (d == 0) fail(ErrorCode::format, "layer '" + r.name + "': zero rank");
  switch (r.kind) {
    case LayerKind::conv:
      return ConvLayerSpec{Tensor({r.dims[0], r.dims[0], r.dims[1], r.dims[2]}), r.stride, r.padding};
    case LayerKind::factorized_conv:
      return FactorizedConv{Matrix(r.dims[1], r.ranks[0]), Tensor({r.dims[0], r.dims[0], r.ranks[0], r.ranks[1]}),
                            Matrix(r.dims[2], r.ranks[1]), r.stride, r.padding};
    case LayerKind::fc:
      return FcLayerSpec{Matrix(r.dims[0], r.dims[1])};
    case LayerKind::factorized_fc:
      return FactorizedFc{Matrix(r.dims[0], r.ranks[0]), Matrix(r.ranks[0], r.dims[1])};
  }
  fail(ErrorCode::unknown_kind, "unknown layer kind");
}

std::uint64_t block_bytes(const Block& b) {
  std::uint64_t n = 0;
  for (auto s : parameter_spans(b)) n += s.size();
  return n * kFloatBytes;
}

} // namespace

ModelManifest build_manifest(const Model& model) {
  ModelManifest m;
  m.input = model.input;
  m.classes = model.classes;
  std::uint64_t offset = 0;
  for (const auto& layer : model.layers) {
    LayerRecord r = record_for(layer);
    r.offset = offset;
    r.length = block_bytes(layer.block);
    offset += r.length;
    m.layers.push_back(std::move(r));
  }
  m.blob_bytes = offset;
  return m;
}

std::string serialize_blob(const Model& model) {
  std::string out;
  for (const auto& layer : model.layers)
    for (auto s : parameter_spans(layer.block)) append_le(out, s);
  return out;
}

std::uint32_t blob_checksum(const std::string& blob) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < blob.size()) {
    const std::size_t chunk = std::min<std::size_t>(blob.size() - done, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(blob.data() + done), static_cast<uInt>(chunk));
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

KvDocument manifest_to_kv(const ModelManifest& m) {
  KvDocument doc;
  doc.sections.emplace_back();
  auto& h = doc.header();
  std::ostringstream crc;
  crc << std::hex << std::setw(8) << std::setfill('0') << m.checksum;
  h.set("format_version", std::to_string(m.format_version));
  h.set("blob", m.blob);
  h.set("blob_bytes", std::to_string(m.blob_bytes));
  h.set("checksum", "crc32:" + crc.str());
  h.set("input", join({m.input.channels, m.input.height, m.input.width}));
  h.set("classes", std::to_string(m.classes));
  h.set("layers", std::to_string(m.layers.size()));
  for (const auto& r : m.layers) {
    KvSection s{"layer", {}};
    s.set("name", r.name);
    s.set("kind", kind_name(r.kind));
    s.set("dims", join(r.dims));
    if (!r.ranks.empty()) s.set("ranks", join(r.ranks));
    if (r.kind == LayerKind::conv || r.kind == LayerKind::factorized_conv) {
      s.set("stride", std::to_string(r.stride));
      s.set("padding", std::to_string(r.padding));
    }
    s.set("offset", std::to_string(r.offset));
    s.set("length", std::to_string(r.length));
    doc.sections.push_back(std::move(s));
  }
  return doc;
}

ModelManifest manifest_from_kv(const KvDocument& doc) {
  const KvSection& h = doc.header();
  ModelManifest m;
  const auto version = parse_uint(h.get("format_version"), "format_version");
  if (version != kManifestVersion)
    fail(ErrorCode::version_skew, "manifest format_version " + std::to_string(version) + ", this build reads " +
                                      std::to_string(kManifestVersion));
  m.format_version = static_cast<std::uint32_t>(version);
  m.blob = h.get("blob");
  m.blob_bytes = parse_uint(h.get("blob_bytes"), "blob_bytes");
  const std::string& crc = h.get("checksum");
  if (crc.rfind("crc32:", 0) != 0 || crc.size() != 14) fail(ErrorCode::format, "checksum must be crc32:<8 hex digits>");
  m.checksum = static_cast<std::uint32_t>(std::stoul(crc.substr(6), nullptr, 16));
  const auto in = parse_uint_list(h.get("input"), "input");
  if (in.size() != 3) fail(ErrorCode::format, "input must be 'C H W'");
  m.input = InputShape{in[0], in[1], in[2]};
  m.classes = parse_uint(h.get("classes"), "classes");
  const auto n_layers = parse_uint(h.get("layers"), "layers");

  std::uint64_t expected_offset = 0;
  for (std::size_t i = 1; i < doc.sections.size(); ++i) {
    const KvSection& s = doc.sections[i];
    if (s.name != "layer") fail(ErrorCode::format, "unexpected section [" + s.name + "]");
    LayerRecord r;
    r.name = s.get("name");
    r.kind = kind_from_name(s.get("kind"));
    r.dims = parse_uint_list(s.get("dims"), "dims");
    if (auto v = s.find("ranks")) r.ranks = parse_uint_list(*v, "ranks");
    if (auto v = s.find("stride")) r.stride = parse_uint(*v, "stride");
    if (auto v = s.find("padding")) r.padding = parse_uint(*v, "padding");
    r.offset = parse_uint(s.get("offset"), "offset");
    r.length = parse_uint(s.get("length"), "length");
    if (r.offset != expected_offset)
      fail(ErrorCode::format, "layer '" + r.name + "': offset " + std::to_string(r.offset) + " breaks the contiguous layout");
    expected_offset += r.length;
    m.layers.push_back(std::move(r));
  }
  if (m.layers.size() != n_layers) fail(ErrorCode::format, "manifest declares " + std::to_string(n_layers) + " layers");
  if (expected_offset != m.blob_bytes) fail(ErrorCode::format, "layer lengths do not sum to blob_bytes");
  return m;
}

void save_model(const Model& model, const std::filesystem::path& dir) {
  model.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create '" + dir.string() + "': " + ec.message());
  const std::string blob = serialize_blob(model);
  ModelManifest m = build_manifest(model);
  m.checksum = blob_checksum(blob);
  write_file_atomic(dir / kBlobFile, blob);
  write_file_atomic(dir / kManifestFile, "# low-rank model manifest\n" + render_kv(manifest_to_kv(m)));
}

Model load_model(const std::filesystem::path& dir) {
  const ModelManifest m = manifest_from_kv(read_kv_file(dir / kManifestFile));
  std::ifstream in(dir / m.blob, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open blob '" + (dir / m.blob).string() + "'");
  const std::string blob{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (blob.size() < m.blob_bytes)
    fail(ErrorCode::truncated_blob, "blob has " + std::to_string(blob.size()) + " bytes, manifest expects " +
                                        std::to_string(m.blob_bytes));
  if (blob.size() > m.blob_bytes) fail(ErrorCode::format, "blob is longer than the manifest declares");
  if (blob_checksum(blob) != m.checksum) fail(ErrorCode::checksum_mismatch, "blob checksum does not match manifest");

  Model model;
  model.input = m.input;
  model.classes = m.classes;
  for (const auto& r : m.layers) {
    Block b = block_for(r);
    if (block_bytes(b) != r.length)
      fail(ErrorCode::format, "layer '" + r.name + "': length " + std::to_string(r.length) + " does not match its shapes");
    std::uint64_t off = r.offset;
    for (auto s : parameter_spans(b)) {
      read_le(blob, off, s);
      off += s.size() * kFloatBytes;
    }
    model.layers.push_back(Layer{r.name, std::move(b)});
  }
  try {
    model.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, std::string("loaded model is inconsistent: ") + e.what());
  }
  return model;
}

} // namespace lrc
