#pragma once

// Line-oriented key/value documents:
//
//   # comment
//   key = value
//   [section]
//   key = value
//
// Keys may repeat. Entries before the first [section] belong to the
// unnamed header section. Used for model manifests and config files.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrc/model.hpp"
#include "lrc/trainer.hpp"

namespace lrc {

struct KvSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  std::optional<std::string> find(const std::string& key) const;
  /// Value of a key that must be present; ErrorCode::format otherwise.
  const std::string& get(const std::string& key) const;
  std::vector<std::string> all(const std::string& key) const;
  void set(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
};

struct KvDocument {
  std::vector<KvSection> sections;  // sections[0] is the header

  KvSection& header() { return sections.front(); }
  const KvSection& header() const { return sections.front(); }
};

KvDocument parse_kv(const std::string& text);
std::string render_kv(const KvDocument& doc);
KvDocument read_kv_file(const std::filesystem::path& path);

std::uint64_t parse_uint(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);
std::vector<std::size_t> parse_uint_list(const std::string& s, const std::string& what);

/// input = C H W / classes = N / conv = out D stride padding (repeatable) /
/// fc = width (repeatable hidden layer). The literal name "tinynet" is
/// also accepted in place of a file.
Architecture parse_architecture(const KvDocument& doc);
Architecture load_architecture(const std::string& path_or_name);

/// epochs_overparam, epochs_lowrank, batch_size, lr_schedule ("0:0.1 100:0.01"), lr_schedule_lowrank,
/// rho, lambda, seed, keep_ortho_phase2. Missing keys keep `base` values.
TrainConfig parse_train_config(const KvDocument& doc, TrainConfig base = TrainConfig{});

/// Write `contents` to a temporary sibling and rename it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace lrc
