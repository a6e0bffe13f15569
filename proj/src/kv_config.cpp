#include "lrc/kv_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace lrc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<LrStep> parse_schedule(const std::string& text, const std::string& what) {
  std::vector<LrStep> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) fail(ErrorCode::format, what + ": expected epoch:rate pairs");
    out.push_back(LrStep{parse_uint(tok.substr(0, colon), what), parse_double(tok.substr(colon + 1), what)});
  }
  return out;
}

} // namespace

std::optional<std::string> KvSection::find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  return std::nullopt;
}

const std::string& KvSection::get(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  fail(ErrorCode::format, "missing key '" + key + "'" + (name.empty() ? "" : " in [" + name + "]"));
}

std::vector<std::string> KvSection::all(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries)
    if (k == key) out.push_back(v);
  return out;
}

KvDocument parse_kv(const std::string& text) {
  KvDocument doc;
  doc.sections.emplace_back();
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::format, "line " + std::to_string(line_no) + ": unterminated section");
      doc.sections.push_back(KvSection{trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::format, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorCode::format, "line " + std::to_string(line_no) + ": empty key");
    doc.sections.back().set(key, trim(line.substr(eq + 1)));
  }
  return doc;
}

std::string render_kv(const KvDocument& doc) {
  std::ostringstream out;
  for (std::size_t i = 0; i < doc.sections.size(); ++i) {
    const auto& s = doc.sections[i];
    if (i > 0) out << "\n[" << s.name << "]\n";
    for (const auto& [k, v] : s.entries) out << k << " = " << v << "\n";
  }
  return out.str();
}

KvDocument read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_kv(ss.str());
}

std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    fail(ErrorCode::format, what + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::format, what + ": expected a number, got '" + s + "'");
}

std::vector<std::size_t> parse_uint_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_uint(tok, what));
  return out;
}

Architecture parse_architecture(const KvDocument& doc) {
  const KvSection& h = doc.header();
  for (const auto& [key, value] : h.entries)
    if (key != "input" && key != "classes" && key != "conv" && key != "fc")
      fail(ErrorCode::format, "architecture: unknown key '" + key + "'");
  Architecture a;
  if (auto in = h.find("input")) {
    const auto v = parse_uint_list(*in, "input");
    if (v.size() != 3) fail(ErrorCode::format, "input: expected 'C H W'");
    a.input = InputShape{v[0], v[1], v[2]};
  }
  if (auto c = h.find("classes")) a.classes = parse_uint(*c, "classes");
  for (const auto& conv : h.all("conv")) {
    const auto v = parse_uint_list(conv, "conv");
    if (v.empty() || v.size() > 4) fail(ErrorCode::format, "conv: expected 'out [kernel [stride [padding]]]'");
    ConvStage st;
    st.out_channels = v[0];
    if (v.size() > 1) st.kernel = v[1];
    st.padding = st.kernel / 2;
    if (v.size() > 2) st.stride = v[2];
    if (v.size() > 3) st.padding = v[3];
    a.convs.push_back(st);
  }
  for (const auto& fc : h.all("fc")) a.hidden_fc.push_back(parse_uint(fc, "fc"));
  try {
    a.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, std::string("architecture: ") + e.what());
  }
  return a;
}

Architecture load_architecture(const std::string& path_or_name) {
  if (path_or_name == "tinynet") return Architecture::tinynet();
  return parse_architecture(read_kv_file(path_or_name));
}

TrainConfig parse_train_config(const KvDocument& doc, TrainConfig c) {
  const KvSection& h = doc.header();
  static const char* const known[] = {"epochs_overparam", "epochs_lowrank", "batch_size", "rho", "lambda", "seed",
                                      "keep_ortho_phase2", "lr_schedule", "lr_schedule_lowrank"};
  for (const auto& [key, value] : h.entries)
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      fail(ErrorCode::format, "train config: unknown key '" + key + "'");
  if (doc.sections.size() > 1) fail(ErrorCode::format, "train config: unexpected section [" + doc.sections[1].name + "]");
  if (auto v = h.find("epochs_overparam")) c.epochs_overparam = parse_uint(*v, "epochs_overparam");
  if (auto v = h.find("epochs_lowrank")) c.epochs_lowrank = parse_uint(*v, "epochs_lowrank");
  if (auto v = h.find("batch_size")) c.batch_size = parse_uint(*v, "batch_size");
  if (auto v = h.find("rho")) c.ortho.rho = parse_double(*v, "rho");
  if (auto v = h.find("lambda")) c.ortho.lambda = parse_double(*v, "lambda");
  if (auto v = h.find("seed")) c.seed = parse_uint(*v, "seed");
  if (auto v = h.find("keep_ortho_phase2")) {
    if (*v != "true" && *v != "1" && *v != "false" && *v != "0")
      fail(ErrorCode::format, "keep_ortho_phase2: expected true or false, got '" + *v + "'");
    c.keep_ortho_phase2 = *v == "true" || *v == "1";
  }
  if (auto v = h.find("lr_schedule")) c.lr_schedule = parse_schedule(*v, "lr_schedule");
  if (auto v = h.find("lr_schedule_lowrank")) c.lr_schedule_lowrank = parse_schedule(*v, "lr_schedule_lowrank");
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, std::string("train config: ") + e.what());
  }
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::io, "cannot rename '" + tmp.string() + "': " + ec.message());
}

} // namespace lrc
