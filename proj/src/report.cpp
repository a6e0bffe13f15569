#include "lrc/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lrc/kv_config.hpp"

namespace lrc {

namespace {

using nlohmann::json;

json rank_to_json(const RankReport& r) {
  return json{{"layer", r.layer_id},
              {"estimated_rank", r.estimated_rank},
              {"singular_values", r.singular_values},
              {"retained", r.retained_mask},
              {"noise_sigma2", r.noise_sigma2},
              {"threshold", r.threshold},
              {"noiseless", r.noiseless}};
}

RankReport rank_from_json(const json& j) {
  RankReport r;
  r.layer_id = j.at("layer").get<std::string>();
  r.estimated_rank = j.at("estimated_rank").get<std::size_t>();
  r.singular_values = j.at("singular_values").get<std::vector<double>>();
  r.retained_mask = j.at("retained").get<std::vector<bool>>();
  r.noise_sigma2 = j.at("noise_sigma2").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.noiseless = j.at("noiseless").get<bool>();
  return r;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

} // namespace

std::string report_to_json(const CompressionReport& report) {
  json layers = json::array();
  for (const auto& l : report.layers) {
    json j{{"id", l.id},
           {"kind", l.kind == ReportLayerKind::conv ? "conv" : "fc"},
           {"ranks", l.ranks},
           {"p_original", l.p_original},
           {"p_compressed", l.p_compressed},
           {"cr", l.cr},
           {"sr", l.sr}};
    if (l.kind == ReportLayerKind::conv) {
      j["geometry"] = {{"D", l.d}, {"S", l.s}, {"T", l.t}, {"H", l.h}, {"W", l.w}, {"H_out", l.ho}, {"W_out", l.wo}};
    } else {
      j["geometry"] = {{"M", l.m}, {"N", l.n}};
    }
    layers.push_back(std::move(j));
  }
  json ranks = json::array();
  for (const auto& r : report.rank_reports) ranks.push_back(rank_to_json(r));
  json root{{"layers", layers},
            {"model", {{"p_original", report.p_original},
                       {"p_compressed", report.p_compressed},
                       {"cr", report.p_compressed ? model_cr(report) : 0.0}}},
            {"accuracy", {{"top1_before", report.top1_before}, {"top1_after", report.top1_after}}},
            {"rank_reports", ranks}};
  return root.dump(2) + "\n";
}

CompressionReport report_from_json(const std::string& text) {
  CompressionReport report;
  try {
    const json root = json::parse(text);
    for (const auto& j : root.at("layers")) {
      LayerReport l;
      l.id = j.at("id").get<std::string>();
      const auto kind = j.at("kind").get<std::string>();
      const auto& g = j.at("geometry");
      if (kind == "conv") {
        l.kind = ReportLayerKind::conv;
        l.d = g.at("D"), l.s = g.at("S"), l.t = g.at("T");
        l.h = g.at("H"), l.w = g.at("W"), l.ho = g.at("H_out"), l.wo = g.at("W_out");
      } else if (kind == "fc") {
        l.kind = ReportLayerKind::fc;
        l.m = g.at("M"), l.n = g.at("N");
      } else {
        fail(ErrorCode::format, "report layer kind '" + kind + "'");
      }
      l.ranks = j.at("ranks").get<std::vector<std::size_t>>();
      l.p_original = j.at("p_original");
      l.p_compressed = j.at("p_compressed");
      l.cr = j.at("cr");
      l.sr = j.at("sr");
      report.layers.push_back(std::move(l));
    }
    report.p_original = root.at("model").at("p_original");
    report.p_compressed = root.at("model").at("p_compressed");
    report.top1_before = root.at("accuracy").at("top1_before");
    report.top1_after = root.at("accuracy").at("top1_after");
    for (const auto& r : root.at("rank_reports")) report.rank_reports.push_back(rank_from_json(r));
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("malformed report: ") + e.what());
  }
  try {
    report.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, e.what());
  }
  return report;
}

std::string render_report(const CompressionReport& report, bool printed_formulas) {
  std::ostringstream out;
  out << pad("layer", 10) << pad("kind", 6) << pad("ranks", 10) << pad("P_orig", 10) << pad("P_comp", 10)
      << pad("CR", 9) << pad("SR", 9) << "\n";
  for (const auto& l : report.layers) {
    std::string ranks;
    for (std::size_t i = 0; i < l.ranks.size(); ++i) ranks += (i ? "," : "") + std::to_string(l.ranks[i]);
    if (ranks.empty()) ranks = "-";
    double cr = l.cr, sr = l.sr;
    if (printed_formulas && l.kind == ReportLayerKind::conv && l.ranks.size() == 2) {
      cr = printed_conv_cr(l.d, l.s, l.t, l.ranks[0], l.ranks[1]);
      sr = printed_conv_sr(l.d, l.s, l.t, l.ranks[0], l.ranks[1], l.h, l.w, l.ho, l.wo);
    }
    out << pad(l.id, 10) << pad(l.kind == ReportLayerKind::conv ? "conv" : "fc", 6) << pad(ranks, 10)
        << pad(std::to_string(l.p_original), 10) << pad(std::to_string(l.p_compressed), 10)
        << pad(fmt("%.3f", cr), 9) << pad(fmt("%.3f", sr), 9) << "\n";
  }
  out << "model: P_original " << report.p_original << ", P_compressed " << report.p_compressed;
  if (report.p_compressed) out << ", CR " << fmt("%.2f", model_cr(report)) << "x";
  out << "\n";
  if (report.top1_before >= 0.0) out << "Top-1 before: " << fmt("%.2f", report.top1_before) << "%\n";
  if (report.top1_after >= 0.0) out << "Top-1 after:  " << fmt("%.2f", report.top1_after) << "%\n";
  if (printed_formulas) out << "(conv CR/SR from the single-rank closed forms)\n";
  return out.str();
}

std::string render_rank_report(const RankReport& r, std::size_t max_values) {
  std::ostringstream out;
  out << r.layer_id << ": rank " << r.estimated_rank << " of " << r.singular_values.size();
  if (r.noiseless) {
    out << " (exact-rank branch)";
  } else {
    out << ", sigma2 " << fmt("%.4g", r.noise_sigma2) << ", threshold " << fmt("%.4g", r.threshold);
  }
  out << "\n  s:";
  for (std::size_t i = 0; i < r.singular_values.size() && i < max_values; ++i)
    out << " " << fmt("%.4g", r.singular_values[i]) << (r.retained_mask[i] ? "*" : "");
  if (r.singular_values.size() > max_values) out << " ...";
  out << "\n";
  return out.str();
}

void save_report(const CompressionReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create '" + dir.string() + "': " + ec.message());
  write_file_atomic(dir / kReportJson, report_to_json(report));
  write_file_atomic(dir / kReportText, render_report(report));
}

CompressionReport load_report(const std::filesystem::path& dir) {
  const auto path = std::filesystem::is_directory(dir) ? dir / kReportJson : dir;
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open report '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

} // namespace lrc
