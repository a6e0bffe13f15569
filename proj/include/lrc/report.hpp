#pragma once

#include <filesystem>
#include <string>

#include "lrc/metrics.hpp"
#include "lrc/rank_select.hpp"

namespace lrc {

inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportText = "report.txt";

std::string report_to_json(const CompressionReport& report);
CompressionReport report_from_json(const std::string& json);

/// Per-layer table plus model totals. With `printed_formulas` the conv CR/SR
/// columns use the single-rank closed forms instead of exact counts.
std::string render_report(const CompressionReport& report, bool printed_formulas = false);

std::string render_rank_report(const RankReport& report, std::size_t max_values = 8);

/// Writes report.json and report.txt into `dir`.
void save_report(const CompressionReport& report, const std::filesystem::path& dir);
CompressionReport load_report(const std::filesystem::path& dir);

} // namespace lrc
