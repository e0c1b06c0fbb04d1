#pragma once

// Report emission. The CSV holds one row per (task, model) cell in the
// column order task, model, n, success, procedure time, path ratio,
// force mean/max, speed mean/max; each metric has _mean, _std, _p and _sig
// columns, where _p/_sig come from the first paired comparison involving the
// row's model on that task. The JSON twin carries everything plus the raw
// per-episode log.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "endonav/eval/evaluate.hpp"

namespace endonav::eval {

inline constexpr std::string_view kReportSchema = "endonav-report/1";

enum class ReportFormat { Csv, Json };

std::vector<std::string> csv_header();
std::string to_csv(const AggregateReport& report);
nlohmann::json to_json(const AggregateReport& report);

// Writes atomically (temporary file + rename). Throws std::runtime_error on I/O failure.
void write_report(const AggregateReport& report, const std::filesystem::path& path, ReportFormat format);

// Rows keyed by header name; throws ParseError on ragged rows.
std::vector<std::map<std::string, std::string>> read_csv(const std::string& text);

std::vector<EpisodeMetrics> episodes_from_json(const nlohmann::json& doc);

// Shortest round-trip decimal text; empty for NaN.
std::string format_number(double v);

}  // namespace endonav::eval
