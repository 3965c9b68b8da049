#pragma once

// Evaluation report JSON (docs/report-format.md), prediction CSV, and the
// text tables printed by the CLI.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "striatum/crossval.hpp"

namespace striatum {

inline constexpr int kReportSchemaVersion = 1;

/// ISO-8601 UTC, second resolution.
std::string current_timestamp();

/// Keys are sorted and doubles printed at round-trip precision; only the
/// "generated_at" field depends on `timestamp`.
std::string report_json(const EvalReport& report, const std::string& timestamp);
EvalReport parse_report(const std::string& text);

void emit_report(const EvalReport& report, const std::filesystem::path& path,
                 const std::optional<std::string>& timestamp = std::nullopt);
EvalReport read_report(const std::filesystem::path& path);

/// Columns: index,id,fold,score,label,predicted.
void write_predictions_csv(const EvalReport& report, const std::filesystem::path& path);

/// One row per report: accuracy, AUC, APR, precision, recall, specificity (in
/// percent) and the confusion matrix [[TP, FN], [FP, TN]].
std::string format_metrics_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

/// Method, TN, FP, accuracy.
std::string format_holdout_table(const std::vector<HoldoutResult>& rows);

}  // namespace striatum
