#pragma once

#include "txpert/metrics.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace txpert {

/// Deterministic JSON form: no timestamps, NaN written as null.
nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

/// Throws std::runtime_error describing the first schema violation, including
/// aggregates that do not match their records.
void validate_report_json(const nlohmann::json& j);

void save_report(const MetricReport& report, const std::filesystem::path& json_path);
MetricReport load_report(const std::filesystem::path& json_path);
/// Per-perturbation table: perturbation,n_cells,pearson_delta,retrieval,fast_retrieval,excluded.
void save_report_csv(const MetricReport& report, const std::filesystem::path& csv_path);

struct SummaryRow {
    std::string name;
    MetricReport report;
};

/// One row per report with model and reference aggregates.
void save_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& csv_path);

}  // namespace txpert
