#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

#include "segdiag/report.hpp"

namespace segdiag::detail {

nlohmann::ordered_json build_report_json(const DiagnosticsReport& report);

void write_tables(const nlohmann::ordered_json& report, const std::filesystem::path& dir);
void write_charts(const nlohmann::ordered_json& report, const std::filesystem::path& dir);

std::string taxonomy_fingerprint(const Taxonomy& t);

}  // namespace segdiag::detail
