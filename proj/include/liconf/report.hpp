#pragma once

// Result documents and their renderings. A run is first turned into a JSON
// document; every other format (CSV tables, SVG heatmaps, the EMR-APSS
// operating-point scatter) is rendered from that document, so re-rendering a
// saved document reproduces the original files byte for byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "liconf/experiment.hpp"

namespace liconf {

enum class ReportFormat { csv, json, svg_heatmap };

ReportFormat parse_report_format(std::string_view s);

struct ReportDocument {
  nlohmann::ordered_json json;
};

// Everything about a sweep besides the numbers; echoed into the document.
struct RunInfo {
  std::string trace;
  ExperimentConfig config;
};

ReportDocument sweep_document(const SweepResult& result, const RunInfo& info);
ReportDocument crossdomain_document(const CrossDomainResult& result, const RunInfo& info);

// Writes the files of one format into `dir` (created if missing) and returns
// their paths in write order. Throws Error when a file cannot be written.
std::vector<std::filesystem::path> emit_report(const ReportDocument& doc, ReportFormat format,
                                               const std::filesystem::path& dir);

// Loads the document saved by emit_report(..., json, dir).
ReportDocument load_report(const std::filesystem::path& dir);

// Shortest representation that parses back to the same double; "inf" for +inf.
std::string format_number(double v);

// Standalone renderers, exposed for tests.
std::string render_matrix_csv(const std::vector<std::string>& domains, const std::vector<std::vector<double>>& m);
std::string render_heatmap_svg(const std::string& title, const std::vector<std::string>& domains,
                               const std::vector<std::vector<double>>& m);

}  // namespace liconf
