#pragma once

// Machine-readable run reports (JSON, schema in schema/report.schema.json) and CSV tables.

#include "gridflex/caseio.hpp"
#include "gridflex/orchestrator.hpp"
#include "gridflex/validate.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace gridflex {

constexpr int kReportSchemaVersion = 1;

struct RunMetadata {
    std::string command;
    std::filesystem::path case_path;
    std::filesystem::path scenario_path;
    std::string scenario_digest;  ///< FNV-1a of the scenario text
    std::string mode;             ///< cced | ed
    bool flexibility = true;
    StudyConfig config;
};

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

nlohmann::json config_json(const StudyConfig& config);
nlohmann::json metadata_json(const RunMetadata& meta);

nlohmann::json solve_report_json(const Grid& grid, const SolveReport& report,
                                 const RunMetadata& meta);
nlohmann::json study_report_json(const Grid& grid, const FourSolutionStudy& study,
                                 const RunMetadata& meta);
nlohmann::json validation_report_json(const Grid& grid, const ValidationReport& report,
                                      const RunMetadata& meta, const std::string& solution_path);

struct SweepPoint {
    double degree = 0.0;
    double cost = 0.0;
    double initial_cost = 0.0;
    std::string termination;
    int accepted_iterations = 0;
};

nlohmann::json sweep_report_json(const std::vector<SweepPoint>& points, const RunMetadata& meta);

/// Decision triple and provenance read back from a solve report.
struct StoredSolution {
    std::filesystem::path case_path;
    std::filesystem::path scenario_path;
    Vector p_base;
    Vector alpha;
    Vector susceptance;
};

/// Throws ConfigParse when required fields are missing or malformed.
StoredSolution read_solution(const nlohmann::json& report);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string render() const;
};

CsvTable generators_table(const Grid& grid, const SolveReport& report);
CsvTable flexible_lines_table(const Grid& grid, const SolveReport& report);
CsvTable trajectory_table(const Grid& grid, const SolveReport& report);
CsvTable costs_table(const FourSolutionStudy& study);
CsvTable sweep_table(const std::vector<SweepPoint>& points);
CsvTable rates_table(const Grid& grid, const ValidationReport& report);

/// Writes text to a file, creating parent directories; throws Io.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gridflex
