#include "gridflex/error.hpp"
#include "gridflex/report.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace gridflex;
using namespace gridflex::testing;
using nlohmann::json;

namespace {

struct Ieee14Run {
    StudyConfig cfg;
    CaseModel model = load_fixture("case14.m", "flex14.scenario", &cfg);
    SolveReport report = solve_cced(model.grid, model.uncertainty, cfg);
    RunMetadata meta{"solve", data_dir() / "case14.m", data_dir() / "flex14.scenario", "0", "cced", true, cfg};
};

}  // namespace

TEST(Fnv1a, ReferenceVectors) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(SolveReportJson, RoundTripsTheDecision) {
    Ieee14Run run;
    const json doc = solve_report_json(run.model.grid, run.report, run.meta);
    const json reparsed = json::parse(doc.dump());
    EXPECT_EQ(reparsed, doc);
    const StoredSolution s = read_solution(reparsed);
    EXPECT_EQ(s.p_base, run.report.final.p_base);
    EXPECT_EQ(s.alpha, run.report.final.alpha);
    EXPECT_EQ(s.susceptance, run.report.susceptance);
    EXPECT_EQ(s.case_path, run.meta.case_path);
}

TEST(SolveReportJson, PowersInMegawattsWithPerUnitCopies) {
    Ieee14Run run;
    const json doc = solve_report_json(run.model.grid, run.report, run.meta);
    EXPECT_EQ(doc["schema_version"], kReportSchemaVersion);
    EXPECT_EQ(doc["termination"], "congestion-cleared");
    ASSERT_EQ(doc["generators"].size(), 5u);
    for (const json& g : doc["generators"]) {
        EXPECT_NEAR(g["p_base_mw"].get<double>(), 100.0 * g["p_base_pu"].get<double>(), 1e-9);
    }
    for (const json& l : doc["lines"]) {
        EXPECT_NEAR(l["flow_mw"].get<double>(), 100.0 * l["flow_pu"].get<double>(), 1e-9);
    }
    EXPECT_EQ(doc["flexible_lines"].size(), 3u);
    EXPECT_EQ(doc["trajectory"].size(), run.report.trajectory.size());
    EXPECT_EQ(doc["trajectory"][0]["cost_usd_per_h"].get<double>(), run.report.initial.objective);
}

TEST(SolveReportJson, MissingSolutionIsAParseError) {
    try {
        read_solution(json::parse(R"({"metadata": {"case": "a", "scenario": "b"}})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigParse);
    }
    try {
        read_solution(json::parse(
            R"({"metadata": {"case": "a", "scenario": "b"}, "solution": {"p_base_pu": "x"}})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigParse);
    }
}

TEST(StudyReportJson, DifferenceCellsAreCostArithmetic) {
    StudyConfig cfg;
    const CaseModel m = load_fixture("case14.m", "flex14.scenario", &cfg);
    const FourSolutionStudy study = four_solution_study(m.grid, m.uncertainty, cfg);
    const json doc = json::parse(
        study_report_json(m.grid, study, {"study", "c", "s", "0", "cced+ed", true, cfg}).dump());
    const json& c = doc["costs_usd_per_h"];
    const auto cell = [&](const char* k) { return c[k].get<double>(); };
    for (const json& d : doc["differences_usd_per_h"]) {
        const std::string label = d["label"];
        const double v = d["value"];
        if (label == "S1-S3") EXPECT_EQ(v, cell("S1") - cell("S3"));
        if (label == "S2-S4") EXPECT_EQ(v, cell("S2") - cell("S4"));
        if (label == "S4-S3") EXPECT_EQ(v, cell("S4") - cell("S3"));
        if (label == "S2-S1") EXPECT_EQ(v, cell("S2") - cell("S1"));
    }
    EXPECT_EQ(doc["differences_usd_per_h"].size(), 4u);
}

TEST(CsvTables, HeaderAndRows) {
    Ieee14Run run;
    const CsvTable gens = generators_table(run.model.grid, run.report);
    EXPECT_EQ(gens.rows.size(), 5u);
    const std::string text = gens.render();
    EXPECT_EQ(text.substr(0, text.find('\n')), "bus,p_base_mw,alpha,initial_p_base_mw,initial_alpha");
    const CsvTable traj = trajectory_table(run.model.grid, run.report);
    EXPECT_EQ(traj.rows.size(), run.report.trajectory.size());
    for (const auto& row : traj.rows) EXPECT_EQ(row.size(), traj.header.size());
}
