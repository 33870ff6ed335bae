// gridflex command-line driver: solve, study, validate, sweep.

#include "gridflex/caseio.hpp"
#include "gridflex/error.hpp"
#include "gridflex/orchestrator.hpp"
#include "gridflex/report.hpp"
#include "gridflex/validate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gridflex;

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kInfeasible = 2,
    kIterationCap = 3,
    kValidationFailed = 4,
};

// Bare fixture names ("case14", "flex14") resolve against the bundled data directory.
fs::path resolve_input(const std::string& name, const char* extension) {
    const fs::path given(name);
    if (fs::exists(given)) return fs::absolute(given);
    std::vector<fs::path> roots;
    if (const char* env = std::getenv("GRIDFLEX_DATA_DIR")) roots.emplace_back(env);
#ifdef GRIDFLEX_DATA_DIR
    roots.emplace_back(GRIDFLEX_DATA_DIR);
#endif
    for (const fs::path& root : roots) {
        for (const fs::path& candidate : {root / given, root / (name + extension)}) {
            if (fs::exists(candidate)) return fs::absolute(candidate);
        }
    }
    throw Error(ErrorCode::Io, "cannot find " + name);
}

struct Inputs {
    std::string case_name;
    std::string scenario_name;
    fs::path case_path;
    fs::path scenario_path;
    StudyConfig config;
    std::optional<CaseModel> model;
    std::string digest;

    void load() {
        case_path = resolve_input(case_name, ".m");
        scenario_path = resolve_input(scenario_name, ".scenario");
        const std::string scenario_text = read_text_file(scenario_path);
        digest = fnv1a_hex(scenario_text);
        config = parse_study_config(scenario_text);
        model = apply_scenario(load_matpower(case_path), config.scenario);
    }

    RunMetadata metadata(const std::string& command, const std::string& mode, bool flex) const {
        return RunMetadata{command, case_path, scenario_path, digest, mode, flex, config};
    }
};

void add_inputs(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--case", in.case_name, "MATPOWER case file or bundled fixture name")->required();
    cmd->add_option("--scenario", in.scenario_name, "scenario file or bundled fixture name")->required();
}

void emit_json(const nlohmann::json& doc, const std::string& out) {
    if (out.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        write_text_file(out, doc.dump(2) + "\n");
    }
}

void emit_csv(const std::string& dir, const std::string& name, const CsvTable& table) {
    if (!dir.empty()) write_text_file(fs::path(dir) / (name + ".csv"), table.render());
}

int termination_exit(Termination t) {
    switch (t) {
        case Termination::IterationCap: return kIterationCap;
        case Termination::Infeasible: return kInfeasible;
        default: return kOk;
    }
}

void print_costs(const FourSolutionStudy& study) {
    std::cerr << std::fixed << std::setprecision(2);
    for (const auto& row : costs_table(study).rows) std::cerr << std::setw(6) << row[0] << "  " << row[1] << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chance-constrained economic dispatch with flexible line susceptances"};
    app.require_subcommand(1);

    Inputs in;
    std::string out;
    std::string csv_dir;
    std::string mode = "cced";
    bool flex = true;

    auto* solve = app.add_subcommand("solve", "run one dispatch and write its report");
    add_inputs(solve, in);
    solve->add_option("--mode", mode, "cced or ed")->check(CLI::IsMember({"cced", "ed"}));
    solve->add_flag("--flex,!--no-flex", flex, "treat flexible lines as decisions (default on)");
    solve->add_option("--out", out, "report path (stdout when omitted)");
    solve->add_option("--csv", csv_dir, "directory for per-table CSV files");

    auto* study = app.add_subcommand("study", "S1-S4 cost comparison");
    add_inputs(study, in);
    study->add_option("--out", out, "report path (stdout when omitted)");
    study->add_option("--csv", csv_dir, "directory for per-table CSV files");

    std::string solution_path;
    std::int64_t samples = 100000;
    std::uint64_t seed = 1;
    std::string case_override;
    std::string scenario_override;
    auto* validate = app.add_subcommand("validate", "Monte Carlo check of a solve report");
    validate->add_option("--solution", solution_path, "report written by solve")->required();
    validate->add_option("--samples", samples, "sample count (>= 1000)")->check(CLI::Range(std::int64_t{1000}, std::int64_t{1} << 40));
    validate->add_option("--seed", seed, "RNG seed");
    validate->add_option("--case", case_override, "override the case recorded in the report");
    validate->add_option("--scenario", scenario_override, "override the scenario recorded in the report");
    validate->add_option("--out", out, "report path (stdout when omitted)");
    validate->add_option("--csv", csv_dir, "directory for per-table CSV files");

    std::vector<double> degrees;
    auto* sweep = app.add_subcommand("sweep", "final CCED cost over flexibility degrees");
    add_inputs(sweep, in);
    sweep->add_option("--d-values", degrees, "degrees of flexibility in [0, 1)")
        ->required()
        ->delimiter(',')
        ->check(CLI::Range(0.0, 0.999999));
    sweep->add_option("--out", out, "report path (stdout when omitted)");
    sweep->add_option("--csv", csv_dir, "directory for per-table CSV files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kFailure;
    }

    try {
        if (*solve) {
            in.load();
            const Grid grid = flex ? in.model->grid : in.model->grid.without_flexibility();
            const SolveReport report = mode == "ed" ? solve_ed(grid, in.config)
                                                    : solve_cced(grid, in.model->uncertainty, in.config);
            emit_json(solve_report_json(grid, report, in.metadata("solve", mode, flex)), out);
            emit_csv(csv_dir, "generators", generators_table(grid, report));
            emit_csv(csv_dir, "flexible_lines", flexible_lines_table(grid, report));
            emit_csv(csv_dir, "trajectory", trajectory_table(grid, report));
            for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
            std::cerr << to_string(report.termination) << ": " << std::fixed << std::setprecision(2)
                      << report.final.objective << " $/h after " << report.accepted_iterations
                      << " accepted iterations\n";
            return termination_exit(report.termination);
        }
        if (*study) {
            in.load();
            const FourSolutionStudy result =
                four_solution_study(in.model->grid, in.model->uncertainty, in.config);
            emit_json(study_report_json(in.model->grid, result, in.metadata("study", "cced+ed", true)), out);
            emit_csv(csv_dir, "costs", costs_table(result));
            emit_csv(csv_dir, "cced_trajectory", trajectory_table(in.model->grid, result.cced));
            emit_csv(csv_dir, "ed_trajectory", trajectory_table(in.model->grid, result.ed));
            print_costs(result);
            return std::max(termination_exit(result.cced.termination), termination_exit(result.ed.termination));
        }
        if (*validate) {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(read_text_file(solution_path));
            } catch (const nlohmann::json::parse_error& e) {
                throw Error(ErrorCode::ConfigParse, solution_path + ": " + e.what());
            }
            const StoredSolution stored = read_solution(doc);
            in.case_name = case_override.empty() ? stored.case_path.string() : case_override;
            in.scenario_name = scenario_override.empty() ? stored.scenario_path.string() : scenario_override;
            in.load();
            const Grid& grid = in.model->grid;
            const DispatchDecision decision(grid, stored.p_base, stored.alpha, stored.susceptance);
            const ValidationReport report =
                monte_carlo_validate(grid, in.model->uncertainty, decision, samples, seed);
            emit_json(validation_report_json(grid, report, in.metadata("validate", "cced", true), solution_path),
                      out);
            emit_csv(csv_dir, "rates", rates_table(grid, report));
            if (!report.balanced) {
                std::cerr << "decision does not balance the forecast: residual "
                          << report.balance_residual * grid.base_mva() << " MW\n";
            }
            std::cerr << "max violation rate " << report.max_rate() << " over " << samples << " samples: "
                      << (report.all_pass ? "pass" : "FAIL") << "\n";
            return report.all_pass ? kOk : kValidationFailed;
        }
        if (*sweep) {
            in.load();
            std::vector<SweepPoint> points;
            int worst = kOk;
            for (double d : degrees) {
                const Grid grid = in.model->grid.with_flexibility_degree(d);
                const SolveReport report = solve_cced(grid, in.model->uncertainty, in.config);
                points.push_back({d, report.final.objective, report.initial.objective,
                                  to_string(report.termination), report.accepted_iterations});
                worst = std::max(worst, termination_exit(report.termination));
                std::cerr << "d = " << d << ": " << std::fixed << std::setprecision(2)
                          << report.final.objective << " $/h (" << to_string(report.termination) << ")\n";
                std::cerr.unsetf(std::ios::fixed);
            }
            emit_json(sweep_report_json(points, in.metadata("sweep", "cced", true)), out);
            emit_csv(csv_dir, "sweep", sweep_table(points));
            return worst;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::Infeasible || e.code() == ErrorCode::InfeasibleMargin ? kInfeasible
                                                                                          : kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
