#include "gridflex/orchestrator.hpp"

#include "gridflex/dcflow.hpp"
#include "gridflex/error.hpp"
#include "gridflex/netlp.hpp"
#include "gridflex/threads.hpp"

#include <chrono>
#include <future>
#include <memory>
#include <optional>
#include <sstream>

namespace gridflex {

std::string to_string(Termination termination) {
    switch (termination) {
        case Termination::NoCongestionInitial: return "no-congestion-initial";
        case Termination::CongestionCleared: return "congestion-cleared";
        case Termination::ConvergedMatched: return "converged-matched";
        case Termination::IterationCap: return "iteration-cap";
        case Termination::Infeasible: return "infeasible";
    }
    return "unknown";
}

DispatchDecision SolveReport::decision(const Grid& grid) const {
    return final.decision(grid, susceptance);
}

DispatchDecision SolveReport::initial_decision(const Grid& grid) const {
    return initial.decision(grid, grid.rated_susceptance());
}

std::vector<double> SolveReport::accepted_costs() const {
    std::vector<double> costs;
    for (const IterationRecord& r : trajectory) {
        if (r.accepted) costs.push_back(r.cost);
    }
    return costs;
}

SubproblemOptions subproblem_options(const StudyConfig& config) {
    SubproblemOptions o;
    o.participation_nonnegative = config.scenario.participation_nonnegative;
    o.socp_tolerance = config.algorithm.socp_tolerance;
    o.dual_binding_tol = config.algorithm.dual_binding_tol;
    o.primal_binding_tol = config.algorithm.primal_binding_tol;
    return o;
}

namespace {

IterationRecord make_record(int index, const SubproblemSolution& sol, const Vector& b,
                            const Vector& delta_b, const Vector& trust, bool accepted, int shrinks) {
    IterationRecord r;
    r.index = index;
    r.cost = sol.objective;
    r.lambda_plus = sol.lambda_plus;
    r.lambda_minus = sol.lambda_minus;
    r.susceptance = b;
    r.delta_b = delta_b;
    r.trust_region = trust;
    r.accepted = accepted;
    r.shrink_count = shrinks;
    r.congested = sol.congested();
    return r;
}

}  // namespace

SolveReport solve_cced(const Grid& grid, const UncertaintyModel& uncertainty,
                       const StudyConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const AlgorithmConfig& alg = config.algorithm;
    const SubproblemOptions options = subproblem_options(config);
    const int l = grid.n_lines();

    SolveReport report;
    Vector b = grid.rated_susceptance();
    auto op = std::make_unique<NetworkOperator>(grid, b);
    SubproblemSolution sol =
        solve_gen_subproblem(build_gen_subproblem(grid, uncertainty, *op, options), grid,
                             uncertainty, *op);
    report.initial = sol;

    const Vector trust0 = alg.trust_region_frac * grid.rated_susceptance();
    Vector trust = trust0;
    report.trajectory.push_back(make_record(0, sol, b, Vector::Zero(l), trust, true, 0));

    auto finish = [&](Termination t) {
        report.termination = t;
        report.susceptance = b;
        report.final = sol;
        report.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return report;
    };

    if (!sol.congested()) return finish(Termination::NoCongestionInitial);
    const std::vector<int> flexible = grid.flexible_lines();
    if (flexible.empty()) return finish(Termination::ConvergedMatched);
    const Vector lower = grid.susceptance_lower();
    const Vector upper = grid.susceptance_upper();

    while (true) {
        if (report.accepted_iterations >= alg.max_outer_iterations) {
            report.warnings.push_back("stopped at the outer iteration cap");
            return finish(Termination::IterationCap);
        }
        const SensitivityBundle bundle = compute_sensitivities(*op, grid, uncertainty, sol);
        int last_degenerate = -1;
        for (const LinePair& pair : bundle.degenerate) {
            if (pair.first == last_degenerate) continue;
            last_degenerate = pair.first;
            std::ostringstream msg;
            msg << "iteration " << report.accepted_iterations + 1 << ": line "
                << grid.bus_number(grid.line(pair.first).from_bus) << "-"
                << grid.bus_number(grid.line(pair.first).to_bus)
                << " has zero flow spread; its limit sensitivity is taken as 0";
            report.warnings.push_back(msg.str());
        }

        int shrinks = 0;
        while (true) {
            const Vector delta =
                solve_susceptance_lp(bundle.d_cost, b, lower, upper, trust, flexible);
            if (delta.cwiseAbs().maxCoeff() == 0.0) return finish(Termination::ConvergedMatched);
            const Vector b_try = (b + delta).cwiseMax(lower).cwiseMin(upper);

            std::optional<SubproblemSolution> tried;
            std::unique_ptr<NetworkOperator> op_try;
            try {
                op_try = std::make_unique<NetworkOperator>(grid, b_try);
                tried = solve_gen_subproblem(build_gen_subproblem(grid, uncertainty, *op_try, options),
                                             grid, uncertainty, *op_try);
            } catch (const Error& e) {
                report.warnings.push_back("tentative solve rejected: " + std::string(e.what()));
            }

            const bool improved = tried && tried->objective <= sol.objective;
            if (tried) {
                report.trajectory.push_back(make_record(report.accepted_iterations + 1, *tried, b_try,
                                                        delta, trust, improved, shrinks));
            }
            if (improved) {
                if (tried->objective == sol.objective) {
                    report.warnings.push_back("iteration " +
                                              std::to_string(report.accepted_iterations + 1) +
                                              " accepted without cost progress");
                }
                b = b_try;
                sol = std::move(*tried);
                op = std::move(op_try);
                ++report.accepted_iterations;
                trust = trust0;
                if (!sol.congested()) return finish(Termination::CongestionCleared);
                if (delta.cwiseAbs().maxCoeff() < alg.delta) return finish(Termination::ConvergedMatched);
                break;
            }
            ++shrinks;
            if (shrinks >= alg.max_shrink_per_iteration) return finish(Termination::ConvergedMatched);
            trust *= alg.beta;
        }
    }
}

SolveReport solve_ed(const Grid& grid, const StudyConfig& config) {
    return solve_cced(grid, UncertaintyModel(grid.n_buses()), config);
}

FourSolutionStudy four_solution_study(const Grid& grid, const UncertaintyModel& uncertainty,
                                      const StudyConfig& config) {
    FourSolutionStudy study;
    if (max_workers() > 1) {
        auto ed = std::async(std::launch::async, [&] { return solve_ed(grid, config); });
        study.cced = solve_cced(grid, uncertainty, config);
        study.ed = ed.get();
    } else {
        study.cced = solve_cced(grid, uncertainty, config);
        study.ed = solve_ed(grid, config);
    }
    study.s1 = study.cced.final.objective;
    study.s2 = study.cced.initial.objective;
    study.s3 = study.ed.final.objective;
    study.s4 = study.ed.initial.objective;
    return study;
}

}  // namespace gridflex
