#pragma once

// Generation / participation-factor subproblem at fixed susceptances.

#include "gridflex/conic.hpp"
#include "gridflex/dcflow.hpp"
#include "gridflex/netmodel.hpp"

#include <memory>
#include <vector>

namespace gridflex {

struct SubproblemOptions {
    bool participation_nonnegative = true;
    double socp_tolerance = 1e-9;
    double dual_binding_tol = 1e-6;    ///< relative to the objective's cost scale
    double primal_binding_tol = 1e-6;  ///< p.u.
};

/// Where one direction of a line-flow limit sits in the conic program.
struct FlowRow {
    int line = 0;
    int direction = +1;  ///< +1: f <= f_emax, -1: -f <= f_emax
    bool cone = false;
    int offset = 0;      ///< first row of the constraint in G
};

struct GenSubproblem {
    ConicProgram program;
    std::vector<FlowRow> flow_rows;
    int n_generators = 0;
    bool has_participation = true;  ///< false when Sigma = 0 (alpha left out of the program)
    double s_sigma = 0.0;
    double cost_scale = 1.0;        ///< max |q|, |P| entry of the objective
    SubproblemOptions options;
    Vector susceptance;
};

/// Throws InvalidGrid when the grid has no generators and Infeasible when total
/// capacity cannot meet the net load.
GenSubproblem build_gen_subproblem(const Grid& grid, const UncertaintyModel& uncertainty,
                                   const NetworkOperator& op, const SubproblemOptions& options);

struct SubproblemSolution {
    Vector p_base;  ///< bus-indexed, p.u.
    Vector alpha;   ///< bus-indexed
    double objective = 0.0;  ///< $/h
    Vector lambda_plus;      ///< per line, zeroed off the binding sets
    Vector lambda_minus;
    Vector raw_lambda_plus;  ///< as returned by the solver
    Vector raw_lambda_minus;
    Vector slack_plus;   ///< f_emax - f
    Vector slack_minus;  ///< f_emax + f
    Vector flow_mean;
    Vector flow_std;
    std::vector<int> binding_plus;
    std::vector<int> binding_minus;
    double dual_tol = 0.0;  ///< absolute threshold actually used
    SolverStatus solver_status = SolverStatus::Optimal;
    int solver_iterations = 0;
    bool reduced_accuracy = false;

    bool congested() const { return !binding_plus.empty() || !binding_minus.empty(); }
    DispatchDecision decision(const Grid& grid, const Vector& susceptance) const;
};

/// Throws Infeasible or NumericalLimit when the solver does not reach optimality.
SubproblemSolution solve_gen_subproblem(const GenSubproblem& subproblem, const Grid& grid,
                                        const UncertaintyModel& uncertainty,
                                        const NetworkOperator& op,
                                        const ConicSolver& solver = *default_conic_solver());

/// Lines whose dual exceeds dual_tol while the limit's slack is below primal_tol.
std::pair<std::vector<int>, std::vector<int>> binding_sets(const SubproblemSolution& solution,
                                                           double primal_tol, double dual_tol);

/// Builds the operator, the program and solves it in one call.
SubproblemSolution solve_dispatch(const Grid& grid, const UncertaintyModel& uncertainty,
                                  const Vector& susceptance, const SubproblemOptions& options,
                                  const ConicSolver& solver = *default_conic_solver());

}  // namespace gridflex
