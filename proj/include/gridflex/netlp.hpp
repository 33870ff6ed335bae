#pragma once

// Susceptance sensitivities of the equivalent flow limits and of the optimal
// cost, and the trust-region LP over susceptance adjustments.

#include "gridflex/dcflow.hpp"
#include "gridflex/netmodel.hpp"
#include "gridflex/socp.hpp"

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace gridflex {

constexpr double kStdFloor = 1e-9;

/// Flow-spread basis M = T_g L with L L' = Sigma, so std(f_ij) = ||T_f,ij M||.
Matrix flow_spread_basis(const DispatchDecision& decision, const UncertaintyModel& uncertainty);

/// d f_emax_ij / d b_km. Empty when std(f_ij) <= std_floor (callers treat it as 0).
std::optional<double> flow_limit_sensitivity(const NetworkOperator& op, const Grid& grid,
                                             const Matrix& spread, int ij, int km,
                                             double std_floor = kStdFloor);

using LinePair = std::pair<int, int>;  ///< (congested line, flexible line)

struct SensitivityBundle {
    std::map<LinePair, double> d_femax;
    std::map<LinePair, double> d_fbar;
    std::vector<LinePair> degenerate;  ///< pairs whose flow std sits at the floor while Sigma != 0
    Vector d_cost;                     ///< per line; zero off the flexible set
};

/// Sensitivities for every (binding line, flexible line) pair and the resulting cost gradient.
SensitivityBundle compute_sensitivities(const NetworkOperator& op, const Grid& grid,
                                        const UncertaintyModel& uncertainty,
                                        const SubproblemSolution& solution);

/// Cost gradient from the binding sets and stored duals.
Vector cost_sensitivity(const SensitivityBundle& bundle, const SubproblemSolution& solution,
                        int n_lines);

/// The same gradient summed over every line with the cleaned duals.
Vector cost_sensitivity_all_lines(const NetworkOperator& op, const Grid& grid,
                                  const UncertaintyModel& uncertainty,
                                  const SubproblemSolution& solution);

/// Per-line closed form of min d'db s.t. b_lower <= b + db <= b_upper, |db| <= trust.
/// Lines outside `flexible` get 0, as do zero gradients.
Vector solve_susceptance_lp(const Vector& d_cost, const Vector& b, const Vector& b_lower,
                            const Vector& b_upper, const Vector& trust,
                            const std::vector<int>& flexible);

}  // namespace gridflex
