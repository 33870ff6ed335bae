#include "gridflex/netlp.hpp"

#include "gridflex/ccore.hpp"

#include <algorithm>

namespace gridflex {

Matrix flow_spread_basis(const DispatchDecision& decision, const UncertaintyModel& uncertainty) {
    const Matrix root = covariance_factor(uncertainty);
    if (root.cols() == 0) return root;
    // T_g L = L - alpha (1'L)
    return root - decision.alpha() * root.colwise().sum();
}

std::optional<double> flow_limit_sensitivity(const NetworkOperator& op, const Grid& grid,
                                             const Matrix& spread, int ij, int km,
                                             double std_floor) {
    if (spread.cols() == 0) return std::nullopt;
    const RowVector u = op.ptdf().row(ij) * spread;
    const double std_ij = u.norm();
    if (std_ij <= std_floor) return std::nullopt;
    const RowVector d_row = d_ptdf_row_db(op, ij, km) * spread;
    return -grid.line(ij).quantile * d_row.dot(u) / std_ij;
}

namespace {

std::vector<int> binding_union(const SubproblemSolution& solution) {
    std::vector<int> lines = solution.binding_plus;
    lines.insert(lines.end(), solution.binding_minus.begin(), solution.binding_minus.end());
    std::sort(lines.begin(), lines.end());
    lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
    return lines;
}

double gradient_term(double lambda_plus, double lambda_minus, double d_fbar, double d_femax) {
    return lambda_plus * (d_fbar - d_femax) - lambda_minus * (d_fbar + d_femax);
}

}  // namespace

SensitivityBundle compute_sensitivities(const NetworkOperator& op, const Grid& grid,
                                        const UncertaintyModel& uncertainty,
                                        const SubproblemSolution& solution) {
    SensitivityBundle bundle;
    const Matrix spread = flow_spread_basis(solution.decision(grid, op.susceptance()), uncertainty);
    const Vector injection = solution.p_base + grid.renewable_forecast() - grid.load();
    for (int ij : binding_union(solution)) {
        for (int km : grid.flexible_lines()) {
            const LinePair key{ij, km};
            bundle.d_fbar[key] = d_baseflow_db(op, injection, ij, km);
            const auto d = flow_limit_sensitivity(op, grid, spread, ij, km);
            if (!d && spread.cols() > 0) bundle.degenerate.push_back(key);
            bundle.d_femax[key] = d.value_or(0.0);
        }
    }
    bundle.d_cost = cost_sensitivity(bundle, solution, grid.n_lines());
    return bundle;
}

Vector cost_sensitivity(const SensitivityBundle& bundle, const SubproblemSolution& solution,
                        int n_lines) {
    Vector grad = Vector::Zero(n_lines);
    for (int ij : solution.binding_plus) {
        for (const auto& [key, d_fbar] : bundle.d_fbar) {
            if (key.first != ij) continue;
            grad[key.second] += gradient_term(solution.lambda_plus[ij], 0.0, d_fbar,
                                              bundle.d_femax.at(key));
        }
    }
    for (int ij : solution.binding_minus) {
        for (const auto& [key, d_fbar] : bundle.d_fbar) {
            if (key.first != ij) continue;
            grad[key.second] += gradient_term(0.0, solution.lambda_minus[ij], d_fbar,
                                              bundle.d_femax.at(key));
        }
    }
    return grad;
}

Vector cost_sensitivity_all_lines(const NetworkOperator& op, const Grid& grid,
                                  const UncertaintyModel& uncertainty,
                                  const SubproblemSolution& solution) {
    const Matrix spread = flow_spread_basis(solution.decision(grid, op.susceptance()), uncertainty);
    const Vector injection = solution.p_base + grid.renewable_forecast() - grid.load();
    Vector grad = Vector::Zero(grid.n_lines());
    for (int km : grid.flexible_lines()) {
        for (int ij = 0; ij < grid.n_lines(); ++ij) {
            const double d_fbar = d_baseflow_db(op, injection, ij, km);
            const double d_femax = flow_limit_sensitivity(op, grid, spread, ij, km).value_or(0.0);
            grad[km] += gradient_term(solution.lambda_plus[ij], solution.lambda_minus[ij], d_fbar,
                                      d_femax);
        }
    }
    return grad;
}

Vector solve_susceptance_lp(const Vector& d_cost, const Vector& b, const Vector& b_lower,
                            const Vector& b_upper, const Vector& trust,
                            const std::vector<int>& flexible) {
    Vector step = Vector::Zero(b.size());
    for (int k : flexible) {
        if (d_cost[k] < 0.0) {
            step[k] = std::max(0.0, std::min(trust[k], b_upper[k] - b[k]));
        } else if (d_cost[k] > 0.0) {
            step[k] = std::min(0.0, std::max(-trust[k], b_lower[k] - b[k]));
        }
    }
    return step;
}

}  // namespace gridflex
