#include "gridflex/socp.hpp"

#include "gridflex/ccore.hpp"
#include "gridflex/error.hpp"

#include <cmath>
#include <sstream>

namespace gridflex {

namespace {

struct LinearRow {
    RowVector g;
    double h;
};

struct ConeRows {
    Matrix g;
    Vector h;
};

}  // namespace

GenSubproblem build_gen_subproblem(const Grid& grid, const UncertaintyModel& uncertainty,
                                   const NetworkOperator& op, const SubproblemOptions& options) {
    const int ng = grid.n_generators();
    if (ng == 0) throw Error(ErrorCode::InvalidGrid, "dispatch needs at least one generator");
    const double base = grid.base_mva();

    const Vector net_load = grid.load() - grid.renewable_forecast();
    const double demand = net_load.sum();
    double cap_max = 0.0;
    double cap_min = 0.0;
    for (const Generator& gen : grid.generators()) {
        cap_max += gen.p_max;
        cap_min += gen.p_min;
    }
    const double slack_tol = 1e-9 * std::max(1.0, std::abs(demand));
    if (cap_max < demand - slack_tol || cap_min > demand + slack_tol) {
        std::ostringstream msg;
        msg << "net load " << grid.to_megawatts(demand) << " MW lies outside the generation range ["
            << grid.to_megawatts(cap_min) << ", " << grid.to_megawatts(cap_max) << "] MW";
        throw Error(ErrorCode::Infeasible, msg.str());
    }

    GenSubproblem sub;
    sub.options = options;
    sub.n_generators = ng;
    sub.s_sigma = uncertainty.s_sigma();
    sub.susceptance = op.susceptance();
    const Matrix root = covariance_factor(uncertainty);
    sub.has_participation = !uncertainty.is_zero() && root.cols() > 0;
    const int nx = sub.has_participation ? 2 * ng : ng;
    const double s = sub.s_sigma;

    ConicProgram& prog = sub.program;
    prog.P = Matrix::Zero(nx, nx);
    prog.q = Vector::Zero(nx);
    for (int g = 0; g < ng; ++g) {
        const Generator& gen = grid.generators()[g];
        const double a2 = gen.quadratic_pu(base);
        prog.P(g, g) = 2.0 * a2;
        prog.q[g] = gen.linear_pu(base);
        if (sub.has_participation) prog.P(ng + g, ng + g) = 2.0 * s * s * a2;
    }
    sub.cost_scale = std::max({1.0, prog.q.cwiseAbs().maxCoeff(), prog.P.cwiseAbs().maxCoeff()});

    prog.A = Matrix::Zero(sub.has_participation ? 2 : 1, nx);
    prog.b = Vector::Zero(prog.A.rows());
    prog.A.row(0).head(ng).setOnes();
    prog.b[0] = demand;
    if (sub.has_participation) {
        prog.A.row(1).tail(ng).setOnes();
        prog.b[1] = 1.0;
    }

    std::vector<LinearRow> linear;
    auto add_linear = [&](RowVector g, double h) { linear.push_back({std::move(g), h}); };
    for (int g = 0; g < ng; ++g) {
        const Generator& gen = grid.generators()[g];
        const double margin = gen.quantile * s;
        RowVector up = RowVector::Zero(nx);
        RowVector lo = RowVector::Zero(nx);
        up[g] = 1.0;
        lo[g] = -1.0;
        if (sub.has_participation) {
            up[ng + g] = margin;
            lo[ng + g] = margin;
        }
        add_linear(up, gen.p_max);
        add_linear(lo, -gen.p_min);
        if (!sub.has_participation) continue;
        if (options.participation_nonnegative) {
            RowVector nonneg = RowVector::Zero(nx);
            nonneg[ng + g] = -1.0;
            add_linear(nonneg, 0.0);
        } else {
            // |alpha| form: both signs of the response must fit inside the limits
            up[ng + g] = -margin;
            lo[ng + g] = -margin;
            add_linear(up, gen.p_max);
            add_linear(lo, -gen.p_min);
        }
    }

    struct PendingFlow {
        FlowRow row;
        int index;  // into linear or cones
    };
    std::vector<PendingFlow> pending;
    std::vector<ConeRows> cones;
    const Vector spread_sum = root.cols() > 0 ? Vector(root.colwise().sum().transpose()) : Vector();
    const double spread_norm = spread_sum.size() > 0 ? spread_sum.norm() : 0.0;

    for (int k = 0; k < grid.n_lines(); ++k) {
        const Line& line = grid.line(k);
        if (!std::isfinite(line.capacity)) continue;
        RowVector t(ng);
        for (int g = 0; g < ng; ++g) t[g] = op.ptdf()(k, grid.generators()[g].bus);
        const double offset_flow = op.ptdf().row(k).dot(grid.renewable_forecast() - grid.load());
        const double c = line.quantile;

        bool as_cone = false;
        double par = 0.0;
        double orth = 0.0;
        double constant_margin = 0.0;
        if (sub.has_participation) {
            const Vector a = (op.ptdf().row(k) * root).transpose();
            if (spread_norm > 1e-12 * std::max(1.0, a.norm())) {
                // T_ij T_g L = a' - (t'alpha) w'; split a along w and its complement
                const Vector w_hat = spread_sum / spread_norm;
                par = w_hat.dot(a);
                orth = (a - par * w_hat).norm();
                as_cone = true;
            } else {
                constant_margin = c * a.norm();
            }
        }

        for (int direction : {+1, -1}) {
            RowVector g0 = RowVector::Zero(nx);
            g0.head(ng) = direction * t;
            const double h0 = line.capacity - direction * offset_flow;
            FlowRow fr{k, direction, as_cone, 0};
            if (!as_cone) {
                pending.push_back({fr, static_cast<int>(linear.size())});
                add_linear(g0, h0 - constant_margin);
                continue;
            }
            const bool with_orth = orth > 1e-14 * std::max(1.0, std::abs(par));
            ConeRows cone;
            cone.g = Matrix::Zero(with_orth ? 3 : 2, nx);
            cone.h = Vector::Zero(cone.g.rows());
            cone.g.row(0) = g0;
            cone.h[0] = h0;
            cone.g.row(1).tail(ng) = c * spread_norm * t;
            cone.h[1] = c * par;
            if (with_orth) cone.h[2] = c * orth;
            pending.push_back({fr, static_cast<int>(cones.size())});
            cones.push_back(std::move(cone));
        }
    }

    const int n_linear = static_cast<int>(linear.size());
    int rows = n_linear;
    for (const ConeRows& cone : cones) rows += static_cast<int>(cone.g.rows());
    prog.G = Matrix::Zero(rows, nx);
    prog.h = Vector::Zero(rows);
    prog.cones.n_linear = n_linear;
    for (int r = 0; r < n_linear; ++r) {
        prog.G.row(r) = linear[r].g;
        prog.h[r] = linear[r].h;
    }
    std::vector<int> cone_offset;
    int offset = n_linear;
    for (const ConeRows& cone : cones) {
        const auto m = static_cast<int>(cone.g.rows());
        prog.G.middleRows(offset, m) = cone.g;
        prog.h.segment(offset, m) = cone.h;
        prog.cones.soc_sizes.push_back(m);
        cone_offset.push_back(offset);
        offset += m;
    }
    for (PendingFlow& p : pending) {
        p.row.offset = p.row.cone ? cone_offset[p.index] : p.index;
        sub.flow_rows.push_back(p.row);
    }
    return sub;
}

DispatchDecision SubproblemSolution::decision(const Grid& grid, const Vector& susceptance) const {
    return DispatchDecision(grid, p_base, alpha, susceptance);
}

std::pair<std::vector<int>, std::vector<int>> binding_sets(const SubproblemSolution& solution,
                                                           double primal_tol, double dual_tol) {
    std::vector<int> plus;
    std::vector<int> minus;
    const auto l = solution.raw_lambda_plus.size();
    for (Eigen::Index k = 0; k < l; ++k) {
        const double lp = solution.raw_lambda_plus[k];
        const double lm = solution.raw_lambda_minus[k];
        const bool up = lp > dual_tol && solution.slack_plus[k] < primal_tol;
        const bool down = lm > dual_tol && solution.slack_minus[k] < primal_tol;
        if (up && (!down || lp >= lm)) {
            plus.push_back(static_cast<int>(k));
        } else if (down) {
            minus.push_back(static_cast<int>(k));
        }
    }
    return {plus, minus};
}

SubproblemSolution solve_gen_subproblem(const GenSubproblem& sub, const Grid& grid,
                                        const UncertaintyModel& uncertainty,
                                        const NetworkOperator& op, const ConicSolver& solver) {
    ConicOptions opt;
    opt.tolerance = sub.options.socp_tolerance;
    const ConicResult res = solver.solve(sub.program, opt);
    if (res.status == SolverStatus::Infeasible) {
        throw Error(ErrorCode::Infeasible, "dispatch subproblem is infeasible: " + res.message);
    }
    if (res.status != SolverStatus::Optimal) {
        std::ostringstream msg;
        msg << "dispatch subproblem stopped after " << res.iterations << " iterations ("
            << res.message << "; primal residual " << res.primal_residual << ", dual residual "
            << res.dual_residual << ")";
        throw Error(ErrorCode::NumericalLimit, msg.str());
    }

    const int ng = sub.n_generators;
    const int n = grid.n_buses();
    const int l = grid.n_lines();
    Vector output = res.x.head(ng);
    // Spread the balance residual so downstream flow checks see an exactly balanced injection.
    output.array() += (sub.program.b[0] - output.sum()) / ng;
    Vector participation = Vector::Constant(ng, 1.0 / ng);
    if (sub.has_participation) {
        participation = res.x.tail(ng);
        if (sub.options.participation_nonnegative) participation = participation.cwiseMax(0.0);
        participation /= participation.sum();
    }

    SubproblemSolution sol;
    sol.p_base = Vector::Zero(n);
    sol.alpha = Vector::Zero(n);
    for (int g = 0; g < ng; ++g) {
        sol.p_base[grid.generators()[g].bus] = output[g];
        sol.alpha[grid.generators()[g].bus] = participation[g];
    }
    const DispatchDecision decision(grid, sol.p_base, sol.alpha, op.susceptance());
    sol.objective = expected_cost(decision, grid, sub.s_sigma);
    const MomentProfile m = moments(op, grid, decision, uncertainty);
    sol.flow_mean = m.flow_mean;
    sol.flow_std = m.flow_std;

    sol.raw_lambda_plus = Vector::Zero(l);
    sol.raw_lambda_minus = Vector::Zero(l);
    for (const FlowRow& fr : sub.flow_rows) {
        const double dual = std::max(0.0, res.z[fr.offset]);
        (fr.direction > 0 ? sol.raw_lambda_plus : sol.raw_lambda_minus)[fr.line] = dual;
    }
    sol.slack_plus.resize(l);
    sol.slack_minus.resize(l);
    for (int k = 0; k < l; ++k) {
        const Line& line = grid.line(k);
        const double emax = line.capacity - line.quantile * sol.flow_std[k];
        sol.slack_plus[k] = emax - sol.flow_mean[k];
        sol.slack_minus[k] = emax + sol.flow_mean[k];
    }

    sol.dual_tol = sub.options.dual_binding_tol * sub.cost_scale;
    std::tie(sol.binding_plus, sol.binding_minus) =
        binding_sets(sol, sub.options.primal_binding_tol, sol.dual_tol);
    sol.lambda_plus = Vector::Zero(l);
    sol.lambda_minus = Vector::Zero(l);
    for (int k : sol.binding_plus) sol.lambda_plus[k] = sol.raw_lambda_plus[k];
    for (int k : sol.binding_minus) sol.lambda_minus[k] = sol.raw_lambda_minus[k];
    sol.solver_status = res.status;
    sol.solver_iterations = res.iterations;
    sol.reduced_accuracy = res.reduced_accuracy;
    return sol;
}

SubproblemSolution solve_dispatch(const Grid& grid, const UncertaintyModel& uncertainty,
                                  const Vector& susceptance, const SubproblemOptions& options,
                                  const ConicSolver& solver) {
    const NetworkOperator op(grid, susceptance);
    const GenSubproblem sub = build_gen_subproblem(grid, uncertainty, op, options);
    return solve_gen_subproblem(sub, grid, uncertainty, op, solver);
}

}  // namespace gridflex
