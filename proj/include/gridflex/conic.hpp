#pragma once

// Convex quadratic cone programs and a solver interface.
//
//   minimize    1/2 x'Px + q'x
//   subject to  Gx + s = h,  Ax = b,  s in K
//
// K is a nonnegative orthant of size n_linear followed by second-order cones
// {(t, u) : t >= ||u||} of the listed sizes. Dual z lives in K as well and
// satisfies Px + q + A'y + G'z = 0 at optimality.

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace gridflex {

struct ConeSpec {
    int n_linear = 0;
    std::vector<int> soc_sizes;

    int dimension() const;
    /// Barrier degree: n_linear + number of cones.
    int degree() const;
};

struct ConicProgram {
    Eigen::MatrixXd P;
    Eigen::VectorXd q;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    ConeSpec cones;

    int n_variables() const { return static_cast<int>(q.size()); }
    /// Throws InvalidDecision on inconsistent dimensions.
    void check_dimensions() const;
};

enum class SolverStatus { Optimal, Infeasible, NumericalLimit };

std::string to_string(SolverStatus status);

struct ConicOptions {
    double tolerance = 1e-9;  ///< feasibility, absolute and relative gap
    int max_iterations = 100;
    bool detect_infeasibility = true;  ///< run a phase-1 problem when the main solve fails
};

struct ConicResult {
    SolverStatus status = SolverStatus::NumericalLimit;
    Eigen::VectorXd x;
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    bool reduced_accuracy = false;  ///< stopped short of the tolerance but close to it
    std::string message;
};

class ConicSolver {
public:
    virtual ~ConicSolver() = default;
    virtual ConicResult solve(const ConicProgram& program, const ConicOptions& options) const = 0;
};

/// Primal-dual interior point method with Nesterov-Todd scaling and
/// Mehrotra predictor-corrector steps.
class InteriorPointSolver final : public ConicSolver {
public:
    ConicResult solve(const ConicProgram& program, const ConicOptions& options) const override;
};

std::shared_ptr<const ConicSolver> default_conic_solver();

}  // namespace gridflex
