#pragma once

// Moments of generation and flow under the affine response, Gaussian quantile
// factors, equivalent limits and the analytic expected cost.

#include "gridflex/dcflow.hpp"
#include "gridflex/netmodel.hpp"

namespace gridflex {

/// c = Phi^-1(1 - epsilon) for epsilon in (0, 0.5]; throws DomainError otherwise.
double quantile_factor(double epsilon);

/// Standard normal CDF.
double normal_cdf(double x);

/// T_g = I - alpha 1'. Throws NotNormalized if |1'alpha - 1| > 1e-9.
Matrix response_matrix(const Vector& alpha);

/// Symmetric PSD square root via eigendecomposition (eigenvalues below 1e-12 clamped to 0).
Matrix psd_sqrt(const Matrix& sigma);

/// Columns of the symmetric root restricted to the renewable buses: L L' = Sigma with
/// L of size n x r. Empty (n x 0) when Sigma = 0.
Matrix covariance_factor(const UncertaintyModel& uncertainty);

struct MomentProfile {
    double s_sigma = 0.0;
    Vector gen_std;    ///< alpha_i s_Sigma, generator order
    Vector flow_mean;  ///< T_f (P_g + P_w - P_d)
    Vector flow_std;   ///< ||T_f,ij T_g Sigma^1/2||
    Matrix t_g;        ///< I - alpha 1'
};

MomentProfile moments(const NetworkOperator& op, const Grid& grid, const DispatchDecision& decision,
                      const UncertaintyModel& uncertainty);

/// sqrt(row T_g Sigma T_g' row'), the quadratic-form route to one line's flow std.
double flow_std_quadratic(const NetworkOperator& op, int line, const Matrix& t_g,
                          const Matrix& sigma);

struct EquivalentLimits {
    Vector gen_emax;   ///< generator order
    Vector gen_emin;
    Vector flow_emax;  ///< line order; infinite for unlimited lines
    Vector c_gen;
    Vector c_line;
};

/// Throws InfeasibleMargin if a flow margin eats the whole capacity or a generator window closes.
EquivalentLimits equivalent_limits(const MomentProfile& moments, const Grid& grid);

/// h = P'a2 P + s^2 alpha'a2 alpha + a1'P in $/h, costs taken per generator.
double expected_cost(const DispatchDecision& decision, const Grid& grid, double s_sigma);


/// Largest violation (p.u., positive = violated) of each constraint family of the
/// analytic CCED at a given decision.
struct ConstraintViolation {
    double balance = 0.0;
    double participation_sum = 0.0;
    double generation = 0.0;
    double flow = 0.0;

    double worst() const;
};

ConstraintViolation constraint_violation(const Grid& grid, const UncertaintyModel& uncertainty,
                                         const DispatchDecision& decision);

}  // namespace gridflex
