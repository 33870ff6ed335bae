#pragma once

// Monte Carlo checks of the chance constraints and the expected cost, and
// finite-difference checks of the analytic susceptance derivatives.

#include "gridflex/netmodel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gridflex {

constexpr double kBalanceTolerance = 1e-6;  ///< p.u.

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Wilson score interval for k successes in n trials.
Interval wilson_interval(std::int64_t k, std::int64_t n, double z);

constexpr double kWilson99 = 2.5758293035489004;  ///< two-sided 99% normal quantile
constexpr double kPassSigma = 3.0;

enum class ConstraintKind { GenerationUpper, GenerationLower, FlowUpper, FlowLower };

std::string to_string(ConstraintKind kind);

struct RateEstimate {
    ConstraintKind kind = ConstraintKind::GenerationUpper;
    int index = 0;  ///< generator or line index
    double epsilon = 0.0;
    std::int64_t violations = 0;
    double rate = 0.0;
    Interval wilson99;
    Interval band;  ///< 3-sigma Wilson interval used for the pass rule
    bool pass = true;
};

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    Interval ci99;
};

struct ValidationReport {
    std::int64_t samples = 0;
    std::uint64_t seed = 0;
    std::vector<RateEstimate> rates;
    CostEstimate cost;
    double analytic_cost = 0.0;     ///< closed-form expected cost ($/h)
    double balance_residual = 0.0;  ///< |sum(P_g + P_w - P_d)| (p.u.)
    double participation_residual = 0.0;  ///< |sum(alpha) - 1|
    bool balanced = true;
    bool all_pass = true;

    double max_rate() const;
};

/// How u ~ N(0, Sigma) is drawn.
enum class SamplingRoute {
    SymmetricRoot,    ///< u = Sigma^1/2 z
    PivotedFactor,    ///< u = P' L D^1/2 z from a pivoted LDL' factorization
};

/// all_pass also requires the decision to balance the forecast (within kBalanceTolerance)
/// and, with uncertainty present, the participation factors to sum to one.
/// Throws DomainError when samples < 1000. Results depend only on (inputs, samples, seed),
/// not on the worker count.
ValidationReport monte_carlo_validate(const Grid& grid, const UncertaintyModel& uncertainty,
                                      const DispatchDecision& decision, std::int64_t samples,
                                      std::uint64_t seed,
                                      SamplingRoute route = SamplingRoute::SymmetricRoot);

/// Sample mean of the generation cost under the affine response.
CostEstimate empirical_cost(const Grid& grid, const UncertaintyModel& uncertainty,
                            const DispatchDecision& decision, std::int64_t samples,
                            std::uint64_t seed);

struct DerivativeCheck {
    std::string family;
    int checked = 0;
    int failed = 0;
    double worst_ratio = 0.0;  ///< largest |analytic - fd| / allowed; <= 1 passes
    std::vector<std::string> excluded;

    bool pass() const { return failed == 0; }
};

struct FiniteDifferenceReport {
    std::vector<DerivativeCheck> families;
    bool pass() const;
};

struct FiniteDifferenceOptions {
    double relative_step = 1e-6;
    double relative_tolerance = 1e-4;
    double absolute_tolerance = 1e-8;
};

/// Central-difference checks of dB+/db, dT_f/db, df/db and df_emax/db for every
/// flexible line (every line when none is flexible) at the decision's susceptances.
FiniteDifferenceReport finite_difference_suite(const Grid& grid,
                                               const UncertaintyModel& uncertainty,
                                               const DispatchDecision& decision,
                                               const FiniteDifferenceOptions& options = {});

}  // namespace gridflex
