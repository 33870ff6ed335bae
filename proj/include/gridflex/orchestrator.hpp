#pragma once

// Alternate iteration between the dispatch subproblem and the susceptance LP.

#include "gridflex/caseio.hpp"
#include "gridflex/netmodel.hpp"
#include "gridflex/socp.hpp"

#include <string>
#include <vector>

namespace gridflex {

enum class Termination {
    NoCongestionInitial,
    CongestionCleared,
    ConvergedMatched,
    IterationCap,
    Infeasible,
};

std::string to_string(Termination termination);

struct IterationRecord {
    int index = 0;       ///< accepted-iteration counter the attempt belongs to
    double cost = 0.0;   ///< $/h
    Vector lambda_plus;
    Vector lambda_minus;
    Vector susceptance;  ///< b tried in this attempt
    Vector delta_b;
    Vector trust_region;
    bool accepted = false;
    int shrink_count = 0;  ///< rejections already seen at this iterate
    bool congested = false;
};

struct SolveReport {
    Termination termination = Termination::ConvergedMatched;
    Vector susceptance;               ///< final b
    SubproblemSolution initial;       ///< solve at rated b (S2 / S4)
    SubproblemSolution final;
    std::vector<IterationRecord> trajectory;
    std::vector<std::string> warnings;
    int accepted_iterations = 0;
    double wall_time_s = 0.0;

    DispatchDecision decision(const Grid& grid) const;
    DispatchDecision initial_decision(const Grid& grid) const;
    std::vector<double> accepted_costs() const;
};

/// Throws Infeasible when the subproblem at rated susceptances has no solution.
SolveReport solve_cced(const Grid& grid, const UncertaintyModel& uncertainty,
                       const StudyConfig& config);

/// Same pipeline with Sigma = 0.
SolveReport solve_ed(const Grid& grid, const StudyConfig& config);

struct FourSolutionStudy {
    SolveReport cced;
    SolveReport ed;
    double s1 = 0.0;  ///< CCED with flexibility
    double s2 = 0.0;  ///< CCED without flexibility
    double s3 = 0.0;  ///< ED with flexibility
    double s4 = 0.0;  ///< ED without flexibility

    double uncertainty_cost_flexible() const { return s1 - s3; }
    double uncertainty_cost_fixed() const { return s2 - s4; }
    double flexibility_value_ed() const { return s4 - s3; }
    double flexibility_value_cced() const { return s2 - s1; }
};

/// Runs the CCED and ED pipelines (concurrently when workers allow); S2/S4 are their
/// rated-susceptance first solutions.
FourSolutionStudy four_solution_study(const Grid& grid, const UncertaintyModel& uncertainty,
                                      const StudyConfig& config);

SubproblemOptions subproblem_options(const StudyConfig& config);

}  // namespace gridflex
