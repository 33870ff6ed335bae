#include "gridflex/ccore.hpp"
#include "gridflex/error.hpp"
#include "gridflex/socp.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gridflex;
using namespace gridflex::testing;

namespace {

Grid two_bus(double capacity, double load = 2.0) {
    return toy_grid(2, {{0, 1, 10.0, capacity}}, {{0, 5.0, 0.01, 10.0}, {1, 5.0, 0.01, 30.0}},
                    Vector(Eigen::Vector2d(0.0, load)));
}

double objective_at_capacity(double capacity, const UncertaintyModel& unc) {
    const Grid g = two_bus(capacity);
    return solve_dispatch(g, unc, g.rated_susceptance(), {}).objective;
}

}  // namespace

TEST(GenSubproblem, SymmetricPairSplitsEvenly) {
    const Grid g = toy_grid(2, {{0, 1, 10.0}}, {{0, 5.0, 0.01, 20.0}, {1, 5.0, 0.01, 20.0}},
                            Vector(Eigen::Vector2d(0.0, 1.0)));
    const UncertaintyModel unc = diagonal_uncertainty(2, {1}, 0.04);
    const SubproblemSolution s = solve_dispatch(g, unc, g.rated_susceptance(), {});
    EXPECT_NEAR(s.p_base[0], 0.5, 1e-6);
    EXPECT_NEAR(s.p_base[1], 0.5, 1e-6);
    EXPECT_NEAR(s.alpha[0], 0.5, 1e-6);
    EXPECT_NEAR(s.alpha[1], 0.5, 1e-6);
    // 2 x [a2 (50^2 + 0.25 * 20^2) + a1 * 50] with P in MW.
    EXPECT_NEAR(s.objective, 2052.0, 1e-4);
    EXPECT_FALSE(s.congested());
}

TEST(GenSubproblem, DeterministicCongestionPricesTheLine) {
    const Grid g = two_bus(1.0);
    const SubproblemSolution s = solve_dispatch(g, UncertaintyModel(2), g.rated_susceptance(), {});
    EXPECT_NEAR(s.p_base[0], 1.0, 1e-6);
    EXPECT_NEAR(s.p_base[1], 1.0, 1e-6);
    EXPECT_NEAR(s.objective, 4200.0, 1e-3);
    // Marginal costs 12 and 32 $/MWh at 100 MW; the spread times base_mva.
    EXPECT_NEAR(s.lambda_plus[0], 2000.0, 1e-2);
    EXPECT_EQ(s.lambda_minus[0], 0.0);
    ASSERT_EQ(s.binding_plus.size(), 1u);
    // Participation is uniform when there is nothing to respond to.
    EXPECT_NEAR(s.alpha[0], 0.5, 1e-12);
}

TEST(GenSubproblem, ConeDualIsTheCapacityShadowPrice) {
    const UncertaintyModel unc = diagonal_uncertainty(2, {1}, 0.01);
    const Grid g = two_bus(1.0);
    const SubproblemSolution s = solve_dispatch(g, unc, g.rated_susceptance(), {});
    ASSERT_TRUE(s.congested());
    const double h = 1e-4;
    const double fd = (objective_at_capacity(1.0 - h, unc) - objective_at_capacity(1.0 + h, unc)) / (2.0 * h);
    EXPECT_NEAR(s.lambda_plus[0], fd, 1e-3 * fd);
    // Complementary slackness.
    EXPECT_LE(std::abs(s.lambda_plus[0] * s.slack_plus[0]), 1e-6 * s.lambda_plus[0]);
}

TEST(GenSubproblem, ChanceMarginsHoldAtTheOptimum) {
    const CaseModel m = load_fixture("case14.m", "flex14.scenario");
    const SubproblemSolution s = solve_dispatch(m.grid, m.uncertainty, m.grid.rated_susceptance(), {});
    const DispatchDecision d = s.decision(m.grid, m.grid.rated_susceptance());
    EXPECT_LE(constraint_violation(m.grid, m.uncertainty, d).worst(), 1e-7);
    EXPECT_NEAR(d.alpha().sum(), 1.0, 1e-12);
    EXPECT_NEAR(d.base_injection(m.grid).sum(), 0.0, 1e-10);
    EXPECT_NEAR(expected_cost(d, m.grid, m.uncertainty.s_sigma()), s.objective, 1e-6 * s.objective);
    for (int k = 0; k < m.grid.n_lines(); ++k) {
        EXPECT_GE(s.raw_lambda_plus[k], -1e-6);
        EXPECT_GE(s.raw_lambda_minus[k], -1e-6);
    }
}

TEST(GenSubproblem, BindingSetsFollowTheTolerances) {
    const Grid g = two_bus(1.0);
    const SubproblemSolution s = solve_dispatch(g, UncertaintyModel(2), g.rated_susceptance(), {});
    const auto [plus, minus] = binding_sets(s, 1e-6, 1e-3);
    EXPECT_EQ(plus, std::vector<int>{0});
    EXPECT_TRUE(minus.empty());
    const auto [none_plus, none_minus] = binding_sets(s, 1e-6, 1e9);
    EXPECT_TRUE(none_plus.empty());
}

TEST(GenSubproblem, CapacityBelowLoadIsInfeasible) {
    const Grid g = toy_grid(2, {{0, 1, 10.0}}, {{0, 1.0, 0.01, 10.0}, {1, 1.0, 0.01, 30.0}},
                            Vector(Eigen::Vector2d(0.0, 3.0)));
    try {
        solve_dispatch(g, UncertaintyModel(2), g.rated_susceptance(), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    }
}

TEST(GenSubproblem, LineLimitBelowTransferIsInfeasible) {
    // Only bus 0 can generate; the line cannot carry the load.
    const Grid g = toy_grid(2, {{0, 1, 10.0, 0.5}}, {{0, 5.0, 0.01, 10.0}}, Vector(Eigen::Vector2d(0.0, 1.0)));
    try {
        solve_dispatch(g, UncertaintyModel(2), g.rated_susceptance(), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    }
}
