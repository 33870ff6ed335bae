#include "gridflex/ccore.hpp"
#include "gridflex/netlp.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace gridflex;
using namespace gridflex::testing;

namespace {

// Variable part of f_emax(b) = f_max - c ||T_f,ij(b) M|| with the spread basis M held fixed.
double flow_limit(const Grid& g, const Vector& b, const Matrix& spread, int ij) {
    const NetworkOperator op(g, b);
    return -g.line(ij).quantile * (op.ptdf().row(ij) * spread).norm();
}

}  // namespace

TEST(SusceptanceLp, ClosedFormMatchesVertexEnumeration) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 4;
        Vector d(m), b(m), lo(m), hi(m), trust(m);
        for (int k = 0; k < m; ++k) {
            d[k] = trial % 7 == 0 && k == 1 ? 0.0 : z(rng);
            lo[k] = 1.0 + u(rng);
            hi[k] = lo[k] + 2.0 * u(rng);
            b[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
            trust[k] = 0.5 * u(rng);
        }
        const std::vector<int> flexible{0, 1, 3};
        const Vector delta = solve_susceptance_lp(d, b, lo, hi, trust, flexible);

        double best = std::numeric_limits<double>::infinity();
        for (int mask = 0; mask < 8; ++mask) {
            double value = 0.0;
            for (int j = 0; j < 3; ++j) {
                const int k = flexible[static_cast<std::size_t>(j)];
                const double low = std::max(lo[k] - b[k], -trust[k]);
                const double high = std::min(hi[k] - b[k], trust[k]);
                value += d[k] * ((mask >> j) & 1 ? high : low);
            }
            best = std::min(best, value);
        }
        EXPECT_NEAR(d.dot(delta), best, 1e-12);
        EXPECT_EQ(delta[2], 0.0);
        for (int k = 0; k < m; ++k) {
            EXPECT_LE(std::abs(delta[k]), trust[k] + 1e-15);
            EXPECT_GE(b[k] + delta[k], lo[k] - 1e-12);
            EXPECT_LE(b[k] + delta[k], hi[k] + 1e-12);
            if (d[k] == 0.0) EXPECT_EQ(delta[k], 0.0);
        }
    }
}

TEST(FlowLimitSensitivity, MatchesCentralDifferences) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = random_six_bus(rng);
        const UncertaintyModel unc = diagonal_uncertainty(6, {1, 3, 5}, 0.01);
        Vector part(3);
        for (int k = 0; k < 3; ++k) part[k] = u(rng);
        part /= part.sum();
        const auto d = DispatchDecision::from_generators(g, Vector::Constant(3, g.load().sum() / 3.0), part,
                                                         g.rated_susceptance());
        const Matrix spread = flow_spread_basis(d, unc);
        const Vector b = g.rated_susceptance();
        const NetworkOperator op(g, b);
        for (int ij = 0; ij < g.n_lines(); ++ij) {
            for (int km = 0; km < g.n_lines(); ++km) {
                const auto analytic = flow_limit_sensitivity(op, g, spread, ij, km);
                ASSERT_TRUE(analytic.has_value());
                const double h = 1e-6 * b[km];
                Vector up = b, dn = b;
                up[km] += h;
                dn[km] -= h;
                const double fd = (flow_limit(g, up, spread, ij) - flow_limit(g, dn, spread, ij)) / (2.0 * h);
                EXPECT_NEAR(*analytic, fd, 1e-4 * std::abs(fd) + 1e-8);
            }
        }
    }
}

TEST(FlowLimitSensitivity, EmptyAtTheStdFloor) {
    const Grid g = toy_grid(3, {{0, 1, 5.0}, {1, 2, 5.0}}, {{0, 5.0, 0.01, 10.0}, {2, 5.0, 0.01, 10.0}},
                            Vector::Constant(3, 0.2));
    // All variance at bus 0, fully absorbed by the generator at bus 0: no flow spread.
    const UncertaintyModel unc = diagonal_uncertainty(3, {0}, 0.01);
    const auto d = DispatchDecision::from_generators(g, Vector::Constant(2, 0.3), Eigen::Vector2d(1.0, 0.0),
                                                     g.rated_susceptance());
    const NetworkOperator op(g, g.rated_susceptance());
    EXPECT_FALSE(flow_limit_sensitivity(op, g, flow_spread_basis(d, unc), 0, 1).has_value());
}

TEST(CostSensitivity, BindingSetAndAllLineFormsAgree) {
    const CaseModel m = load_fixture("case14.m", "flex14.scenario");
    const Vector b = m.grid.rated_susceptance();
    const NetworkOperator op(m.grid, b);
    const SubproblemSolution s = solve_dispatch(m.grid, m.uncertainty, b, {});
    ASSERT_TRUE(s.congested());
    const SensitivityBundle bundle = compute_sensitivities(op, m.grid, m.uncertainty, s);
    const Vector binding = cost_sensitivity(bundle, s, m.grid.n_lines());
    const Vector all = cost_sensitivity_all_lines(op, m.grid, m.uncertainty, s);
    EXPECT_LE((binding - all).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + all.cwiseAbs().maxCoeff()));
    EXPECT_LE((bundle.d_cost - binding).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + all.cwiseAbs().maxCoeff()));
    for (int k = 0; k < m.grid.n_lines(); ++k) {
        if (!m.grid.line(k).flexible()) EXPECT_EQ(bundle.d_cost[k], 0.0);
    }
}

TEST(CostSensitivity, AgreesWithPerturbAndResolve) {
    const CaseModel m = load_fixture("case14.m", "flex14.scenario");
    const Vector b = m.grid.rated_susceptance();
    const NetworkOperator op(m.grid, b);
    const SubproblemSolution s = solve_dispatch(m.grid, m.uncertainty, b, {});
    const Vector grad = compute_sensitivities(op, m.grid, m.uncertainty, s).d_cost;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    const std::vector<int> flexible = m.grid.flexible_lines();
    // Each coordinate direction, then a random mix.
    for (int trial = 0; trial < 4; ++trial) {
        Vector dir = Vector::Zero(m.grid.n_lines());
        if (trial < 3) {
            dir[flexible[static_cast<std::size_t>(trial)]] = 1.0;
        } else {
            for (int k : flexible) dir[k] = z(rng);
            dir /= dir.norm();
        }
        const double t = 1e-4;
        const double up = solve_dispatch(m.grid, m.uncertainty, b + t * dir, {}).objective;
        const double dn = solve_dispatch(m.grid, m.uncertainty, b - t * dir, {}).objective;
        const double fd = (up - dn) / (2.0 * t);
        EXPECT_NEAR(grad.dot(dir), fd, 0.05 * std::abs(fd) + 1e-3) << "direction " << trial;
    }
}
