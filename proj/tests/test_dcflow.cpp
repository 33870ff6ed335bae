#include "gridflex/dcflow.hpp"
#include "gridflex/error.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gridflex;
using namespace gridflex::testing;

namespace {

Grid triangle(double b = 1.0) {
    return toy_grid(3, {{0, 1, b}, {1, 2, b}, {0, 2, b}}, {{0, 5.0, 0.01, 10.0}}, Vector::Zero(3));
}

// Pseudoinverse by eigendecomposition, independent of the library's shifted-LLT route.
Matrix eigen_pinv(const Matrix& b) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(b);
    Vector inv = es.eigenvalues();
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = std::abs(inv[i]) > 1e-9 ? 1.0 / inv[i] : 0.0;
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Flows by grounding bus 0 and solving the reduced system directly.
Vector grounded_flows(const Grid& grid, const Vector& b, const Vector& p) {
    const int n = grid.n_buses();
    Matrix bb = Matrix::Zero(n, n);
    for (int k = 0; k < grid.n_lines(); ++k) {
        const int i = grid.line(k).from_bus;
        const int j = grid.line(k).to_bus;
        bb(i, i) += b[k];
        bb(j, j) += b[k];
        bb(i, j) -= b[k];
        bb(j, i) -= b[k];
    }
    Vector theta = Vector::Zero(n);
    theta.tail(n - 1) = bb.bottomRightCorner(n - 1, n - 1).ldlt().solve(p.tail(n - 1));
    Vector f(grid.n_lines());
    for (int k = 0; k < grid.n_lines(); ++k) {
        f[k] = b[k] * (theta[grid.line(k).from_bus] - theta[grid.line(k).to_bus]);
    }
    return f;
}

}  // namespace

TEST(NetworkOperator, TriangleClosedForm) {
    const Grid g = triangle();
    const NetworkOperator op(g, g.rated_susceptance());
    // B = 3I - 11', so B+ = (I - 11'/3)/3.
    const Matrix expected = (Matrix::Identity(3, 3) - Matrix::Constant(3, 3, 1.0 / 3.0)) / 3.0;
    EXPECT_TRUE(op.pseudoinverse().isApprox(expected, 1e-12));
    Vector p(3);
    p << 1.0, -1.0, 0.0;
    const Vector f = line_flows(op, p);
    EXPECT_NEAR(f[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(f[1], -1.0 / 3.0, 1e-12);
    EXPECT_NEAR(f[2], 1.0 / 3.0, 1e-12);
}

TEST(NetworkOperator, TwoBusCarriesTheTransfer) {
    const Grid g = toy_grid(2, {{0, 1, 7.0}}, {{0, 5.0, 0.01, 10.0}}, Vector::Zero(2));
    const NetworkOperator op(g, g.rated_susceptance());
    Vector p(2);
    p << 0.4, -0.4;
    EXPECT_NEAR(line_flows(op, p)[0], 0.4, 1e-12);
    const Vector theta = bus_angles(op, p);
    EXPECT_NEAR(theta[0] - theta[1], 0.4 / 7.0, 1e-12);
    EXPECT_NEAR(theta.sum(), 0.0, 1e-12);
}

TEST(NetworkOperator, DisconnectedGridIsSingular) {
    try {
        toy_grid(4, {{0, 1, 1.0}, {2, 3, 1.0}}, {{0, 5.0, 0.01, 10.0}}, Vector::Zero(4));
        FAIL() << "expected SingularNetwork";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularNetwork);
    }
}

TEST(NetworkOperator, RejectsUnbalancedInjection) {
    Vector p(3);
    p << 1.0, 0.0, 0.0;
    try {
        require_balanced(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnbalancedInjection);
    }
    p[1] = -1.0;
    EXPECT_NO_THROW(require_balanced(p));
}

TEST(NetworkOperator, AlgebraicIdentitiesOnRandomGraphs) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 4 + trial % 9;
        const Grid g = toy_grid(n, random_lines(n, n / 2, rng), {{0, 5.0, 0.01, 10.0}}, Vector::Zero(n));
        const NetworkOperator op(g, g.rated_susceptance());
        const Matrix& b = op.admittance();
        const Matrix& bp = op.pseudoinverse();
        const double scale = b.cwiseAbs().maxCoeff();
        EXPECT_LE((b * bp * b - b).cwiseAbs().maxCoeff(), 1e-8 * scale);
        EXPECT_LE((bp * b * bp - bp).cwiseAbs().maxCoeff(), 1e-8 * bp.cwiseAbs().maxCoeff());
        EXPECT_LE((bp - bp.transpose()).cwiseAbs().maxCoeff(), 1e-12 * bp.cwiseAbs().maxCoeff());
        EXPECT_LE((op.ptdf() * Vector::Ones(n)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_TRUE(bp.isApprox(eigen_pinv(b), 1e-9));

        std::normal_distribution<double> z;
        Vector p(n);
        for (int i = 0; i < n; ++i) p[i] = z(rng);
        p.array() -= p.mean();
        const Vector f = line_flows(op, p);
        // Kirchhoff current law: E f = p.
        EXPECT_LE((op.incidence() * f - p).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((f - grounded_flows(g, g.rated_susceptance(), p)).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(NetworkOperator, DerivativesMatchCentralDifferences) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6;
        const Grid g = toy_grid(n, random_lines(n, 3, rng), {{0, 5.0, 0.01, 10.0}}, Vector::Zero(n));
        const Vector b = g.rated_susceptance();
        const NetworkOperator op(g, b);
        Vector p(n);
        std::normal_distribution<double> z;
        for (int i = 0; i < n; ++i) p[i] = z(rng);
        p.array() -= p.mean();
        for (int km = 0; km < g.n_lines(); ++km) {
            const double h = 1e-6 * b[km];
            Vector up = b, dn = b;
            up[km] += h;
            dn[km] -= h;
            const Matrix bp_up = eigen_pinv(NetworkOperator(g, up).admittance());
            const Matrix bp_dn = eigen_pinv(NetworkOperator(g, dn).admittance());
            const Matrix fd = (bp_up - bp_dn) / (2.0 * h);
            EXPECT_LE((d_pseudoinverse_db(op, km) - fd).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + fd.cwiseAbs().maxCoeff()));

            const Vector f_up = grounded_flows(g, up, p);
            const Vector f_dn = grounded_flows(g, dn, p);
            for (int ij = 0; ij < g.n_lines(); ++ij) {
                const double fd_flow = (f_up[ij] - f_dn[ij]) / (2.0 * h);
                EXPECT_NEAR(d_baseflow_db(op, p, ij, km), fd_flow, 1e-5 * (1.0 + std::abs(fd_flow)));
                const RowVector row_fd =
                    (NetworkOperator(g, up).ptdf().row(ij) - NetworkOperator(g, dn).ptdf().row(ij)) / (2.0 * h);
                EXPECT_LE((d_ptdf_row_db(op, ij, km) - row_fd).cwiseAbs().maxCoeff(),
                          1e-5 * (1.0 + row_fd.cwiseAbs().maxCoeff()));
            }
        }
    }
}

TEST(NetworkOperator, PtdfRowsSumToZero) {
    const CaseModel m = load_fixture("case118.m", "flex118.scenario");
    const NetworkOperator op(m.grid, m.grid.rated_susceptance());
    EXPECT_LE((op.ptdf() * Vector::Ones(m.grid.n_buses())).cwiseAbs().maxCoeff(), 1e-10);
}
