#include "gridflex/dcflow.hpp"

#include "gridflex/error.hpp"

#include <cmath>
#include <sstream>

namespace gridflex {

NetworkOperator::NetworkOperator(const Grid& grid, Vector susceptance)
    : susceptance_(std::move(susceptance)), incidence_(incidence_matrix(grid)) {
    const int n = grid.n_buses();
    const int l = grid.n_lines();
    if (susceptance_.size() != l) {
        throw Error(ErrorCode::InvalidDecision, "susceptance vector must have one entry per line");
    }
    for (int k = 0; k < l; ++k) {
        from_.push_back(grid.line(k).from_bus);
        to_.push_back(grid.line(k).to_bus);
    }
    b_matrix_ = incidence_ * susceptance_.asDiagonal() * incidence_.transpose();

    const Matrix ones = Matrix::Constant(n, n, 1.0 / n);
    Eigen::LLT<Matrix> llt(b_matrix_ + ones);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularNetwork, "B + 11'/n is not positive definite");
    }
    b_dagger_ = llt.solve(Matrix::Identity(n, n)) - ones;
    // Symmetrize against round-off so downstream quadratic forms stay exact.
    b_dagger_ = 0.5 * (b_dagger_ + b_dagger_.transpose()).eval();

    const double scale = b_matrix_.cwiseAbs().maxCoeff();
    const double residual = (b_matrix_ * b_dagger_ * b_matrix_ - b_matrix_).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual > 1e-6 * std::max(1.0, scale)) {
        throw Error(ErrorCode::SingularNetwork, "pseudoinverse lost accuracy (network disconnected?)");
    }

    ptdf_.resize(l, n);
    for (int k = 0; k < l; ++k) {
        ptdf_.row(k) = susceptance_[k] * (b_dagger_.row(from_[k]) - b_dagger_.row(to_[k]));
    }
}

Vector NetworkOperator::angle_response(int k) const {
    return b_dagger_.col(from_bus(k)) - b_dagger_.col(to_bus(k));
}

void require_balanced(const Vector& injection) {
    const double total = injection.sum();
    if (std::abs(total) > 1e-8) {
        std::ostringstream msg;
        msg << "injections sum to " << total << " p.u.";
        throw Error(ErrorCode::UnbalancedInjection, msg.str());
    }
}

Vector line_flows(const NetworkOperator& op, const Vector& injection) {
    require_balanced(injection);
    return op.ptdf() * injection;
}

Vector bus_angles(const NetworkOperator& op, const Vector& injection) {
    require_balanced(injection);
    return op.pseudoinverse() * injection;
}

Matrix d_pseudoinverse_db(const NetworkOperator& op, int km) {
    const Vector g = op.angle_response(km);
    return -g * g.transpose();
}

RowVector d_ptdf_row_db(const NetworkOperator& op, int ij, int km) {
    // E_ij' dB^+ = -(g_i - g_j) g' with g = B^+ E_km
    const Vector g = op.angle_response(km);
    const double coupling = g[op.from_bus(ij)] - g[op.to_bus(ij)];
    RowVector row = -op.susceptance()[ij] * coupling * g.transpose();
    if (ij == km) {
        row += op.pseudoinverse().row(op.from_bus(ij)) - op.pseudoinverse().row(op.to_bus(ij));
    }
    return row;
}

double d_baseflow_db(const NetworkOperator& op, const Vector& injection, int ij, int km) {
    require_balanced(injection);
    return d_ptdf_row_db(op, ij, km).dot(injection);
}

}  // namespace gridflex
