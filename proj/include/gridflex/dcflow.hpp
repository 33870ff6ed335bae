#pragma once

// DC network algebra: admittance matrix, pseudoinverse, PTDF and their
// derivatives with respect to line susceptances.

#include "gridflex/netmodel.hpp"

namespace gridflex {

/// Immutable snapshot of the network operators at one susceptance vector.
class NetworkOperator {
public:
    /// Throws SingularNetwork when B + 11'/n cannot be factorized.
    NetworkOperator(const Grid& grid, Vector susceptance);

    const Matrix& admittance() const { return b_matrix_; }       ///< B = E diag(b) E'
    const Matrix& pseudoinverse() const { return b_dagger_; }    ///< B^+
    const Matrix& ptdf() const { return ptdf_; }                 ///< T_f = diag(b) E' B^+
    const Matrix& incidence() const { return incidence_; }
    const Vector& susceptance() const { return susceptance_; }
    int n_buses() const { return static_cast<int>(b_matrix_.rows()); }
    int n_lines() const { return static_cast<int>(susceptance_.size()); }

    /// Column k of E as (from, to) bus indices.
    int from_bus(int k) const { return from_[static_cast<std::size_t>(k)]; }
    int to_bus(int k) const { return to_[static_cast<std::size_t>(k)]; }

    /// B^+ E_k, the bus-angle response to a unit transfer across line k.
    Vector angle_response(int k) const;

private:
    Vector susceptance_;
    Matrix incidence_;
    Matrix b_matrix_;
    Matrix b_dagger_;
    Matrix ptdf_;
    std::vector<int> from_;
    std::vector<int> to_;
};

inline NetworkOperator build_operator(const Grid& grid, const Vector& susceptance) {
    return NetworkOperator(grid, susceptance);
}

/// Throws UnbalancedInjection when |1'p| exceeds 1e-8.
void require_balanced(const Vector& injection);

/// f = T_f p.
Vector line_flows(const NetworkOperator& op, const Vector& injection);

/// Voltage angles theta = B^+ p.
Vector bus_angles(const NetworkOperator& op, const Vector& injection);

/// dB^+/db_km = -B^+ E_km E_km' B^+.
Matrix d_pseudoinverse_db(const NetworkOperator& op, int km);

/// dT_f,ij/db_km as a row vector.
RowVector d_ptdf_row_db(const NetworkOperator& op, int ij, int km);

/// d f_ij / d b_km at a fixed balanced injection.
double d_baseflow_db(const NetworkOperator& op, const Vector& injection, int ij, int km);

}  // namespace gridflex
