#include "gridflex/ccore.hpp"

#include "gridflex/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gridflex {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation of the lower-tail inverse normal, ~1e-9 relative.
double acklam(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double low = 0.02425;
    if (p < low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - low) return -acklam(1.0 - p);
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double quantile_factor(double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 0.5)) {
        std::ostringstream msg;
        msg << "violation probability " << epsilon << " outside (0, 0.5]";
        throw Error(ErrorCode::DomainError, msg.str());
    }
    if (epsilon == 0.5) return 0.0;
    // Upper tail: c solves Q(c) = epsilon with Q(x) = erfc(x/sqrt2)/2.
    double x = -acklam(epsilon);
    for (int it = 0; it < 3; ++it) {
        const double tail = 0.5 * std::erfc(x / std::numbers::sqrt2);
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        const double step = (tail - epsilon) / pdf;  // Newton on Q(x) - epsilon, Q' = -pdf
        x += step / (1.0 - 0.5 * x * step);          // Halley correction
    }
    return x;
}

Matrix response_matrix(const Vector& alpha) {
    const double total = alpha.sum();
    if (std::abs(total - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "participation factors sum to " << total << ", not 1";
        throw Error(ErrorCode::NotNormalized, msg.str());
    }
    const auto n = alpha.size();
    return Matrix::Identity(n, n) - alpha * RowVector::Ones(n);
}

Matrix psd_sqrt(const Matrix& sigma) {
    if (sigma.size() == 0) return sigma;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    Vector root = eig.eigenvalues();
    for (Eigen::Index i = 0; i < root.size(); ++i) {
        root[i] = root[i] > 1e-12 ? std::sqrt(root[i]) : 0.0;
    }
    Matrix out = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

Matrix covariance_factor(const UncertaintyModel& uncertainty) {
    const int n = uncertainty.n_buses();
    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
        if (uncertainty.renewable()[i] && uncertainty.covariance()(i, i) > 0.0) active.push_back(i);
    }
    Matrix out = Matrix::Zero(n, static_cast<Eigen::Index>(active.size()));
    if (active.empty()) return out;
    const auto r = static_cast<Eigen::Index>(active.size());
    Matrix sub(r, r);
    for (Eigen::Index a = 0; a < r; ++a) {
        for (Eigen::Index b = 0; b < r; ++b) sub(a, b) = uncertainty.covariance()(active[a], active[b]);
    }
    const Matrix root = psd_sqrt(sub);
    for (Eigen::Index a = 0; a < r; ++a) out.row(active[a]) = root.row(a);
    return out;
}

MomentProfile moments(const NetworkOperator& op, const Grid& grid, const DispatchDecision& decision,
                      const UncertaintyModel& uncertainty) {
    MomentProfile m;
    m.s_sigma = uncertainty.s_sigma();
    m.t_g = response_matrix(decision.alpha());
    m.gen_std = decision.generator_participation(grid) * m.s_sigma;
    m.flow_mean = line_flows(op, decision.base_injection(grid));
    const Matrix root = covariance_factor(uncertainty);
    if (root.cols() == 0) {
        m.flow_std = Vector::Zero(grid.n_lines());
        return m;
    }
    const Matrix spread = op.ptdf() * (m.t_g * root);
    m.flow_std = spread.rowwise().norm();
    return m;
}

double flow_std_quadratic(const NetworkOperator& op, int line, const Matrix& t_g,
                          const Matrix& sigma) {
    const RowVector row = op.ptdf().row(line) * t_g;
    const double var = row * sigma * row.transpose();
    return std::sqrt(std::max(var, 0.0));
}

EquivalentLimits equivalent_limits(const MomentProfile& moments, const Grid& grid) {
    EquivalentLimits lim;
    const int ng = grid.n_generators();
    const int l = grid.n_lines();
    lim.gen_emax.resize(ng);
    lim.gen_emin.resize(ng);
    lim.c_gen.resize(ng);
    for (int g = 0; g < ng; ++g) {
        const Generator& gen = grid.generators()[g];
        lim.c_gen[g] = gen.quantile;
        lim.gen_emax[g] = gen.p_max - gen.quantile * moments.gen_std[g];
        lim.gen_emin[g] = gen.p_min + gen.quantile * moments.gen_std[g];
        if (lim.gen_emax[g] < lim.gen_emin[g]) {
            throw Error(ErrorCode::InfeasibleMargin,
                        "generator at bus " + std::to_string(grid.bus_number(gen.bus)) +
                            ": uncertainty margin closes the output window");
        }
    }
    lim.flow_emax.resize(l);
    lim.c_line.resize(l);
    for (int k = 0; k < l; ++k) {
        const Line& line = grid.line(k);
        lim.c_line[k] = line.quantile;
        lim.flow_emax[k] = line.capacity - line.quantile * moments.flow_std[k];
        if (lim.flow_emax[k] < 0.0) {
            throw Error(ErrorCode::InfeasibleMargin,
                        "line (" + std::to_string(grid.bus_number(line.from_bus)) + "," +
                            std::to_string(grid.bus_number(line.to_bus)) +
                            "): uncertainty margin exceeds the capacity");
        }
    }
    return lim;
}

double expected_cost(const DispatchDecision& decision, const Grid& grid, double s_sigma) {
    const double base = grid.base_mva();
    const Vector p = decision.generator_output(grid);
    const Vector a = decision.generator_participation(grid);
    double h = 0.0;
    for (int g = 0; g < grid.n_generators(); ++g) {
        const Generator& gen = grid.generators()[g];
        const double a2 = gen.quadratic_pu(base);
        h += a2 * p[g] * p[g] + s_sigma * s_sigma * a2 * a[g] * a[g] + gen.linear_pu(base) * p[g];
    }
    return h;
}


double ConstraintViolation::worst() const {
    return std::max({balance, participation_sum, generation, flow});
}

ConstraintViolation constraint_violation(const Grid& grid, const UncertaintyModel& uncertainty,
                                         const DispatchDecision& decision) {
    ConstraintViolation v;
    const Vector injection = decision.base_injection(grid);
    v.balance = std::abs(injection.sum());
    v.participation_sum = std::abs(decision.alpha().sum() - 1.0);
    const double s = uncertainty.s_sigma();
    const Vector p = decision.generator_output(grid);
    const Vector a = decision.generator_participation(grid);
    for (int g = 0; g < grid.n_generators(); ++g) {
        const Generator& gen = grid.generators()[g];
        const double margin = gen.quantile * s * std::abs(a[g]);
        v.generation = std::max({v.generation, p[g] + margin - gen.p_max, gen.p_min - (p[g] - margin)});
    }
    const NetworkOperator op(grid, decision.susceptance());
    Vector balanced = injection;
    balanced.array() -= injection.sum() / static_cast<double>(injection.size());
    const Vector mean = op.ptdf() * balanced;
    const Matrix root = covariance_factor(uncertainty);
    Vector std_dev = Vector::Zero(grid.n_lines());
    if (root.cols() > 0) {
        std_dev = (op.ptdf() * (root - decision.alpha() * root.colwise().sum())).rowwise().norm();
    }
    for (int k = 0; k < grid.n_lines(); ++k) {
        const Line& line = grid.line(k);
        if (!std::isfinite(line.capacity)) continue;
        v.flow = std::max(v.flow, std::abs(mean[k]) + line.quantile * std_dev[k] - line.capacity);
    }
    v.balance = std::max(v.balance, 0.0);
    return v;
}

}  // namespace gridflex
