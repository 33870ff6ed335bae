#include "gridflex/conic.hpp"

#include "gridflex/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace gridflex {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int ConeSpec::dimension() const {
    int d = n_linear;
    for (int m : soc_sizes) d += m;
    return d;
}

int ConeSpec::degree() const { return n_linear + static_cast<int>(soc_sizes.size()); }

void ConicProgram::check_dimensions() const {
    const auto n = q.size();
    const auto m = h.size();
    bool ok = P.rows() == n && P.cols() == n && G.rows() == m && G.cols() == n &&
              A.cols() == n && A.rows() == b.size() && cones.dimension() == m;
    for (int size : cones.soc_sizes) ok = ok && size >= 1;
    if (!ok) throw Error(ErrorCode::InvalidDecision, "conic program has inconsistent dimensions");
}

std::string to_string(SolverStatus status) {
    switch (status) {
        case SolverStatus::Optimal: return "optimal";
        case SolverStatus::Infeasible: return "infeasible";
        case SolverStatus::NumericalLimit: return "numerical-limit";
    }
    return "unknown";
}

namespace {

// Identity element of the cone.
VectorXd unit_element(const ConeSpec& cones) {
    VectorXd e = VectorXd::Zero(cones.dimension());
    e.head(cones.n_linear).setOnes();
    int offset = cones.n_linear;
    for (int m : cones.soc_sizes) {
        e[offset] = 1.0;
        offset += m;
    }
    return e;
}

double soc_det(const VectorXd& u, int offset, int m) {
    const double head = u[offset];
    const double tail = u.segment(offset + 1, m - 1).norm();
    return (head - tail) * (head + tail);
}

// Smallest entry of the spectral decomposition; negative means outside the cone.
double min_eigenvalue(const VectorXd& u, const ConeSpec& cones) {
    double lo = std::numeric_limits<double>::infinity();
    if (cones.n_linear > 0) lo = u.head(cones.n_linear).minCoeff();
    int offset = cones.n_linear;
    for (int m : cones.soc_sizes) {
        lo = std::min(lo, u[offset] - u.segment(offset + 1, m - 1).norm());
        offset += m;
    }
    return lo;
}

// Largest alpha with u + alpha d in the cone (u interior); infinity if unbounded.
double max_step(const VectorXd& u, const VectorXd& d, const ConeSpec& cones) {
    double step = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cones.n_linear; ++i) {
        if (d[i] < 0.0) step = std::min(step, -u[i] / d[i]);
    }
    int offset = cones.n_linear;
    for (int m : cones.soc_sizes) {
        const auto u1 = u.segment(offset + 1, m - 1);
        const auto d1 = d.segment(offset + 1, m - 1);
        const double a = d[offset] * d[offset] - d1.squaredNorm();
        const double b = u[offset] * d[offset] - u1.dot(d1);
        const double c = std::max(soc_det(u, offset, m), 0.0);
        const double disc = b * b - a * c;
        if (a < 0.0 || (b < 0.0 && disc >= 0.0)) {
            const double denom = -b + std::sqrt(std::max(disc, 0.0));
            step = std::min(step, denom > 0.0 ? c / denom : 0.0);
        }
        offset += m;
    }
    return step;
}

// u o v
VectorXd jordan_product(const VectorXd& u, const VectorXd& v, const ConeSpec& cones) {
    VectorXd out(u.size());
    const int l = cones.n_linear;
    out.head(l) = u.head(l).cwiseProduct(v.head(l));
    int offset = l;
    for (int m : cones.soc_sizes) {
        out[offset] = u.segment(offset, m).dot(v.segment(offset, m));
        out.segment(offset + 1, m - 1) =
            u[offset] * v.segment(offset + 1, m - 1) + v[offset] * u.segment(offset + 1, m - 1);
        offset += m;
    }
    return out;
}

// x with lambda o x = v
VectorXd jordan_divide(const VectorXd& lambda, const VectorXd& v, const ConeSpec& cones) {
    VectorXd out(v.size());
    const int l = cones.n_linear;
    out.head(l) = v.head(l).cwiseQuotient(lambda.head(l));
    int offset = l;
    for (int m : cones.soc_sizes) {
        const double l0 = lambda[offset];
        const auto l1 = lambda.segment(offset + 1, m - 1);
        const double v0 = v[offset];
        const auto v1 = v.segment(offset + 1, m - 1);
        const double det = soc_det(lambda, offset, m);
        const double x0 = (l0 * v0 - l1.dot(v1)) / det;
        out[offset] = x0;
        out.segment(offset + 1, m - 1) = (v1 - x0 * l1) / l0;
        offset += m;
    }
    return out;
}

// Nesterov-Todd scaling: W z = W^-1 s = lambda, W symmetric.
struct Scaling {
    VectorXd d;  // orthant: W = diag(d)
    std::vector<double> beta;
    std::vector<VectorXd> v;
    VectorXd lambda;
};

Scaling nt_scaling(const VectorXd& s, const VectorXd& z, const ConeSpec& cones) {
    Scaling w;
    const int l = cones.n_linear;
    w.d = (s.head(l).cwiseQuotient(z.head(l))).cwiseSqrt();
    w.lambda.resize(s.size());
    w.lambda.head(l) = (s.head(l).cwiseProduct(z.head(l))).cwiseSqrt();
    int offset = l;
    for (int m : cones.soc_sizes) {
        const double s_norm = std::sqrt(std::max(soc_det(s, offset, m), 0.0));
        const double z_norm = std::sqrt(std::max(soc_det(z, offset, m), 0.0));
        const VectorXd sb = s.segment(offset, m) / s_norm;
        const VectorXd zb = z.segment(offset, m) / z_norm;
        const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
        VectorXd wb(m);
        wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
        wb.tail(m - 1) = (sb.tail(m - 1) - zb.tail(m - 1)) / (2.0 * gamma);
        VectorXd v = wb;
        v[0] += 1.0;
        v /= std::sqrt(2.0 * (wb[0] + 1.0));
        const double beta = std::sqrt(s_norm / z_norm);
        // lambda = W z; explicit form keeps it on the cone interior
        const double scale = std::sqrt(s_norm * z_norm);
        VectorXd lam(m);
        lam[0] = gamma * scale;
        const double denom = sb[0] + zb[0] + 2.0 * gamma;
        lam.tail(m - 1) =
            scale * ((gamma + zb[0]) / denom * sb.tail(m - 1) + (gamma + sb[0]) / denom * zb.tail(m - 1));
        w.lambda.segment(offset, m) = lam;
        w.beta.push_back(beta);
        w.v.push_back(std::move(v));
        offset += m;
    }
    return w;
}

// Applies W (inverse = false) or W^-1 to each column of X in place.
void apply_scaling(const Scaling& w, const ConeSpec& cones, MatrixXd& x, bool inverse) {
    const int l = cones.n_linear;
    if (inverse) {
        x.topRows(l) = w.d.cwiseInverse().asDiagonal() * x.topRows(l);
    } else {
        x.topRows(l) = w.d.asDiagonal() * x.topRows(l);
    }
    int offset = l;
    for (std::size_t k = 0; k < cones.soc_sizes.size(); ++k) {
        const int m = cones.soc_sizes[k];
        auto block = x.middleRows(offset, m);
        VectorXd jv = w.v[k];
        jv.tail(m - 1) *= -1.0;
        // W = beta (2 v v' - J);  W^-1 = (2 Jv (Jv)' - J) / beta
        const VectorXd& dir = inverse ? jv : w.v[k];
        const Eigen::RowVectorXd coeff = dir.transpose() * block;
        block.row(0) *= -1.0;  // -J x
        block += 2.0 * dir * coeff;
        block *= inverse ? 1.0 / w.beta[k] : w.beta[k];
        offset += m;
    }
}

VectorXd scaled(const Scaling& w, const ConeSpec& cones, const VectorXd& v, bool inverse) {
    MatrixXd x = v;
    apply_scaling(w, cones, x, inverse);
    return x.col(0);
}

// Reduced KKT system [P + G'W^-2G, A'; A, 0].
class KktSolver {
public:
    KktSolver(const MatrixXd& reduced, const MatrixXd& a) : a_(a) {
        const auto n = reduced.rows();
        const auto p = a.rows();
        MatrixXd regular = reduced + a.transpose() * a;
        double shift = 0.0;
        for (int attempt = 0; attempt < 6; ++attempt) {
            MatrixXd trial = regular;
            trial.diagonal().array() += shift;
            llt_.compute(trial);
            if (llt_.info() == Eigen::Success) {
                if (p > 0) {
                    ka_ = llt_.solve(a.transpose());
                    schur_.compute(a * ka_);
                    if (schur_.info() == Eigen::Success) {
                        ok_ = true;
                        break;
                    }
                } else {
                    ok_ = true;
                    break;
                }
            }
            shift = shift == 0.0 ? 1e-12 * std::max(1.0, regular.diagonal().maxCoeff()) : shift * 100.0;
        }
        if (!ok_) {
            MatrixXd full = MatrixXd::Zero(n + p, n + p);
            full.topLeftCorner(n, n) = reduced;
            full.topRightCorner(n, p) = a.transpose();
            full.bottomLeftCorner(p, n) = a;
            lu_.compute(full);
        }
    }

    void solve(const VectorXd& rx, const VectorXd& ry, VectorXd& dx, VectorXd& dy) const {
        const auto n = rx.size();
        const auto p = ry.size();
        if (!ok_) {
            VectorXd rhs(n + p);
            rhs << rx, ry;
            const VectorXd sol = lu_.solve(rhs);
            dx = sol.head(n);
            dy = sol.tail(p);
            return;
        }
        const VectorXd r1 = p > 0 ? VectorXd(rx + a_.transpose() * ry) : rx;
        const VectorXd k1 = llt_.solve(r1);
        if (p == 0) {
            dx = k1;
            dy.resize(0);
            return;
        }
        dy = schur_.solve(a_ * k1 - ry);
        dx = k1 - ka_ * dy;
    }

private:
    const MatrixXd& a_;
    Eigen::LLT<MatrixXd> llt_;
    Eigen::LLT<MatrixXd> schur_;
    MatrixXd ka_;
    Eigen::PartialPivLU<MatrixXd> lu_;
    bool ok_ = false;
};

struct Iterate {
    VectorXd x, y, z, s;
};

struct Residuals {
    VectorXd rx, ry, rz;
    double pcost = 0.0, dcost = 0.0, gap = 0.0;
    double pres = 0.0, dres = 0.0;
    std::optional<double> relgap;
};

Residuals residuals(const ConicProgram& prog, const Iterate& it) {
    Residuals r;
    const VectorXd px = prog.P * it.x;
    r.rx = px + prog.q + prog.A.transpose() * it.y + prog.G.transpose() * it.z;
    r.ry = prog.A * it.x - prog.b;
    r.rz = prog.G * it.x + it.s - prog.h;
    r.pcost = 0.5 * it.x.dot(px) + prog.q.dot(it.x);
    r.gap = it.s.dot(it.z);
    r.dcost = r.pcost + it.y.dot(r.ry) + it.z.dot(r.rz) - r.gap;
    const double ry_norm = r.ry.size() > 0 ? r.ry.norm() / std::max(1.0, prog.b.norm()) : 0.0;
    const double rz_norm = r.rz.size() > 0 ? r.rz.norm() / std::max(1.0, prog.h.norm()) : 0.0;
    r.pres = std::max(ry_norm, rz_norm);
    r.dres = r.rx.norm() / std::max(1.0, prog.q.norm());
    if (r.pcost < 0.0) {
        r.relgap = r.gap / -r.pcost;
    } else if (r.dcost > 0.0) {
        r.relgap = r.gap / r.dcost;
    }
    return r;
}

bool converged(const Residuals& r, double tol) {
    return r.pres <= tol && r.dres <= tol && (r.gap <= tol || (r.relgap && *r.relgap <= tol));
}

ConicResult run_ipm(const ConicProgram& prog, const ConicOptions& opt) {
    const ConeSpec& cones = prog.cones;
    const auto n = prog.n_variables();
    const auto p = prog.A.rows();
    const VectorXd e = unit_element(cones);
    ConicResult out;

    Iterate it;
    {
        // Least-squares start: min 1/2 x'Px + q'x + 1/2 ||Gx - h||^2 s.t. Ax = b.
        const MatrixXd reduced = prog.P + prog.G.transpose() * prog.G;
        KktSolver kkt(reduced, prog.A);
        VectorXd x, y;
        kkt.solve(-prog.q + prog.G.transpose() * prog.h, prog.b, x, y);
        it.x = x;
        it.y = y;
        it.z = prog.G * x - prog.h;
        it.s = -it.z;
        const double ts = min_eigenvalue(it.s, cones);
        const double tz = min_eigenvalue(it.z, cones);
        const double floor_s = std::max(1.0, it.s.norm()) * 1e-8;
        const double floor_z = std::max(1.0, it.z.norm()) * 1e-8;
        if (ts <= floor_s) it.s += (1.0 - ts) * e;
        if (tz <= floor_z) it.z += (1.0 - tz) * e;
    }

    const double degree = std::max(1, cones.degree());
    Residuals res;
    for (int k = 0; k <= opt.max_iterations; ++k) {
        res = residuals(prog, it);
        out.iterations = k;
        if (!std::isfinite(res.pres) || !std::isfinite(res.dres) || !std::isfinite(res.gap)) {
            out.message = "non-finite iterate";
            break;
        }
        if (converged(res, opt.tolerance)) {
            out.status = SolverStatus::Optimal;
            break;
        }
        if (k == opt.max_iterations) {
            out.message = "iteration limit";
            break;
        }

        const Scaling w = nt_scaling(it.s, it.z, cones);
        MatrixXd gs = prog.G;
        apply_scaling(w, cones, gs, true);
        const MatrixXd reduced = prog.P + gs.transpose() * gs;
        const KktSolver kkt(reduced, prog.A);
        const double mu = res.gap / degree;
        const VectorXd wrz = scaled(w, cones, res.rz, true);

        // Solves the linearized system with complementarity right-hand side ds_rhs.
        // Returns (dx, dy, dz, ds, W dz) with W^-1 ds = lambda \ ds_rhs - W dz.
        auto newton = [&](const VectorXd& ds_rhs, VectorXd& dx, VectorXd& dy, VectorXd& dz,
                          VectorXd& ds, VectorXd& wdz) {
            const VectorXd ld = jordan_divide(w.lambda, ds_rhs, cones);
            const VectorXd rhs_x = -res.rx - gs.transpose() * (ld + wrz);
            kkt.solve(rhs_x, -res.ry, dx, dy);
            wdz = gs * dx + ld + wrz;
            dz = scaled(w, cones, wdz, true);
            ds = scaled(w, cones, ld - wdz, false);
        };

        const VectorXd ll = jordan_product(w.lambda, w.lambda, cones);
        VectorXd dx, dy, dz, ds, wdz;
        newton(-ll, dx, dy, dz, ds, wdz);
        const double step_aff =
            std::min({1.0, max_step(it.s, ds, cones), max_step(it.z, dz, cones)});
        const double sigma = std::pow(1.0 - step_aff, 3);

        const VectorXd winv_ds = jordan_divide(w.lambda, -ll, cones) - wdz;
        const VectorXd ds_rhs = -ll - jordan_product(winv_ds, wdz, cones) + sigma * mu * e;
        newton(ds_rhs, dx, dy, dz, ds, wdz);
        const double step =
            std::min(1.0, 0.99 * std::min(max_step(it.s, ds, cones), max_step(it.z, dz, cones)));
        if (!(step > 1e-13) || !dx.allFinite()) {
            out.message = "step length collapsed";
            break;
        }
        it.x += step * dx;
        it.y += step * dy;
        it.z += step * dz;
        it.s += step * ds;
    }

    out.x = it.x;
    out.y = it.y.size() == p ? it.y : VectorXd::Zero(p);
    out.z = it.z;
    out.s = it.s;
    out.primal_objective = res.pcost;
    out.dual_objective = res.dcost;
    out.gap = res.gap;
    out.primal_residual = res.pres;
    out.dual_residual = res.dres;
    if (out.status != SolverStatus::Optimal) {
        const double loose = std::max(1e3 * opt.tolerance, 1e-6);
        if (converged(res, loose) && min_eigenvalue(it.s, cones) >= 0.0 &&
            min_eigenvalue(it.z, cones) >= 0.0) {
            out.status = SolverStatus::Optimal;
            out.reduced_accuracy = true;
        }
    }
    (void)n;
    return out;
}

// min t  s.t.  Gx - t e + s = h, Ax = b, t >= -1.
// A positive optimum certifies that no x satisfies the conic constraints.
std::optional<double> phase_one(const ConicProgram& prog, const ConicOptions& opt) {
    const auto n = prog.n_variables();
    const auto m = prog.h.size();
    const VectorXd e = unit_element(prog.cones);
    ConicProgram aux;
    aux.cones = prog.cones;
    aux.cones.n_linear += 1;
    aux.P = MatrixXd::Zero(n + 1, n + 1);
    aux.q = VectorXd::Zero(n + 1);
    aux.q[n] = 1.0;
    aux.G = MatrixXd::Zero(m + 1, n + 1);
    aux.h = VectorXd::Zero(m + 1);
    aux.G(0, n) = -1.0;
    aux.h[0] = 1.0;
    aux.G.bottomLeftCorner(m, n) = prog.G;
    aux.G.bottomRightCorner(m, 1) = -e;
    aux.h.tail(m) = prog.h;
    aux.A = MatrixXd::Zero(prog.A.rows(), n + 1);
    aux.A.leftCols(n) = prog.A;
    aux.b = prog.b;
    ConicOptions inner = opt;
    inner.tolerance = std::max(opt.tolerance, 1e-8);
    const ConicResult r = run_ipm(aux, inner);
    if (r.status != SolverStatus::Optimal) return std::nullopt;
    return r.x[n];
}

}  // namespace

ConicResult InteriorPointSolver::solve(const ConicProgram& program, const ConicOptions& options) const {
    program.check_dimensions();

    // Normalize the objective so tolerances act on a unit cost scale.
    double kappa = 1.0;
    if (program.q.size() > 0) kappa = std::max(kappa, program.q.cwiseAbs().maxCoeff());
    if (program.P.size() > 0) kappa = std::max(kappa, program.P.cwiseAbs().maxCoeff());
    ConicProgram scaled_program = program;
    scaled_program.P /= kappa;
    scaled_program.q /= kappa;

    ConicResult r = run_ipm(scaled_program, options);
    r.y *= kappa;
    r.z *= kappa;
    r.primal_objective *= kappa;
    r.dual_objective *= kappa;
    r.gap *= kappa;
    if (r.status == SolverStatus::Optimal || !options.detect_infeasibility) return r;

    const std::optional<double> t = phase_one(program, options);
    if (t && *t > 1e-7) {
        r.status = SolverStatus::Infeasible;
        r.message = "constraints cannot be satisfied (phase-one shift " + std::to_string(*t) + ")";
    } else if (!t) {
        r.message += "; phase-one solve also failed";
    }
    return r;
}

std::shared_ptr<const ConicSolver> default_conic_solver() {
    static const auto solver = std::make_shared<const InteriorPointSolver>();
    return solver;
}

}  // namespace gridflex
