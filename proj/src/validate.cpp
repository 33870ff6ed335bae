#include "gridflex/validate.hpp"

#include "gridflex/ccore.hpp"
#include "gridflex/dcflow.hpp"
#include "gridflex/error.hpp"
#include "gridflex/netlp.hpp"
#include "gridflex/threads.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace gridflex {

Interval wilson_interval(std::int64_t k, std::int64_t n, double z) {
    if (n <= 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::string to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::GenerationUpper: return "generation-upper";
        case ConstraintKind::GenerationLower: return "generation-lower";
        case ConstraintKind::FlowUpper: return "flow-upper";
        case ConstraintKind::FlowLower: return "flow-lower";
    }
    return "unknown";
}

double ValidationReport::max_rate() const {
    double worst = 0.0;
    for (const RateEstimate& r : rates) worst = std::max(worst, r.rate);
    return worst;
}

bool FiniteDifferenceReport::pass() const {
    return std::all_of(families.begin(), families.end(),
                       [](const DerivativeCheck& c) { return c.pass(); });
}

namespace {

constexpr std::int64_t kBatch = 8192;

// Sampling factor F with F F' = Sigma, restricted to the buses carrying variance.
Matrix sampling_factor(const UncertaintyModel& uncertainty, SamplingRoute route) {
    if (route == SamplingRoute::SymmetricRoot) return covariance_factor(uncertainty);
    const int n = uncertainty.n_buses();
    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
        if (uncertainty.renewable()[i] && uncertainty.covariance()(i, i) > 0.0) active.push_back(i);
    }
    const auto r = static_cast<Eigen::Index>(active.size());
    Matrix out = Matrix::Zero(n, r);
    if (r == 0) return out;
    Matrix sub(r, r);
    for (Eigen::Index a = 0; a < r; ++a) {
        for (Eigen::Index b = 0; b < r; ++b) sub(a, b) = uncertainty.covariance()(active[a], active[b]);
    }
    const Eigen::LDLT<Matrix> ldlt(sub);
    Matrix lower = ldlt.matrixL();
    const Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    const Matrix factor = ldlt.transpositionsP().transpose() * (lower * d.asDiagonal());
    for (Eigen::Index a = 0; a < r; ++a) out.row(active[a]) = factor.row(a);
    return out;
}

struct Tally {
    std::vector<std::int64_t> gen_upper, gen_lower, flow_upper, flow_lower;
    double cost_sum = 0.0;
    double cost_sq_sum = 0.0;

    explicit Tally(int ng = 0, int l = 0)
        : gen_upper(ng, 0), gen_lower(ng, 0), flow_upper(l, 0), flow_lower(l, 0) {}

    void merge(const Tally& o) {
        for (std::size_t i = 0; i < gen_upper.size(); ++i) {
            gen_upper[i] += o.gen_upper[i];
            gen_lower[i] += o.gen_lower[i];
        }
        for (std::size_t i = 0; i < flow_upper.size(); ++i) {
            flow_upper[i] += o.flow_upper[i];
            flow_lower[i] += o.flow_lower[i];
        }
        cost_sum += o.cost_sum;
        cost_sq_sum += o.cost_sq_sum;
    }
};

struct SampleModel {
    int ng = 0;
    int l = 0;
    int r = 0;
    Vector p_bar, alpha, a2, a1, p_min, p_max;  // generator order, p.u. / $ per p.u.
    Vector f_bar, capacity;
    RowVector total;  // 1'F
    Matrix flow_map;  // T_f T_g F
};

SampleModel make_model(const Grid& grid, const UncertaintyModel& uncertainty,
                       const DispatchDecision& decision, SamplingRoute route) {
    SampleModel m;
    m.ng = grid.n_generators();
    m.l = grid.n_lines();
    const Matrix factor = sampling_factor(uncertainty, route);
    m.r = static_cast<int>(factor.cols());
    m.p_bar = decision.generator_output(grid);
    m.alpha = decision.generator_participation(grid);
    m.a2.resize(m.ng);
    m.a1.resize(m.ng);
    m.p_min.resize(m.ng);
    m.p_max.resize(m.ng);
    for (int g = 0; g < m.ng; ++g) {
        const Generator& gen = grid.generators()[g];
        m.a2[g] = gen.quadratic_pu(grid.base_mva());
        m.a1[g] = gen.linear_pu(grid.base_mva());
        m.p_min[g] = gen.p_min;
        m.p_max[g] = gen.p_max;
    }
    const NetworkOperator op(grid, decision.susceptance());
    Vector injection = decision.base_injection(grid);
    injection.array() -= injection.sum() / static_cast<double>(injection.size());
    m.f_bar = op.ptdf() * injection;
    m.capacity.resize(m.l);
    for (int k = 0; k < m.l; ++k) m.capacity[k] = grid.line(k).capacity;
    if (m.r > 0) {
        m.total = factor.colwise().sum();
        m.flow_map = op.ptdf() * (factor - decision.alpha() * m.total);
    }
    return m;
}

Tally run_batch(const SampleModel& m, std::int64_t count, std::uint64_t seed, std::uint64_t batch) {
    Tally t(m.ng, m.l);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
    std::mt19937_64 engine(seq);
    std::normal_distribution<double> normal;
    Vector z(m.r);
    Vector flow(m.l);
    for (std::int64_t s = 0; s < count; ++s) {
        for (int i = 0; i < m.r; ++i) z[i] = normal(engine);
        const double imbalance = m.r > 0 ? m.total.dot(z) : 0.0;
        double cost = 0.0;
        for (int g = 0; g < m.ng; ++g) {
            const double p = m.p_bar[g] - m.alpha[g] * imbalance;
            if (p > m.p_max[g]) ++t.gen_upper[g];
            if (p < m.p_min[g]) ++t.gen_lower[g];
            cost += m.a2[g] * p * p + m.a1[g] * p;
        }
        t.cost_sum += cost;
        t.cost_sq_sum += cost * cost;
        if (m.r > 0) {
            flow.noalias() = m.flow_map * z;
            flow += m.f_bar;
        } else {
            flow = m.f_bar;
        }
        for (int k = 0; k < m.l; ++k) {
            if (flow[k] > m.capacity[k]) ++t.flow_upper[k];
            if (flow[k] < -m.capacity[k]) ++t.flow_lower[k];
        }
    }
    return t;
}

// Batches are reduced in index order so totals do not depend on the worker count.
Tally sample(const SampleModel& m, std::int64_t samples, std::uint64_t seed) {
    const std::int64_t n_batches = (samples + kBatch - 1) / kBatch;
    std::vector<Tally> parts(static_cast<std::size_t>(n_batches));
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        for (std::int64_t b = next++; b < n_batches; b = next++) {
            const std::int64_t count = std::min(kBatch, samples - b * kBatch);
            parts[static_cast<std::size_t>(b)] = run_batch(m, count, seed, static_cast<std::uint64_t>(b));
        }
    };
    const int workers = static_cast<int>(std::min<std::int64_t>(max_workers(), n_batches));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();
    Tally total(m.ng, m.l);
    for (const Tally& part : parts) total.merge(part);
    return total;
}

CostEstimate cost_estimate(const Tally& t, std::int64_t samples) {
    CostEstimate c;
    const double n = static_cast<double>(samples);
    c.mean = t.cost_sum / n;
    const double var = std::max(0.0, (t.cost_sq_sum - n * c.mean * c.mean) / std::max(1.0, n - 1.0));
    c.std_error = std::sqrt(var / n);
    c.ci99 = {c.mean - kWilson99 * c.std_error, c.mean + kWilson99 * c.std_error};
    return c;
}

void require_samples(std::int64_t samples) {
    if (samples < 1000) {
        throw Error(ErrorCode::DomainError,
                    "Monte Carlo validation needs at least 1000 samples, got " + std::to_string(samples));
    }
}

}  // namespace

ValidationReport monte_carlo_validate(const Grid& grid, const UncertaintyModel& uncertainty,
                                      const DispatchDecision& decision, std::int64_t samples,
                                      std::uint64_t seed, SamplingRoute route) {
    require_samples(samples);
    const SampleModel m = make_model(grid, uncertainty, decision, route);
    const Tally t = sample(m, samples, seed);

    ValidationReport report;
    report.samples = samples;
    report.seed = seed;
    report.cost = cost_estimate(t, samples);
    report.analytic_cost = expected_cost(decision, grid, uncertainty.s_sigma());
    report.balance_residual = std::abs(decision.base_injection(grid).sum());
    report.participation_residual = uncertainty.is_zero() ? 0.0 : std::abs(decision.alpha().sum() - 1.0);
    report.balanced = report.balance_residual <= kBalanceTolerance &&
                      report.participation_residual <= kBalanceTolerance;
    report.all_pass = report.balanced;
    auto add = [&](ConstraintKind kind, int index, double epsilon, std::int64_t k) {
        RateEstimate r;
        r.kind = kind;
        r.index = index;
        r.epsilon = epsilon;
        r.violations = k;
        r.rate = static_cast<double>(k) / static_cast<double>(samples);
        r.wilson99 = wilson_interval(k, samples, kWilson99);
        r.band = wilson_interval(k, samples, kPassSigma);
        r.pass = r.band.lower <= epsilon;
        report.all_pass = report.all_pass && r.pass;
        report.rates.push_back(r);
    };
    for (int g = 0; g < m.ng; ++g) {
        const double eps = grid.generators()[g].epsilon;
        add(ConstraintKind::GenerationUpper, g, eps, t.gen_upper[g]);
        add(ConstraintKind::GenerationLower, g, eps, t.gen_lower[g]);
    }
    for (int k = 0; k < m.l; ++k) {
        if (!std::isfinite(grid.line(k).capacity)) continue;
        const double eps = grid.line(k).epsilon;
        add(ConstraintKind::FlowUpper, k, eps, t.flow_upper[k]);
        add(ConstraintKind::FlowLower, k, eps, t.flow_lower[k]);
    }
    return report;
}

CostEstimate empirical_cost(const Grid& grid, const UncertaintyModel& uncertainty,
                            const DispatchDecision& decision, std::int64_t samples,
                            std::uint64_t seed) {
    require_samples(samples);
    const SampleModel m = make_model(grid, uncertainty, decision, SamplingRoute::SymmetricRoot);
    return cost_estimate(sample(m, samples, seed), samples);
}

namespace {

struct Comparator {
    const FiniteDifferenceOptions& opt;
    DerivativeCheck& check;

    void operator()(double analytic, double fd) {
        ++check.checked;
        const double diff = std::abs(analytic - fd);
        const double scale = std::max(std::abs(analytic), std::abs(fd));
        const double allowed = std::max(opt.relative_tolerance * scale, opt.absolute_tolerance);
        check.worst_ratio = std::max(check.worst_ratio, diff / allowed);
        if (diff > allowed) ++check.failed;
    }
};

DerivativeCheck named_check(std::string family) {
    DerivativeCheck c;
    c.family = std::move(family);
    return c;
}

std::string line_label(const Grid& grid, int k) {
    return std::to_string(grid.bus_number(grid.line(k).from_bus)) + "-" +
           std::to_string(grid.bus_number(grid.line(k).to_bus));
}

}  // namespace

FiniteDifferenceReport finite_difference_suite(const Grid& grid,
                                               const UncertaintyModel& uncertainty,
                                               const DispatchDecision& decision,
                                               const FiniteDifferenceOptions& options) {
    const Vector b = decision.susceptance();
    const int l = grid.n_lines();
    std::vector<int> wrt = grid.flexible_lines();
    if (wrt.empty()) {
        for (int k = 0; k < l; ++k) wrt.push_back(k);
    }
    const NetworkOperator op(grid, b);
    Vector injection = decision.base_injection(grid);
    injection.array() -= injection.sum() / static_cast<double>(injection.size());
    const Matrix spread = flow_spread_basis(decision, uncertainty);

    DerivativeCheck pinv = named_check("pseudoinverse");
    DerivativeCheck ptdf = named_check("ptdf-row");
    DerivativeCheck flow = named_check("base-flow");
    DerivativeCheck limit = named_check("flow-limit");
    Comparator cmp_pinv{options, pinv};
    Comparator cmp_ptdf{options, ptdf};
    Comparator cmp_flow{options, flow};
    Comparator cmp_limit{options, limit};

    std::vector<bool> degenerate(static_cast<std::size_t>(l), false);
    for (int ij = 0; ij < l; ++ij) {
        const double s = spread.cols() > 0 ? (op.ptdf().row(ij) * spread).norm() : 0.0;
        if (s <= kStdFloor) {
            degenerate[ij] = true;
            limit.excluded.push_back(line_label(grid, ij));
        }
    }

    for (int km : wrt) {
        const double h = options.relative_step * b[km];
        Vector bp = b;
        Vector bm = b;
        bp[km] += h;
        bm[km] -= h;
        const NetworkOperator up(grid, bp);
        const NetworkOperator down(grid, bm);

        const Matrix d_pinv = d_pseudoinverse_db(op, km);
        const Matrix fd_pinv = (up.pseudoinverse() - down.pseudoinverse()) / (2.0 * h);
        for (Eigen::Index i = 0; i < d_pinv.size(); ++i) cmp_pinv(d_pinv.data()[i], fd_pinv.data()[i]);

        const Matrix fd_ptdf = (up.ptdf() - down.ptdf()) / (2.0 * h);
        const Vector fd_flow = fd_ptdf * injection;
        Vector std_up = Vector::Zero(l);
        Vector std_down = Vector::Zero(l);
        if (spread.cols() > 0) {
            std_up = (up.ptdf() * spread).rowwise().norm();
            std_down = (down.ptdf() * spread).rowwise().norm();
        }
        for (int ij = 0; ij < l; ++ij) {
            const RowVector row = d_ptdf_row_db(op, ij, km);
            for (Eigen::Index j = 0; j < row.size(); ++j) cmp_ptdf(row[j], fd_ptdf(ij, j));
            cmp_flow(d_baseflow_db(op, injection, ij, km), fd_flow[ij]);
            if (degenerate[ij]) continue;
            const auto analytic = flow_limit_sensitivity(op, grid, spread, ij, km);
            const double c = grid.line(ij).quantile;
            const double fd = -c * (std_up[ij] - std_down[ij]) / (2.0 * h);
            cmp_limit(analytic.value_or(0.0), fd);
        }
    }
    FiniteDifferenceReport report;
    report.families = {pinv, ptdf, flow, limit};
    return report;
}

}  // namespace gridflex
