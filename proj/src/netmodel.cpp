#include "gridflex/netmodel.hpp"

#include "gridflex/error.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace gridflex {

double Line::b_min() const {
    return flexibility ? susceptance_rated / (1.0 + flexibility->degree) : susceptance_rated;
}

double Line::b_max() const {
    return flexibility ? susceptance_rated / (1.0 - flexibility->degree) : susceptance_rated;
}

namespace {

int find_root(std::vector<int>& parent, int v) {
    while (parent[v] != v) {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    return v;
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidGrid, what); }

}  // namespace

bool is_connected(int n_buses, std::span<const Line> lines) {
    if (n_buses <= 1) return true;
    std::vector<int> parent(static_cast<std::size_t>(n_buses));
    std::iota(parent.begin(), parent.end(), 0);
    int components = n_buses;
    for (const Line& line : lines) {
        const int a = find_root(parent, line.from_bus);
        const int b = find_root(parent, line.to_bus);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return components == 1;
}

Grid::Grid(double base_mva, std::vector<int> bus_numbers, std::vector<Line> lines,
           std::vector<Generator> generators, Vector load, Vector renewable_forecast)
    : base_mva_(base_mva),
      bus_numbers_(std::move(bus_numbers)),
      lines_(std::move(lines)),
      generators_(std::move(generators)),
      load_(std::move(load)),
      renewable_forecast_(std::move(renewable_forecast)) {
    if (!(base_mva_ > 0.0)) invalid("base_mva must be positive");
    const int n = n_buses();
    if (n == 0) invalid("grid has no buses");
    if (load_.size() != n || renewable_forecast_.size() != n) {
        invalid("load and renewable_forecast must have one entry per bus");
    }
    for (int i = 0; i < n; ++i) {
        if (!index_of_bus_.emplace(bus_numbers_[i], i).second) {
            invalid("duplicate bus number " + std::to_string(bus_numbers_[i]));
        }
    }
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        const Line& line = lines_[k];
        const std::string tag = "line " + std::to_string(k);
        if (line.from_bus < 0 || line.from_bus >= n || line.to_bus < 0 || line.to_bus >= n) {
            invalid(tag + " has an endpoint outside the bus range");
        }
        if (line.from_bus == line.to_bus) invalid(tag + " is a self loop");
        if (!(line.susceptance_rated > 0.0)) invalid(tag + " needs a positive susceptance");
        if (!(line.capacity > 0.0)) invalid(tag + " needs a positive capacity");
        if (!(line.epsilon > 0.0 && line.epsilon <= 0.5)) invalid(tag + " epsilon outside (0, 0.5]");
        if (line.flexibility && !(line.flexibility->degree >= 0.0 && line.flexibility->degree < 1.0)) {
            invalid(tag + " degree of flexibility outside [0, 1)");
        }
    }
    generator_of_bus_.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t g = 0; g < generators_.size(); ++g) {
        const Generator& gen = generators_[g];
        const std::string tag = "generator " + std::to_string(g);
        if (gen.bus < 0 || gen.bus >= n) invalid(tag + " sits on an unknown bus");
        if (generator_of_bus_[gen.bus] >= 0) {
            invalid(tag + " shares bus " + std::to_string(bus_numbers_[gen.bus]) +
                    " with another generator");
        }
        generator_of_bus_[gen.bus] = static_cast<int>(g);
        if (gen.p_min > gen.p_max) invalid(tag + " has p_min > p_max");
        if (gen.cost_quadratic < 0.0) invalid(tag + " has a concave cost");
        if (!(gen.epsilon > 0.0 && gen.epsilon <= 0.5)) invalid(tag + " epsilon outside (0, 0.5]");
    }
    if (!is_connected(n, lines_)) {
        throw Error(ErrorCode::SingularNetwork, "in-service lines do not connect every bus");
    }
}

int Grid::bus_index(int bus_number) const {
    const auto it = index_of_bus_.find(bus_number);
    if (it == index_of_bus_.end()) {
        throw Error(ErrorCode::UnknownBus, "bus " + std::to_string(bus_number) + " is not in the case");
    }
    return it->second;
}

std::optional<int> Grid::generator_at(int bus_index) const {
    const int g = generator_of_bus_.at(static_cast<std::size_t>(bus_index));
    if (g < 0) return std::nullopt;
    return g;
}

std::optional<int> Grid::find_line(int from_number, int to_number) const {
    const auto from = index_of_bus_.find(from_number);
    const auto to = index_of_bus_.find(to_number);
    if (from == index_of_bus_.end() || to == index_of_bus_.end()) return std::nullopt;
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        const Line& line = lines_[k];
        if ((line.from_bus == from->second && line.to_bus == to->second) ||
            (line.from_bus == to->second && line.to_bus == from->second)) {
            return static_cast<int>(k);
        }
    }
    return std::nullopt;
}

std::vector<int> Grid::flexible_lines() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        if (lines_[k].flexible()) out.push_back(static_cast<int>(k));
    }
    return out;
}

Vector Grid::rated_susceptance() const {
    Vector b(n_lines());
    for (int k = 0; k < n_lines(); ++k) b[k] = lines_[k].susceptance_rated;
    return b;
}

Vector Grid::susceptance_lower() const {
    Vector b(n_lines());
    for (int k = 0; k < n_lines(); ++k) b[k] = lines_[k].b_min();
    return b;
}

Vector Grid::susceptance_upper() const {
    Vector b(n_lines());
    for (int k = 0; k < n_lines(); ++k) b[k] = lines_[k].b_max();
    return b;
}

Grid Grid::without_flexibility() const {
    std::vector<Line> fixed = lines_;
    for (Line& line : fixed) line.flexibility.reset();
    return Grid(base_mva_, bus_numbers_, std::move(fixed), generators_, load_, renewable_forecast_);
}

Grid Grid::with_flexibility_degree(double degree) const {
    std::vector<Line> adjusted = lines_;
    for (Line& line : adjusted) {
        if (line.flexibility) line.flexibility->degree = degree;
    }
    return Grid(base_mva_, bus_numbers_, std::move(adjusted), generators_, load_,
                renewable_forecast_);
}

Matrix incidence_matrix(const Grid& grid) {
    Matrix e = Matrix::Zero(grid.n_buses(), grid.n_lines());
    for (int k = 0; k < grid.n_lines(); ++k) {
        e(grid.line(k).from_bus, k) = 1.0;
        e(grid.line(k).to_bus, k) = -1.0;
    }
    return e;
}

UncertaintyModel::UncertaintyModel(int n_buses)
    : covariance_(Matrix::Zero(n_buses, n_buses)),
      renewable_(static_cast<std::size_t>(n_buses), false) {}

UncertaintyModel::UncertaintyModel(Matrix covariance, std::vector<bool> renewable)
    : covariance_(std::move(covariance)), renewable_(std::move(renewable)) {
    const auto n = covariance_.rows();
    if (covariance_.cols() != n || static_cast<Eigen::Index>(renewable_.size()) != n) {
        throw Error(ErrorCode::InvalidGrid, "covariance must be square with one flag per bus");
    }
    const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
    if (n > 0 && (covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error(ErrorCode::InvalidGrid, "covariance is not symmetric");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (renewable_[i]) continue;
        if (!covariance_.row(i).isZero(0.0) || !covariance_.col(i).isZero(0.0)) {
            throw Error(ErrorCode::InvalidGrid,
                        "covariance has entries on bus index " + std::to_string(i) +
                            " which carries no renewable");
        }
    }
    if (n > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
            throw Error(ErrorCode::InvalidGrid, "covariance is not positive semidefinite");
        }
    }
}

double UncertaintyModel::s_sigma() const {
    const double total = covariance_.sum();
    return total > 0.0 ? std::sqrt(total) : 0.0;
}

namespace {

[[noreturn]] void bad_decision(const std::string& what) {
    throw Error(ErrorCode::InvalidDecision, what);
}

}  // namespace

DispatchDecision::DispatchDecision(const Grid& grid, Vector p_base, Vector alpha, Vector susceptance)
    : p_base_(std::move(p_base)), alpha_(std::move(alpha)), susceptance_(std::move(susceptance)) {
    const int n = grid.n_buses();
    if (p_base_.size() != n || alpha_.size() != n) bad_decision("p_base/alpha must be bus-indexed");
    if (susceptance_.size() != grid.n_lines()) bad_decision("susceptance must be line-indexed");
    for (int i = 0; i < n; ++i) {
        if (grid.generator_at(i)) continue;
        if (p_base_[i] != 0.0 || alpha_[i] != 0.0) {
            bad_decision("bus " + std::to_string(grid.bus_number(i)) +
                         " has no generator but nonzero output or participation");
        }
    }
    if (std::abs(alpha_.sum() - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "participation factors sum to " << alpha_.sum() << ", not 1";
        throw Error(ErrorCode::NotNormalized, msg.str());
    }
    for (int k = 0; k < grid.n_lines(); ++k) {
        const Line& line = grid.line(k);
        const double b = susceptance_[k];
        const double tol = 1e-9 * line.susceptance_rated;
        if (b < line.b_min() - tol || b > line.b_max() + tol) {
            bad_decision("susceptance of line " + std::to_string(k) + " outside its bounds");
        }
    }
}

Vector DispatchDecision::generator_output(const Grid& grid) const {
    Vector out(grid.n_generators());
    for (int g = 0; g < grid.n_generators(); ++g) out[g] = p_base_[grid.generators()[g].bus];
    return out;
}

Vector DispatchDecision::generator_participation(const Grid& grid) const {
    Vector out(grid.n_generators());
    for (int g = 0; g < grid.n_generators(); ++g) out[g] = alpha_[grid.generators()[g].bus];
    return out;
}

Vector DispatchDecision::base_injection(const Grid& grid) const {
    return p_base_ + grid.renewable_forecast() - grid.load();
}

DispatchDecision DispatchDecision::from_generators(const Grid& grid, const Vector& output,
                                                   const Vector& participation,
                                                   Vector susceptance) {
    Vector p = Vector::Zero(grid.n_buses());
    Vector a = Vector::Zero(grid.n_buses());
    for (int g = 0; g < grid.n_generators(); ++g) {
        p[grid.generators()[g].bus] = output[g];
        a[grid.generators()[g].bus] = participation[g];
    }
    return DispatchDecision(grid, std::move(p), std::move(a), std::move(susceptance));
}

}  // namespace gridflex
