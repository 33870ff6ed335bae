#pragma once

// Network description, per-unit helpers and the dispatch decision triple.
//
// Conventions:
//  - buses and lines use dense 0-based indices; the external bus numbers from
//    the case file are kept for reporting and lookup
//  - powers, susceptances and covariances are per-unit on base_mva
//  - generator cost coefficients are MATPOWER-native ($/MW^2h, $/MWh)
//  - line orientation is from_bus -> to_bus; flow signs follow it

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace gridflex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

constexpr double kUnlimited = std::numeric_limits<double>::infinity();

inline double to_megawatts(double per_unit, double base_mva) { return per_unit * base_mva; }
inline double from_megawatts(double megawatts, double base_mva) { return megawatts / base_mva; }

struct Flexibility {
    double degree = 0.0;  ///< d in [0, 1)
};

struct Line {
    int from_bus = 0;
    int to_bus = 0;
    double susceptance_rated = 0.0;
    std::optional<Flexibility> flexibility;
    double capacity = kUnlimited;  ///< f_max (p.u.); infinite means unconstrained
    double epsilon = 0.01;
    double quantile = 0.0;  ///< c_ij used in the deterministic reformulation

    bool flexible() const { return flexibility.has_value(); }
    /// b_rated/(1+d), or b_rated for a fixed line.
    double b_min() const;
    /// b_rated/(1-d), or b_rated for a fixed line.
    double b_max() const;
};

struct Generator {
    int bus = 0;
    double p_min = 0.0;  ///< p.u.
    double p_max = 0.0;  ///< p.u.
    double cost_quadratic = 0.0;  ///< $/MW^2h
    double cost_linear = 0.0;     ///< $/MWh
    double epsilon = 0.01;
    double quantile = 0.0;  ///< c_i

    /// Coefficients of cost(P) = a2*P^2 + a1*P with P in p.u. and cost in $/h.
    double quadratic_pu(double base_mva) const { return cost_quadratic * base_mva * base_mva; }
    double linear_pu(double base_mva) const { return cost_linear * base_mva; }
};

/// Immutable, validated transmission network.
class Grid {
public:
    Grid(double base_mva, std::vector<int> bus_numbers, std::vector<Line> lines,
         std::vector<Generator> generators, Vector load, Vector renewable_forecast);

    double base_mva() const { return base_mva_; }
    int n_buses() const { return static_cast<int>(bus_numbers_.size()); }
    int n_lines() const { return static_cast<int>(lines_.size()); }
    int n_generators() const { return static_cast<int>(generators_.size()); }

    const std::vector<Line>& lines() const { return lines_; }
    const Line& line(int k) const { return lines_.at(static_cast<std::size_t>(k)); }
    const std::vector<Generator>& generators() const { return generators_; }
    const Vector& load() const { return load_; }
    const Vector& renewable_forecast() const { return renewable_forecast_; }
    const std::vector<int>& bus_numbers() const { return bus_numbers_; }

    int bus_number(int index) const { return bus_numbers_.at(static_cast<std::size_t>(index)); }
    /// Dense index of an external bus number; throws UnknownBus.
    int bus_index(int bus_number) const;
    /// Generator index attached to a bus, if any.
    std::optional<int> generator_at(int bus_index) const;
    /// First line (in file order) joining the two external bus numbers, either orientation.
    std::optional<int> find_line(int from_number, int to_number) const;

    std::vector<int> flexible_lines() const;
    Vector rated_susceptance() const;
    Vector susceptance_lower() const;
    Vector susceptance_upper() const;

    /// Copy of this grid with every line fixed at its rated susceptance.
    Grid without_flexibility() const;
    /// Copy with a new degree of flexibility on the currently flexible lines.
    Grid with_flexibility_degree(double degree) const;

    double to_megawatts(double per_unit) const { return per_unit * base_mva_; }
    double from_megawatts(double megawatts) const { return megawatts / base_mva_; }

private:
    double base_mva_;
    std::vector<int> bus_numbers_;
    std::vector<Line> lines_;
    std::vector<Generator> generators_;
    Vector load_;
    Vector renewable_forecast_;
    std::unordered_map<int, int> index_of_bus_;
    std::vector<int> generator_of_bus_;
};

/// Signed n x l incidence matrix: +1 at from_bus, -1 at to_bus.
Matrix incidence_matrix(const Grid& grid);

/// True when the lines connect every bus (union-find).
bool is_connected(int n_buses, std::span<const Line> lines);

/// Renewable forecast-error covariance; zero rows/columns off the renewable buses.
class UncertaintyModel {
public:
    /// Zero covariance (deterministic dispatch).
    explicit UncertaintyModel(int n_buses);
    UncertaintyModel(Matrix covariance, std::vector<bool> renewable);

    const Matrix& covariance() const { return covariance_; }
    const std::vector<bool>& renewable() const { return renewable_; }
    int n_buses() const { return static_cast<int>(covariance_.rows()); }
    /// sqrt(1' Sigma 1)
    double s_sigma() const;
    bool is_zero() const { return covariance_.isZero(0.0); }

private:
    Matrix covariance_;
    std::vector<bool> renewable_;
};

/// Decision triple (base generation, participation factors, susceptances).
/// p_base and alpha are bus-indexed and vanish off the generator buses.
class DispatchDecision {
public:
    DispatchDecision(const Grid& grid, Vector p_base, Vector alpha, Vector susceptance);

    const Vector& p_base() const { return p_base_; }
    const Vector& alpha() const { return alpha_; }
    const Vector& susceptance() const { return susceptance_; }

    /// Per-generator views in generator order.
    Vector generator_output(const Grid& grid) const;
    Vector generator_participation(const Grid& grid) const;

    /// Net base-case injection P_g + P_w - P_d (p.u.).
    Vector base_injection(const Grid& grid) const;

    static DispatchDecision from_generators(const Grid& grid, const Vector& output,
                                            const Vector& participation, Vector susceptance);

private:
    Vector p_base_;
    Vector alpha_;
    Vector susceptance_;
};

}  // namespace gridflex
