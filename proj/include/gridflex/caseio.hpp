#pragma once

// MATPOWER case ingestion and the scenario/algorithm overlay.

#include "gridflex/netmodel.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridflex {

struct RawBus {
    int number = 0;
    int type = 1;
    double pd = 0.0;  // MW
};

struct RawGen {
    int bus = 0;
    double pmax = 0.0;  // MW
    double pmin = 0.0;  // MW
    int status = 1;
};

struct RawBranch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double rate_a = 0.0;  // MW, 0 = unlimited
    double ratio = 0.0;   // 0 = no transformer
    int status = 1;
};

/// Polynomial gencost row; coefficients highest degree first.
struct RawGenCost {
    std::vector<double> coefficients;

    double quadratic() const;
    double linear() const;
};

struct RawCase {
    double base_mva = 100.0;
    std::vector<RawBus> buses;
    std::vector<RawGen> gens;
    std::vector<RawBranch> branches;
    std::vector<RawGenCost> gencost;  ///< empty when the case has no gencost matrix
};

/// Parses the subset of MATPOWER case syntax used here (baseMVA, bus, gen, branch,
/// gencost). Throws MalformedCase with a line:column position or UnsupportedFeature.
RawCase parse_matpower(std::string_view text);
RawCase load_matpower(const std::filesystem::path& path);

struct FlexibleLineSpec {
    int from = 0;
    int to = 0;
    double degree = 0.0;
};

struct CapacityOverride {
    int from = 0;
    int to = 0;
    double megawatts = 0.0;
};

struct CostOverride {
    int bus = 0;
    double quadratic = 0.0;  ///< $/MW^2h
    double linear = 0.0;     ///< $/MWh
};

struct ScenarioConfig {
    double load_scale = 1.0;
    double gen_capacity_scale = 1.0;
    std::vector<int> renewable_buses;
    std::vector<double> renewable_variance;     ///< p.u.^2; one per bus or a single shared value
    std::vector<double> renewable_forecast_mw;  ///< empty = loads already net of renewables
    /// Applies to the first in-service branch matching (from, to) in file order.
    std::vector<FlexibleLineSpec> flexible_lines;
    std::optional<double> default_capacity_mw;  ///< replaces case ratings when set
    std::vector<CapacityOverride> capacity_overrides;
    double epsilon_gen = 0.01;
    double epsilon_line = 0.01;
    std::optional<double> quantile_override;  ///< fixes c_i = c_ij directly
    std::vector<CostOverride> cost_overrides;
    bool tap_in_susceptance = true;         ///< b = 1/(x*tap) when true, 1/x otherwise
    bool participation_nonnegative = true;  ///< adds alpha >= 0 to the dispatch subproblem
};

struct AlgorithmConfig {
    double delta = 1e-4;             ///< |delta b| convergence threshold (p.u.)
    double beta = 0.1;               ///< trust-region reduction factor
    double trust_region_frac = 0.3;  ///< initial trust region as a fraction of b_rated
    int max_outer_iterations = 100;
    int max_shrink_per_iteration = 20;
    double dual_binding_tol = 1e-6;    ///< relative to the objective's cost scale
    double primal_binding_tol = 1e-6;  ///< p.u. slack
    double socp_tolerance = 1e-9;
};

struct StudyConfig {
    ScenarioConfig scenario;
    AlgorithmConfig algorithm;
};

/// Parses the [scenario]/[algorithm] key-value document. Throws ConfigParse with
/// a line:column position on syntax errors, unknown keys or invalid values.
StudyConfig parse_study_config(std::string_view text);
StudyConfig load_study_config(const std::filesystem::path& path);

struct CaseModel {
    Grid grid;
    UncertaintyModel uncertainty;
};

/// Builds the per-unit grid and covariance for a scenario. Throws UnknownBus or
/// UnknownLine for references the case does not contain.
CaseModel apply_scenario(const RawCase& raw, const ScenarioConfig& scenario);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace gridflex
