#include "gridflex/report.hpp"

#include "gridflex/ccore.hpp"
#include "gridflex/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gridflex {

using nlohmann::json;

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << hash;
    return out.str();
}

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vector(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) {
        throw Error(ErrorCode::ConfigParse, std::string("solution report lacks array '") + key + "'");
    }
    const auto values = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Infinite capacities are written as null.
json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json line_id(const Grid& grid, int k) {
    return {{"index", k},
            {"from", grid.bus_number(grid.line(k).from_bus)},
            {"to", grid.bus_number(grid.line(k).to_bus)}};
}

std::string format(double x) {
    if (!std::isfinite(x)) return "";
    std::ostringstream out;
    out << std::setprecision(10) << x;
    return out.str();
}

json generators_json(const Grid& grid, const SubproblemSolution& final,
                     const SubproblemSolution& initial) {
    json out = json::array();
    const double base = grid.base_mva();
    for (const Generator& gen : grid.generators()) {
        out.push_back({{"bus", grid.bus_number(gen.bus)},
                       {"p_base_mw", final.p_base[gen.bus] * base},
                       {"p_base_pu", final.p_base[gen.bus]},
                       {"alpha", final.alpha[gen.bus]},
                       {"initial_p_base_mw", initial.p_base[gen.bus] * base},
                       {"initial_alpha", initial.alpha[gen.bus]},
                       {"p_min_mw", gen.p_min * base},
                       {"p_min_pu", gen.p_min},
                       {"p_max_mw", gen.p_max * base},
                       {"p_max_pu", gen.p_max}});
    }
    return out;
}

json flexible_json(const Grid& grid, const Vector& b) {
    json out = json::array();
    for (int k : grid.flexible_lines()) {
        const Line& line = grid.line(k);
        json row = line_id(grid, k);
        row["degree"] = line.flexibility->degree;
        row["b_rated_pu"] = line.susceptance_rated;
        row["b_min_pu"] = line.b_min();
        row["b_max_pu"] = line.b_max();
        row["b_pu"] = b[k];
        out.push_back(row);
    }
    return out;
}

json lines_json(const Grid& grid, const SubproblemSolution& sol) {
    json out = json::array();
    const double base = grid.base_mva();
    for (int k = 0; k < grid.n_lines(); ++k) {
        const Line& line = grid.line(k);
        json row = line_id(grid, k);
        row["flow_mw"] = sol.flow_mean[k] * base;
        row["flow_pu"] = sol.flow_mean[k];
        row["flow_std_mw"] = sol.flow_std[k] * base;
        row["flow_std_pu"] = sol.flow_std[k];
        row["capacity_mw"] = finite_or_null(line.capacity * base);
        row["equivalent_capacity_mw"] =
            finite_or_null((line.capacity - line.quantile * sol.flow_std[k]) * base);
        row["lambda_plus"] = sol.lambda_plus[k];
        row["lambda_minus"] = sol.lambda_minus[k];
        out.push_back(row);
    }
    return out;
}

json binding_json(const Grid& grid, const std::vector<int>& lines) {
    json out = json::array();
    for (int k : lines) out.push_back(line_id(grid, k));
    return out;
}

json trajectory_json(const Grid& grid, const SolveReport& report) {
    json out = json::array();
    const std::vector<int> flexible = grid.flexible_lines();
    for (const IterationRecord& r : report.trajectory) {
        json duals = json::array();
        for (int k = 0; k < grid.n_lines(); ++k) {
            if (r.lambda_plus[k] == 0.0 && r.lambda_minus[k] == 0.0) continue;
            json d = line_id(grid, k);
            d["lambda_plus"] = r.lambda_plus[k];
            d["lambda_minus"] = r.lambda_minus[k];
            duals.push_back(d);
        }
        json b = json::array();
        json db = json::array();
        json tr = json::array();
        for (int k : flexible) {
            b.push_back(r.susceptance[k]);
            db.push_back(r.delta_b[k]);
            tr.push_back(r.trust_region[k]);
        }
        out.push_back({{"index", r.index},
                       {"cost_usd_per_h", r.cost},
                       {"accepted", r.accepted},
                       {"shrink_count", r.shrink_count},
                       {"congested", r.congested},
                       {"duals", duals},
                       {"b_pu", b},
                       {"delta_b_pu", db},
                       {"trust_region_pu", tr}});
    }
    return out;
}

}  // namespace

json config_json(const StudyConfig& config) {
    const ScenarioConfig& s = config.scenario;
    const AlgorithmConfig& a = config.algorithm;
    json flex = json::array();
    for (const auto& f : s.flexible_lines) flex.push_back({f.from, f.to, f.degree});
    json caps = json::array();
    for (const auto& c : s.capacity_overrides) caps.push_back({c.from, c.to, c.megawatts});
    json costs = json::array();
    for (const auto& c : s.cost_overrides) costs.push_back({c.bus, c.quadratic, c.linear});
    return {{"scenario",
             {{"load_scale", s.load_scale},
              {"gen_capacity_scale", s.gen_capacity_scale},
              {"renewable_buses", s.renewable_buses},
              {"renewable_variance", s.renewable_variance},
              {"renewable_forecast_mw", s.renewable_forecast_mw},
              {"flexible_lines", flex},
              {"default_capacity_mw",
               s.default_capacity_mw ? json(*s.default_capacity_mw) : json(nullptr)},
              {"capacity_overrides", caps},
              {"epsilon_gen", s.epsilon_gen},
              {"epsilon_line", s.epsilon_line},
              {"quantile_override", s.quantile_override ? json(*s.quantile_override) : json(nullptr)},
              {"cost_overrides", costs},
              {"tap_in_susceptance", s.tap_in_susceptance},
              {"participation_nonnegative", s.participation_nonnegative}}},
            {"algorithm",
             {{"delta", a.delta},
              {"beta", a.beta},
              {"trust_region_frac", a.trust_region_frac},
              {"max_outer_iterations", a.max_outer_iterations},
              {"max_shrink_per_iteration", a.max_shrink_per_iteration},
              {"dual_binding_tol", a.dual_binding_tol},
              {"primal_binding_tol", a.primal_binding_tol},
              {"socp_tolerance", a.socp_tolerance}}}};
}

json metadata_json(const RunMetadata& meta) {
    return {{"command", meta.command},
            {"case", meta.case_path.string()},
            {"scenario", meta.scenario_path.string()},
            {"scenario_digest", meta.scenario_digest},
            {"mode", meta.mode},
            {"flexibility", meta.flexibility},
            {"config", config_json(meta.config)},
            {"versions",
             {{"gridflex", "0.1.0"},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)}}}};
}

json solve_report_json(const Grid& grid, const SolveReport& report, const RunMetadata& meta) {
    const SubproblemSolution& sol = report.final;
    json doc;
    doc["schema"] = "gridflex-report";
    doc["schema_version"] = kReportSchemaVersion;
    doc["kind"] = "solve";
    doc["metadata"] = metadata_json(meta);
    doc["base_mva"] = grid.base_mva();
    doc["termination"] = to_string(report.termination);
    doc["accepted_iterations"] = report.accepted_iterations;
    doc["wall_time_s"] = report.wall_time_s;
    doc["warnings"] = report.warnings;
    doc["cost"] = {{"final_usd_per_h", sol.objective},
                   {"initial_usd_per_h", report.initial.objective},
                   {"reduction_usd_per_h", report.initial.objective - sol.objective}};
    doc["generators"] = generators_json(grid, sol, report.initial);
    doc["flexible_lines"] = flexible_json(grid, report.susceptance);
    doc["lines"] = lines_json(grid, sol);
    doc["binding_plus"] = binding_json(grid, sol.binding_plus);
    doc["binding_minus"] = binding_json(grid, sol.binding_minus);
    doc["trajectory"] = trajectory_json(grid, report);
    doc["solution"] = {{"p_base_pu", vector_json(sol.p_base)},
                       {"alpha", vector_json(sol.alpha)},
                       {"susceptance_pu", vector_json(report.susceptance)}};
    return doc;
}

json study_report_json(const Grid& grid, const FourSolutionStudy& study, const RunMetadata& meta) {
    json doc;
    doc["schema"] = "gridflex-report";
    doc["schema_version"] = kReportSchemaVersion;
    doc["kind"] = "study";
    doc["metadata"] = metadata_json(meta);
    doc["base_mva"] = grid.base_mva();
    doc["costs_usd_per_h"] = {{"S1", study.s1}, {"S2", study.s2}, {"S3", study.s3}, {"S4", study.s4}};
    doc["differences_usd_per_h"] = json::array({
        {{"label", "S1-S3"}, {"meaning", "cost of uncertainty with network flexibility"},
         {"value", study.uncertainty_cost_flexible()}},
        {{"label", "S2-S4"}, {"meaning", "cost of uncertainty without network flexibility"},
         {"value", study.uncertainty_cost_fixed()}},
        {{"label", "S4-S3"}, {"meaning", "cost of network non-flexibility in ED"},
         {"value", study.flexibility_value_ed()}},
        {{"label", "S2-S1"}, {"meaning", "cost of network non-flexibility in CCED"},
         {"value", study.flexibility_value_cced()}},
    });
    doc["identical_pairs"] = {{"S1_equals_S3", study.s1 == study.s3},
                              {"S2_equals_S4", study.s2 == study.s4}};
    RunMetadata cced_meta = meta;
    cced_meta.mode = "cced";
    RunMetadata ed_meta = meta;
    ed_meta.mode = "ed";
    doc["cced"] = solve_report_json(grid, study.cced, cced_meta);
    doc["ed"] = solve_report_json(grid, study.ed, ed_meta);
    return doc;
}

json validation_report_json(const Grid& grid, const ValidationReport& report,
                            const RunMetadata& meta, const std::string& solution_path) {
    json rates = json::array();
    for (const RateEstimate& r : report.rates) {
        json row = {{"kind", to_string(r.kind)},
                    {"epsilon", r.epsilon},
                    {"violations", r.violations},
                    {"rate", r.rate},
                    {"wilson99", {r.wilson99.lower, r.wilson99.upper}},
                    {"band3sigma", {r.band.lower, r.band.upper}},
                    {"pass", r.pass}};
        if (r.kind == ConstraintKind::GenerationUpper || r.kind == ConstraintKind::GenerationLower) {
            row["bus"] = grid.bus_number(grid.generators()[r.index].bus);
        } else {
            row["line"] = line_id(grid, r.index);
        }
        rates.push_back(row);
    }
    json doc;
    doc["schema"] = "gridflex-report";
    doc["schema_version"] = kReportSchemaVersion;
    doc["kind"] = "validation";
    doc["metadata"] = metadata_json(meta);
    doc["solution"] = solution_path;
    doc["samples"] = report.samples;
    doc["seed"] = report.seed;
    doc["all_pass"] = report.all_pass;
    doc["balanced"] = report.balanced;
    doc["balance_residual_mw"] = report.balance_residual * grid.base_mva();
    doc["participation_residual"] = report.participation_residual;
    doc["max_rate"] = report.max_rate();
    doc["cost_usd_per_h"] = {{"mean", report.cost.mean},
                             {"std_error", report.cost.std_error},
                             {"ci99", {report.cost.ci99.lower, report.cost.ci99.upper}},
                             {"analytic", report.analytic_cost}};
    doc["rates"] = rates;
    return doc;
}

json sweep_report_json(const std::vector<SweepPoint>& points, const RunMetadata& meta) {
    json rows = json::array();
    for (const SweepPoint& p : points) {
        rows.push_back({{"degree", p.degree},
                        {"cost_usd_per_h", p.cost},
                        {"initial_cost_usd_per_h", p.initial_cost},
                        {"termination", p.termination},
                        {"accepted_iterations", p.accepted_iterations}});
    }
    json doc;
    doc["schema"] = "gridflex-report";
    doc["schema_version"] = kReportSchemaVersion;
    doc["kind"] = "sweep";
    doc["metadata"] = metadata_json(meta);
    doc["points"] = rows;
    return doc;
}

StoredSolution read_solution(const json& report) {
    if (!report.is_object() || !report.contains("solution") || !report.contains("metadata")) {
        throw Error(ErrorCode::ConfigParse, "not a solve report (missing 'solution' or 'metadata')");
    }
    StoredSolution s;
    try {
        const json& meta = report.at("metadata");
        s.case_path = meta.at("case").get<std::string>();
        s.scenario_path = meta.at("scenario").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigParse, std::string("bad report metadata: ") + e.what());
    }
    const json& sol = report.at("solution");
    s.p_base = json_vector(sol, "p_base_pu");
    s.alpha = json_vector(sol, "alpha");
    s.susceptance = json_vector(sol, "susceptance_pu");
    return s;
}

std::string CsvTable::render() const {
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << "\n";
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    return out.str();
}

CsvTable generators_table(const Grid& grid, const SolveReport& report) {
    CsvTable t{{"bus", "p_base_mw", "alpha", "initial_p_base_mw", "initial_alpha"}, {}};
    const double base = grid.base_mva();
    for (const Generator& gen : grid.generators()) {
        t.rows.push_back({std::to_string(grid.bus_number(gen.bus)),
                          format(report.final.p_base[gen.bus] * base), format(report.final.alpha[gen.bus]),
                          format(report.initial.p_base[gen.bus] * base),
                          format(report.initial.alpha[gen.bus])});
    }
    return t;
}

CsvTable flexible_lines_table(const Grid& grid, const SolveReport& report) {
    CsvTable t{{"from", "to", "b_rated_pu", "b_min_pu", "b_max_pu", "b_pu"}, {}};
    for (int k : grid.flexible_lines()) {
        const Line& line = grid.line(k);
        t.rows.push_back({std::to_string(grid.bus_number(line.from_bus)),
                          std::to_string(grid.bus_number(line.to_bus)), format(line.susceptance_rated),
                          format(line.b_min()), format(line.b_max()), format(report.susceptance[k])});
    }
    return t;
}

CsvTable trajectory_table(const Grid& grid, const SolveReport& report) {
    CsvTable t{{"index", "cost_usd_per_h", "accepted", "shrink_count", "congested"}, {}};
    // one dual column pair per line that is ever binding
    std::vector<int> lines;
    for (int k = 0; k < grid.n_lines(); ++k) {
        for (const IterationRecord& r : report.trajectory) {
            if (r.lambda_plus[k] != 0.0 || r.lambda_minus[k] != 0.0) {
                lines.push_back(k);
                break;
            }
        }
    }
    for (int k : lines) {
        const std::string id = std::to_string(grid.bus_number(grid.line(k).from_bus)) + "_" +
                               std::to_string(grid.bus_number(grid.line(k).to_bus));
        t.header.push_back("lambda_plus_" + id);
        t.header.push_back("lambda_minus_" + id);
    }
    for (const IterationRecord& r : report.trajectory) {
        std::vector<std::string> row{std::to_string(r.index), format(r.cost), r.accepted ? "1" : "0",
                                     std::to_string(r.shrink_count), r.congested ? "1" : "0"};
        for (int k : lines) {
            row.push_back(format(r.lambda_plus[k]));
            row.push_back(format(r.lambda_minus[k]));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable costs_table(const FourSolutionStudy& study) {
    return CsvTable{{"label", "value_usd_per_h"},
                    {{"S1", format(study.s1)},
                     {"S2", format(study.s2)},
                     {"S3", format(study.s3)},
                     {"S4", format(study.s4)},
                     {"S1-S3", format(study.uncertainty_cost_flexible())},
                     {"S2-S4", format(study.uncertainty_cost_fixed())},
                     {"S4-S3", format(study.flexibility_value_ed())},
                     {"S2-S1", format(study.flexibility_value_cced())}}};
}

CsvTable sweep_table(const std::vector<SweepPoint>& points) {
    CsvTable t{{"degree", "cost_usd_per_h", "initial_cost_usd_per_h", "termination",
                "accepted_iterations"},
               {}};
    for (const SweepPoint& p : points) {
        t.rows.push_back({format(p.degree), format(p.cost), format(p.initial_cost), p.termination,
                          std::to_string(p.accepted_iterations)});
    }
    return t;
}

CsvTable rates_table(const Grid& grid, const ValidationReport& report) {
    CsvTable t{{"kind", "element", "epsilon", "violations", "rate", "wilson99_low", "wilson99_high", "pass"},
               {}};
    for (const RateEstimate& r : report.rates) {
        std::string element;
        if (r.kind == ConstraintKind::GenerationUpper || r.kind == ConstraintKind::GenerationLower) {
            element = std::to_string(grid.bus_number(grid.generators()[r.index].bus));
        } else {
            element = std::to_string(grid.bus_number(grid.line(r.index).from_bus)) + "-" +
                      std::to_string(grid.bus_number(grid.line(r.index).to_bus));
        }
        t.rows.push_back({to_string(r.kind), element, format(r.epsilon), std::to_string(r.violations),
                          format(r.rate), format(r.wilson99.lower), format(r.wilson99.upper),
                          r.pass ? "1" : "0"});
    }
    return t;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace gridflex
