#include "gridflex/caseio.hpp"

#include "gridflex/ccore.hpp"
#include "gridflex/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

namespace gridflex {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double RawGenCost::quadratic() const {
    const auto n = coefficients.size();
    return n >= 3 ? coefficients[n - 3] : 0.0;
}

double RawGenCost::linear() const {
    const auto n = coefficients.size();
    return n >= 2 ? coefficients[n - 2] : 0.0;
}

// ---------------------------------------------------------------------------
// Shared character cursor with line/column tracking.

namespace {

struct Position {
    int line = 1;
    int column = 1;
};

std::string where(Position p) {
    return std::to_string(p.line) + ":" + std::to_string(p.column);
}

class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    bool done() const { return i_ >= text_.size(); }
    char peek(std::size_t ahead = 0) const {
        return i_ + ahead < text_.size() ? text_[i_ + ahead] : '\0';
    }
    char get() {
        const char c = text_[i_++];
        if (c == '\n') {
            ++pos_.line;
            pos_.column = 1;
        } else {
            ++pos_.column;
        }
        return c;
    }
    Position position() const { return pos_; }
    std::size_t offset() const { return i_; }
    std::string_view slice(std::size_t from) const { return text_.substr(from, i_ - from); }

private:
    std::string_view text_;
    std::size_t i_ = 0;
    Position pos_;
};

bool parse_double(std::string_view token, double& out) {
    // from_chars for double is available in libstdc++ 11.
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec == std::errc() && ptr == last) return true;
    if (token == "Inf" || token == "inf") {
        out = std::numeric_limits<double>::infinity();
        return true;
    }
    if (token == "-Inf" || token == "-inf") {
        out = -std::numeric_limits<double>::infinity();
        return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// MATPOWER

[[noreturn]] void malformed(Position p, const std::string& what) {
    throw Error(ErrorCode::MalformedCase, where(p) + ": " + what);
}

struct MatrixValue {
    std::vector<std::vector<double>> rows;
    std::vector<Position> row_starts;
    Position start;
};

void skip_matlab_space(Cursor& cur, bool stop_at_newline) {
    while (!cur.done()) {
        const char c = cur.peek();
        if (c == '%') {
            while (!cur.done() && cur.peek() != '\n') cur.get();
        } else if (c == '.' && cur.peek(1) == '.' && cur.peek(2) == '.') {
            // continuation: swallow to end of line including the newline
            while (!cur.done() && cur.peek() != '\n') cur.get();
            if (!cur.done()) cur.get();
        } else if (c == '\n' && stop_at_newline) {
            return;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            cur.get();
        } else {
            return;
        }
    }
}

MatrixValue read_matrix(Cursor& cur) {
    MatrixValue m;
    m.start = cur.position();
    cur.get();  // '['
    std::vector<double> row;
    Position row_start = m.start;
    auto end_row = [&] {
        if (!row.empty()) {
            m.rows.push_back(std::move(row));
            m.row_starts.push_back(row_start);
        }
        row.clear();
    };
    while (true) {
        skip_matlab_space(cur, true);
        if (cur.done()) malformed(m.start, "unterminated matrix");
        const char c = cur.peek();
        if (c == ']') {
            cur.get();
            end_row();
            break;
        }
        if (c == ';' || c == '\n') {
            cur.get();
            end_row();
            continue;
        }
        if (c == ',') {
            cur.get();
            continue;
        }
        const Position at = cur.position();
        const std::size_t from = cur.offset();
        while (!cur.done()) {
            const char d = cur.peek();
            if (std::isspace(static_cast<unsigned char>(d)) || d == ',' || d == ';' || d == ']' ||
                d == '%') {
                break;
            }
            cur.get();
        }
        double v = 0.0;
        if (!parse_double(cur.slice(from), v)) {
            malformed(at, "expected a number, found '" + std::string(cur.slice(from)) + "'");
        }
        if (row.empty()) row_start = at;
        row.push_back(v);
    }
    if (!m.rows.empty()) {
        const std::size_t width = m.rows.front().size();
        for (std::size_t r = 0; r < m.rows.size(); ++r) {
            if (m.rows[r].size() != width) {
                malformed(m.row_starts[r], "ragged matrix: row " + std::to_string(r + 1) + " has " +
                                       std::to_string(m.rows[r].size()) + " entries, expected " +
                                       std::to_string(width));
            }
        }
    }
    return m;
}

using MatlabValue = std::variant<double, MatrixValue, std::string>;

std::map<std::string, std::pair<MatlabValue, Position>> read_assignments(std::string_view text) {
    std::map<std::string, std::pair<MatlabValue, Position>> out;
    Cursor cur(text);
    while (true) {
        skip_matlab_space(cur, false);
        if (cur.done()) break;
        const Position at = cur.position();
        const std::size_t from = cur.offset();
        while (!cur.done()) {
            const char c = cur.peek();
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) break;
            cur.get();
        }
        const std::string name(cur.slice(from));
        if (name.empty()) malformed(at, std::string("unexpected character '") + cur.peek() + "'");
        if (name == "function") {
            while (!cur.done() && cur.peek() != '\n') cur.get();
            continue;
        }
        skip_matlab_space(cur, true);
        if (cur.peek() != '=') malformed(cur.position(), "expected '=' after " + name);
        cur.get();
        skip_matlab_space(cur, false);
        MatlabValue value;
        const char c = cur.peek();
        if (c == '[') {
            value = read_matrix(cur);
        } else if (c == '\'' || c == '"') {
            const char quote = cur.get();
            const std::size_t s = cur.offset();
            while (!cur.done() && cur.peek() != quote && cur.peek() != '\n') cur.get();
            if (cur.peek() != quote) malformed(at, "unterminated string in " + name);
            value = std::string(cur.slice(s));
            cur.get();
        } else if (c == '{') {
            // cell arrays (bus names) are skipped
            int depth = 0;
            do {
                if (cur.peek() == '{') ++depth;
                if (cur.peek() == '}') --depth;
                cur.get();
            } while (!cur.done() && depth > 0);
            continue;
        } else {
            const Position vat = cur.position();
            const std::size_t s = cur.offset();
            while (!cur.done() && cur.peek() != ';' && cur.peek() != '\n' && cur.peek() != '%') {
                cur.get();
            }
            std::string token(cur.slice(s));
            while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) {
                token.pop_back();
            }
            double v = 0.0;
            if (!parse_double(token, v)) malformed(vat, "expected a scalar for " + name);
            value = v;
        }
        skip_matlab_space(cur, true);
        if (cur.peek() == ';') cur.get();
        out[name] = {std::move(value), at};
    }
    return out;
}

const MatrixValue& require_matrix(
    const std::map<std::string, std::pair<MatlabValue, Position>>& values, const std::string& name,
    std::size_t min_columns) {
    const auto it = values.find(name);
    if (it == values.end()) malformed({1, 1}, "missing matrix " + name);
    const auto* m = std::get_if<MatrixValue>(&it->second.first);
    if (m == nullptr) malformed(it->second.second, name + " is not a matrix");
    if (m->rows.empty()) malformed(m->start, name + " is empty");
    if (m->rows.front().size() < min_columns) {
        malformed(m->start, name + " needs at least " + std::to_string(min_columns) + " columns");
    }
    return *m;
}

int as_int(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

RawCase parse_matpower(std::string_view text) {
    const auto values = read_assignments(text);
    RawCase raw;

    const auto base = values.find("mpc.baseMVA");
    if (base == values.end()) malformed({1, 1}, "missing mpc.baseMVA");
    const auto* base_value = std::get_if<double>(&base->second.first);
    if (base_value == nullptr || !(*base_value > 0.0)) {
        malformed(base->second.second, "baseMVA must be a positive scalar");
    }
    raw.base_mva = *base_value;

    if (values.count("mpc.dcline") != 0) {
        throw Error(ErrorCode::UnsupportedFeature, "DC lines (mpc.dcline) are not modelled");
    }

    for (const auto& row : require_matrix(values, "mpc.bus", 3).rows) {
        RawBus bus{as_int(row[0]), as_int(row[1]), row[2]};
        if (bus.type == 4) {
            throw Error(ErrorCode::UnsupportedFeature,
                        "isolated bus " + std::to_string(bus.number) + " (type 4)");
        }
        raw.buses.push_back(bus);
    }
    const auto& gen = require_matrix(values, "mpc.gen", 10);
    for (const auto& row : gen.rows) {
        raw.gens.push_back(RawGen{as_int(row[0]), row[8], row[9], as_int(row[7])});
    }
    for (const auto& row : require_matrix(values, "mpc.branch", 11).rows) {
        raw.branches.push_back(
            RawBranch{as_int(row[0]), as_int(row[1]), row[2], row[3], row[5], row[8], as_int(row[10])});
    }
    if (values.count("mpc.gencost") != 0) {
        const auto& cost = require_matrix(values, "mpc.gencost", 4);
        if (cost.rows.size() < raw.gens.size()) {
            malformed(cost.start, "gencost has fewer rows than gen");
        }
        for (std::size_t g = 0; g < raw.gens.size(); ++g) {
            const auto& row = cost.rows[g];
            if (as_int(row[0]) != 2) {
                throw Error(ErrorCode::UnsupportedFeature,
                            "gencost row " + std::to_string(g + 1) + " is not polynomial");
            }
            const int ncost = as_int(row[3]);
            if (ncost > 3) {
                throw Error(ErrorCode::UnsupportedFeature,
                            "gencost row " + std::to_string(g + 1) + " has degree above 2");
            }
            if (ncost < 0 || row.size() < 4 + static_cast<std::size_t>(ncost)) {
                malformed(cost.start, "gencost row " + std::to_string(g + 1) + " is too short");
            }
            raw.gencost.push_back(
                RawGenCost{std::vector<double>(row.begin() + 4, row.begin() + 4 + ncost)});
        }
    }
    return raw;
}

RawCase load_matpower(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_matpower(text);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ":" + e.detail());
    }
}

// ---------------------------------------------------------------------------
// Scenario/algorithm document: a small TOML subset.

namespace {

struct ConfigValue {
    std::variant<double, bool, std::string, std::vector<ConfigValue>> data;
    Position at;
};

[[noreturn]] void config_error(Position p, const std::string& what) {
    throw Error(ErrorCode::ConfigParse, where(p) + ": " + what);
}

void skip_config_space(Cursor& cur, bool allow_newlines) {
    while (!cur.done()) {
        const char c = cur.peek();
        if (c == '#') {
            while (!cur.done() && cur.peek() != '\n') cur.get();
        } else if (c == '\n') {
            if (!allow_newlines) return;
            cur.get();
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            cur.get();
        } else {
            return;
        }
    }
}

ConfigValue read_config_value(Cursor& cur) {
    ConfigValue v;
    v.at = cur.position();
    const char c = cur.peek();
    if (c == '[') {
        cur.get();
        std::vector<ConfigValue> items;
        while (true) {
            skip_config_space(cur, true);
            if (cur.done()) config_error(v.at, "unterminated array");
            if (cur.peek() == ']') {
                cur.get();
                break;
            }
            items.push_back(read_config_value(cur));
            skip_config_space(cur, true);
            if (cur.peek() == ',') {
                cur.get();
            } else if (cur.peek() != ']') {
                config_error(cur.position(), "expected ',' or ']' in array");
            }
        }
        v.data = std::move(items);
        return v;
    }
    if (c == '"') {
        cur.get();
        const std::size_t from = cur.offset();
        while (!cur.done() && cur.peek() != '"' && cur.peek() != '\n') cur.get();
        if (cur.peek() != '"') config_error(v.at, "unterminated string");
        v.data = std::string(cur.slice(from));
        cur.get();
        return v;
    }
    const std::size_t from = cur.offset();
    while (!cur.done()) {
        const char d = cur.peek();
        if (std::isspace(static_cast<unsigned char>(d)) || d == ',' || d == ']' || d == '#') break;
        cur.get();
    }
    const std::string_view token = cur.slice(from);
    if (token == "true" || token == "false") {
        v.data = (token == "true");
        return v;
    }
    double number = 0.0;
    if (token.empty() || !parse_double(token, number)) {
        config_error(v.at, "expected a value, found '" + std::string(token) + "'");
    }
    v.data = number;
    return v;
}

double get_number(const ConfigValue& v, const std::string& key) {
    const auto* d = std::get_if<double>(&v.data);
    if (d == nullptr) config_error(v.at, key + " expects a number");
    return *d;
}

int get_int(const ConfigValue& v, const std::string& key) {
    const double d = get_number(v, key);
    if (d != std::floor(d)) config_error(v.at, key + " expects an integer");
    return static_cast<int>(d);
}

bool get_bool(const ConfigValue& v, const std::string& key) {
    const auto* b = std::get_if<bool>(&v.data);
    if (b == nullptr) config_error(v.at, key + " expects true or false");
    return *b;
}

const std::vector<ConfigValue>& get_array(const ConfigValue& v, const std::string& key) {
    const auto* a = std::get_if<std::vector<ConfigValue>>(&v.data);
    if (a == nullptr) config_error(v.at, key + " expects an array");
    return *a;
}

std::vector<double> get_numbers(const ConfigValue& v, const std::string& key) {
    if (std::holds_alternative<double>(v.data)) return {get_number(v, key)};
    std::vector<double> out;
    for (const auto& item : get_array(v, key)) out.push_back(get_number(item, key));
    return out;
}

std::vector<std::vector<double>> get_rows(const ConfigValue& v, const std::string& key,
                                          std::size_t width) {
    std::vector<std::vector<double>> out;
    for (const auto& item : get_array(v, key)) {
        auto row = get_numbers(item, key);
        if (row.size() != width) {
            config_error(item.at, key + " rows need " + std::to_string(width) + " entries");
        }
        out.push_back(std::move(row));
    }
    return out;
}

void check(bool ok, const ConfigValue& v, const std::string& what) {
    if (!ok) config_error(v.at, what);
}

void assign_scenario(ScenarioConfig& s, const std::string& key, const ConfigValue& v) {
    if (key == "load_scale") {
        s.load_scale = get_number(v, key);
        check(s.load_scale > 0.0, v, "load_scale must be positive");
    } else if (key == "gen_capacity_scale") {
        s.gen_capacity_scale = get_number(v, key);
        check(s.gen_capacity_scale > 0.0, v, "gen_capacity_scale must be positive");
    } else if (key == "renewable_buses") {
        s.renewable_buses.clear();
        for (const auto& item : get_array(v, key)) s.renewable_buses.push_back(get_int(item, key));
    } else if (key == "renewable_variance") {
        s.renewable_variance = get_numbers(v, key);
        for (double x : s.renewable_variance) check(x >= 0.0, v, "variances must be nonnegative");
    } else if (key == "renewable_forecast_mw") {
        s.renewable_forecast_mw = get_numbers(v, key);
    } else if (key == "flexible_lines") {
        s.flexible_lines.clear();
        for (const auto& row : get_rows(v, key, 3)) {
            check(row[2] >= 0.0 && row[2] < 1.0, v, "degree of flexibility must lie in [0, 1)");
            s.flexible_lines.push_back({static_cast<int>(row[0]), static_cast<int>(row[1]), row[2]});
        }
    } else if (key == "default_capacity_mw") {
        s.default_capacity_mw = get_number(v, key);
        check(*s.default_capacity_mw > 0.0, v, "default_capacity_mw must be positive");
    } else if (key == "capacity_overrides") {
        s.capacity_overrides.clear();
        for (const auto& row : get_rows(v, key, 3)) {
            check(row[2] > 0.0, v, "capacities must be positive");
            s.capacity_overrides.push_back({static_cast<int>(row[0]), static_cast<int>(row[1]), row[2]});
        }
    } else if (key == "epsilon_gen") {
        s.epsilon_gen = get_number(v, key);
        check(s.epsilon_gen > 0.0 && s.epsilon_gen <= 0.5, v, "epsilon_gen must lie in (0, 0.5]");
    } else if (key == "epsilon_line") {
        s.epsilon_line = get_number(v, key);
        check(s.epsilon_line > 0.0 && s.epsilon_line <= 0.5, v, "epsilon_line must lie in (0, 0.5]");
    } else if (key == "quantile_override") {
        s.quantile_override = get_number(v, key);
        check(*s.quantile_override >= 0.0, v, "quantile_override must be nonnegative");
    } else if (key == "cost_overrides") {
        s.cost_overrides.clear();
        for (const auto& row : get_rows(v, key, 3)) {
            check(row[1] >= 0.0, v, "quadratic cost must be nonnegative");
            s.cost_overrides.push_back({static_cast<int>(row[0]), row[1], row[2]});
        }
    } else if (key == "tap_in_susceptance") {
        s.tap_in_susceptance = get_bool(v, key);
    } else if (key == "participation_nonnegative") {
        s.participation_nonnegative = get_bool(v, key);
    } else {
        config_error(v.at, "unknown [scenario] key '" + key + "'");
    }
}

void assign_algorithm(AlgorithmConfig& a, const std::string& key, const ConfigValue& v) {
    if (key == "delta") {
        a.delta = get_number(v, key);
        check(a.delta > 0.0, v, "delta must be positive");
    } else if (key == "beta") {
        a.beta = get_number(v, key);
        check(a.beta > 0.0 && a.beta < 1.0, v, "beta must lie in (0, 1)");
    } else if (key == "trust_region_frac") {
        a.trust_region_frac = get_number(v, key);
        check(a.trust_region_frac > 0.0, v, "trust_region_frac must be positive");
    } else if (key == "max_outer_iterations") {
        a.max_outer_iterations = get_int(v, key);
        check(a.max_outer_iterations >= 1, v, "max_outer_iterations must be at least 1");
    } else if (key == "max_shrink_per_iteration") {
        a.max_shrink_per_iteration = get_int(v, key);
        check(a.max_shrink_per_iteration >= 1, v, "max_shrink_per_iteration must be at least 1");
    } else if (key == "dual_binding_tol") {
        a.dual_binding_tol = get_number(v, key);
        check(a.dual_binding_tol > 0.0, v, "dual_binding_tol must be positive");
    } else if (key == "primal_binding_tol") {
        a.primal_binding_tol = get_number(v, key);
        check(a.primal_binding_tol > 0.0, v, "primal_binding_tol must be positive");
    } else if (key == "socp_tolerance") {
        a.socp_tolerance = get_number(v, key);
        check(a.socp_tolerance > 0.0, v, "socp_tolerance must be positive");
    } else {
        config_error(v.at, "unknown [algorithm] key '" + key + "'");
    }
}

}  // namespace

StudyConfig parse_study_config(std::string_view text) {
    StudyConfig config;
    Cursor cur(text);
    std::string section;
    while (true) {
        skip_config_space(cur, true);
        if (cur.done()) break;
        const Position at = cur.position();
        if (cur.peek() == '[') {
            cur.get();
            const std::size_t from = cur.offset();
            while (!cur.done() && cur.peek() != ']' && cur.peek() != '\n') cur.get();
            if (cur.peek() != ']') config_error(at, "unterminated section header");
            section = std::string(cur.slice(from));
            cur.get();
            if (section != "scenario" && section != "algorithm") {
                config_error(at, "unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t from = cur.offset();
        while (!cur.done()) {
            const char c = cur.peek();
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) break;
            cur.get();
        }
        const std::string key(cur.slice(from));
        if (key.empty()) config_error(at, std::string("unexpected character '") + cur.peek() + "'");
        if (section.empty()) config_error(at, "key '" + key + "' appears before any section");
        skip_config_space(cur, false);
        if (cur.peek() != '=') config_error(cur.position(), "expected '=' after " + key);
        cur.get();
        skip_config_space(cur, false);
        const ConfigValue value = read_config_value(cur);
        skip_config_space(cur, false);
        if (!cur.done() && cur.peek() != '\n') {
            config_error(cur.position(), "trailing characters after value of " + key);
        }
        if (section == "scenario") {
            assign_scenario(config.scenario, key, value);
        } else {
            assign_algorithm(config.algorithm, key, value);
        }
    }
    const auto& s = config.scenario;
    if (s.renewable_variance.size() > 1 && s.renewable_variance.size() != s.renewable_buses.size()) {
        config_error({1, 1}, "renewable_variance needs one entry per renewable bus or a single value");
    }
    if (!s.renewable_forecast_mw.empty() &&
        s.renewable_forecast_mw.size() != s.renewable_buses.size()) {
        config_error({1, 1}, "renewable_forecast_mw needs one entry per renewable bus");
    }
    return config;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_study_config(text);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ":" + e.detail());
    }
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::size_t> match_branch(const std::vector<RawBranch>& branches, int from, int to) {
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const RawBranch& br = branches[k];
        if ((br.from == from && br.to == to) || (br.from == to && br.to == from)) return k;
    }
    return std::nullopt;
}

[[noreturn]] void unknown_line(int from, int to) {
    throw Error(ErrorCode::UnknownLine,
                "line (" + std::to_string(from) + "," + std::to_string(to) + ") is not in the case");
}

}  // namespace

CaseModel apply_scenario(const RawCase& raw, const ScenarioConfig& scenario) {
    if (!(scenario.load_scale > 0.0) || !(scenario.gen_capacity_scale > 0.0)) {
        throw Error(ErrorCode::DomainError, "scales must be positive");
    }
    const double base = raw.base_mva;
    const int n = static_cast<int>(raw.buses.size());

    std::vector<int> numbers;
    std::map<int, int> index;
    Vector load(n);
    for (int i = 0; i < n; ++i) {
        numbers.push_back(raw.buses[i].number);
        index[raw.buses[i].number] = i;
        load[i] = raw.buses[i].pd * scenario.load_scale / base;
    }
    auto bus_of = [&](int number) {
        const auto it = index.find(number);
        if (it == index.end()) {
            throw Error(ErrorCode::UnknownBus, "bus " + std::to_string(number) + " is not in the case");
        }
        return it->second;
    };

    const double c_gen = scenario.quantile_override.value_or(quantile_factor(scenario.epsilon_gen));
    const double c_line = scenario.quantile_override.value_or(quantile_factor(scenario.epsilon_line));

    std::vector<Generator> generators;
    for (std::size_t g = 0; g < raw.gens.size(); ++g) {
        const RawGen& rg = raw.gens[g];
        if (rg.status <= 0) continue;
        Generator gen;
        gen.bus = bus_of(rg.bus);
        gen.p_max = rg.pmax * scenario.gen_capacity_scale / base;
        gen.p_min = rg.pmin * scenario.gen_capacity_scale / base;
        if (g < raw.gencost.size()) {
            gen.cost_quadratic = raw.gencost[g].quadratic();
            gen.cost_linear = raw.gencost[g].linear();
        }
        gen.epsilon = scenario.epsilon_gen;
        gen.quantile = c_gen;
        generators.push_back(gen);
    }
    for (const CostOverride& over : scenario.cost_overrides) {
        const int bus = bus_of(over.bus);
        bool found = false;
        for (Generator& gen : generators) {
            if (gen.bus != bus) continue;
            gen.cost_quadratic = over.quadratic;
            gen.cost_linear = over.linear;
            found = true;
        }
        if (!found) {
            throw Error(ErrorCode::UnknownBus,
                        "cost override for bus " + std::to_string(over.bus) + " without a generator");
        }
    }

    std::vector<RawBranch> in_service;
    for (const RawBranch& br : raw.branches) {
        if (br.status > 0) in_service.push_back(br);
    }
    std::vector<Line> lines;
    for (const RawBranch& br : in_service) {
        if (!(br.x > 0.0)) {
            throw Error(ErrorCode::UnsupportedFeature,
                        "branch (" + std::to_string(br.from) + "," + std::to_string(br.to) +
                            ") has a nonpositive reactance");
        }
        const double tap = (scenario.tap_in_susceptance && br.ratio != 0.0) ? br.ratio : 1.0;
        Line line;
        line.from_bus = bus_of(br.from);
        line.to_bus = bus_of(br.to);
        line.susceptance_rated = 1.0 / (br.x * tap);
        if (scenario.default_capacity_mw) {
            line.capacity = *scenario.default_capacity_mw / base;
        } else {
            line.capacity = br.rate_a > 0.0 ? br.rate_a / base : kUnlimited;
        }
        line.epsilon = scenario.epsilon_line;
        line.quantile = c_line;
        lines.push_back(line);
    }
    for (const CapacityOverride& over : scenario.capacity_overrides) {
        const auto k = match_branch(in_service, over.from, over.to);
        if (!k) unknown_line(over.from, over.to);
        lines[*k].capacity = over.megawatts / base;
    }
    for (const FlexibleLineSpec& flex : scenario.flexible_lines) {
        const auto k = match_branch(in_service, flex.from, flex.to);
        if (!k) unknown_line(flex.from, flex.to);
        lines[*k].flexibility = Flexibility{flex.degree};
    }

    Matrix covariance = Matrix::Zero(n, n);
    std::vector<bool> renewable(static_cast<std::size_t>(n), false);
    Vector forecast = Vector::Zero(n);
    for (std::size_t r = 0; r < scenario.renewable_buses.size(); ++r) {
        const int i = bus_of(scenario.renewable_buses[r]);
        renewable[i] = true;
        double variance = 0.0;
        if (scenario.renewable_variance.size() == 1) {
            variance = scenario.renewable_variance.front();
        } else if (r < scenario.renewable_variance.size()) {
            variance = scenario.renewable_variance[r];
        }
        if (variance < 0.0) throw Error(ErrorCode::DomainError, "variances must be nonnegative");
        covariance(i, i) += variance;
        if (r < scenario.renewable_forecast_mw.size()) {
            forecast[i] += scenario.renewable_forecast_mw[r] / base;
        }
    }

    Grid grid(base, std::move(numbers), std::move(lines), std::move(generators), std::move(load),
              std::move(forecast));
    return CaseModel{std::move(grid), UncertaintyModel(std::move(covariance), std::move(renewable))};
}

}  // namespace gridflex
