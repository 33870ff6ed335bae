#pragma once

// Small grids and fixture loaders shared by the unit tests.

#include "gridflex/caseio.hpp"
#include "gridflex/ccore.hpp"
#include "gridflex/netmodel.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace gridflex::testing {

inline std::filesystem::path data_dir() { return GRIDFLEX_DATA_DIR; }

struct ToyLine {
    int from;
    int to;
    double b;
    double capacity = kUnlimited;  // p.u.
    double degree = -1.0;          // < 0: fixed line
};

struct ToyGen {
    int bus;
    double p_max;  // p.u.
    double a2;     // $/MW^2h
    double a1;     // $/MWh
    double p_min = 0.0;
};

inline Grid toy_grid(int n, const std::vector<ToyLine>& lines, const std::vector<ToyGen>& gens,
                     const Vector& load, double epsilon = 0.01, double base_mva = 100.0) {
    std::vector<int> numbers;
    for (int i = 0; i < n; ++i) numbers.push_back(i + 1);
    std::vector<Line> ls;
    for (const ToyLine& t : lines) {
        Line l;
        l.from_bus = t.from;
        l.to_bus = t.to;
        l.susceptance_rated = t.b;
        l.capacity = t.capacity;
        l.epsilon = epsilon;
        l.quantile = quantile_factor(epsilon);
        if (t.degree >= 0.0) l.flexibility = Flexibility{t.degree};
        ls.push_back(l);
    }
    std::vector<Generator> gs;
    for (const ToyGen& t : gens) {
        Generator g;
        g.bus = t.bus;
        g.p_min = t.p_min;
        g.p_max = t.p_max;
        g.cost_quadratic = t.a2;
        g.cost_linear = t.a1;
        g.epsilon = epsilon;
        g.quantile = quantile_factor(epsilon);
        gs.push_back(g);
    }
    return Grid(base_mva, numbers, ls, gs, load, Vector::Zero(n));
}

inline UncertaintyModel diagonal_uncertainty(int n, const std::vector<int>& buses, double variance) {
    Matrix sigma = Matrix::Zero(n, n);
    std::vector<bool> renewable(static_cast<std::size_t>(n), false);
    for (int i : buses) {
        sigma(i, i) = variance;
        renewable[static_cast<std::size_t>(i)] = true;
    }
    return UncertaintyModel(sigma, renewable);
}

/// Random connected graph: a random spanning tree plus `extra` chords, b in [2, 20].
inline std::vector<ToyLine> random_lines(int n, int extra, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> b(2.0, 20.0);
    std::vector<ToyLine> lines;
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> parent(0, i - 1);
        lines.push_back({parent(rng), i, b(rng)});
    }
    std::uniform_int_distribution<int> bus(0, n - 1);
    while (extra > 0) {
        const int a = bus(rng);
        const int c = bus(rng);
        if (a == c) continue;
        lines.push_back({a, c, b(rng)});
        --extra;
    }
    return lines;
}

/// Random 6-bus grid with every line flexible and generators on buses 0, 2, 4.
inline Grid random_six_bus(std::mt19937_64& rng) {
    std::vector<ToyLine> lines = random_lines(6, 3, rng);
    for (ToyLine& l : lines) l.degree = 0.5;
    std::uniform_real_distribution<double> u(0.1, 0.6);
    Vector load(6);
    for (int i = 0; i < 6; ++i) load[i] = u(rng);
    return toy_grid(6, lines, {{0, 5.0, 0.01, 20.0}, {2, 5.0, 0.02, 25.0}, {4, 5.0, 0.015, 30.0}},
                    load);
}

inline CaseModel load_fixture(const char* case_name, const char* scenario_name,
                              StudyConfig* config = nullptr) {
    const StudyConfig cfg = load_study_config(data_dir() / scenario_name);
    if (config) *config = cfg;
    return apply_scenario(load_matpower(data_dir() / case_name), cfg.scenario);
}

}  // namespace gridflex::testing
