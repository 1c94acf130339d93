#pragma once

// Shared builders for the unit and acceptance tests: small network documents,
// seeded random tiny instances and an enumeration oracle for the optimal
// design cost.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdt/decomposition.hpp"
#include "rdt/fragility.hpp"
#include "rdt/grid_model.hpp"

namespace rdt::testing {

using nlohmann::json;

inline std::string fixture(const std::string& name) { return std::string(RDT_FIXTURE_DIR) + "/" + name; }

inline json impedance_json(const std::string& phases, double r_self = 0.35, double x_self = 0.75,
                           double r_mut = 0.15, double x_mut = 0.40) {
    json z = json::array();
    for (char a : std::string("ABC")) {
        for (char b : std::string("ABC")) {
            if (phases.find(a) == std::string::npos || phases.find(b) == std::string::npos) {
                z.push_back(nullptr);
            } else if (a == b) {
                z.push_back({{"re", r_self}, {"im", x_self}});
            } else {
                z.push_back({{"re", r_mut}, {"im", x_mut}});
            }
        }
    }
    return z;
}

/// Programmatic network document with the same field layout as the fixtures.
struct NetDoc {
    json doc = {{"name", "test"}, {"bases", {{"kva", 1000.0}, {"kv", 7.2}}}, {"buses", json::array()},
                {"lines", json::array()}, {"loads", json::array()}, {"microgrids", json::array()}};

    NetDoc& bus(const std::string& id, const std::string& phases, bool substation = false) {
        doc["buses"].push_back({{"id", id}, {"phases", phases}, {"substation", substation}});
        return *this;
    }
    /// Existing, damageable and hardenable unless changed through `extra`.
    NetDoc& line(const std::string& id, const std::string& from, const std::string& to, const std::string& phases,
                 double capacity_kva = 2000.0, json extra = json::object()) {
        json l = {{"id", id}, {"from", from}, {"to", to}, {"phases", phases}, {"length_km", 1.0},
                  {"impedance_ohm_per_km", impedance_json(phases)}, {"capacity_kva", capacity_kva}};
        l.update(extra);
        doc["lines"].push_back(std::move(l));
        return *this;
    }
    NetDoc& load(const std::string& id, const std::string& bus, const std::string& phases, double kw,
                 bool critical = false, double kvar = 0.0) {
        json d = json::object();
        for (char p : phases) d[std::string(1, p)] = {{"re", kw}, {"im", kvar}};
        doc["loads"].push_back({{"id", id}, {"bus", bus}, {"demand_kva", d}, {"critical", critical}});
        return *this;
    }
    NetDoc& site(const std::string& id, const std::string& bus, double step_kva, int steps, double fixed,
                 double rate) {
        doc["microgrids"].push_back({{"id", id}, {"bus", bus}, {"step_kva", step_kva}, {"max_steps", steps},
                                     {"fixed_cost", fixed}, {"variable_cost_per_kva", rate}});
        return *this;
    }
    [[nodiscard]] Network build() const { return load_network(doc.dump()); }
};

inline DamageScenario scenario(int id, std::vector<std::string> damaged) {
    DamageScenario s;
    s.id = id;
    s.damaged_line_ids = std::move(damaged);
    return s;
}

/// Solver settings tight enough that integer-k$ costs are compared exactly.
inline SolveConfig exact_config() {
    SolveConfig c;
    c.solver.relative_gap = 1e-9;
    c.vns_min_binaries = 1 << 30;
    return c;
}

struct TinyInstance {
    std::uint64_t seed = 0;
    Network network;
    std::vector<DamageScenario> scenarios;  // baseline first
    DesignParams params;
    int decisions = 0;  // first-stage binaries
};

/// First-stage vectors: one flag per candidate line, one per hardenable line,
/// and a size level 0..max_steps per microgrid site.
inline int decision_count(const Network& net) {
    int n = 0;
    for (const auto& l : net.lines) n += (l.is_candidate() ? 1 : 0) + (l.hardenable ? 1 : 0);
    for (const auto& g : net.microgrids) n += g.max_steps;
    return n;
}

/// Random radial feeder with at most 8 buses, at most 10 first-stage binaries
/// and 2 or 3 scenarios (the baseline included). All costs are whole k$.
inline TinyInstance random_tiny_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };

    NetDoc d;
    const int nb = uniform(4, 8);
    std::vector<std::string> phases{"ABC"};
    d.bus("b0", "ABC", true);
    int hardenable = 0;
    for (int i = 1; i < nb; ++i) {
        std::vector<int> parents;
        const std::string ph = coin(0.6) ? "ABC" : std::string(1, "ABC"[uniform(0, 2)]);
        for (int k = 0; k < i; ++k) {
            if (phases[static_cast<std::size_t>(k)].find(ph[0]) != std::string::npos &&
                (ph.size() == 1 || phases[static_cast<std::size_t>(k)] == "ABC")) {
                parents.push_back(k);
            }
        }
        const int parent = parents[static_cast<std::size_t>(uniform(0, static_cast<int>(parents.size()) - 1))];
        const std::string id = "b" + std::to_string(i);
        d.bus(id, ph);
        phases.push_back(ph);
        const bool damageable = hardenable < 6 && coin(0.75);
        hardenable += damageable ? 1 : 0;
        json extra = {{"damageable", damageable}, {"switch", coin(0.3)}, {"harden_cost", 1000.0 * uniform(5, 60)}};
        d.line("L" + std::to_string(i), "b" + std::to_string(parent), id, ph, 100.0 * uniform(2, 20), extra);
        const double kw = 10.0 * uniform(1, 8);
        d.load("D" + std::to_string(i), id, ph, kw, coin(0.4), kw * 0.3);
    }
    int decisions = hardenable;
    // ties between buses sharing a phase; these close cycles when built
    const int ties = uniform(1, 3);
    for (int t = 0; t < ties && decisions < 10; ++t) {
        const int a = uniform(0, nb - 1);
        const int b = uniform(0, nb - 1);
        if (a == b) continue;
        const auto& pa = phases[static_cast<std::size_t>(a)];
        const auto& pb = phases[static_cast<std::size_t>(b)];
        std::string common;
        for (char p : std::string("ABC")) {
            if (pa.find(p) != std::string::npos && pb.find(p) != std::string::npos) common += p;
        }
        if (common.empty()) continue;
        d.line("C" + std::to_string(t), "b" + std::to_string(a), "b" + std::to_string(b), common, 1500.0,
               {{"status", "candidate"}, {"construction_cost", 1000.0 * uniform(5, 60)}});
        ++decisions;
    }
    const int sites = uniform(0, 2);
    for (int g = 0; g < sites && decisions < 10; ++g) {
        const int steps = std::min(uniform(1, 2), 10 - decisions);
        const int at = uniform(1, nb - 1);
        // steps are multiples of 20 kVA at $50/kVA, so every step costs whole k$
        d.site("G" + std::to_string(g), "b" + std::to_string(at), 20.0 * uniform(1, 4), steps,
               1000.0 * uniform(3, 30), 50.0);
        decisions += steps;
    }

    TinyInstance inst;
    inst.seed = seed;
    inst.network = d.build();
    inst.decisions = decision_count(inst.network);
    FragilityParams fp;
    fp.line_failure_prob = 0.4 + 0.15 * uniform(0, 2);
    fp.scenario_count = uniform(1, 2);
    fp.seed = seed;
    inst.scenarios = sample_scenarios(inst.network, fp);
    const double lambdas[] = {0.8, 1.0};
    const double gammas[] = {0.5, 0.7, 0.9};
    inst.params.lambda = lambdas[uniform(0, 1)];
    inst.params.gamma = gammas[uniform(0, 2)];
    return inst;
}

/// Enumerates every first-stage vector of the network.
inline void for_each_design(const Network& net, const std::function<void(const Design&)>& visit) {
    std::vector<int> cand, hard;
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        if (net.lines[k].is_candidate()) cand.push_back(static_cast<int>(k));
        if (net.lines[k].hardenable) hard.push_back(static_cast<int>(k));
    }
    const std::size_t nc = cand.size(), nh = hard.size();
    std::vector<int> levels(net.microgrids.size(), 0);
    for (;;) {
        for (std::uint32_t mask = 0; mask < (1U << (nc + nh)); ++mask) {
            Design d;
            for (std::size_t t = 0; t < nc; ++t) {
                if (mask >> t & 1U) d.built_lines.push_back(net.lines[static_cast<std::size_t>(cand[t])].id);
            }
            for (std::size_t t = 0; t < nh; ++t) {
                if (mask >> (nc + t) & 1U) d.hardened_lines.push_back(net.lines[static_cast<std::size_t>(hard[t])].id);
            }
            d.microgrid_steps = levels;
            visit(d);
        }
        std::size_t g = 0;
        while (g < levels.size() && levels[g] == net.microgrids[g].max_steps) levels[g++] = 0;
        if (g == levels.size()) break;
        ++levels[g];
    }
}

struct OracleResult {
    bool feasible = false;
    double cost = 0.0;  // dollars
    long designs_checked = 0;
};

/// Cheapest first-stage vector that passes the single-scenario feasibility
/// check on every scenario, found by scanning vectors in cost order.
inline OracleResult oracle_min_cost(const Network& net, const std::vector<DamageScenario>& scenarios,
                                    const DesignParams& params, const SolveConfig& config) {
    std::vector<Design> all;
    for_each_design(net, [&](const Design& d) {
        Design c = d;
        c.cost = design_cost(net, params, c);
        all.push_back(std::move(c));
    });
    std::stable_sort(all.begin(), all.end(),
                     [](const Design& a, const Design& b) { return a.cost.total() < b.cost.total(); });
    OracleResult out;
    for (const auto& d : all) {
        ++out.designs_checked;
        bool ok = true;
        for (const auto& s : scenarios) {
            if (!evaluate_design(d, net, s, params, config).feasible) {
                ok = false;
                break;
            }
        }
        if (ok) {
            out.feasible = true;
            out.cost = d.cost.total();
            return out;
        }
    }
    return out;
}

}  // namespace rdt::testing
