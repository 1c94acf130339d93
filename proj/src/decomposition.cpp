#include "rdt/decomposition.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <queue>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace rdt {

using milp::Solution;
using milp::SolveStatus;

namespace {

std::size_t at(int i) { return static_cast<std::size_t>(i); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Fractions {
    double critical = 1.0;
    double total = 1.0;
};

Fractions served_fractions(const Network& network, const std::vector<char>& served) {
    double crit = 0.0, crit_d = 0.0, tot = 0.0, tot_d = 0.0;
    for (std::size_t k = 0; k < network.loads.size(); ++k) {
        const double d = network.loads[k].real_demand_pu();
        tot_d += d;
        if (served[k]) tot += d;
        if (network.loads[k].is_critical) {
            crit_d += d;
            if (served[k]) crit += d;
        }
    }
    return {crit_d > 0.0 ? crit / crit_d : 1.0, tot_d > 0.0 ? tot / tot_d : 1.0};
}

Verdict verdict_from(const Network& network, const DesignParams& params, OperationState op, bool feasible) {
    Verdict v;
    v.scenario_id = op.scenario_id;
    v.feasible = feasible;
    const auto f = served_fractions(network, op.served);
    v.critical_fraction = f.critical;
    v.total_fraction = f.total;
    v.critical_shortfall = std::max(0.0, params.lambda - f.critical);
    v.total_shortfall = std::max(0.0, params.gamma - f.total);
    v.operation = std::move(op);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Fixing heuristic

void VnsConfig::validate() const {
    if (schedule.empty() || schedule.back() != 1.0) throw std::invalid_argument("VNS schedule must end at 1.0");
    for (double f : schedule) {
        if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("VNS schedule entries must lie in [0, 1]");
    }
    if (fix_threshold < 0.0) throw std::invalid_argument("VNS threshold must be nonnegative");
}

Solution vns_solve(const milp::MilpModel& model, const VnsConfig& cfg, const milp::SolverOptions& options) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const Solution relax = milp::solve_lp_relaxation(model, options);
    if (relax.status == SolveStatus::Infeasible) return relax;
    if (relax.status != SolveStatus::Optimal) return milp::solve(model, options);

    struct Fixed {
        int var;
        double frac;
        double value;
    };
    std::vector<Fixed> fixed;
    for (int j = 0; j < model.num_variables(); ++j) {
        if (model.variable(j).kind != milp::VarKind::Binary) continue;
        const double v = relax.value(j);
        const double r = std::round(v);
        const double frac = std::abs(v - r);
        if (frac < cfg.fix_threshold) fixed.push_back({j, frac, r});
    }
    // most fractional first, so they are released first
    std::stable_sort(fixed.begin(), fixed.end(), [](const Fixed& a, const Fixed& b) { return a.frac > b.frac; });

    Solution best;
    best.status = SolveStatus::Infeasible;
    bool have_best = false;
    bool proven = false;
    for (double fraction : cfg.schedule) {
        const auto release = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(fixed.size()) - 1e-12));
        milp::MilpModel restricted = model;
        for (std::size_t k = release; k < fixed.size(); ++k) {
            restricted.set_bounds(fixed[k].var, fixed[k].value, fixed[k].value);
        }
        milp::SolverOptions round = options;
        round.time_limit = std::min(cfg.round_time_limit, options.time_limit - seconds_since(t0));
        Solution s = milp::solve(restricted, round);
        const bool full = release >= fixed.size();
        if (s.has_values() && (!have_best || s.objective < best.objective)) {
            best = std::move(s);
            have_best = true;
            proven = full && best.status == SolveStatus::Optimal;
            if (!cfg.seek_improvement) break;
        } else if (!have_best && full) {
            best = std::move(s);
        }
        if (full) break;
    }
    if (have_best) {
        const double gap = options.relative_gap * std::max(1.0, std::abs(best.objective));
        if (!proven && best.objective > relax.objective + gap) {
            best.status = SolveStatus::FeasibleLimit;
            best.bound = relax.objective;
        } else {
            best.status = SolveStatus::Optimal;
            best.bound = std::max(best.bound, relax.objective);
        }
    }
    best.stats.seconds = seconds_since(t0);
    return best;
}

// ---------------------------------------------------------------------------
// Cycle separation

std::vector<std::vector<int>> find_cycles(const ReducedGraph& graph, const std::vector<char>& edge_closed) {
    const auto n = at(graph.num_nodes);
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, edge)
    for (int ed = 0; ed < static_cast<int>(graph.edges.size()); ++ed) {
        if (!edge_closed[at(ed)]) continue;
        const auto& e = graph.edges[at(ed)];
        adj[at(e.u)].emplace_back(e.v, ed);
        adj[at(e.v)].emplace_back(e.u, ed);
    }
    std::vector<int> parent_edge(n, -1), depth(n, -1);
    std::vector<char> tree_edge(graph.edges.size(), 0);
    for (std::size_t root = 0; root < n; ++root) {
        if (depth[root] >= 0) continue;
        depth[root] = 0;
        std::vector<int> stack{static_cast<int>(root)};
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const auto& [v, ed] : adj[at(u)]) {
                if (depth[at(v)] >= 0) continue;
                depth[at(v)] = depth[at(u)] + 1;
                parent_edge[at(v)] = ed;
                tree_edge[at(ed)] = 1;
                stack.push_back(v);
            }
        }
    }
    auto up = [&](int node) {
        const auto& e = graph.edges[at(parent_edge[at(node)])];
        return e.u == node ? e.v : e.u;
    };
    std::vector<std::vector<int>> cycles;
    for (int ed = 0; ed < static_cast<int>(graph.edges.size()); ++ed) {
        if (!edge_closed[at(ed)] || tree_edge[at(ed)]) continue;
        int a = graph.edges[at(ed)].u;
        int b = graph.edges[at(ed)].v;
        std::vector<int> left{ed}, right;
        while (a != b) {
            if (depth[at(a)] >= depth[at(b)]) {
                left.push_back(parent_edge[at(a)]);
                a = up(a);
            } else {
                right.push_back(parent_edge[at(b)]);
                b = up(b);
            }
        }
        left.insert(left.end(), right.rbegin(), right.rend());
        cycles.push_back(std::move(left));
    }
    return cycles;
}

std::vector<std::vector<int>> separate_cycles(const MasterBuilder& builder, const Solution& solution, int block) {
    const auto& g = builder.reduced_graph();
    const auto& sv = builder.block(block);
    std::vector<char> closed(g.edges.size(), 0);
    for (std::size_t ed = 0; ed < g.edges.size(); ++ed) {
        for (int k : g.edges[ed].lines) {
            if (solution.value(sv.e[at(k)]) > 0.5) closed[ed] = 1;
        }
    }
    return find_cycles(g, closed);
}

Solution solve_with_cycle_cuts(MasterBuilder& builder, const SolveConfig& config) {
    for (;;) {
        const auto& model = builder.model();
        Solution s = model.num_binaries() > config.vns_min_binaries ? vns_solve(model, config.vns, config.solver)
                                                                     : milp::solve(model, config.solver);
        if (!s.has_values()) return s;
        bool cut = false;
        for (int b = 0; b < builder.num_blocks(); ++b) {
            for (const auto& cycle : separate_cycles(builder, s, b)) {
                builder.add_cycle_cut(b, cycle);
                cut = true;
            }
        }
        if (!cut) return s;
    }
}

// ---------------------------------------------------------------------------
// Design evaluation

Verdict evaluate_design(const Design& design, const Network& network, const DamageScenario& scenario,
                        const DesignParams& params, const SolveConfig& config) {
    {
        MasterBuilder mb(network, params);
        const int b = mb.add_scenario(scenario);
        mb.fix_first_stage(design);
        mb.model().clear_objective();
        const Solution s = solve_with_cycle_cuts(mb, config);
        if (s.has_values()) return verdict_from(network, params, mb.extract_operation(s, b), true);
        if (s.status != SolveStatus::Infeasible) {
            throw milp::SolverError("scenario " + std::to_string(scenario.id) + ": solver returned " +
                                    std::string(milp::to_string(s.status)));
        }
    }
    // best effort: maximise served load, critical first
    BuildOptions relaxed;
    relaxed.resilience_rows = false;
    MasterBuilder mb(network, params, relaxed);
    const int b = mb.add_scenario(scenario);
    mb.fix_first_stage(design);
    auto& model = mb.model();
    model.clear_objective();
    const double crit_total = network.critical_real_demand_pu();
    const double total = network.total_real_demand_pu();
    for (std::size_t k = 0; k < network.loads.size(); ++k) {
        const auto& ld = network.loads[k];
        double w = total > 0.0 ? ld.real_demand_pu() / total : 0.0;
        if (ld.is_critical && crit_total > 0.0) w += 10.0 * ld.real_demand_pu() / crit_total;
        model.set_objective(mb.block(b).y[k], -w);
    }
    const Solution s = solve_with_cycle_cuts(mb, config);
    if (!s.has_values()) {
        throw milp::SolverError("scenario " + std::to_string(scenario.id) + ": best-effort solve returned " +
                                std::string(milp::to_string(s.status)));
    }
    return verdict_from(network, params, mb.extract_operation(s, b), false);
}

std::vector<Verdict> evaluate_scenarios(const Design& design, const Network& network,
                                        const std::vector<DamageScenario>& scenarios, const DesignParams& params,
                                        const SolveConfig& config, int jobs) {
    std::vector<Verdict> out(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < scenarios.size(); k = next++) {
            try {
                out[k] = evaluate_design(design, network, scenarios[k], params, config);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(scenarios.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decomposition

namespace {

std::optional<int> first_unattainable(const Network& network, const std::vector<DamageScenario>& scenarios,
                                      const std::vector<int>& positions, const DesignParams& params,
                                      const SolveConfig& config) {
    const Design everything = full_design(network);
    for (int pos : positions) {
        const auto v = evaluate_design(everything, network, scenarios[at(pos)], params, config);
        if (!v.feasible) return scenarios[at(pos)].id;
    }
    return std::nullopt;
}

void check_scenarios(const std::vector<DamageScenario>& scenarios) {
    if (scenarios.empty()) throw std::invalid_argument("scenario list is empty");
    if (scenarios.front().id != 0 || !scenarios.front().damaged_line_ids.empty()) {
        throw std::invalid_argument("the first scenario must be the undamaged baseline with id 0");
    }
}

}  // namespace

SbdResult sbd_design(const Network& network, const std::vector<DamageScenario>& scenarios,
                     const DesignParams& params, const SbdOptions& options) {
    check_scenarios(scenarios);
    SbdResult result;
    std::vector<int> active_pos{0};
    {
        int pick = -1;
        std::size_t most = 0;
        for (int k = 1; k < static_cast<int>(scenarios.size()); ++k) {
            if (scenarios[at(k)].damaged_line_ids.size() > most) {
                most = scenarios[at(k)].damaged_line_ids.size();
                pick = k;
            }
        }
        if (pick > 0) active_pos.push_back(pick);
    }
    MasterBuilder mb(network, params);
    for (int pos : active_pos) mb.add_scenario(scenarios[at(pos)]);

    for (;;) {
        const auto t0 = std::chrono::steady_clock::now();
        const int cuts_before = mb.cut_count();
        const Solution s = solve_with_cycle_cuts(mb, options.solve);
        SbdIteration it;
        it.iteration = result.state.iterations + 1;
        for (int pos : active_pos) it.active.push_back(scenarios[at(pos)].id);
        result.state.active = it.active;
        result.state.iterations = it.iteration;

        if (s.status == SolveStatus::Infeasible) {
            result.status = SbdStatus::Infeasible;
            result.infeasible_scenario = first_unattainable(network, scenarios, active_pos, params, options.solve);
            result.message = result.infeasible_scenario
                                 ? "service targets unattainable in scenario " + std::to_string(*result.infeasible_scenario)
                                 : "master problem infeasible";
            it.seconds = seconds_since(t0);
            result.state.log.push_back(std::move(it));
            return result;
        }
        if (!s.has_values()) {
            result.status = SbdStatus::SolverFailure;
            result.message = "master solve returned " + std::string(milp::to_string(s.status));
            return result;
        }
        const Design design = mb.extract_design(s);
        it.cost = design.cost.total();
        it.cuts = mb.cut_count() - cuts_before;

        std::vector<DamageScenario> rest;
        std::vector<int> rest_pos;
        for (int k = 0; k < static_cast<int>(scenarios.size()); ++k) {
            if (std::find(active_pos.begin(), active_pos.end(), k) == active_pos.end()) {
                rest.push_back(scenarios[at(k)]);
                rest_pos.push_back(k);
            }
        }
        auto verdicts = evaluate_scenarios(design, network, rest, params, options.solve, options.jobs);
        int add = -1;
        double worst = -1.0;
        for (std::size_t k = 0; k < verdicts.size(); ++k) {
            if (verdicts[k].feasible) continue;
            const double violation = verdicts[k].critical_shortfall + verdicts[k].total_shortfall;
            if (add < 0 || (options.add_max_violation && violation > worst)) {
                add = rest_pos[k];
                worst = violation;
            }
        }
        it.verdicts = verdicts;
        it.seconds = seconds_since(t0);
        result.state.log.push_back(it);
        result.state.incumbent = design;

        if (add < 0) {
            // assemble per-scenario verdicts and operations in scenario order
            std::vector<Verdict> all(scenarios.size());
            for (int b = 0; b < mb.num_blocks(); ++b) {
                const auto pos = at(active_pos[at(b)]);
                all[pos] = verdict_from(network, params, mb.extract_operation(s, b), true);
            }
            for (std::size_t k = 0; k < verdicts.size(); ++k) all[at(rest_pos[k])] = std::move(verdicts[k]);
            for (auto& v : all) {
                result.operations.push_back(*v.operation);
                v.operation.reset();
            }
            result.state.verdicts = std::move(all);
            result.status = SbdStatus::Feasible;
            result.design = design;
            return result;
        }
        active_pos.push_back(add);
        mb.add_scenario(scenarios[at(add)]);
    }
}

SbdResult extensive_design(const Network& network, const std::vector<DamageScenario>& scenarios,
                           const DesignParams& params, const SolveConfig& config) {
    check_scenarios(scenarios);
    SbdResult result;
    MasterBuilder mb = build_master(network, scenarios, params);
    const auto t0 = std::chrono::steady_clock::now();
    const Solution s = solve_with_cycle_cuts(mb, config);
    SbdIteration it;
    it.iteration = 1;
    for (const auto& sc : scenarios) it.active.push_back(sc.id);
    result.state.active = it.active;
    result.state.iterations = 1;
    if (s.status == SolveStatus::Infeasible) {
        std::vector<int> all(scenarios.size());
        for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
        result.status = SbdStatus::Infeasible;
        result.infeasible_scenario = first_unattainable(network, scenarios, all, params, config);
        result.message = "master problem infeasible";
        return result;
    }
    if (!s.has_values()) {
        result.status = SbdStatus::SolverFailure;
        result.message = "master solve returned " + std::string(milp::to_string(s.status));
        return result;
    }
    result.design = mb.extract_design(s);
    it.cost = result.design.cost.total();
    it.cuts = mb.cut_count();
    it.seconds = seconds_since(t0);
    result.state.log.push_back(it);
    result.state.incumbent = result.design;
    for (int b = 0; b < mb.num_blocks(); ++b) {
        auto v = verdict_from(network, params, mb.extract_operation(s, b), true);
        result.operations.push_back(*v.operation);
        v.operation.reset();
        result.state.verdicts.push_back(std::move(v));
    }
    result.status = SbdStatus::Feasible;
    return result;
}

std::string sbd_log_jsonl(const SbdState& state) {
    using json = nlohmann::ordered_json;
    std::string out;
    for (const auto& it : state.log) {
        json j;
        j["iteration"] = it.iteration;
        j["active"] = it.active;
        j["cost_k"] = it.cost * 1e-3;
        j["cuts"] = it.cuts;
        j["seconds"] = it.seconds;
        json verdicts = json::array();
        for (const auto& v : it.verdicts) {
            verdicts.push_back({{"scenario", v.scenario_id},
                                {"feasible", v.feasible},
                                {"critical_fraction", v.critical_fraction},
                                {"total_fraction", v.total_fraction}});
        }
        j["verdicts"] = std::move(verdicts);
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace rdt
