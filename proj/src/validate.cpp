#include "rdt/validate.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "rdt/decomposition.hpp"

namespace rdt {

namespace {

std::size_t at(int i) { return static_cast<std::size_t>(i); }

Complex rotated(const Complex& z, Phase row, Phase col) {
    const int d = (index(col) - index(row) + 3) % 3;
    if (d == 0) return z;
    return z * std::polar(1.0, (d == 1 ? 2.0 : -2.0) * M_PI / 3.0);
}

/// V_to - V_from for one phase of a line.
double voltage_drop(const Line& l, const OperationState& st, std::size_t k, Phase ph) {
    double drop = 0.0;
    for (Phase m : l.phases.list()) {
        const Complex z = rotated(*l.impedance_pu[pair_index(ph, m)], ph, m);
        drop -= 2.0 * (z.real() * st.p[k][at(index(m))] + z.imag() * st.q[k][at(index(m))]);
    }
    return drop;
}

std::string phased(const std::string& id, Phase ph) { return id + ":" + phase_letter(ph); }

}  // namespace

RadialityCheck check_radiality(const OperationState& state, const Network& network) {
    const ReducedGraph g = aggregate_parallel_edges(network);
    std::vector<char> closed(g.edges.size(), 0);
    for (std::size_t ed = 0; ed < g.edges.size(); ++ed) {
        for (int k : g.edges[ed].lines) {
            if (state.closed[at(k)]) closed[ed] = 1;
        }
    }
    RadialityCheck out;
    const auto cycles = find_cycles(g, closed);
    if (cycles.empty()) return out;
    out.radial = false;
    for (int ed : cycles.front()) {
        for (int k : g.edges[at(ed)].lines) {
            if (state.closed[at(k)]) {
                out.cycle.push_back(network.lines[at(k)].id);
                break;
            }
        }
    }
    return out;
}

VoltageRecomputation recompute_voltages(const OperationState& state, const Network& network, const Design& design) {
    const std::size_t nb = network.buses.size();
    std::vector<std::vector<int>> incident(nb);
    for (std::size_t k = 0; k < network.lines.size(); ++k) {
        if (!state.closed[k]) continue;
        incident[at(network.lines[k].from_bus)].push_back(static_cast<int>(k));
        incident[at(network.lines[k].to_bus)].push_back(static_cast<int>(k));
    }
    VoltageRecomputation out;
    out.v.assign(nb, {});
    std::vector<char> seen(nb, 0);

    auto sweep = [&](int root) {
        std::queue<int> bfs;
        bfs.push(root);
        seen[at(root)] = 1;
        while (!bfs.empty()) {
            const int i = bfs.front();
            bfs.pop();
            for (int k : incident[at(i)]) {
                const auto& l = network.lines[at(k)];
                const bool forward = l.from_bus == i;
                const int j = forward ? l.to_bus : l.from_bus;
                if (seen[at(j)]) continue;
                seen[at(j)] = 1;
                for (Phase ph : l.phases.list()) {
                    const auto& vi = out.v[at(i)][at(index(ph))];
                    if (!vi) continue;
                    const double drop = voltage_drop(l, state, at(k), ph);
                    out.v[at(j)][at(index(ph))] = forward ? *vi + drop : *vi - drop;
                }
                bfs.push(j);
            }
        }
    };
    auto anchor = [&](int bus, double ref) {
        for (Phase ph : network.buses[at(bus)].phases.list()) out.v[at(bus)][at(index(ph))] = ref;
    };

    for (int s : network.substations()) {
        if (seen[at(s)]) continue;
        anchor(s, network.buses[at(s)].v_ref);
        sweep(s);
    }
    // remaining components: anchor at the largest installed microgrid
    std::vector<int> component(nb, -1);
    for (std::size_t root = 0; root < nb; ++root) {
        if (seen[root] || component[root] >= 0) continue;
        std::vector<int> members{static_cast<int>(root)};
        component[root] = static_cast<int>(root);
        for (std::size_t h = 0; h < members.size(); ++h) {
            for (int k : incident[at(members[h])]) {
                const auto& l = network.lines[at(k)];
                const int j = l.from_bus == members[h] ? l.to_bus : l.from_bus;
                if (component[at(j)] < 0) {
                    component[at(j)] = static_cast<int>(root);
                    members.push_back(j);
                }
            }
        }
        int best = -1;
        double best_cap = 0.0;
        for (int i : members) {
            double cap = 0.0;
            for (int g : network.microgrids_at(i)) {
                cap += design.microgrid_steps[at(g)] * network.microgrids[at(g)].step_pu;
            }
            if (cap > best_cap) {
                best_cap = cap;
                best = i;
            }
        }
        if (best < 0) {
            if (members.size() > 1) out.unsupplied.insert(out.unsupplied.end(), members.begin(), members.end());
            continue;
        }
        const auto& sv = state.v[at(best)];
        const auto first = std::find_if(sv.begin(), sv.end(), [](const auto& x) { return x.has_value(); });
        anchor(best, first != sv.end() ? **first : network.buses[at(best)].v_ref);
        sweep(best);
        out.island_anchors.push_back(best);
    }
    std::sort(out.unsupplied.begin(), out.unsupplied.end());

    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t ph = 0; ph < 3; ++ph) {
            if (out.v[i][ph] && state.v[i][ph]) {
                out.max_discrepancy = std::max(out.max_discrepancy, std::abs(*out.v[i][ph] - *state.v[i][ph]));
            }
        }
    }
    return out;
}

AuditReport audit(const OperationState& state, const Network& network, const DesignParams& params,
                  const Design& design, const AuditTolerances& tol) {
    AuditReport r;
    r.scenario_id = state.scenario_id;
    auto violate = [&](std::string kind, std::string element, double magnitude) {
        r.violations.push_back({std::move(kind), std::move(element), magnitude});
    };

    const auto radial = check_radiality(state, network);
    r.radial = radial.radial;
    if (!radial.radial) {
        std::string witness;
        for (const auto& id : radial.cycle) witness += (witness.empty() ? "" : ",") + id;
        violate("cycle", witness, static_cast<double>(radial.cycle.size()));
    }

    std::vector<char> hardened(network.lines.size(), 0);
    for (const auto& id : design.hardened_lines) {
        if (auto k = network.line_index(id)) hardened[at(*k)] = 1;
    }
    for (std::size_t k = 0; k < network.lines.size(); ++k) {
        const auto& l = network.lines[k];
        if (state.damaged[k] && !hardened[k] && state.closed[k]) violate("damaged_closed", l.id, 1.0);
        double sum_p = 0.0, sum_q = 0.0;
        for (Phase ph : l.phases.list()) {
            const double p = state.p[k][at(index(ph))];
            const double q = state.q[k][at(index(ph))];
            sum_p += p;
            sum_q += q;
            const double s = std::hypot(p, q);
            if (!state.closed[k]) {
                if (s > tol.flow) violate("open_flow", phased(l.id, ph), s);
                continue;
            }
            r.worst_thermal_utilization = std::max(r.worst_thermal_utilization, s / l.capacity_pu);
            if (s > l.capacity_pu * (1.0 + tol.thermal)) violate("thermal", phased(l.id, ph), s - l.capacity_pu);
        }
        const int n = l.phases.size();
        if (!state.closed[k] || n < 2) continue;
        const double beta = params.beta(l);
        for (int comp = 0; comp < 2; ++comp) {
            const double sum = comp == 0 ? sum_p : sum_q;
            const double a = (1.0 - beta) / n * sum;
            const double b = (1.0 + beta) / n * sum;
            for (Phase ph : l.phases.list()) {
                const double f = comp == 0 ? state.p[k][at(index(ph))] : state.q[k][at(index(ph))];
                const double excess = std::max(std::min(a, b) - f, f - std::max(a, b));
                if (excess > tol.imbalance) violate("imbalance", phased(l.id, ph), excess);
            }
        }
    }

    double sub_p = 0.0, sub_q = 0.0;
    for (const auto& ld : network.loads) {
        for (const auto& d : ld.demand_pu) {
            if (d) {
                sub_p += d->real();
                sub_q += std::abs(d->imag());
            }
        }
    }
    for (std::size_t i = 0; i < network.buses.size(); ++i) {
        const auto& bus = network.buses[i];
        double site_cap = 0.0;
        for (int g : network.microgrids_at(static_cast<int>(i))) {
            site_cap += design.microgrid_steps[at(g)] * network.microgrids[at(g)].step_pu;
        }
        const double cap_p = site_cap + (bus.is_substation ? sub_p : 0.0);
        const double cap_q = site_cap + (bus.is_substation ? sub_q : 0.0);
        for (Phase ph : bus.phases.list()) {
            const auto pi = at(index(ph));
            double res_p = state.pg[i][pi], res_q = state.qg[i][pi];
            for (int ld : network.loads_at(static_cast<int>(i))) {
                const auto& d = network.loads[at(ld)].demand_pu[pi];
                if (d && state.served[at(ld)]) {
                    res_p -= d->real();
                    res_q -= d->imag();
                }
            }
            for (std::size_t k = 0; k < network.lines.size(); ++k) {
                const auto& l = network.lines[k];
                if (!l.phases.contains(ph)) continue;
                const double sign = l.from_bus == static_cast<int>(i) ? -1.0 : (l.to_bus == static_cast<int>(i) ? 1.0 : 0.0);
                res_p += sign * state.p[k][pi];
                res_q += sign * state.q[k][pi];
            }
            const double res = std::max(std::abs(res_p), std::abs(res_q));
            r.max_balance_residual = std::max(r.max_balance_residual, res);
            if (res > tol.balance) violate("balance", phased(bus.id, ph), res);
            const double over = std::max(state.pg[i][pi] - cap_p, state.qg[i][pi] - cap_q);
            if (over > tol.flow) violate("generation", phased(bus.id, ph), over);
        }
    }

    const auto volts = recompute_voltages(state, network, design);
    r.voltage_discrepancy = volts.max_discrepancy;
    if (volts.max_discrepancy > tol.voltage_model) violate("voltage_model", "", volts.max_discrepancy);
    const double lo = std::sqrt(params.v_min);
    const double hi = std::sqrt(params.v_max);
    bool any = false;
    for (std::size_t i = 0; i < network.buses.size(); ++i) {
        for (Phase ph : network.buses[i].phases.list()) {
            const auto& v = volts.v[i][at(index(ph))];
            if (!v) continue;
            const double mag = std::sqrt(std::max(0.0, *v));
            r.v_min_pu = any ? std::min(r.v_min_pu, mag) : mag;
            r.v_max_pu = any ? std::max(r.v_max_pu, mag) : mag;
            any = true;
            const double out = std::max(lo - mag, mag - hi);
            if (out > tol.voltage) violate("voltage", phased(network.buses[i].id, ph), out);
        }
    }

    double crit = 0.0, crit_d = 0.0, tot = 0.0, tot_d = 0.0;
    for (std::size_t k = 0; k < network.loads.size(); ++k) {
        const auto& ld = network.loads[k];
        const double d = ld.real_demand_pu();
        tot_d += d;
        if (state.served[k]) tot += d;
        if (ld.is_critical) {
            crit_d += d;
            if (state.served[k]) crit += d;
        }
    }
    r.critical_fraction = crit_d > 0.0 ? crit / crit_d : 1.0;
    r.total_fraction = tot_d > 0.0 ? tot / tot_d : 1.0;
    if (params.lambda - r.critical_fraction > tol.service) {
        violate("critical", "", params.lambda - r.critical_fraction);
    }
    if (params.gamma - r.total_fraction > tol.service) violate("total", "", params.gamma - r.total_fraction);
    return r;
}

}  // namespace rdt
