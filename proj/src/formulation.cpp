#include "rdt/formulation.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace rdt {

using milp::kInf;
using milp::Sense;
using milp::Term;
using milp::VarKind;

namespace {

std::size_t at(int i) { return static_cast<std::size_t>(i); }

// Branching on design decisions first leaves independent scenario blocks.
constexpr int kFirstStagePriority = 2;

std::string phase_name(Phase p) { return std::string(1, phase_letter(p)); }

/// [component][phase]: total real demand and total |reactive| demand.
std::array<std::array<double, 3>, 2> phase_demand_bounds(const Network& net) {
    std::array<std::array<double, 3>, 2> out{};
    for (const auto& ld : net.loads) {
        for (std::size_t ph = 0; ph < 3; ++ph) {
            if (const auto& d = ld.demand_pu[ph]) {
                out[0][ph] += std::abs(d->real());
                out[1][ph] += std::abs(d->imag());
            }
        }
    }
    return out;
}

// Mutual coupling rotation: the next phase (a->b, b->c, c->a) uses Z*e^{+i2pi/3},
// the previous phase uses Z*e^{-i2pi/3}.
Complex rotated_impedance(const Complex& z, Phase row, Phase col) {
    const int d = (index(col) - index(row) + 3) % 3;
    if (d == 0) return z;
    const double angle = (d == 1 ? 2.0 : -2.0) * M_PI / 3.0;
    return z * std::polar(1.0, angle);
}

}  // namespace

void DesignParams::validate() const {
    auto fraction = [](double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
    };
    fraction(lambda, "lambda");
    fraction(gamma, "gamma");
    if (!(beta_transformer > 0.0 && beta_transformer <= 1.0) || !(beta_line > 0.0 && beta_line <= 1.0)) {
        throw std::invalid_argument("beta must lie in (0, 1]");
    }
    if (!(v_min > 0.0 && v_min < v_max)) throw std::invalid_argument("voltage limits need 0 < v_min < v_max");
    if (!(octagon_scale > 0.0 && octagon_scale <= 1.0)) throw std::invalid_argument("octagon scale must lie in (0, 1]");
    if (!(cost_scale > 0.0)) throw std::invalid_argument("cost scale must be positive");
    if (microgrid_cost_per_kva && *microgrid_cost_per_kva < 0.0) throw std::invalid_argument("negative microgrid rate");
    if (microgrid_fixed_cost && *microgrid_fixed_cost < 0.0) throw std::invalid_argument("negative microgrid fixed cost");
}

double DesignParams::site_fixed_cost(const MicrogridSite& g) const {
    if (g.is_existing) return 0.0;
    return microgrid_fixed_cost ? *microgrid_fixed_cost : g.fixed_cost;
}

double DesignParams::site_rate(const MicrogridSite& g) const {
    if (g.is_existing) return 0.0;
    return microgrid_cost_per_kva ? *microgrid_cost_per_kva : g.variable_cost_per_kva;
}

OctagonGeometry octagon_points(double capacity, double scale) {
    if (!(capacity > 0.0)) throw std::invalid_argument("octagon capacity must be positive");
    OctagonGeometry g;
    g.capacity = capacity;
    g.radius = capacity * scale;
    g.diagonal = g.radius / std::sqrt(2.0);
    for (int k = 0; k < 8; ++k) {
        const double angle = M_PI / 8.0 + k * M_PI / 4.0;
        g.vertices[at(k)] = {capacity * std::cos(angle), capacity * std::sin(angle)};
    }
    return g;
}

double npv_capacity_cost(double rating, double rate, double eta, int years) {
    if (rating < 0.0 || eta < 0.0 || years < 0) throw std::invalid_argument("npv arguments must be nonnegative");
    double total = 0.0;
    double factor = 1.0;
    for (int n = 0; n <= years; ++n) {
        total += factor * rate * rating;
        factor /= 1.0 + eta;
    }
    return total;
}

double microgrid_step_cost(const Network& network, const DesignParams& params, const MicrogridSite& site) {
    const int phases = network.buses[at(site.bus_index)].phases.size();
    return params.site_rate(site) * site.step_kva * phases;
}

int Design::microgrid_count() const {
    return static_cast<int>(std::count_if(microgrid_steps.begin(), microgrid_steps.end(), [](int s) { return s > 0; }));
}

double Design::microgrid_kva(const Network& network) const {
    double total = 0.0;
    for (std::size_t k = 0; k < microgrid_steps.size(); ++k) {
        const auto& g = network.microgrids[k];
        total += microgrid_steps[k] * g.step_kva * network.buses[at(g.bus_index)].phases.size();
    }
    return total;
}

Design empty_design(const Network& network) {
    Design d;
    for (const auto& g : network.microgrids) d.microgrid_steps.push_back(g.is_existing ? g.max_steps : 0);
    return d;
}

Design full_design(const Network& network) {
    Design d;
    for (const auto& l : network.lines) {
        if (l.is_candidate()) d.built_lines.push_back(l.id);
        if (l.hardenable) d.hardened_lines.push_back(l.id);
    }
    for (const auto& g : network.microgrids) d.microgrid_steps.push_back(g.max_steps);
    return d;
}

CostBreakdown design_cost(const Network& network, const DesignParams& params, const Design& design) {
    CostBreakdown c;
    for (const auto& id : design.built_lines) {
        c.new_lines += network.lines[at(network.line_index(id).value())].construction_cost;
    }
    for (const auto& id : design.hardened_lines) {
        c.hardening += network.lines[at(network.line_index(id).value())].harden_cost;
    }
    for (std::size_t k = 0; k < design.microgrid_steps.size() && k < network.microgrids.size(); ++k) {
        const auto& g = network.microgrids[k];
        const int steps = design.microgrid_steps[k];
        if (steps <= 0) continue;
        c.microgrid_fixed += params.site_fixed_cost(g);
        c.microgrid_capacity += steps * microgrid_step_cost(network, params, g);
    }
    return c;
}

// ---------------------------------------------------------------------------
// MasterBuilder

MasterBuilder::MasterBuilder(const Network& network, const DesignParams& params, BuildOptions options)
    : net_(network), params_(params), options_(options), reduced_(aggregate_parallel_edges(network)) {
    params_.validate();
    add_first_stage();
}

std::string MasterBuilder::tag(int block) const {
    return ":s" + std::to_string(blocks_[at(block)].scenario_id);
}

bool MasterBuilder::always_closed(int line, int block) const {
    const auto& l = net_.lines[at(line)];
    return !l.is_candidate() && !l.has_switch && !blocks_[at(block)].damaged[at(line)];
}

void MasterBuilder::add_first_stage() {
    const double s = params_.cost_scale;
    for (const auto& l : net_.lines) {
        const int b = l.is_candidate() ? model_.add_binary("b:" + l.id, s * l.construction_cost)
                                       : model_.add_variable("b:" + l.id, 1.0, 1.0, VarKind::Binary);
        model_.set_branch_priority(b, kFirstStagePriority);
        first_.build.push_back(b);
        const int h = model_.add_binary("h:" + l.id, l.hardenable ? s * l.harden_cost : 0.0);
        if (!l.hardenable) model_.set_bounds(h, 0.0, 0.0);
        model_.set_branch_priority(h, kFirstStagePriority);
        first_.harden.push_back(h);
    }
    for (const auto& g : net_.microgrids) {
        std::vector<int> steps;
        const double step_cost = s * microgrid_step_cost(net_, params_, g);
        for (int m = 1; m <= g.max_steps; ++m) {
            const double cost = step_cost + (m == 1 ? s * params_.site_fixed_cost(g) : 0.0);
            const int u = model_.add_binary("u:" + g.id + ":" + std::to_string(m), cost);
            if (g.is_existing) model_.set_bounds(u, 1.0, 1.0);
            model_.set_branch_priority(u, kFirstStagePriority);
            if (!steps.empty()) {
                model_.add_constraint("ord:" + g.id + ":" + std::to_string(m), {{u, 1.0}, {steps.back(), -1.0}},
                                      Sense::LessEqual, 0.0);
            }
            steps.push_back(u);
        }
        first_.steps.push_back(std::move(steps));
    }
}

int MasterBuilder::allocate_scenario(const DamageScenario& scenario) {
    for (const auto& b : blocks_) {
        if (b.scenario_id == scenario.id) {
            throw std::invalid_argument("scenario " + std::to_string(scenario.id) + " added twice");
        }
    }
    ScenarioVars sv;
    sv.scenario_id = scenario.id;
    sv.damaged = damage_mask(net_, scenario);
    const std::string t = ":s" + std::to_string(scenario.id);
    const std::size_t nl = net_.lines.size();
    const std::size_t nb = net_.buses.size();

    // Per-phase flow bound valid for any forest operation: the flow on a line
    // is the net demand of one side of the cut, and generation is nonnegative.
    const auto bound = phase_demand_bounds(net_);
    sv.e.resize(nl);
    sv.e0.resize(nl);
    sv.e1.resize(nl);
    sv.bs.resize(nl);
    sv.hs.resize(nl);
    sv.p.assign(nl, {-1, -1, -1});
    sv.q.assign(nl, {-1, -1, -1});
    for (std::size_t k = 0; k < nl; ++k) {
        const auto& l = net_.lines[k];
        const std::string id = l.id + t;
        sv.e[k] = model_.add_binary("e:" + id);
        sv.e0[k] = model_.add_binary("e0:" + id);
        sv.e1[k] = model_.add_binary("e1:" + id);
        sv.bs[k] = model_.add_binary("bs:" + id);
        if (!l.is_candidate() && !l.has_switch) model_.set_bounds(sv.bs[k], 1.0, 1.0);
        sv.hs[k] = model_.add_binary("hs:" + id);
        if (!l.hardenable) model_.set_bounds(sv.hs[k], 0.0, 0.0);
        const double r = octagon_points(l.capacity_pu, params_.octagon_scale).radius;
        for (Phase ph : l.phases.list()) {
            const std::string name = l.id + ":" + phase_name(ph) + t;
            const double bp = std::min(r, bound[0][at(index(ph))]);
            const double bq = std::min(r, bound[1][at(index(ph))]);
            sv.p[k][at(index(ph))] = model_.add_continuous("P:" + name, -bp, bp);
            sv.q[k][at(index(ph))] = model_.add_continuous("Q:" + name, -bq, bq);
        }
    }

    double sub_p = 0.0, sub_q = 0.0;
    for (const auto& ld : net_.loads) {
        for (const auto& d : ld.demand_pu) {
            if (d) {
                sub_p += d->real();
                sub_q += std::abs(d->imag());
            }
        }
    }
    sv.v.assign(nb, {-1, -1, -1});
    sv.pg.assign(nb, {-1, -1, -1});
    sv.qg.assign(nb, {-1, -1, -1});
    for (std::size_t i = 0; i < nb; ++i) {
        const auto& bus = net_.buses[i];
        const bool has_sites = !net_.microgrids_at(static_cast<int>(i)).empty();
        for (Phase ph : bus.phases.list()) {
            const std::string name = bus.id + ":" + phase_name(ph) + t;
            const auto pi = at(index(ph));
            if (bus.is_substation) {
                sv.v[i][pi] = model_.add_continuous("V:" + name, bus.v_ref, bus.v_ref);
            } else {
                sv.v[i][pi] = model_.add_continuous("V:" + name, params_.v_min, params_.v_max);
            }
            if (bus.is_substation || has_sites) {
                const double up = has_sites ? kInf : sub_p;
                const double uq = has_sites ? kInf : sub_q;
                sv.pg[i][pi] = model_.add_continuous("Pg:" + name, 0.0, up);
                sv.qg[i][pi] = model_.add_continuous("Qg:" + name, 0.0, uq);
            }
        }
    }
    for (const auto& ld : net_.loads) sv.y.push_back(model_.add_binary("y:" + ld.id + t));
    sv.reduced.assign(reduced_.edges.size(), -1);
    blocks_.push_back(std::move(sv));
    return static_cast<int>(blocks_.size()) - 1;
}

int MasterBuilder::add_scenario(const DamageScenario& scenario) {
    const int b = allocate_scenario(scenario);
    for (int k = 0; k < static_cast<int>(net_.lines.size()); ++k) {
        add_switching_damage_constraints(k, b);
        add_thermal_direction_constraints(k, b);
        add_imbalance_constraints(k, b);
        add_voltage_constraints(k, b);
    }
    for (int i = 0; i < static_cast<int>(net_.buses.size()); ++i) add_load_generation_balance(i, b);
    add_connectivity_constraints(b);
    if (options_.resilience_rows) add_resilience_constraints(b);
    return b;
}

std::vector<int> MasterBuilder::add_thermal_direction_constraints(int line, int block) {
    const auto& l = net_.lines[at(line)];
    const auto& sv = blocks_[at(block)];
    const auto oct = octagon_points(l.capacity_pu, params_.octagon_scale);
    const double d = oct.diagonal;
    const std::string t = tag(block);
    const int e0 = sv.e0[at(line)];
    const int e1 = sv.e1[at(line)];
    std::vector<int> rows;
    rows.push_back(model_.add_constraint("dir:" + l.id + t, {{e0, 1.0}, {e1, 1.0}, {sv.e[at(line)], -1.0}},
                                         Sense::LessEqual, 0.0));
    for (Phase ph : l.phases.list()) {
        const std::string name = l.id + ":" + phase_name(ph) + t;
        const int p = sv.p[at(line)][at(index(ph))];
        const int q = sv.q[at(line)][at(index(ph))];
        // gated by the variable bound, which never exceeds r
        const double mp = model_.variable(p).upper;
        const double mq = model_.variable(q).upper;
        rows.push_back(model_.add_constraint("pmin:" + name, {{p, 1.0}, {e0, mp}}, Sense::GreaterEqual, 0.0));
        rows.push_back(model_.add_constraint("pmax:" + name, {{p, 1.0}, {e1, -mp}}, Sense::LessEqual, 0.0));
        rows.push_back(model_.add_constraint("qmin:" + name, {{q, 1.0}, {e0, mq}}, Sense::GreaterEqual, 0.0));
        rows.push_back(model_.add_constraint("qmax:" + name, {{q, 1.0}, {e1, -mq}}, Sense::LessEqual, 0.0));
        // tangency points (+-d, +-d): P0*P + Q0*Q <= P0^2 + Q0^2
        int k = 0;
        for (double sp : {1.0, -1.0}) {
            for (double sq : {1.0, -1.0}) {
                rows.push_back(model_.add_constraint("diag" + std::to_string(k++) + ":" + name,
                                                     {{p, sp * d}, {q, sq * d}}, Sense::LessEqual, 2.0 * d * d));
            }
        }
    }
    return rows;
}

std::vector<int> MasterBuilder::add_switching_damage_constraints(int line, int block) {
    const auto& l = net_.lines[at(line)];
    const auto& sv = blocks_[at(block)];
    const std::string t = tag(block);
    const auto k = at(line);
    std::vector<int> rows;
    if (sv.damaged[k] && !l.has_switch) {
        rows.push_back(model_.add_constraint("sw:" + l.id + t, {{sv.e[k], 1.0}, {sv.hs[k], -1.0}}, Sense::Equal, 0.0));
    } else {
        rows.push_back(model_.add_constraint("sw:" + l.id + t, {{sv.e[k], 1.0}, {sv.bs[k], -1.0}}, Sense::Equal, 0.0));
        // a hardened switched line keeps its switch after damage
        if (sv.damaged[k]) {
            rows.push_back(model_.add_constraint("dmg:" + l.id + t, {{sv.e[k], 1.0}, {sv.hs[k], -1.0}},
                                                 Sense::LessEqual, 0.0));
        }
    }
    rows.push_back(model_.add_constraint("lb:" + l.id + t, {{sv.bs[k], 1.0}, {first_.build[k], -1.0}},
                                         Sense::LessEqual, 0.0));
    rows.push_back(model_.add_constraint("lh:" + l.id + t, {{sv.hs[k], 1.0}, {first_.harden[k], -1.0}},
                                         Sense::Equal, 0.0));
    return rows;
}

std::vector<int> MasterBuilder::add_imbalance_constraints(int line, int block) {
    const auto& l = net_.lines[at(line)];
    std::vector<int> rows;
    const int n = l.phases.size();
    if (n < 2) return rows;
    const auto& sv = blocks_[at(block)];
    const std::string t = tag(block);
    const double beta = params_.beta(l);
    const double r = octagon_points(l.capacity_pu, params_.octagon_scale).radius;
    const double big_m = (2.0 + beta) * r;
    const int e0 = sv.e0[at(line)];
    const int e1 = sv.e1[at(line)];
    const double lo = (1.0 - beta) / n;
    const double hi = (1.0 + beta) / n;
    const auto phases = l.phases.list();
    for (int comp = 0; comp < 2; ++comp) {
        const auto& flow = comp == 0 ? sv.p[at(line)] : sv.q[at(line)];
        const std::string cname = comp == 0 ? "P" : "Q";
        for (Phase ph : phases) {
            const int f = flow[at(index(ph))];
            auto band = [&](double share) {
                std::vector<Term> terms{{f, 1.0}};
                for (Phase o : phases) terms.push_back({flow[at(index(o))], -share});
                return terms;
            };
            const std::string name = cname + ":" + l.id + ":" + phase_name(ph) + t;
            // Forward flow (e1): lo*sum <= f <= hi*sum. Reverse flow (e0)
            // mirrors the band because the sum is negative. The rows that
            // reduce to the axis limits when beta = 1 are omitted.
            auto gated = [&](std::vector<Term> terms, int gate, double sign) {
                terms.push_back({gate, sign * big_m});
                return terms;
            };
            if (beta < 1.0) {
                rows.push_back(model_.add_constraint("imb1" + name, gated(band(lo), e0, 1.0), Sense::GreaterEqual, 0.0));
                rows.push_back(model_.add_constraint("imb4" + name, gated(band(lo), e1, -1.0), Sense::LessEqual, 0.0));
            }
            rows.push_back(model_.add_constraint("imb2" + name, gated(band(hi), e0, -1.0), Sense::LessEqual, 0.0));
            rows.push_back(model_.add_constraint("imb3" + name, gated(band(hi), e1, 1.0), Sense::GreaterEqual, 0.0));
        }
    }
    return rows;
}

std::vector<int> MasterBuilder::add_load_generation_balance(int bus, int block) {
    const auto& b = net_.buses[at(bus)];
    const auto& sv = blocks_[at(block)];
    const std::string t = tag(block);
    std::vector<int> rows;
    const auto sites = net_.microgrids_at(bus);
    for (Phase ph : b.phases.list()) {
        const auto pi = at(index(ph));
        for (int comp = 0; comp < 2; ++comp) {
            std::vector<Term> terms;
            const auto& gen = comp == 0 ? sv.pg : sv.qg;
            const auto& flow = comp == 0 ? sv.p : sv.q;
            if (gen[at(bus)][pi] >= 0) terms.push_back({gen[at(bus)][pi], 1.0});
            for (int ld : net_.loads_at(bus)) {
                const auto& d = net_.loads[at(ld)].demand_pu[pi];
                if (!d) continue;
                const double v = comp == 0 ? d->real() : d->imag();
                terms.push_back({sv.y[at(ld)], -v});
            }
            for (std::size_t k = 0; k < net_.lines.size(); ++k) {
                const auto& l = net_.lines[k];
                if (!l.phases.contains(ph)) continue;
                if (l.from_bus == bus) terms.push_back({flow[k][pi], -1.0});
                if (l.to_bus == bus) terms.push_back({flow[k][pi], 1.0});
            }
            if (terms.empty()) continue;
            const std::string name = b.id + ":" + phase_name(ph) + t;
            rows.push_back(model_.add_constraint((comp == 0 ? "balP:" : "balQ:") + name, std::move(terms),
                                                 Sense::Equal, 0.0));
        }
        if (sites.empty()) continue;
        double sub_p = 0.0, sub_q = 0.0;
        if (b.is_substation) {
            for (const auto& ld : net_.loads) {
                for (const auto& d : ld.demand_pu) {
                    if (d) {
                        sub_p += d->real();
                        sub_q += std::abs(d->imag());
                    }
                }
            }
        }
        for (int comp = 0; comp < 2; ++comp) {
            const auto& gen = comp == 0 ? sv.pg : sv.qg;
            std::vector<Term> terms{{gen[at(bus)][pi], 1.0}};
            for (int g : sites) {
                for (int u : first_.steps[at(g)]) terms.push_back({u, -net_.microgrids[at(g)].step_pu});
            }
            const std::string name = b.id + ":" + phase_name(ph) + t;
            rows.push_back(model_.add_constraint((comp == 0 ? "genP:" : "genQ:") + name, std::move(terms),
                                                 Sense::LessEqual, comp == 0 ? sub_p : sub_q));
        }
    }
    return rows;
}

std::vector<int> MasterBuilder::add_connectivity_constraints(int block) {
    const auto& sv = blocks_[at(block)];
    const std::string t = tag(block);
    std::vector<int> rows;
    for (std::size_t k = 0; k < net_.loads.size(); ++k) {
        const auto& ld = net_.loads[k];
        if (net_.buses[at(ld.bus_index)].is_substation) continue;
        const bool any = std::any_of(ld.demand_pu.begin(), ld.demand_pu.end(),
                                     [](const auto& d) { return d && std::abs(*d) > 0.0; });
        if (!any) continue;
        std::vector<Term> terms{{sv.y[k], 1.0}};
        for (std::size_t j = 0; j < net_.lines.size(); ++j) {
            const auto& l = net_.lines[j];
            if (l.from_bus == ld.bus_index || l.to_bus == ld.bus_index) terms.push_back({sv.e[j], -1.0});
        }
        for (int g : net_.microgrids_at(ld.bus_index)) {
            if (!first_.steps[at(g)].empty()) terms.push_back({first_.steps[at(g)].front(), -1.0});
        }
        rows.push_back(model_.add_constraint("conn:" + ld.id + t, std::move(terms), Sense::LessEqual, 0.0));
    }
    return rows;
}

std::vector<int> MasterBuilder::add_resilience_constraints(int block) {
    auto& sv = blocks_[at(block)];
    const std::string t = tag(block);
    std::vector<int> rows;
    std::vector<Term> critical, total;
    double critical_demand = 0.0, total_demand = 0.0;
    for (std::size_t k = 0; k < net_.loads.size(); ++k) {
        const auto& ld = net_.loads[k];
        const double d = ld.real_demand_pu();
        total.push_back({sv.y[k], d});
        total_demand += d;
        if (ld.is_critical) {
            critical.push_back({sv.y[k], d});
            critical_demand += d;
        }
    }
    if (!critical.empty()) {
        sv.critical_row = model_.add_constraint("crit" + t, critical, Sense::GreaterEqual, params_.lambda * critical_demand);
        rows.push_back(sv.critical_row);
    }
    if (!total.empty()) {
        sv.total_row = model_.add_constraint("serve" + t, total, Sense::GreaterEqual, params_.gamma * total_demand);
        rows.push_back(sv.total_row);
    }
    return rows;
}

std::vector<int> MasterBuilder::add_voltage_constraints(int line, int block) {
    const auto& l = net_.lines[at(line)];
    const auto& sv = blocks_[at(block)];
    const std::string t = tag(block);
    const double big_m = params_.big_m();
    const int e = sv.e[at(line)];
    const bool closed = always_closed(line, block);
    std::vector<int> rows;
    for (Phase k : l.phases.list()) {
        std::vector<Term> terms{{sv.v[at(l.to_bus)][at(index(k))], 1.0}, {sv.v[at(l.from_bus)][at(index(k))], -1.0}};
        for (Phase m : l.phases.list()) {
            const Complex z = rotated_impedance(*l.impedance_pu[pair_index(k, m)], k, m);
            terms.push_back({sv.p[at(line)][at(index(m))], 2.0 * z.real()});
            terms.push_back({sv.q[at(line)][at(index(m))], 2.0 * z.imag()});
        }
        const std::string name = l.id + ":" + phase_name(k) + t;
        if (closed) {
            rows.push_back(model_.add_constraint("volt:" + name, std::move(terms), Sense::Equal, 0.0));
            continue;
        }
        auto upper = terms;
        upper.push_back({e, big_m});
        rows.push_back(model_.add_constraint("vhi:" + name, std::move(upper), Sense::LessEqual, big_m));
        terms.push_back({e, -big_m});
        rows.push_back(model_.add_constraint("vlo:" + name, std::move(terms), Sense::GreaterEqual, -big_m));
    }
    return rows;
}

int MasterBuilder::add_cycle_cut(int block, const std::vector<int>& cycle_edges) {
    auto& sv = blocks_.at(at(block));
    if (cycle_edges.size() < 3) throw std::invalid_argument("a cycle needs at least three reduced edges");
    std::map<int, int> degree;
    std::vector<int> sorted = cycle_edges;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("cycle repeats an edge");
    }
    for (int ed : cycle_edges) {
        if (ed < 0 || ed >= static_cast<int>(reduced_.edges.size())) throw std::invalid_argument("unknown reduced edge");
        ++degree[reduced_.edges[at(ed)].u];
        ++degree[reduced_.edges[at(ed)].v];
    }
    for (const auto& [node, deg] : degree) {
        if (deg != 2) throw std::invalid_argument("edge set is not a simple cycle");
    }
    if (degree.size() != cycle_edges.size()) throw std::invalid_argument("edge set is not a single cycle");
    // connectivity: walk the cycle
    {
        std::vector<char> used(cycle_edges.size(), 0);
        int node = reduced_.edges[at(cycle_edges[0])].u;
        std::size_t walked = 0;
        for (bool moved = true; moved;) {
            moved = false;
            for (std::size_t i = 0; i < cycle_edges.size(); ++i) {
                const auto& ed = reduced_.edges[at(cycle_edges[i])];
                if (used[i] || (ed.u != node && ed.v != node)) continue;
                used[i] = 1;
                node = ed.u == node ? ed.v : ed.u;
                ++walked;
                moved = true;
                break;
            }
        }
        if (walked != cycle_edges.size()) throw std::invalid_argument("edge set is not a single cycle");
    }

    const std::string t = tag(block);
    std::vector<Term> terms;
    for (int ed : cycle_edges) {
        if (sv.reduced[at(ed)] < 0) {
            const auto& edge = reduced_.edges[at(ed)];
            const std::string name = net_.buses[at(edge.u)].id + "~" + net_.buses[at(edge.v)].id + t;
            const int bbar = model_.add_binary("bbar:" + name);
            sv.reduced[at(ed)] = bbar;
            for (int k : edge.lines) {
                model_.add_constraint("link:" + net_.lines[at(k)].id + t, {{sv.e[at(k)], 1.0}, {bbar, -1.0}},
                                      Sense::LessEqual, 0.0);
            }
        }
        terms.push_back({sv.reduced[at(ed)], 1.0});
    }
    ++cuts_;
    return model_.add_constraint("cyc" + std::to_string(cuts_) + t, std::move(terms), Sense::LessEqual,
                                 static_cast<double>(cycle_edges.size()) - 1.0);
}

void MasterBuilder::fix_first_stage(const Design& design) {
    for (std::size_t k = 0; k < net_.lines.size(); ++k) {
        const auto& l = net_.lines[k];
        if (l.is_candidate()) {
            const bool built = std::find(design.built_lines.begin(), design.built_lines.end(), l.id) !=
                               design.built_lines.end();
            model_.set_bounds(first_.build[k], built ? 1.0 : 0.0, built ? 1.0 : 0.0);
        }
        const bool hard = l.hardenable && std::find(design.hardened_lines.begin(), design.hardened_lines.end(),
                                                    l.id) != design.hardened_lines.end();
        model_.set_bounds(first_.harden[k], hard ? 1.0 : 0.0, hard ? 1.0 : 0.0);
    }
    for (std::size_t g = 0; g < net_.microgrids.size(); ++g) {
        const int steps = g < design.microgrid_steps.size() ? design.microgrid_steps[g] : 0;
        for (std::size_t m = 0; m < first_.steps[g].size(); ++m) {
            const double v = static_cast<int>(m) < steps || net_.microgrids[g].is_existing ? 1.0 : 0.0;
            model_.set_bounds(first_.steps[g][m], v, v);
        }
    }
}

Design MasterBuilder::extract_design(const milp::Solution& solution) const {
    Design d;
    for (std::size_t k = 0; k < net_.lines.size(); ++k) {
        const auto& l = net_.lines[k];
        if (l.is_candidate() && solution.value(first_.build[k]) > 0.5) d.built_lines.push_back(l.id);
        if (l.hardenable && solution.value(first_.harden[k]) > 0.5) d.hardened_lines.push_back(l.id);
    }
    for (const auto& steps : first_.steps) {
        int count = 0;
        for (int u : steps) count += solution.value(u) > 0.5 ? 1 : 0;
        d.microgrid_steps.push_back(count);
    }
    d.cost = design_cost(net_, params_, d);
    return d;
}

OperationState MasterBuilder::extract_operation(const milp::Solution& solution, int block) const {
    const auto& sv = blocks_.at(at(block));
    OperationState st;
    st.scenario_id = sv.scenario_id;
    st.damaged = sv.damaged;
    const std::size_t nl = net_.lines.size();
    const std::size_t nb = net_.buses.size();
    st.closed.assign(nl, 0);
    st.p.assign(nl, {0.0, 0.0, 0.0});
    st.q.assign(nl, {0.0, 0.0, 0.0});
    for (std::size_t k = 0; k < nl; ++k) {
        st.closed[k] = solution.value(sv.e[k]) > 0.5 ? 1 : 0;
        for (std::size_t ph = 0; ph < 3; ++ph) {
            if (sv.p[k][ph] >= 0) st.p[k][ph] = solution.value(sv.p[k][ph]);
            if (sv.q[k][ph] >= 0) st.q[k][ph] = solution.value(sv.q[k][ph]);
        }
    }
    st.v.assign(nb, {});
    st.pg.assign(nb, {0.0, 0.0, 0.0});
    st.qg.assign(nb, {0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t ph = 0; ph < 3; ++ph) {
            if (sv.v[i][ph] >= 0) st.v[i][ph] = solution.value(sv.v[i][ph]);
            if (sv.pg[i][ph] >= 0) st.pg[i][ph] = solution.value(sv.pg[i][ph]);
            if (sv.qg[i][ph] >= 0) st.qg[i][ph] = solution.value(sv.qg[i][ph]);
        }
    }
    for (int y : sv.y) st.served.push_back(solution.value(y) > 0.5 ? 1 : 0);
    return st;
}

MasterBuilder build_master(const Network& network, const std::vector<DamageScenario>& scenarios,
                           const DesignParams& params) {
    if (scenarios.empty()) throw std::invalid_argument("master needs at least one scenario");
    MasterBuilder mb(network, params);
    for (const auto& s : scenarios) mb.add_scenario(s);
    return mb;
}

ModelSize model_size(const Network& network, const std::vector<DamageScenario>& scenarios,
                     const DesignParams& params) {
    ModelSize sz;
    const int nl = static_cast<int>(network.lines.size());
    const int nloads = static_cast<int>(network.loads.size());
    int steps = 0;
    for (const auto& g : network.microgrids) {
        steps += g.max_steps;
        sz.constraints += g.max_steps - 1;
    }
    sz.variables += 2 * nl + steps;
    sz.binaries += 2 * nl + steps;

    int line_phase_sum = 0, imbalance_rows = 0;
    for (const auto& l : network.lines) {
        line_phase_sum += l.phases.size();
        if (l.phases.size() >= 2) imbalance_rows += 2 * l.phases.size() * (params.beta(l) < 1.0 ? 4 : 2);
    }
    int bus_phase_sum = 0, gen_phase_sum = 0, site_phase_sum = 0, balance_rows = 0;
    for (int i = 0; i < static_cast<int>(network.buses.size()); ++i) {
        const auto& b = network.buses[static_cast<std::size_t>(i)];
        const bool sites = !network.microgrids_at(i).empty();
        bus_phase_sum += b.phases.size();
        if (b.is_substation || sites) gen_phase_sum += b.phases.size();
        if (sites) site_phase_sum += b.phases.size();
        for (Phase ph : b.phases.list()) {
            bool used = b.is_substation || sites;
            for (int ld : network.loads_at(i)) used = used || network.loads[static_cast<std::size_t>(ld)].phases().contains(ph);
            for (const auto& l : network.lines) {
                used = used || ((l.from_bus == i || l.to_bus == i) && l.phases.contains(ph));
            }
            if (used) balance_rows += 2;
        }
    }
    const bool any_critical = network.critical_load_count() > 0;
    int connectivity_rows = 0;
    for (const auto& ld : network.loads) {
        const bool any = std::any_of(ld.demand_pu.begin(), ld.demand_pu.end(),
                                     [](const auto& d) { return d && std::abs(*d) > 0.0; });
        if (any && !network.buses[static_cast<std::size_t>(ld.bus_index)].is_substation) ++connectivity_rows;
    }

    for (const auto& s : scenarios) {
        const auto damaged = damage_mask(network, s);
        sz.variables += 5 * nl + 2 * line_phase_sum + bus_phase_sum + 2 * gen_phase_sum + nloads;
        sz.binaries += 5 * nl + nloads;
        int voltage_rows = 0;  // plus damage-dependent switching rows
        for (std::size_t k = 0; k < network.lines.size(); ++k) {
            const auto& l = network.lines[k];
            const bool closed = !l.is_candidate() && !l.has_switch && !damaged[k];
            voltage_rows += l.phases.size() * (closed ? 1 : 2);
            if (damaged[k] && l.has_switch) ++voltage_rows;  // extra switching row
        }
        sz.constraints += 4 * nl + 8 * line_phase_sum + imbalance_rows + voltage_rows + balance_rows +
                          2 * site_phase_sum + connectivity_rows + (any_critical ? 1 : 0) + (nloads > 0 ? 1 : 0);
    }
    return sz;
}

}  // namespace rdt
