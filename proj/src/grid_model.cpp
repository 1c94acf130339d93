#include "rdt/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rdt {

using json = nlohmann::ordered_json;

char phase_letter(Phase p) { return static_cast<char>('A' + index(p)); }

std::vector<Phase> PhaseSet::list() const {
    std::vector<Phase> out;
    for (Phase p : kAllPhases) {
        if (contains(p)) out.push_back(p);
    }
    return out;
}

std::string PhaseSet::str() const {
    std::string s;
    for (Phase p : list()) s += phase_letter(p);
    return s;
}

namespace {

void require_bases(const Bases& b) {
    if (!(b.kva > 0.0) || !(b.kv > 0.0)) throw NetworkError("per-unit bases must be positive");
}

double impedance_base_ohm(const Bases& b) { return 1000.0 * b.kv * b.kv / b.kva; }

}  // namespace

double to_per_unit(double value, Quantity kind, const Bases& bases) {
    require_bases(bases);
    switch (kind) {
        case Quantity::Power: return value / bases.kva;
        case Quantity::Impedance: return value / impedance_base_ohm(bases);
        case Quantity::Voltage: return value / bases.kv;
    }
    return value;
}

double from_per_unit(double value, Quantity kind, const Bases& bases) {
    require_bases(bases);
    switch (kind) {
        case Quantity::Power: return value * bases.kva;
        case Quantity::Impedance: return value * impedance_base_ohm(bases);
        case Quantity::Voltage: return value * bases.kv;
    }
    return value;
}

PhaseSet Load::phases() const {
    PhaseSet s;
    for (Phase p : kAllPhases) {
        if (demand_kva[static_cast<std::size_t>(index(p))]) s.insert(p);
    }
    return s;
}

double Load::real_demand_pu() const {
    double total = 0.0;
    for (const auto& d : demand_pu) {
        if (d) total += d->real();
    }
    return total;
}

std::optional<int> Network::bus_index(std::string_view id) const {
    const auto it = bus_by_id_.find(std::string(id));
    if (it == bus_by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Network::line_index(std::string_view id) const {
    const auto it = line_by_id_.find(std::string(id));
    if (it == line_by_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> Network::substations() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(buses.size()); ++i) {
        if (buses[static_cast<std::size_t>(i)].is_substation) out.push_back(i);
    }
    return out;
}

std::vector<int> Network::loads_at(int bus) const { return loads_at_.at(static_cast<std::size_t>(bus)); }

std::vector<int> Network::microgrids_at(int bus) const {
    return microgrids_at_.at(static_cast<std::size_t>(bus));
}

double Network::total_real_demand_pu() const {
    double t = 0.0;
    for (const auto& l : loads) t += l.real_demand_pu();
    return t;
}

double Network::critical_real_demand_pu() const {
    double t = 0.0;
    for (const auto& l : loads) {
        if (l.is_critical) t += l.real_demand_pu();
    }
    return t;
}

int Network::critical_load_count() const {
    return static_cast<int>(std::count_if(loads.begin(), loads.end(), [](const Load& l) { return l.is_critical; }));
}

void Network::finalize() {
    require_bases(bases);
    bus_by_id_.clear();
    line_by_id_.clear();
    for (int i = 0; i < static_cast<int>(buses.size()); ++i) {
        auto& b = buses[static_cast<std::size_t>(i)];
        if (b.id.empty()) throw NetworkError("bus with empty id");
        if (!bus_by_id_.emplace(b.id, i).second) throw NetworkError("duplicate bus id: " + b.id);
        if (b.phases.empty()) throw NetworkError("bus " + b.id + ": empty phase set");
        if (b.is_substation && !(b.v_ref > 0.0)) throw NetworkError("bus " + b.id + ": v_ref must be positive");
    }
    if (substations().empty()) throw NetworkError("network has no substation bus");

    for (int k = 0; k < static_cast<int>(lines.size()); ++k) {
        auto& l = lines[static_cast<std::size_t>(k)];
        const std::string where = "line " + l.id;
        if (l.id.empty()) throw NetworkError("line with empty id");
        if (!line_by_id_.emplace(l.id, k).second) throw NetworkError("duplicate line id: " + l.id);
        const auto f = bus_index(l.from);
        const auto t = bus_index(l.to);
        if (!f) throw NetworkError(where + " references unknown bus " + l.from);
        if (!t) throw NetworkError(where + " references unknown bus " + l.to);
        if (*f == *t) throw NetworkError(where + " is a self loop");
        l.from_bus = *f;
        l.to_bus = *t;
        if (l.phases.empty()) throw NetworkError(where + ": empty phase set");
        if (!l.phases.subset_of(buses[static_cast<std::size_t>(*f)].phases) ||
            !l.phases.subset_of(buses[static_cast<std::size_t>(*t)].phases)) {
            throw NetworkError(where + ": phases " + l.phases.str() + " not present at both endpoints");
        }
        if (!(l.capacity_kva > 0.0)) throw NetworkError(where + ": capacity must be positive");
        if (l.is_candidate()) {
            if (!l.has_switch) throw NetworkError(where + ": candidate lines carry a switch");
            if (l.damageable) throw NetworkError(where + ": candidate lines are not damageable");
            if (l.hardenable) throw NetworkError(where + ": candidate lines are not hardenable");
        } else if (l.construction_cost != 0.0) {
            throw NetworkError(where + ": existing lines have zero construction cost");
        }
        if (l.construction_cost < 0.0 || l.harden_cost < 0.0) throw NetworkError(where + ": negative cost");

        if (l.length_km) {
            if (*l.length_km < 0.0) throw NetworkError(where + ": negative length");
            l.length = *l.length_km;
        } else {
            const auto& a = buses[static_cast<std::size_t>(*f)].coords;
            const auto& b = buses[static_cast<std::size_t>(*t)].coords;
            if (!a || !b) throw NetworkError(where + ": no length and endpoint coordinates missing");
            l.length = std::hypot(a->first - b->first, a->second - b->second) / 1000.0;
        }
        for (Phase r : kAllPhases) {
            for (Phase c : kAllPhases) {
                const auto idx = pair_index(r, c);
                const bool declared = l.phases.contains(r) && l.phases.contains(c);
                if (declared != l.impedance_ohm_per_km[idx].has_value()) {
                    throw NetworkError(where + ": impedance entry " + phase_letter(r) + phase_letter(c) +
                                       (declared ? " missing" : " given for an undeclared phase"));
                }
                if (declared) {
                    const Complex z = *l.impedance_ohm_per_km[idx] * l.length;
                    l.impedance_pu[idx] = Complex(to_per_unit(z.real(), Quantity::Impedance, bases),
                                                  to_per_unit(z.imag(), Quantity::Impedance, bases));
                } else {
                    l.impedance_pu[idx].reset();
                }
            }
        }
        l.capacity_pu = to_per_unit(l.capacity_kva, Quantity::Power, bases);
    }

    loads_at_.assign(buses.size(), {});
    std::set<std::string> load_ids;
    for (int k = 0; k < static_cast<int>(loads.size()); ++k) {
        auto& ld = loads[static_cast<std::size_t>(k)];
        if (!load_ids.insert(ld.id).second) throw NetworkError("duplicate load id: " + ld.id);
        const auto b = bus_index(ld.bus);
        if (!b) throw NetworkError("load " + ld.id + " references unknown bus " + ld.bus);
        ld.bus_index = *b;
        if (ld.phases().empty()) throw NetworkError("load " + ld.id + ": no demand");
        if (!ld.phases().subset_of(buses[static_cast<std::size_t>(*b)].phases)) {
            throw NetworkError("load " + ld.id + ": phases not present at bus " + ld.bus);
        }
        for (std::size_t p = 0; p < 3; ++p) {
            if (!ld.demand_kva[p]) {
                ld.demand_pu[p].reset();
                continue;
            }
            if (ld.demand_kva[p]->real() < 0.0) throw NetworkError("load " + ld.id + ": negative real demand");
            ld.demand_pu[p] = Complex(to_per_unit(ld.demand_kva[p]->real(), Quantity::Power, bases),
                                      to_per_unit(ld.demand_kva[p]->imag(), Quantity::Power, bases));
        }
        loads_at_[static_cast<std::size_t>(*b)].push_back(k);
    }

    microgrids_at_.assign(buses.size(), {});
    std::set<std::string> mg_ids;
    for (int k = 0; k < static_cast<int>(microgrids.size()); ++k) {
        auto& g = microgrids[static_cast<std::size_t>(k)];
        const std::string where = "microgrid " + g.id;
        if (!mg_ids.insert(g.id).second) throw NetworkError("duplicate microgrid id: " + g.id);
        const auto b = bus_index(g.bus);
        if (!b) throw NetworkError(where + " references unknown bus " + g.bus);
        g.bus_index = *b;
        if (!(g.step_kva > 0.0)) throw NetworkError(where + ": step capacity must be positive");
        if (g.max_steps < 1) throw NetworkError(where + ": max_steps must be at least 1");
        if (g.is_existing && (g.fixed_cost != 0.0 || g.variable_cost_per_kva != 0.0)) {
            throw NetworkError(where + ": existing microgrids have zero cost");
        }
        if (g.fixed_cost < 0.0 || g.variable_cost_per_kva < 0.0) throw NetworkError(where + ": negative cost");
        g.step_pu = to_per_unit(g.step_kva, Quantity::Power, bases);
        microgrids_at_[static_cast<std::size_t>(*b)].push_back(k);
    }

    // every bus is fed from some substation through existing lines
    std::vector<std::vector<int>> adj(buses.size());
    for (const auto& l : lines) {
        if (l.is_candidate()) continue;
        adj[static_cast<std::size_t>(l.from_bus)].push_back(l.to_bus);
        adj[static_cast<std::size_t>(l.to_bus)].push_back(l.from_bus);
    }
    std::vector<char> seen(buses.size(), 0);
    std::queue<int> q;
    for (int s : substations()) {
        seen[static_cast<std::size_t>(s)] = 1;
        q.push(s);
    }
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                q.push(v);
            }
        }
    }
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (!seen[i]) throw NetworkError("bus " + buses[i].id + " is not connected to a substation by existing lines");
    }
}

// ---------------------------------------------------------------------------
// JSON document

namespace {

class Reader {
public:
    explicit Reader(std::string where) : where_(std::move(where)) {}

    [[noreturn]] void fail(const std::string& what) const { throw NetworkError(where_ + ": " + what); }

    void only_keys(const json& j, std::initializer_list<const char*> keys) const {
        if (!j.is_object()) fail("expected an object");
        for (const auto& [k, v] : j.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
                fail("unknown field '" + k + "'");
            }
        }
    }
    const json& need(const json& j, const char* key) const {
        if (!j.contains(key)) fail(std::string("missing field '") + key + "'");
        return j.at(key);
    }
    std::string str(const json& j, const char* key) const {
        const auto& v = need(j, key);
        if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }
    double num(const json& j, const char* key) const {
        const auto& v = need(j, key);
        if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
        return v.get<double>();
    }
    double num_or(const json& j, const char* key, double fallback) const {
        return j.contains(key) ? num(j, key) : fallback;
    }
    bool flag_or(const json& j, const char* key, bool fallback) const {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
        return j.at(key).get<bool>();
    }
    PhaseSet phases(const json& j, const char* key) const {
        const std::string s = str(j, key);
        PhaseSet out;
        for (char c : s) {
            if (c < 'A' || c > 'C') fail("invalid phase letter in '" + s + "'");
            const Phase p = static_cast<Phase>(c - 'A');
            if (out.contains(p)) fail("repeated phase in '" + s + "'");
            out.insert(p);
        }
        return out;
    }
    Complex complex(const json& j) const {
        only_keys(j, {"re", "im"});
        return {num(j, "re"), num(j, "im")};
    }

private:
    std::string where_;
};

json complex_json(const Complex& c) {
    json j;
    j["re"] = c.real();
    j["im"] = c.imag();
    return j;
}

std::string element_id(const json& j, const char* kind, std::size_t pos) {
    if (j.is_object() && j.contains("id") && j.at("id").is_string()) {
        return std::string(kind) + " " + j.at("id").get<std::string>();
    }
    return std::string(kind) + " #" + std::to_string(pos);
}

const json& array_section(const json& doc, const char* key, bool required) {
    static const json empty = json::array();
    if (!doc.contains(key)) {
        if (required) throw NetworkError(std::string("document: missing section '") + key + "'");
        return empty;
    }
    const auto& a = doc.at(key);
    if (!a.is_array()) throw NetworkError(std::string("document: section '") + key + "' must be an array");
    return a;
}

}  // namespace

Network load_network(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw NetworkError(std::string("document: malformed JSON: ") + e.what());
    }
    Reader top("document");
    top.only_keys(doc, {"name", "bases", "buses", "lines", "loads", "microgrids"});

    Network net;
    if (doc.contains("name")) net.name = top.str(doc, "name");
    {
        Reader r("bases");
        const auto& b = top.need(doc, "bases");
        r.only_keys(b, {"kva", "kv"});
        net.bases = {r.num(b, "kva"), r.num(b, "kv")};
    }

    const auto& buses = array_section(doc, "buses", true);
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const auto& j = buses[i];
        Reader r(element_id(j, "bus", i));
        r.only_keys(j, {"id", "phases", "substation", "v_ref", "coords"});
        Bus b;
        b.id = r.str(j, "id");
        b.phases = r.phases(j, "phases");
        b.is_substation = r.flag_or(j, "substation", false);
        b.v_ref = r.num_or(j, "v_ref", 1.0);
        if (j.contains("coords") && !j.at("coords").is_null()) {
            const auto& c = j.at("coords");
            if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
                r.fail("coords must be [x, y]");
            }
            b.coords = std::make_pair(c[0].get<double>(), c[1].get<double>());
        }
        net.buses.push_back(std::move(b));
    }

    const auto& lines = array_section(doc, "lines", true);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& j = lines[i];
        Reader r(element_id(j, "line", i));
        r.only_keys(j, {"id", "from", "to", "phases", "length_km", "impedance_ohm_per_km", "capacity_kva",
                        "transformer", "switch", "status", "damageable", "hardenable", "construction_cost",
                        "harden_cost"});
        Line l;
        l.id = r.str(j, "id");
        l.from = r.str(j, "from");
        l.to = r.str(j, "to");
        l.phases = r.phases(j, "phases");
        if (j.contains("length_km") && !j.at("length_km").is_null()) l.length_km = r.num(j, "length_km");
        const auto& z = r.need(j, "impedance_ohm_per_km");
        if (!z.is_array() || z.size() != 9) r.fail("impedance_ohm_per_km must have 9 entries");
        for (std::size_t k = 0; k < 9; ++k) {
            if (!z[k].is_null()) l.impedance_ohm_per_km[k] = r.complex(z[k]);
        }
        l.capacity_kva = r.num(j, "capacity_kva");
        const std::string status = j.contains("status") ? r.str(j, "status") : "existing";
        if (status == "existing") {
            l.status = LineStatus::Existing;
        } else if (status == "candidate") {
            l.status = LineStatus::Candidate;
        } else {
            r.fail("status must be 'existing' or 'candidate'");
        }
        const bool cand = l.is_candidate();
        l.is_transformer = r.flag_or(j, "transformer", false);
        l.has_switch = r.flag_or(j, "switch", cand);
        l.damageable = r.flag_or(j, "damageable", !cand);
        l.hardenable = r.flag_or(j, "hardenable", l.damageable);
        l.construction_cost = r.num_or(j, "construction_cost", 0.0);
        l.harden_cost = r.num_or(j, "harden_cost", 0.0);
        net.lines.push_back(std::move(l));
    }

    const auto& loads = array_section(doc, "loads", false);
    for (std::size_t i = 0; i < loads.size(); ++i) {
        const auto& j = loads[i];
        Reader r(element_id(j, "load", i));
        r.only_keys(j, {"id", "bus", "demand_kva", "critical"});
        Load ld;
        ld.id = r.str(j, "id");
        ld.bus = r.str(j, "bus");
        const auto& d = r.need(j, "demand_kva");
        r.only_keys(d, {"A", "B", "C"});
        for (Phase p : kAllPhases) {
            const std::string key(1, phase_letter(p));
            if (d.contains(key)) ld.demand_kva[static_cast<std::size_t>(index(p))] = r.complex(d.at(key));
        }
        ld.is_critical = r.flag_or(j, "critical", false);
        net.loads.push_back(std::move(ld));
    }

    const auto& mgs = array_section(doc, "microgrids", false);
    for (std::size_t i = 0; i < mgs.size(); ++i) {
        const auto& j = mgs[i];
        Reader r(element_id(j, "microgrid", i));
        r.only_keys(j, {"id", "bus", "step_kva", "max_steps", "fixed_cost", "variable_cost_per_kva", "existing"});
        MicrogridSite g;
        g.id = r.str(j, "id");
        g.bus = r.str(j, "bus");
        g.step_kva = r.num(j, "step_kva");
        const auto& steps = r.need(j, "max_steps");
        if (!steps.is_number_integer()) r.fail("max_steps must be an integer");
        g.max_steps = steps.get<int>();
        g.fixed_cost = r.num_or(j, "fixed_cost", 0.0);
        g.variable_cost_per_kva = r.num_or(j, "variable_cost_per_kva", 0.0);
        g.is_existing = r.flag_or(j, "existing", false);
        net.microgrids.push_back(std::move(g));
    }

    net.finalize();
    return net;
}

Network load_network_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw NetworkError("cannot open network file " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return load_network(buf.str());
}

std::string serialize(const Network& net) {
    json doc;
    if (!net.name.empty()) doc["name"] = net.name;
    doc["bases"] = {{"kva", net.bases.kva}, {"kv", net.bases.kv}};
    doc["buses"] = json::array();
    for (const auto& b : net.buses) {
        json j;
        j["id"] = b.id;
        j["phases"] = b.phases.str();
        j["substation"] = b.is_substation;
        j["v_ref"] = b.v_ref;
        j["coords"] = b.coords ? json::array({b.coords->first, b.coords->second}) : json(nullptr);
        doc["buses"].push_back(std::move(j));
    }
    doc["lines"] = json::array();
    for (const auto& l : net.lines) {
        json j;
        j["id"] = l.id;
        j["from"] = l.from;
        j["to"] = l.to;
        j["phases"] = l.phases.str();
        j["length_km"] = l.length_km ? json(*l.length_km) : json(nullptr);
        json z = json::array();
        for (const auto& e : l.impedance_ohm_per_km) z.push_back(e ? complex_json(*e) : json(nullptr));
        j["impedance_ohm_per_km"] = std::move(z);
        j["capacity_kva"] = l.capacity_kva;
        j["transformer"] = l.is_transformer;
        j["switch"] = l.has_switch;
        j["status"] = l.is_candidate() ? "candidate" : "existing";
        j["damageable"] = l.damageable;
        j["hardenable"] = l.hardenable;
        j["construction_cost"] = l.construction_cost;
        j["harden_cost"] = l.harden_cost;
        doc["lines"].push_back(std::move(j));
    }
    doc["loads"] = json::array();
    for (const auto& ld : net.loads) {
        json j;
        j["id"] = ld.id;
        j["bus"] = ld.bus;
        json d = json::object();
        for (Phase p : kAllPhases) {
            const auto& v = ld.demand_kva[static_cast<std::size_t>(index(p))];
            if (v) d[std::string(1, phase_letter(p))] = complex_json(*v);
        }
        j["demand_kva"] = std::move(d);
        j["critical"] = ld.is_critical;
        doc["loads"].push_back(std::move(j));
    }
    doc["microgrids"] = json::array();
    for (const auto& g : net.microgrids) {
        json j;
        j["id"] = g.id;
        j["bus"] = g.bus;
        j["step_kva"] = g.step_kva;
        j["max_steps"] = g.max_steps;
        j["fixed_cost"] = g.fixed_cost;
        j["variable_cost_per_kva"] = g.variable_cost_per_kva;
        j["existing"] = g.is_existing;
        doc["microgrids"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

ReducedGraph aggregate_parallel_edges(const Network& net) {
    ReducedGraph g;
    g.num_nodes = static_cast<int>(net.buses.size());
    g.edge_of_line.assign(net.lines.size(), -1);
    std::map<std::pair<int, int>, int> by_pair;
    for (int k = 0; k < static_cast<int>(net.lines.size()); ++k) {
        const auto& l = net.lines[static_cast<std::size_t>(k)];
        const auto key = std::minmax(l.from_bus, l.to_bus);
        auto [it, inserted] = by_pair.emplace(key, static_cast<int>(g.edges.size()));
        if (inserted) g.edges.push_back({key.first, key.second, {}});
        g.edges[static_cast<std::size_t>(it->second)].lines.push_back(k);
        g.edge_of_line[static_cast<std::size_t>(k)] = it->second;
    }
    return g;
}

}  // namespace rdt
