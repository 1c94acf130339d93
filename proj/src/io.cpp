#include "rdt/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

namespace rdt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, _] : j.items()) {
        bool ok = false;
        for (const char* key : keys) ok = ok || k == key;
        if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
    }
}

double number(const json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
    return j.at(key).get<double>();
}

std::vector<double> number_list(const json& j, const char* key, const std::string& where) {
    std::vector<double> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw ConfigError(where + "." + key + " must be an array");
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) throw ConfigError(where + "." + key + " must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    fs::path p(path);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    return p.lexically_normal().string();
}

double kilo(double dollars) { return dollars * 1e-3; }

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    only_keys(doc, {"network", "scenarios", "fragility", "seed", "design", "solver", "sweep", "out", "jobs"}, "config");
    RunConfig c;
    try {
        if (!doc.contains("network") || !doc.at("network").is_string()) throw ConfigError("config.network must be a path");
        c.network_path = resolve(doc.at("network").get<std::string>(), base_dir);
        if (!fs::exists(c.network_path)) throw ConfigError("network file not found: " + c.network_path);
        if (doc.contains("scenarios")) {
            c.scenarios_path = resolve(doc.at("scenarios").get<std::string>(), base_dir);
            if (!fs::exists(*c.scenarios_path)) throw ConfigError("scenario file not found: " + *c.scenarios_path);
        }
        if (doc.contains("seed")) c.fragility.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("fragility")) {
            const auto& f = doc.at("fragility");
            only_keys(f, {"pole_failure_prob", "line_failure_prob", "scenario_count"}, "config.fragility");
            c.fragility.pole_failure_prob = number(f, "pole_failure_prob", 0.0, "fragility");
            if (f.contains("line_failure_prob")) c.fragility.line_failure_prob = number(f, "line_failure_prob", 0.0, "fragility");
            if (f.contains("scenario_count")) c.fragility.scenario_count = f.at("scenario_count").get<int>();
        }
        c.fragility.validate();
        if (doc.contains("design")) {
            const auto& d = doc.at("design");
            only_keys(d, {"lambda", "gamma", "beta_transformer", "beta_line", "v_min", "v_max", "microgrid_cost_per_kva",
                          "microgrid_fixed_cost"},
                      "config.design");
            auto& p = c.design;
            p.lambda = number(d, "lambda", p.lambda, "design");
            p.gamma = number(d, "gamma", p.gamma, "design");
            p.beta_transformer = number(d, "beta_transformer", p.beta_transformer, "design");
            p.beta_line = number(d, "beta_line", p.beta_line, "design");
            p.v_min = number(d, "v_min", p.v_min, "design");
            p.v_max = number(d, "v_max", p.v_max, "design");
            if (d.contains("microgrid_cost_per_kva")) p.microgrid_cost_per_kva = number(d, "microgrid_cost_per_kva", 0.0, "design");
            if (d.contains("microgrid_fixed_cost")) p.microgrid_fixed_cost = number(d, "microgrid_fixed_cost", 0.0, "design");
        }
        c.design.validate();
        if (doc.contains("solver")) {
            const auto& s = doc.at("solver");
            only_keys(s, {"backend", "time_limit", "relative_gap", "external_command", "vns_min_binaries", "vns_threshold",
                          "add_max_violation"},
                      "config.solver");
            auto& o = c.sbd.solve.solver;
            if (s.contains("backend")) {
                const auto b = s.at("backend").get<std::string>();
                if (b == "builtin") o.backend = milp::Backend::Builtin;
                else if (b == "external") o.backend = milp::Backend::External;
                else throw ConfigError("config.solver.backend must be builtin or external");
            }
            o.time_limit = number(s, "time_limit", o.time_limit, "solver");
            o.relative_gap = number(s, "relative_gap", o.relative_gap, "solver");
            if (s.contains("external_command")) o.external_command = s.at("external_command").get<std::string>();
            if (s.contains("vns_min_binaries")) c.sbd.solve.vns_min_binaries = s.at("vns_min_binaries").get<int>();
            c.sbd.solve.vns.fix_threshold = number(s, "vns_threshold", c.sbd.solve.vns.fix_threshold, "solver");
            if (s.contains("add_max_violation")) c.sbd.add_max_violation = s.at("add_max_violation").get<bool>();
        }
        if (doc.contains("sweep")) {
            const auto& s = doc.at("sweep");
            only_keys(s, {"microgrid_cost_per_kva", "gamma"}, "config.sweep");
            c.sweep.microgrid_cost_per_kva = number_list(s, "microgrid_cost_per_kva", "sweep");
            c.sweep.gamma = number_list(s, "gamma", "sweep");
        }
        if (doc.contains("out")) c.out_dir = resolve(doc.at("out").get<std::string>(), base_dir);
        if (doc.contains("jobs")) c.sbd.jobs = doc.at("jobs").get<int>();
        if (c.sbd.jobs < 1) throw ConfigError("config.jobs must be positive");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    const std::string base = fs::path(path).parent_path().string();
    return parse_run_config(read_text_file(path), base);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::string& path, const std::string& text) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string serialize_design(const Network& network, const Design& design) {
    json j;
    j["network"] = network.name;
    j["new_lines"] = design.built_lines;
    j["hardened_lines"] = design.hardened_lines;
    json sites = json::array();
    for (std::size_t k = 0; k < network.microgrids.size(); ++k) {
        const auto& g = network.microgrids[k];
        const int steps = design.microgrid_steps[k];
        if (steps == 0) continue;
        sites.push_back({{"id", g.id},
                         {"bus", g.bus},
                         {"steps", steps},
                         {"kva", steps * g.step_kva * network.buses[static_cast<std::size_t>(g.bus_index)].phases.size()}});
    }
    j["microgrids"] = std::move(sites);
    j["microgrid_count"] = design.microgrid_count();
    j["microgrid_kva"] = design.microgrid_kva(network);
    j["cost_k"] = {{"new_lines", kilo(design.cost.new_lines)},
                   {"hardening", kilo(design.cost.hardening)},
                   {"microgrid_fixed", kilo(design.cost.microgrid_fixed)},
                   {"microgrid_capacity", kilo(design.cost.microgrid_capacity)},
                   {"total", kilo(design.cost.total())}};
    return j.dump(2) + "\n";
}

Design load_design(std::string_view text, const Network& network, const DesignParams& params) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("design file: malformed JSON: ") + e.what());
    }
    Design d = empty_design(network);
    try {
        for (const auto& id : j.at("new_lines")) {
            const auto name = id.get<std::string>();
            const auto k = network.line_index(name);
            if (!k || !network.lines[static_cast<std::size_t>(*k)].is_candidate()) {
                throw ConfigError("design file: " + name + " is not a candidate line");
            }
            d.built_lines.push_back(name);
        }
        for (const auto& id : j.at("hardened_lines")) {
            const auto name = id.get<std::string>();
            const auto k = network.line_index(name);
            if (!k || !network.lines[static_cast<std::size_t>(*k)].hardenable) {
                throw ConfigError("design file: " + name + " is not a hardenable line");
            }
            d.hardened_lines.push_back(name);
        }
        for (const auto& s : j.at("microgrids")) {
            const auto id = s.at("id").get<std::string>();
            bool found = false;
            for (std::size_t k = 0; k < network.microgrids.size(); ++k) {
                if (network.microgrids[k].id != id) continue;
                const int steps = s.at("steps").get<int>();
                if (steps < 0 || steps > network.microgrids[k].max_steps) {
                    throw ConfigError("design file: microgrid " + id + " step count out of range");
                }
                d.microgrid_steps[k] = steps;
                found = true;
            }
            if (!found) throw ConfigError("design file: unknown microgrid " + id);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("design file: ") + e.what());
    }
    d.cost = design_cost(network, params, d);
    return d;
}

std::string serialize_audit(const std::vector<AuditReport>& reports) {
    json doc;
    bool clean = true;
    json list = json::array();
    for (const auto& r : reports) {
        clean = clean && r.clean();
        json v = json::array();
        for (const auto& x : r.violations) v.push_back({{"kind", x.kind}, {"element", x.element}, {"magnitude", x.magnitude}});
        list.push_back({{"scenario", r.scenario_id},
                        {"radial", r.radial},
                        {"worst_thermal_utilization", r.worst_thermal_utilization},
                        {"v_min_pu", r.v_min_pu},
                        {"v_max_pu", r.v_max_pu},
                        {"voltage_discrepancy", r.voltage_discrepancy},
                        {"max_balance_residual", r.max_balance_residual},
                        {"critical_fraction", r.critical_fraction},
                        {"total_fraction", r.total_fraction},
                        {"violations", std::move(v)}});
    }
    doc["clean"] = clean;
    doc["scenarios"] = std::move(list);
    return doc.dump(2) + "\n";
}

std::string serialize_evaluation(const std::vector<Verdict>& verdicts) {
    json doc;
    json list = json::array();
    double min_c = 1.0, min_t = 1.0, sum_c = 0.0, sum_t = 0.0;
    int feasible = 0;
    for (const auto& v : verdicts) {
        list.push_back({{"scenario", v.scenario_id},
                        {"feasible", v.feasible},
                        {"critical_fraction", v.critical_fraction},
                        {"total_fraction", v.total_fraction},
                        {"critical_shortfall", v.critical_shortfall},
                        {"total_shortfall", v.total_shortfall}});
        min_c = std::min(min_c, v.critical_fraction);
        min_t = std::min(min_t, v.total_fraction);
        sum_c += v.critical_fraction;
        sum_t += v.total_fraction;
        feasible += v.feasible ? 1 : 0;
    }
    const double n = verdicts.empty() ? 1.0 : static_cast<double>(verdicts.size());
    doc["summary"] = {{"scenarios", verdicts.size()},
                      {"feasible", feasible},
                      {"critical_fraction_min", min_c},
                      {"critical_fraction_mean", sum_c / n},
                      {"total_fraction_min", min_t},
                      {"total_fraction_mean", sum_t / n}};
    doc["scenarios"] = std::move(list);
    return doc.dump(2) + "\n";
}

std::string design_summary(const Network& network, const Design& design) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "  New lines          %4zu   %12.3f k$\n"
                  "  Hardened lines     %4zu   %12.3f k$\n"
                  "  No. of microgrids  %4d   %12.3f k$ fixed\n"
                  "  Microgrid kVA  %8.1f   %12.3f k$ capacity\n"
                  "  Total                     %12.3f k$\n",
                  design.built_lines.size(), kilo(design.cost.new_lines), design.hardened_lines.size(),
                  kilo(design.cost.hardening), design.microgrid_count(), kilo(design.cost.microgrid_fixed),
                  design.microgrid_kva(network), kilo(design.cost.microgrid_capacity), kilo(design.cost.total()));
    return buf;
}

}  // namespace rdt
