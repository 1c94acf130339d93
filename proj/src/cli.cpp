#include "rdt/cli.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rdt/io.hpp"

namespace rdt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> solver;
    std::optional<std::string> out;
    std::string design_path;
    std::string scenarios_path;
};

struct Context {
    RunConfig config;
    Network network;
    std::vector<DamageScenario> scenarios;
};

Context prepare(const Overrides& o) {
    Context c;
    if (o.config.empty()) throw ConfigError("--config is required");
    c.config = load_run_config(o.config);
    if (o.seed) c.config.fragility.seed = *o.seed;
    if (o.jobs) {
        if (*o.jobs < 1) throw ConfigError("--jobs must be positive");
        c.config.sbd.jobs = *o.jobs;
    }
    if (o.solver) c.config.sbd.solve.solver.backend = *o.solver == "external" ? milp::Backend::External : milp::Backend::Builtin;
    if (o.out) c.config.out_dir = *o.out;
    c.network = load_network_file(c.config.network_path);
    const std::string scen = !o.scenarios_path.empty() ? o.scenarios_path : c.config.scenarios_path.value_or("");
    if (!scen.empty()) {
        c.scenarios = load_scenarios(read_text_file(scen), c.network);
    } else {
        c.scenarios = sample_scenarios(c.network, c.config.fragility);
    }
    return c;
}

std::string out_file(const Context& c, const std::string& name) { return (fs::path(c.config.out_dir) / name).string(); }

int cmd_scenarios(const Context& c, std::ostream& out) {
    const std::string path = out_file(c, "scenarios.json");
    write_text_file_atomic(path, serialize_scenarios(c.scenarios));
    double damaged = 0.0;
    for (std::size_t k = 1; k < c.scenarios.size(); ++k) damaged += static_cast<double>(c.scenarios[k].damaged_line_ids.size());
    const auto sampled = c.scenarios.size() > 1 ? c.scenarios.size() - 1 : 1;
    out << "scenarios: " << c.scenarios.size() << " records (baseline + " << c.scenarios.size() - 1 << ")\n";
    out << "mean damaged lines: " << damaged / static_cast<double>(sampled) << "\n";
    out << "wrote " << path << "\n";
    return kExitOk;
}

std::vector<AuditReport> audit_all(const Context& c, const Design& design, const std::vector<OperationState>& ops) {
    std::vector<AuditReport> reports;
    for (const auto& op : ops) reports.push_back(audit(op, c.network, c.config.design, design));
    return reports;
}

int report_audit(const Context& c, const std::vector<AuditReport>& reports, std::ostream& out) {
    const std::string path = out_file(c, "audit.json");
    write_text_file_atomic(path, serialize_audit(reports));
    std::size_t bad = 0;
    for (const auto& r : reports) bad += r.violations.size();
    out << "audit: " << reports.size() << " scenarios, " << bad << " violations (" << path << ")\n";
    return bad == 0 ? kExitOk : kExitViolations;
}

int cmd_design(const Context& c, std::ostream& out, std::ostream& err) {
    const auto result = sbd_design(c.network, c.scenarios, c.config.design, c.config.sbd);
    write_text_file_atomic(out_file(c, "sbd_log.jsonl"), sbd_log_jsonl(result.state));
    if (result.status == SbdStatus::Infeasible) {
        err << "infeasible: " << result.message << "\n";
        return kExitInfeasible;
    }
    if (result.status == SbdStatus::SolverFailure) {
        err << "solver failure: " << result.message << "\n";
        return kExitSolver;
    }
    const std::string path = out_file(c, "design.json");
    write_text_file_atomic(path, serialize_design(c.network, result.design));
    out << "design for " << c.network.name << " after " << result.state.iterations << " iterations, active scenarios "
        << result.state.active.size() << "/" << c.scenarios.size() << "\n";
    out << design_summary(c.network, result.design);
    out << "wrote " << path << "\n";
    return report_audit(c, audit_all(c, result.design, result.operations), out);
}

Design design_from_file(const Context& c, const Overrides& o) {
    const std::string path = o.design_path.empty() ? out_file(c, "design.json") : o.design_path;
    return load_design(read_text_file(path), c.network, c.config.design);
}

int cmd_evaluate(const Context& c, const Overrides& o, std::ostream& out) {
    const Design design = design_from_file(c, o);
    const auto verdicts = evaluate_scenarios(design, c.network, c.scenarios, c.config.design, c.config.sbd.solve, c.config.sbd.jobs);
    const std::string path = out_file(c, "evaluation.json");
    write_text_file_atomic(path, serialize_evaluation(verdicts));
    int feasible = 0;
    double min_c = 1.0, min_t = 1.0;
    for (const auto& v : verdicts) {
        feasible += v.feasible ? 1 : 0;
        min_c = std::min(min_c, v.critical_fraction);
        min_t = std::min(min_t, v.total_fraction);
    }
    out << "evaluated " << verdicts.size() << " scenarios: " << feasible << " feasible, min critical served " << min_c
        << ", min total served " << min_t << "\n";
    out << "wrote " << path << "\n";
    return kExitOk;
}

int cmd_validate(const Context& c, const Overrides& o, std::ostream& out) {
    const Design design = design_from_file(c, o);
    const auto verdicts = evaluate_scenarios(design, c.network, c.scenarios, c.config.design, c.config.sbd.solve, c.config.sbd.jobs);
    std::vector<OperationState> ops;
    for (const auto& v : verdicts) ops.push_back(*v.operation);
    return report_audit(c, audit_all(c, design, ops), out);
}

struct Cell {
    double gamma = 0.0;
    double cost = 0.0;
    std::string status;
    double total_k = 0.0;
    double microgrid_kva = 0.0;
    int microgrid_count = 0;
    int hardened = 0;
    int new_lines = 0;
    double seconds = 0.0;
};

json cell_json(const Cell& c) {
    return {{"gamma", c.gamma},           {"microgrid_cost_per_kva", c.cost}, {"status", c.status},
            {"total_cost_k", c.total_k},  {"microgrid_kva", c.microgrid_kva}, {"microgrid_count", c.microgrid_count},
            {"hardened_lines", c.hardened}, {"new_lines", c.new_lines},       {"seconds", c.seconds}};
}

std::optional<Cell> read_cell(const std::string& path, double gamma, double cost) {
    if (!fs::exists(path)) return std::nullopt;
    try {
        const auto j = json::parse(read_text_file(path));
        Cell c;
        c.gamma = j.at("gamma").get<double>();
        c.cost = j.at("microgrid_cost_per_kva").get<double>();
        if (c.gamma != gamma || c.cost != cost) return std::nullopt;
        c.status = j.at("status").get<std::string>();
        c.total_k = j.at("total_cost_k").get<double>();
        c.microgrid_kva = j.at("microgrid_kva").get<double>();
        c.microgrid_count = j.at("microgrid_count").get<int>();
        c.hardened = j.at("hardened_lines").get<int>();
        c.new_lines = j.at("new_lines").get<int>();
        c.seconds = j.at("seconds").get<double>();
        return c;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// Shortest text that parses back to the same double.
std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

Cell run_cell(const Context& c, double gamma, double cost) {
    Cell cell;
    cell.gamma = gamma;
    cell.cost = cost;
    DesignParams params = c.config.design;
    params.gamma = gamma;
    params.microgrid_cost_per_kva = cost;
    SbdOptions opts = c.config.sbd;
    opts.jobs = 1;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const auto r = sbd_design(c.network, c.scenarios, params, opts);
        cell.status = r.status == SbdStatus::Feasible ? "ok" : (r.status == SbdStatus::Infeasible ? "infeasible" : "solver_failure");
        if (r.status == SbdStatus::Feasible) {
            cell.total_k = r.design.cost.total() * 1e-3;
            cell.microgrid_kva = r.design.microgrid_kva(c.network);
            cell.microgrid_count = r.design.microgrid_count();
            cell.hardened = static_cast<int>(r.design.hardened_lines.size());
            cell.new_lines = static_cast<int>(r.design.built_lines.size());
        }
    } catch (const std::exception&) {
        cell.status = "error";
    }
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return cell;
}

int cmd_sweep(const Context& c, std::ostream& out) {
    const auto& axes = c.config.sweep;
    if (axes.gamma.empty() || axes.microgrid_cost_per_kva.empty()) {
        throw ConfigError("sweep needs nonempty sweep.gamma and sweep.microgrid_cost_per_kva");
    }
    const std::size_t ng = axes.gamma.size();
    const std::size_t nc = axes.microgrid_cost_per_kva.size();
    std::vector<Cell> cells(ng * nc);
    std::atomic<std::size_t> next{0};
    std::mutex log;
    auto worker = [&]() {
        for (std::size_t k = next++; k < cells.size(); k = next++) {
            const double gamma = axes.gamma[k / nc];
            const double cost = axes.microgrid_cost_per_kva[k % nc];
            const std::string path = out_file(c, "sweep/cell_" + std::to_string(k / nc) + "_" + std::to_string(k % nc) + ".json");
            if (auto done = read_cell(path, gamma, cost)) {
                cells[k] = *done;
                continue;
            }
            cells[k] = run_cell(c, gamma, cost);
            write_text_file_atomic(path, cell_json(cells[k]).dump(2) + "\n");
            std::lock_guard<std::mutex> lock(log);
            out << "cell gamma=" << gamma << " cost=" << cost << ": " << cells[k].status << " " << cells[k].total_k << " k$\n";
        }
    };
    const int threads = std::max(1, std::min<int>(c.config.sbd.jobs, static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::ostringstream csv;
    csv << "gamma,microgrid_cost_per_kva,status,total_cost_k,microgrid_kva,microgrid_count,hardened_lines,new_lines,seconds\n";
    for (const auto& cell : cells) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f,%d,%d,%d,%.3f\n", shortest(cell.gamma).c_str(),
                      shortest(cell.cost).c_str(), cell.status.c_str(),
                      cell.total_k, cell.microgrid_kva, cell.microgrid_count, cell.hardened, cell.new_lines, cell.seconds);
        csv << buf;
    }
    const std::string path = out_file(c, "sweep.csv");
    write_text_file_atomic(path, csv.str());
    out << "sweep: " << cells.size() << " cells\n";
    out << "  gamma \\ $/kVA";
    for (double cost : axes.microgrid_cost_per_kva) out << "  " << cost;
    out << "   (total k$)\n";
    for (std::size_t i = 0; i < ng; ++i) {
        out << "  " << axes.gamma[i] << "   ";
        for (std::size_t j = 0; j < nc; ++j) {
            const auto& cell = cells[i * nc + j];
            if (cell.status == "ok") out << "  " << cell.total_k;
            else out << "  " << cell.status;
        }
        out << "\n";
    }
    out << "wrote " << path << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Resilient distribution grid design"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;
    app.add_option("--config", o.config, "Run configuration (JSON)");
    app.add_option("--seed", o.seed, "Override the sampling seed");
    app.add_option("--jobs", o.jobs, "Worker threads");
    app.add_option("--solver", o.solver, "MILP backend")->check(CLI::IsMember({"builtin", "external"}));
    app.add_option("--out", o.out, "Output directory");
    auto* scenarios = app.add_subcommand("scenarios", "Sample damage scenarios");
    auto* design = app.add_subcommand("design", "Design upgrades by scenario decomposition");
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a design file on a scenario set");
    auto* sweep = app.add_subcommand("sweep", "Grid of design runs over gamma and microgrid cost");
    auto* validate = app.add_subcommand("validate", "Audit a design file on a scenario set");
    for (auto* sub : {evaluate, validate}) {
        sub->add_option("--design", o.design_path, "Design file (default: <out>/design.json)");
        sub->add_option("--scenarios", o.scenarios_path, "Scenario file (default: from the config)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        const Context c = prepare(o);
        if (scenarios->parsed()) return cmd_scenarios(c, out);
        if (design->parsed()) return cmd_design(c, out, err);
        if (evaluate->parsed()) return cmd_evaluate(c, o, out);
        if (sweep->parsed()) return cmd_sweep(c, out);
        if (validate->parsed()) return cmd_validate(c, o, out);
    } catch (const milp::SolverError& e) {
        err << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const ConfigError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NetworkError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitInput;
}

}  // namespace rdt
