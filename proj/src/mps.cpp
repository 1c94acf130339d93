#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "rdt/milp.hpp"

namespace rdt::milp {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

char sense_code(Sense s) {
    switch (s) {
        case Sense::LessEqual: return 'L';
        case Sense::GreaterEqual: return 'G';
        case Sense::Equal: return 'E';
    }
    return 'L';
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
        s.replace(pos, from.size(), to);
    }
}

}  // namespace

std::string write_model(const MilpModel& model) {
    model.validate();
    const int n = model.num_variables();
    // column-wise view
    std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(n));
    for (int i = 0; i < model.num_constraints(); ++i) {
        for (const auto& t : model.constraint(i).terms) {
            if (t.coef != 0.0) cols[static_cast<std::size_t>(t.var)].emplace_back(i, t.coef);
        }
    }

    std::ostringstream out;
    out << "NAME rdt\nROWS\n N obj\n";
    for (const auto& c : model.constraints()) out << ' ' << sense_code(c.sense) << ' ' << c.name << '\n';

    out << "COLUMNS\n";
    bool in_int = false;
    for (int j = 0; j < n; ++j) {
        const auto& v = model.variable(j);
        const bool is_int = v.kind == VarKind::Binary;
        if (is_int != in_int) {
            out << "    MARKER MARKER " << (is_int ? "INTORG" : "INTEND") << '\n';
            in_int = is_int;
        }
        std::vector<std::pair<std::string, double>> entries;
        if (model.objective(j) != 0.0) entries.emplace_back("obj", model.objective(j));
        for (const auto& [row, coef] : cols[static_cast<std::size_t>(j)]) {
            entries.emplace_back(model.constraint(row).name, coef);
        }
        if (entries.empty()) entries.emplace_back("obj", 0.0);  // declares the column
        for (std::size_t k = 0; k < entries.size(); k += 2) {
            out << "    " << v.name << ' ' << entries[k].first << ' ' << num(entries[k].second);
            if (k + 1 < entries.size()) out << ' ' << entries[k + 1].first << ' ' << num(entries[k + 1].second);
            out << '\n';
        }
    }
    if (in_int) out << "    MARKER MARKER INTEND\n";

    out << "RHS\n";
    if (model.objective_constant() != 0.0) out << "    rhs obj " << num(-model.objective_constant()) << '\n';
    for (const auto& c : model.constraints()) {
        if (c.rhs != 0.0) out << "    rhs " << c.name << ' ' << num(c.rhs) << '\n';
    }

    out << "BOUNDS\n";
    for (const auto& v : model.variables()) {
        const bool lo_fin = std::isfinite(v.lower);
        const bool hi_fin = std::isfinite(v.upper);
        if (lo_fin && hi_fin && v.lower == v.upper) {
            out << " FX bnd " << v.name << ' ' << num(v.lower) << '\n';
            continue;
        }
        if (!lo_fin && !hi_fin) {
            out << " FR bnd " << v.name << '\n';
            continue;
        }
        if (!lo_fin) {
            out << " MI bnd " << v.name << '\n';
        } else if (v.lower != 0.0 || v.kind == VarKind::Binary) {
            out << " LO bnd " << v.name << ' ' << num(v.lower) << '\n';
        }
        if (hi_fin) out << " UP bnd " << v.name << ' ' << num(v.upper) << '\n';
    }
    out << "ENDATA\n";
    return out.str();
}

Solution parse_external_solution(std::string_view text, const MilpModel& model,
                                 const SolverOptions& options) {
    Solution sol;
    std::optional<SolveStatus> status;
    std::optional<double> objective;
    std::vector<double> values(static_cast<std::size_t>(model.num_variables()), 0.0);
    std::vector<char> seen(values.size(), 0);

    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') continue;
        std::string value_text;
        if (!(ls >> value_text)) {
            throw SolverError("malformed solution line " + std::to_string(lineno) + ": " + line);
        }
        if (key == "status") {
            if (value_text == "optimal") {
                status = SolveStatus::Optimal;
            } else if (value_text == "infeasible") {
                status = SolveStatus::Infeasible;
            } else if (value_text == "unbounded") {
                status = SolveStatus::Unbounded;
            } else if (value_text == "feasible") {
                status = SolveStatus::FeasibleLimit;
            } else {
                throw SolverError("unknown solution status: " + value_text);
            }
            continue;
        }
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(value_text, &used);
            if (used != value_text.size()) throw std::invalid_argument(value_text);
        } catch (const std::exception&) {
            throw SolverError("malformed number on solution line " + std::to_string(lineno) + ": " + line);
        }
        if (key == "objective") {
            objective = v;
            continue;
        }
        const auto id = model.find_variable(key);
        if (!id) throw SolverError("solution names unknown variable: " + key);
        const auto uid = static_cast<std::size_t>(*id);
        if (model.variable(*id).kind == VarKind::Binary) {
            const double r = std::round(v);
            if (std::abs(v - r) > options.integrality_tol) {
                throw SolverError("non-integral value " + value_text + " for binary " + key);
            }
            v = r;
        }
        values[uid] = v;
        seen[uid] = 1;
    }
    if (!status) throw SolverError("solution file has no status line");
    sol.status = *status;
    if (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::FeasibleLimit) {
        if (!objective) throw SolverError("solution file has no objective");
        sol.objective = *objective;
        sol.bound = sol.status == SolveStatus::Optimal ? *objective : -kInf;
        sol.values = std::move(values);
    }
    return sol;
}

Solution solve_external(const MilpModel& model, const SolverOptions& options) {
    std::string command = options.external_command;
    if (command.empty()) {
        if (const char* env = std::getenv("RDT_EXTERNAL_SOLVER")) command = env;
    }
#ifdef RDT_DEFAULT_EXTERNAL_SOLVER
    if (command.empty()) command = RDT_DEFAULT_EXTERNAL_SOLVER;
#endif
    if (command.empty()) {
        throw SolverError("external backend unavailable: set RDT_EXTERNAL_SOLVER or external_command");
    }
    static std::atomic<long> counter{0};
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("rdt-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(dir);
    const fs::path model_path = dir / "model.mps";
    const fs::path solution_path = dir / "model.sol";
    {
        std::ofstream f(model_path);
        f << write_model(model);
    }
    replace_all(command, "{model}", model_path.string());
    replace_all(command, "{solution}", solution_path.string());
    const int rc = std::system(command.c_str());
    if (rc != 0) {
        fs::remove_all(dir);
        throw SolverError("external solver exited with status " + std::to_string(rc));
    }
    std::ifstream f(solution_path);
    if (!f) {
        fs::remove_all(dir);
        throw SolverError("external solver wrote no solution file");
    }
    std::stringstream buf;
    buf << f.rdbuf();
    f.close();
    fs::remove_all(dir);
    return parse_external_solution(buf.str(), model, options);
}

}  // namespace rdt::milp
