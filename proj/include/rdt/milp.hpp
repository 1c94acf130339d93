#pragma once

// Solver-agnostic mixed-integer linear model, the builtin branch-and-bound
// solver, and the file-based adapter for external solvers.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rdt::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind : std::uint8_t { Continuous, Binary };
enum class Sense : std::uint8_t { LessEqual, Equal, GreaterEqual };

struct Term {
    int var = -1;
    double coef = 0.0;
};

struct Variable {
    std::string name;
    double lower = 0.0;
    double upper = kInf;
    VarKind kind = VarKind::Continuous;
    /// Fractional binaries of the highest priority are branched on first.
    int branch_priority = 0;
};

struct Constraint {
    std::string name;
    std::vector<Term> terms;
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Minimization model. Variables and constraints are addressed by dense
/// integer ids in creation order; names are unique and whitespace-free so the
/// model can be exchanged as MPS text.
class MilpModel {
public:
    int add_variable(std::string name, double lower, double upper, VarKind kind,
                     double objective = 0.0);
    int add_binary(std::string name, double objective = 0.0) {
        return add_variable(std::move(name), 0.0, 1.0, VarKind::Binary, objective);
    }
    int add_continuous(std::string name, double lower, double upper, double objective = 0.0) {
        return add_variable(std::move(name), lower, upper, VarKind::Continuous, objective);
    }

    /// Duplicate variable references are merged; exact zeros are dropped.
    int add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs);

    void set_bounds(int var, double lower, double upper);
    void set_branch_priority(int var, int priority);
    void set_objective(int var, double coef);
    void set_objective_constant(double c) { objective_constant_ = c; }
    void clear_objective();

    [[nodiscard]] int num_variables() const { return static_cast<int>(vars_.size()); }
    [[nodiscard]] int num_constraints() const { return static_cast<int>(cons_.size()); }
    [[nodiscard]] int num_binaries() const;
    [[nodiscard]] const Variable& variable(int id) const { return vars_.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] const Constraint& constraint(int id) const { return cons_.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] const std::vector<Variable>& variables() const { return vars_; }
    [[nodiscard]] const std::vector<Constraint>& constraints() const { return cons_; }
    [[nodiscard]] double objective(int var) const { return obj_.at(static_cast<std::size_t>(var)); }
    [[nodiscard]] const std::vector<double>& objective_coefficients() const { return obj_; }
    [[nodiscard]] double objective_constant() const { return objective_constant_; }
    [[nodiscard]] std::optional<int> find_variable(std::string_view name) const;

    /// Throws ModelError when an invariant is broken (dangling ids, binary
    /// bounds outside [0,1], non-finite rhs, crossed bounds).
    void validate() const;

    [[nodiscard]] double evaluate_objective(std::span<const double> x) const;
    /// Largest violation over constraints and variable bounds.
    [[nodiscard]] double max_violation(std::span<const double> x) const;
    /// Largest distance of a binary value from {0, 1}.
    [[nodiscard]] double max_integrality_violation(std::span<const double> x) const;

private:
    std::vector<Variable> vars_;
    std::vector<double> obj_;
    std::vector<Constraint> cons_;
    std::unordered_map<std::string, int> by_name_;
    double objective_constant_ = 0.0;
};

enum class SolveStatus : std::uint8_t { Optimal, Infeasible, Unbounded, FeasibleLimit, Error };

std::string_view to_string(SolveStatus s);

struct SolveStats {
    long nodes = 0;
    long lp_iterations = 0;
    double seconds = 0.0;
};

struct Solution {
    SolveStatus status = SolveStatus::Error;
    /// Empty when no feasible point is known.
    std::vector<double> values;
    double objective = kInf;
    /// Best proven lower bound.
    double bound = -kInf;
    SolveStats stats;
    std::string message;

    [[nodiscard]] bool has_values() const { return !values.empty(); }
    [[nodiscard]] double value(int var) const { return values.at(static_cast<std::size_t>(var)); }
};

enum class Backend : std::uint8_t { Builtin, External };

struct SolverOptions {
    double time_limit = kInf;  // seconds
    double relative_gap = 1e-4;
    double feasibility_tol = 1e-6;
    double integrality_tol = 1e-6;
    long node_limit = std::numeric_limits<long>::max();
    Backend backend = Backend::Builtin;
    /// Command template for the external backend. "{model}" and "{solution}"
    /// are replaced by the exchange file paths. Falls back to the
    /// RDT_EXTERNAL_SOLVER environment variable, then to the bundled scipy
    /// adapter configured at build time.
    std::string external_command;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Solution solve(const MilpModel& model, const SolverOptions& options = {});

/// Binaries relaxed to [0,1]. Status Unbounded is reported distinctly.
Solution solve_lp_relaxation(const MilpModel& model, const SolverOptions& options = {});

/// Free-format MPS. Zero coefficients are omitted; binaries are marked with
/// INTORG/INTEND and explicit [0,1] bounds.
std::string write_model(const MilpModel& model);

/// Reads the solution text produced by an external adapter:
///
///     status optimal|infeasible|unbounded|feasible
///     objective <value>
///     <variable-name> <value>
///     ...
///
/// Blank lines and lines starting with '#' are ignored. Binary values within
/// the integrality tolerance are rounded; unknown names, non-integral
/// binaries, and a missing objective on a feasible status are errors.
Solution parse_external_solution(std::string_view text, const MilpModel& model,
                                 const SolverOptions& options = {});

/// Writes the model to a temp directory, runs the configured command and
/// parses the result. Throws SolverError when no command is available or the
/// subprocess fails.
Solution solve_external(const MilpModel& model, const SolverOptions& options);

}  // namespace rdt::milp
