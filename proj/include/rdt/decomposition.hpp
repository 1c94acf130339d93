#pragma once

// Scenario-based decomposition: design against a growing subset of damage
// scenarios, check the design on the rest, add one failing scenario, repeat.
// Radiality is enforced lazily with cycle cuts on the parallel-edge-reduced
// graph, and large masters are solved with an LP-guided fixing heuristic.

#include <optional>
#include <string>
#include <vector>

#include "rdt/formulation.hpp"
#include "rdt/milp.hpp"

namespace rdt {

struct VnsConfig {
    /// Binaries whose relaxation value is strictly closer than this to 0 or 1 are fixed.
    double fix_threshold = 1e-6;
    /// Fraction of fixed binaries released per round; ends at 1.0.
    std::vector<double> schedule{0.0, 0.1, 0.25, 0.5, 1.0};
    double round_time_limit = milp::kInf;
    /// Keep going after the first feasible round and return the best.
    bool seek_improvement = false;

    void validate() const;
};

/// Never returns a point infeasible for the original model. Status is
/// Optimal only when the returned point matches the relaxation bound or
/// came from the unrestricted round.
milp::Solution vns_solve(const milp::MilpModel& model, const VnsConfig& cfg, const milp::SolverOptions& options);

/// Fundamental cycles of the subgraph formed by the closed reduced edges.
/// Each cycle is a list of reduced edge ids; an empty result certifies a forest.
std::vector<std::vector<int>> find_cycles(const ReducedGraph& graph, const std::vector<char>& edge_closed);

/// Cycles among the reduced edges closed in one scenario block of a solution.
std::vector<std::vector<int>> separate_cycles(const MasterBuilder& builder, const milp::Solution& solution, int block);

struct SolveConfig {
    milp::SolverOptions solver;
    VnsConfig vns;
    /// Masters with more binaries than this go through vns_solve().
    int vns_min_binaries = 500;
};

/// Solve, cut every cycle found in every block, re-solve until the
/// operation of every block is a forest.
milp::Solution solve_with_cycle_cuts(MasterBuilder& builder, const SolveConfig& config);

struct Verdict {
    int scenario_id = 0;
    bool feasible = false;
    double critical_fraction = 0.0;  // served real power / demand
    double total_fraction = 0.0;
    double critical_shortfall = 0.0;  // max(0, target - fraction)
    double total_shortfall = 0.0;
    std::optional<OperationState> operation;
};

/// Single-scenario check with the first stage pinned. When the scenario is
/// infeasible the shortfalls come from a served-load maximisation without
/// the service targets.
Verdict evaluate_design(const Design& design, const Network& network, const DamageScenario& scenario,
                        const DesignParams& params, const SolveConfig& config);

/// Evaluates independently on up to `jobs` threads; results in input order.
std::vector<Verdict> evaluate_scenarios(const Design& design, const Network& network,
                                        const std::vector<DamageScenario>& scenarios, const DesignParams& params,
                                        const SolveConfig& config, int jobs);

struct SbdOptions {
    SolveConfig solve;
    int jobs = 1;
    /// Add the scenario with the largest shortfall instead of the lowest index.
    bool add_max_violation = false;
};

struct SbdIteration {
    int iteration = 0;
    std::vector<int> active;  // scenario ids
    double cost = 0.0;        // dollars
    std::vector<Verdict> verdicts;  // scenarios outside the active set
    int cuts = 0;
    double seconds = 0.0;
};

struct SbdState {
    std::vector<int> active;
    Design incumbent;
    int iterations = 0;
    std::vector<Verdict> verdicts;  // one per scenario, after the final iteration
    std::vector<SbdIteration> log;
};

enum class SbdStatus { Feasible, Infeasible, SolverFailure };

struct SbdResult {
    SbdStatus status = SbdStatus::SolverFailure;
    Design design;
    SbdState state;
    /// Set when the targets cannot be met even with every upgrade.
    std::optional<int> infeasible_scenario;
    std::string message;
    /// Operation of every scenario under the final design.
    std::vector<OperationState> operations;
};

/// Scenario 0 must be the undamaged baseline.
SbdResult sbd_design(const Network& network, const std::vector<DamageScenario>& scenarios,
                     const DesignParams& params, const SbdOptions& options);

/// All scenarios in one model.
SbdResult extensive_design(const Network& network, const std::vector<DamageScenario>& scenarios,
                           const DesignParams& params, const SolveConfig& config);

/// One JSON object per line.
std::string sbd_log_jsonl(const SbdState& state);

}  // namespace rdt
