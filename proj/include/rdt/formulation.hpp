#pragma once

// Two-stage design model. First-stage binaries choose new lines, hardened
// lines and microgrid sizing steps; every scenario block repeats the
// operating constraints (switching, octagon thermal limits, phase imbalance,
// linearised three-phase voltage drops, load/generation balance and service
// targets) under its damage set.
//
// Variable names follow
//   b:<line>  h:<line>  u:<site>:<step>
//   e:<line>:s<id>  e0:  e1:  bs:  hs:
//   P:<line>:<phase>:s<id>  Q:
//   V:<bus>:<phase>:s<id>  Pg:<bus>:<phase>:s<id>  Qg:
//   y:<load>:s<id>  bbar:<bus>~<bus>:s<id>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rdt/fragility.hpp"
#include "rdt/grid_model.hpp"
#include "rdt/milp.hpp"
#include "rdt/operation.hpp"

namespace rdt {

struct DesignParams {
    double lambda = 0.98;  // critical real power fraction
    double gamma = 0.5;    // total real power fraction
    double beta_transformer = 0.15;
    double beta_line = 1.0;
    double v_min = 0.9025;  // squared pu
    double v_max = 1.1025;
    double octagon_scale = std::cos(M_PI / 8.0);
    /// Objective units per dollar; 1e-3 keeps the objective in k$.
    double cost_scale = 1e-3;
    /// When set, replaces the per-site rates of non-existing microgrids.
    std::optional<double> microgrid_cost_per_kva;
    std::optional<double> microgrid_fixed_cost;

    /// Throws std::invalid_argument.
    void validate() const;
    [[nodiscard]] double beta(const Line& line) const {
        return line.is_transformer ? beta_transformer : beta_line;
    }
    [[nodiscard]] double big_m() const { return v_max - v_min; }
    [[nodiscard]] double site_fixed_cost(const MicrogridSite& g) const;
    [[nodiscard]] double site_rate(const MicrogridSite& g) const;
};

struct OctagonGeometry {
    double capacity = 0.0;
    double radius = 0.0;    // distance of every edge from the origin
    double diagonal = 0.0;  // radius / sqrt(2): tangency point coordinate
    std::array<std::array<double, 2>, 8> vertices{};  // counter-clockwise from angle pi/8
};

/// Throws std::invalid_argument for nonpositive capacity.
OctagonGeometry octagon_points(double capacity, double scale = std::cos(M_PI / 8.0));

/// Sum over n = 0..years of rate * rating / (1 + eta)^n.
double npv_capacity_cost(double rating, double rate, double eta, int years);

/// Dollars for one sizing step: rate * step_kva * phases at the site bus.
double microgrid_step_cost(const Network& network, const DesignParams& params, const MicrogridSite& site);

struct CostBreakdown {
    double new_lines = 0.0;  // dollars
    double hardening = 0.0;
    double microgrid_fixed = 0.0;
    double microgrid_capacity = 0.0;
    [[nodiscard]] double total() const { return new_lines + hardening + microgrid_fixed + microgrid_capacity; }
};

struct Design {
    std::vector<std::string> built_lines;     // candidate lines only
    std::vector<std::string> hardened_lines;
    std::vector<int> microgrid_steps;         // per site, indexed like network.microgrids
    CostBreakdown cost;

    [[nodiscard]] int microgrid_count() const;
    /// Installed capacity summed over phases.
    [[nodiscard]] double microgrid_kva(const Network& network) const;
    bool operator==(const Design& o) const {
        return built_lines == o.built_lines && hardened_lines == o.hardened_lines &&
               microgrid_steps == o.microgrid_steps;
    }
};

/// The all-zero design (existing microgrids at full size).
Design empty_design(const Network& network);
/// Every candidate built, every hardenable line hardened, every site at max size.
Design full_design(const Network& network);
/// Cost of the decision vector, independent of any model.
CostBreakdown design_cost(const Network& network, const DesignParams& params, const Design& design);

struct FirstStageVars {
    std::vector<int> build;   // per line
    std::vector<int> harden;  // per line
    std::vector<std::vector<int>> steps;  // per site, per step
};

struct ScenarioVars {
    int scenario_id = 0;
    std::vector<char> damaged;  // per line
    std::vector<int> e, e0, e1, bs, hs;  // per line
    std::vector<std::array<int, 3>> p, q;  // per line, -1 for absent phases
    std::vector<std::array<int, 3>> v;     // per bus
    std::vector<std::array<int, 3>> pg, qg;  // per bus, -1 without generation
    std::vector<int> y;  // per load
    std::vector<int> reduced;  // per reduced edge, -1 until a cycle cut needs it
    int critical_row = -1;
    int total_row = -1;
};

struct ModelSize {
    int variables = 0;
    int constraints = 0;
    int binaries = 0;
    bool operator==(const ModelSize&) const = default;
};

struct BuildOptions {
    /// Service-target rows; disabled for best-effort evaluation.
    bool resilience_rows = true;
};

/// Owns the MILP under construction. Scenario blocks are appended with
/// add_scenario(); cycle cuts are appended later by the decomposition.
class MasterBuilder {
public:
    MasterBuilder(const Network& network, const DesignParams& params, BuildOptions options = {});

    /// Allocates the variables of one scenario block without constraints.
    int allocate_scenario(const DamageScenario& scenario);
    /// allocate_scenario() plus every constraint family.
    int add_scenario(const DamageScenario& scenario);

    std::vector<int> add_thermal_direction_constraints(int line, int block);
    std::vector<int> add_switching_damage_constraints(int line, int block);
    std::vector<int> add_imbalance_constraints(int line, int block);
    std::vector<int> add_load_generation_balance(int bus, int block);
    std::vector<int> add_resilience_constraints(int block);
    std::vector<int> add_voltage_constraints(int line, int block);
    /// A served load away from a substation needs a closed incident line or a
    /// microgrid at its bus.
    std::vector<int> add_connectivity_constraints(int block);
    /// Edges are reduced-graph edge ids forming one simple cycle. Links from
    /// member lines to the edge variable are emitted the first time an edge
    /// appears in a cut of this block.
    int add_cycle_cut(int block, const std::vector<int>& cycle_edges);

    /// Pins first-stage variables to the given decisions.
    void fix_first_stage(const Design& design);

    [[nodiscard]] milp::MilpModel& model() { return model_; }
    [[nodiscard]] const milp::MilpModel& model() const { return model_; }
    [[nodiscard]] const FirstStageVars& first_stage() const { return first_; }
    [[nodiscard]] const ScenarioVars& block(int b) const { return blocks_.at(static_cast<std::size_t>(b)); }
    [[nodiscard]] int num_blocks() const { return static_cast<int>(blocks_.size()); }
    [[nodiscard]] const ReducedGraph& reduced_graph() const { return reduced_; }
    [[nodiscard]] const Network& network() const { return net_; }
    [[nodiscard]] const DesignParams& params() const { return params_; }
    [[nodiscard]] int cut_count() const { return cuts_; }

    [[nodiscard]] Design extract_design(const milp::Solution& solution) const;
    [[nodiscard]] OperationState extract_operation(const milp::Solution& solution, int block) const;

private:
    void add_first_stage();
    [[nodiscard]] std::string tag(int block) const;
    [[nodiscard]] bool always_closed(int line, int block) const;

    const Network& net_;
    DesignParams params_;
    BuildOptions options_;
    ReducedGraph reduced_;
    milp::MilpModel model_;
    FirstStageVars first_;
    std::vector<ScenarioVars> blocks_;
    int cuts_ = 0;
};

/// Master over the given scenarios, without cycle cuts. Throws
/// std::invalid_argument for an empty scenario list.
MasterBuilder build_master(const Network& network, const std::vector<DamageScenario>& scenarios,
                           const DesignParams& params);

/// Size of build_master()'s model computed from element counts alone.
ModelSize model_size(const Network& network, const std::vector<DamageScenario>& scenarios,
                     const DesignParams& params);

}  // namespace rdt
