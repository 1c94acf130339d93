#pragma once

// Post-hoc audit of a solved operation against the physical limits the MILP
// only approximates: circular thermal limits, voltage magnitudes recomputed
// from the closed topology, nodal balance, phase imbalance, damage status and
// service targets.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rdt/formulation.hpp"
#include "rdt/grid_model.hpp"
#include "rdt/operation.hpp"

namespace rdt {

struct RadialityCheck {
    bool radial = true;
    /// Line ids around one cycle when not radial; one line per reduced edge.
    std::vector<std::string> cycle;
};

/// Parallel closed lines collapse to one edge, so they never form a cycle.
RadialityCheck check_radiality(const OperationState& state, const Network& network);

struct VoltageRecomputation {
    std::vector<std::array<std::optional<double>, 3>> v;  // squared pu, per bus
    /// Largest |recomputed - state| over buses reached by the sweep.
    double max_discrepancy = 0.0;
    /// Anchor bus of every energized component without a substation.
    std::vector<int> island_anchors;
    /// Buses joined by closed lines but without any source.
    std::vector<int> unsupplied;
};

/// Breadth-first sweep over closed lines from every substation, then from the
/// largest microgrid of each remaining component. Islands take the state's
/// voltage at their anchor when present, v_ref otherwise.
VoltageRecomputation recompute_voltages(const OperationState& state, const Network& network, const Design& design);

struct Violation {
    std::string kind;  // thermal, voltage, voltage_model, balance, imbalance, damaged_closed, open_flow, cycle, critical, total
    std::string element;
    double magnitude = 0.0;
};

struct AuditReport {
    int scenario_id = 0;
    bool radial = true;
    double worst_thermal_utilization = 0.0;  // max |S| / capacity
    double v_min_pu = 1.0;  // magnitudes, not squared
    double v_max_pu = 1.0;
    double voltage_discrepancy = 0.0;  // squared pu
    double max_balance_residual = 0.0;
    double critical_fraction = 1.0;
    double total_fraction = 1.0;
    std::vector<Violation> violations;

    [[nodiscard]] bool clean() const { return violations.empty(); }
};

struct AuditTolerances {
    double thermal = 1e-9;  // relative to capacity
    double voltage = 1e-9;  // pu magnitude
    double voltage_model = 1e-6;
    double balance = 1e-8;
    double imbalance = 1e-7;
    double flow = 1e-9;
    double service = 1e-9;
};

AuditReport audit(const OperationState& state, const Network& network, const DesignParams& params,
                  const Design& design, const AuditTolerances& tol = {});

}  // namespace rdt
