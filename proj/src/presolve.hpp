#pragma once

#include <vector>

#include "lp_engine.hpp"
#include "rdt/milp.hpp"

namespace rdt::milp::detail {

/// Reduced problem after removing fixed columns, empty and redundant rows,
/// and turning singleton rows into bounds. Every removed column is fixed at a
/// known value, so postsolve is a scatter.
struct Presolved {
    bool infeasible = false;
    LpProblem lp;
    std::vector<int> kept_cols;       // reduced column -> original variable
    std::vector<char> is_integer;     // per reduced column
    std::vector<double> fixed_value;  // per original variable (used when removed)
    double objective_offset = 0.0;

    [[nodiscard]] std::vector<double> expand(const std::vector<double>& reduced) const;
};

/// relax_integrality: binaries keep [0,1] but bound rounding is disabled.
Presolved presolve(const MilpModel& model, bool relax_integrality);

}  // namespace rdt::milp::detail
