#pragma once

#include <array>
#include <optional>
#include <vector>

namespace rdt {

/// Second-stage state of one scenario, indexed like the Network vectors.
/// Quantities are per-unit; voltages are squared magnitudes.
struct OperationState {
    int scenario_id = 0;
    std::vector<char> damaged;  // per line
    std::vector<char> closed;   // per line
    std::vector<std::array<double, 3>> p;  // per line, per phase
    std::vector<std::array<double, 3>> q;
    std::vector<std::array<std::optional<double>, 3>> v;  // per bus, absent phases empty
    std::vector<std::array<double, 3>> pg;  // per bus
    std::vector<std::array<double, 3>> qg;
    std::vector<char> served;  // per load
};

}  // namespace rdt
