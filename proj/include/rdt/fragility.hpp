#pragma once

// Storm damage sampling. Each damageable line fails independently; the
// uniform draw for a line depends only on (seed, scenario index, line id), so
// raising the failure probability never removes a line from a damage set.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rdt/grid_model.hpp"

namespace rdt {

struct FragilityParams {
    double pole_failure_prob = 0.0;
    /// Used directly when set, bypassing the two-pole model.
    std::optional<double> line_failure_prob;
    int scenario_count = 1;
    std::uint64_t seed = 0;

    [[nodiscard]] double per_line_probability() const;
    /// Throws std::invalid_argument.
    void validate() const;
};

struct DamageScenario {
    int id = 0;  // 0 is the undamaged baseline
    std::vector<std::string> damaged_line_ids;  // in network line order
    std::uint64_t seed = 0;

    [[nodiscard]] bool is_baseline() const { return id == 0; }
};

/// A line fails when either of its two poles fails.
double line_failure_probability(double pole_failure_prob);

/// Uniform variate in [0,1) for one line in one scenario.
double line_uniform(std::uint64_t seed, int scenario, std::string_view line_id);

/// Baseline followed by scenario_count sampled scenarios.
std::vector<DamageScenario> sample_scenarios(const Network& network, const FragilityParams& params);

/// Per-line flags, indexed like network.lines.
std::vector<char> damage_mask(const Network& network, const DamageScenario& scenario);

std::string serialize_scenarios(const std::vector<DamageScenario>& scenarios);
/// Rejects unknown, candidate and non-damageable line ids.
std::vector<DamageScenario> load_scenarios(std::string_view text, const Network& network);

}  // namespace rdt
