#pragma once

// File formats shared by the command-line front end and the tests: run
// configuration, design files, audit and evaluation reports. All writers are
// deterministic; none of them records timings.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rdt/decomposition.hpp"
#include "rdt/fragility.hpp"
#include "rdt/validate.hpp"

namespace rdt {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SweepAxes {
    std::vector<double> microgrid_cost_per_kva;
    std::vector<double> gamma;
};

struct RunConfig {
    std::string network_path;  // resolved against the config file's directory
    std::optional<std::string> scenarios_path;
    FragilityParams fragility;
    DesignParams design;
    SbdOptions sbd;
    SweepAxes sweep;
    std::string out_dir = "out";
};

/// Unknown keys and missing files are ConfigErrors. `base_dir` resolves
/// relative paths.
RunConfig parse_run_config(std::string_view text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

std::string read_text_file(const std::string& path);
/// Writes to a sibling temporary file and renames it into place.
void write_text_file_atomic(const std::string& path, const std::string& text);

std::string serialize_design(const Network& network, const Design& design);
/// Cost is recomputed from the decisions.
Design load_design(std::string_view text, const Network& network, const DesignParams& params);

std::string serialize_audit(const std::vector<AuditReport>& reports);
std::string serialize_evaluation(const std::vector<Verdict>& verdicts);

/// Multi-line human summary in k$.
std::string design_summary(const Network& network, const Design& design);

}  // namespace rdt
