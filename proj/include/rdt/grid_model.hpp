#pragma once

// Feeder data model: buses, multi-phase lines, loads and microgrid sites.
// A Network is immutable after load_network() and is shared read-only by the
// formulation, decomposition and validation code.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rdt {

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };
inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};

inline int index(Phase p) { return static_cast<int>(p); }
char phase_letter(Phase p);

class PhaseSet {
public:
    PhaseSet() = default;
    static PhaseSet from_mask(std::uint8_t mask) { PhaseSet s; s.mask_ = mask & 7U; return s; }
    static PhaseSet all() { return from_mask(7); }

    void insert(Phase p) { mask_ |= static_cast<std::uint8_t>(1U << index(p)); }
    [[nodiscard]] bool contains(Phase p) const { return (mask_ >> index(p)) & 1U; }
    [[nodiscard]] bool subset_of(PhaseSet o) const { return (mask_ & ~o.mask_) == 0; }
    [[nodiscard]] bool empty() const { return mask_ == 0; }
    [[nodiscard]] int size() const { return __builtin_popcount(mask_); }
    [[nodiscard]] std::uint8_t mask() const { return mask_; }
    [[nodiscard]] std::vector<Phase> list() const;
    /// "ABC", "A", ...
    [[nodiscard]] std::string str() const;
    bool operator==(const PhaseSet&) const = default;

private:
    std::uint8_t mask_ = 0;
};

using Complex = std::complex<double>;
/// Row-major 3x3 phase matrix; absent phase pairs are nullopt.
using PhaseMatrix = std::array<std::optional<Complex>, 9>;
using PhaseVector = std::array<std::optional<Complex>, 3>;

inline std::size_t pair_index(Phase row, Phase col) {
    return static_cast<std::size_t>(3 * index(row) + index(col));
}

struct Bases {
    double kva = 0.0;
    double kv = 0.0;
};

enum class Quantity : std::uint8_t { Power, Impedance, Voltage };

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// power/kva, impedance*kva/(1000*kv^2), voltage/kv. Throws when the bases
/// are not positive.
double to_per_unit(double value, Quantity kind, const Bases& bases);
double from_per_unit(double value, Quantity kind, const Bases& bases);

struct Bus {
    std::string id;
    PhaseSet phases;
    bool is_substation = false;
    double v_ref = 1.0;  // squared per-unit magnitude
    std::optional<std::pair<double, double>> coords;  // metres
};

enum class LineStatus : std::uint8_t { Existing, Candidate };

struct Line {
    std::string id;
    std::string from;
    std::string to;
    PhaseSet phases;
    std::optional<double> length_km;  // as given; coordinates used when absent
    PhaseMatrix impedance_ohm_per_km;
    double capacity_kva = 0.0;  // per phase
    bool is_transformer = false;
    bool has_switch = false;
    LineStatus status = LineStatus::Existing;
    bool damageable = true;
    bool hardenable = true;
    double construction_cost = 0.0;
    double harden_cost = 0.0;

    // derived
    int from_bus = -1;
    int to_bus = -1;
    double length = 0.0;  // km
    PhaseMatrix impedance_pu;  // total over the length
    double capacity_pu = 0.0;

    [[nodiscard]] bool is_candidate() const { return status == LineStatus::Candidate; }
};

struct Load {
    std::string id;
    std::string bus;
    PhaseVector demand_kva;
    bool is_critical = false;

    int bus_index = -1;
    PhaseVector demand_pu;

    [[nodiscard]] PhaseSet phases() const;
    [[nodiscard]] double real_demand_pu() const;
};

struct MicrogridSite {
    std::string id;
    std::string bus;
    double step_kva = 0.0;  // per phase per step
    int max_steps = 1;
    double fixed_cost = 0.0;
    double variable_cost_per_kva = 0.0;
    bool is_existing = false;

    int bus_index = -1;
    double step_pu = 0.0;
};

class Network {
public:
    std::string name;
    Bases bases;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Load> loads;
    std::vector<MicrogridSite> microgrids;

    [[nodiscard]] std::optional<int> bus_index(std::string_view id) const;
    [[nodiscard]] std::optional<int> line_index(std::string_view id) const;
    [[nodiscard]] std::vector<int> substations() const;
    [[nodiscard]] std::vector<int> loads_at(int bus) const;
    [[nodiscard]] std::vector<int> microgrids_at(int bus) const;

    [[nodiscard]] double total_real_demand_pu() const;
    [[nodiscard]] double critical_real_demand_pu() const;
    [[nodiscard]] int critical_load_count() const;

    /// Resolves references, derives lengths and per-unit values and checks
    /// every invariant. Errors name the offending element.
    void finalize();

private:
    std::unordered_map<std::string, int> bus_by_id_;
    std::unordered_map<std::string, int> line_by_id_;
    std::vector<std::vector<int>> loads_at_;
    std::vector<std::vector<int>> microgrids_at_;
};

Network load_network(std::string_view document);
Network load_network_file(const std::string& path);
/// Canonical JSON text; serialize(load_network(serialize(n))) == serialize(n).
std::string serialize(const Network& network);

/// Simple graph obtained by collapsing parallel lines into one edge.
struct ReducedEdge {
    int u = -1;  // u < v
    int v = -1;
    std::vector<int> lines;
};

struct ReducedGraph {
    int num_nodes = 0;
    std::vector<ReducedEdge> edges;
    std::vector<int> edge_of_line;
};

ReducedGraph aggregate_parallel_edges(const Network& network);

}  // namespace rdt
