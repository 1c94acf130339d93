#pragma once

// Bounded-variable simplex on a dense tableau. Dual simplex restores primal
// feasibility (cold start and after bound changes), primal simplex cleans up
// after the cost perturbation is removed. The tableau persists across
// solve() calls so branch-and-bound nodes warm start from their parent.

#include <chrono>
#include <cstdint>
#include <random>
#include <vector>

#include "rdt/milp.hpp"

namespace rdt::milp::detail {

struct LpProblem {
    int num_cols = 0;
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::vector<Term>> rows;
    std::vector<double> row_lower;
    std::vector<double> row_upper;
};

enum class LpStatus : std::uint8_t { Optimal, Infeasible, Unbounded, IterationLimit, TimeLimit };

using Clock = std::chrono::steady_clock;

class LpEngine {
public:
    explicit LpEngine(const LpProblem& problem);

    LpStatus solve(Clock::time_point deadline = Clock::time_point::max());

    void set_column_bounds(int col, double lower, double upper);
    [[nodiscard]] double column_lower(int col) const { return lo_[static_cast<std::size_t>(col)]; }
    [[nodiscard]] double column_upper(int col) const { return hi_[static_cast<std::size_t>(col)]; }

    [[nodiscard]] double objective() const;
    [[nodiscard]] double value(int col) const { return x_[static_cast<std::size_t>(col)]; }
    [[nodiscard]] long iterations() const { return iterations_; }
    [[nodiscard]] int num_cols() const { return n_; }
    [[nodiscard]] int num_rows() const { return m_; }

private:
    enum State : std::uint8_t { Basic, AtLower, AtUpper, FreeZero };

    double* row(int i) { return tab_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(total_); }
    const double* row(int i) const {
        return tab_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(total_);
    }
    double& at(int i, int j) { return row(i)[j]; }

    void pivot(int r, int q);
    /// Rebuilds the tableau of the current basis from the original rows.
    void refactor();
    void shift_nonbasic(int j, double new_value);
    void recompute_reduced_costs();
    void recompute_basic_values();
    bool repair_dual_feasibility();
    void perturb_costs();
    LpStatus dual_simplex(Clock::time_point deadline);
    LpStatus primal_simplex(Clock::time_point deadline);
    double max_primal_infeasibility() const;
    bool hits_artificial_bound() const;

    int m_ = 0;
    int n_ = 0;
    int total_ = 0;
    std::vector<double> tab_;
    std::vector<double> cost_;
    std::vector<double> work_cost_;
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::vector<char> artificial_;
    std::vector<double> x_;
    std::vector<double> d_;
    std::vector<int> basis_;
    std::vector<int> where_;
    std::vector<std::uint8_t> state_;
    std::vector<int> nz_;
    long iterations_ = 0;
    long since_refresh_ = 0;
    long since_refactor_ = 0;
    std::vector<std::vector<Term>> rows_;
    std::mt19937_64 rng_{0x5eed5eedULL};
};

}  // namespace rdt::milp::detail
