#include "rdt/milp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <queue>

#include "lp_engine.hpp"
#include "presolve.hpp"

namespace rdt::milp {

using detail::Clock;
using detail::LpEngine;
using detail::LpStatus;
using detail::Presolved;

std::string_view to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::FeasibleLimit: return "feasible_limit";
        case SolveStatus::Error: return "error";
    }
    return "error";
}

// ---------------------------------------------------------------------------
// MilpModel

int MilpModel::add_variable(std::string name, double lower, double upper, VarKind kind,
                            double objective) {
    if (name.empty()) name = "x" + std::to_string(vars_.size());
    if (by_name_.contains(name)) throw ModelError("duplicate variable name: " + name);
    const int id = static_cast<int>(vars_.size());
    by_name_.emplace(name, id);
    vars_.push_back({std::move(name), lower, upper, kind, 0});
    obj_.push_back(objective);
    return id;
}

int MilpModel::add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs) {
    if (name.empty()) name = "c" + std::to_string(cons_.size());
    std::map<int, double> merged;
    for (const auto& t : terms) {
        if (t.var < 0 || t.var >= num_variables()) {
            throw ModelError("constraint " + name + " references undeclared variable " +
                             std::to_string(t.var));
        }
        merged[t.var] += t.coef;
    }
    std::vector<Term> clean;
    clean.reserve(merged.size());
    for (const auto& [v, c] : merged) {
        if (c != 0.0) clean.push_back({v, c});
    }
    cons_.push_back({std::move(name), std::move(clean), sense, rhs});
    return static_cast<int>(cons_.size()) - 1;
}

void MilpModel::set_bounds(int var, double lower, double upper) {
    auto& v = vars_.at(static_cast<std::size_t>(var));
    v.lower = lower;
    v.upper = upper;
}

void MilpModel::set_branch_priority(int var, int priority) {
    vars_.at(static_cast<std::size_t>(var)).branch_priority = priority;
}

void MilpModel::set_objective(int var, double coef) { obj_.at(static_cast<std::size_t>(var)) = coef; }

void MilpModel::clear_objective() {
    std::fill(obj_.begin(), obj_.end(), 0.0);
    objective_constant_ = 0.0;
}

int MilpModel::num_binaries() const {
    return static_cast<int>(std::count_if(vars_.begin(), vars_.end(),
                                          [](const Variable& v) { return v.kind == VarKind::Binary; }));
}

std::optional<int> MilpModel::find_variable(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

void MilpModel::validate() const {
    for (const auto& v : vars_) {
        if (std::isnan(v.lower) || std::isnan(v.upper)) throw ModelError("NaN bound on " + v.name);
        if (v.lower > v.upper) throw ModelError("crossed bounds on " + v.name);
        if (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0)) {
            throw ModelError("binary bounds outside [0,1] on " + v.name);
        }
        if (v.name.find_first_of(" \t\r\n") != std::string::npos) {
            throw ModelError("whitespace in variable name: " + v.name);
        }
    }
    for (const auto& c : cons_) {
        if (!std::isfinite(c.rhs)) throw ModelError("non-finite rhs in " + c.name);
        for (const auto& t : c.terms) {
            if (t.var < 0 || t.var >= num_variables()) throw ModelError("dangling variable in " + c.name);
            if (!std::isfinite(t.coef)) throw ModelError("non-finite coefficient in " + c.name);
        }
    }
    for (double c : obj_) {
        if (!std::isfinite(c)) throw ModelError("non-finite objective coefficient");
    }
}

double MilpModel::evaluate_objective(std::span<const double> x) const {
    double z = objective_constant_;
    for (std::size_t j = 0; j < obj_.size(); ++j) z += obj_[j] * x[j];
    return z;
}

double MilpModel::max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) {
        worst = std::max({worst, vars_[j].lower - x[j], x[j] - vars_[j].upper});
    }
    for (const auto& c : cons_) {
        double a = 0.0;
        for (const auto& t : c.terms) a += t.coef * x[static_cast<std::size_t>(t.var)];
        switch (c.sense) {
            case Sense::LessEqual: worst = std::max(worst, a - c.rhs); break;
            case Sense::GreaterEqual: worst = std::max(worst, c.rhs - a); break;
            case Sense::Equal: worst = std::max(worst, std::abs(a - c.rhs)); break;
        }
    }
    return worst;
}

double MilpModel::max_integrality_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) {
        if (vars_[j].kind != VarKind::Binary) continue;
        worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Builtin branch-and-bound

namespace {

Clock::time_point deadline_from(double seconds, Clock::time_point start) {
    if (!std::isfinite(seconds) || seconds > 1e9) return Clock::time_point::max();
    return start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

double elapsed(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Node {
    double bound = -kInf;
    long order = 0;
    std::vector<std::int32_t> fixings;  // (reduced column << 1) | value
    int branch_col = -1;  // column fixed last, for pseudocost updates
    double branch_dist = 0.0;
};

struct BestBound {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.order > b.order;
    }
};

Solution trivial_solution(const MilpModel& model, const Presolved& pre) {
    Solution s;
    s.status = SolveStatus::Optimal;
    s.values = pre.fixed_value;
    s.objective = model.evaluate_objective(s.values);
    s.bound = s.objective;
    return s;
}

// Best-bound search with plunging: after branching, the child on the side of
// the rounded LP value is solved next; the sibling waits in the queue. Until
// the first incumbent the queue is worked depth-first.
class BranchAndBound {
public:
    BranchAndBound(const MilpModel& model, const Presolved& pre, const SolverOptions& opt)
        : model_(model), pre_(pre), opt_(opt), engine_(pre.lp) {
        for (int k = 0; k < pre.lp.num_cols; ++k) {
            if (pre.is_integer[static_cast<std::size_t>(k)]) int_cols_.push_back(k);
        }
        const auto nk = int_cols_.size();
        root_lo_.resize(nk);
        root_hi_.resize(nk);
        priority_.resize(nk);
        for (std::size_t t = 0; t < nk; ++t) {
            root_lo_[t] = engine_.column_lower(int_cols_[t]);
            root_hi_[t] = engine_.column_upper(int_cols_[t]);
            priority_[t] = model.variable(pre.kept_cols[static_cast<std::size_t>(int_cols_[t])]).branch_priority;
        }
        cur_lo_ = root_lo_;
        cur_hi_ = root_hi_;
        slot_.assign(static_cast<std::size_t>(pre.lp.num_cols), -1);
        for (std::size_t t = 0; t < nk; ++t) slot_[static_cast<std::size_t>(int_cols_[t])] = static_cast<int>(t);
        for (auto* v : {&pc_sum_[0], &pc_sum_[1]}) v->assign(nk, 0.0);
        for (auto* v : {&pc_count_[0], &pc_count_[1]}) v->assign(nk, 0);
    }

    Solution run() {
        const auto start = Clock::now();
        const auto deadline = deadline_from(opt_.time_limit, start);
        Solution out;

        std::priority_queue<Node, std::vector<Node>, BestBound> best;
        std::vector<Node> stack;  // used until the first incumbent
        std::optional<Node> next = Node{-kInf, order_++, {}, -1, 0.0};
        bool limit_hit = false;
        bool numerical_trouble = false;
        auto push = [&](Node n) {
            if (has_incumbent_) best.push(std::move(n));
            else stack.push_back(std::move(n));
        };
        auto pending_bound = [&]() {
            double b = kInf;
            if (next) b = std::min(b, next->bound);
            if (!best.empty()) b = std::min(b, best.top().bound);
            for (const auto& n : stack) b = std::min(b, n.bound);
            return b;
        };

        while (next || !stack.empty() || !best.empty()) {
            if (Clock::now() > deadline || nodes_ >= opt_.node_limit) {
                limit_hit = true;
                break;
            }
            Node node;
            if (next) {
                node = std::move(*next);
                next.reset();
            } else if (!stack.empty()) {
                node = std::move(stack.back());
                stack.pop_back();
            } else {
                node = best.top();
                best.pop();
            }
            if (has_incumbent_ && node.bound >= incumbent_obj_ - gap_abs()) continue;

            apply(node.fixings);
            ++nodes_;
            const LpStatus st = engine_.solve(deadline);
            if (st == LpStatus::TimeLimit) {
                push(std::move(node));
                limit_hit = true;
                break;
            }
            if (st == LpStatus::Infeasible) continue;
            if (st == LpStatus::Unbounded) {
                if (nodes_ == 1) {
                    out.status = SolveStatus::Unbounded;
                    out.message = "LP relaxation unbounded";
                    out.stats = stats(start);
                    return out;
                }
                continue;
            }
            if (st != LpStatus::Optimal) {
                numerical_trouble = true;
                continue;
            }
            const double obj = engine_.objective() + pre_.objective_offset;
            record_pseudocost(node, obj);
            if (has_incumbent_ && obj >= incumbent_obj_ - gap_abs()) continue;

            const int branch = select_branch(obj);
            if (branch < 0) {
                const bool first = !has_incumbent_;
                take_incumbent(obj);
                if (first) {
                    for (auto& n : stack) best.push(std::move(n));
                    stack.clear();
                }
                continue;
            }
            const double v = engine_.value(branch);
            const int up = v >= 0.5 ? 1 : 0;
            Node a{obj, order_++, node.fixings, branch, up ? 1.0 - v : v};
            a.fixings.push_back((branch << 1) | up);
            Node b{obj, order_++, std::move(node.fixings), branch, up ? v : 1.0 - v};
            b.fixings.push_back((branch << 1) | (1 - up));
            push(std::move(b));
            next = std::move(a);
        }

        const double bound = std::min(has_incumbent_ ? incumbent_obj_ : kInf, pending_bound());
        out.bound = bound;
        if (has_incumbent_) {
            out.values = polish();
            out.objective = model_.evaluate_objective(out.values);
            const bool proven = !limit_hit || (out.objective - bound) <= gap_abs();
            out.status = proven ? SolveStatus::Optimal : SolveStatus::FeasibleLimit;
            if (out.status == SolveStatus::Optimal) out.bound = std::min(out.objective, bound);
        } else if (limit_hit) {
            out.status = SolveStatus::FeasibleLimit;
            out.message = "limit reached without incumbent";
        } else if (numerical_trouble) {
            out.status = SolveStatus::Error;
            out.message = "LP iteration limit during branch-and-bound";
        } else {
            out.status = SolveStatus::Infeasible;
        }
        out.stats = stats(start);
        return out;
    }

private:
    double gap_abs() const {
        return std::max(opt_.relative_gap * std::abs(incumbent_obj_), 1e-9);
    }

    SolveStats stats(Clock::time_point start) const {
        return {nodes_, engine_.iterations(), elapsed(start)};
    }

    void record_pseudocost(const Node& node, double obj) {
        if (node.branch_col < 0 || node.branch_dist <= 1e-9 || !std::isfinite(node.bound)) return;
        const auto t = static_cast<std::size_t>(slot_[static_cast<std::size_t>(node.branch_col)]);
        const int dir = node.fixings.back() & 1;
        const double gain = std::max(0.0, obj - node.bound) / node.branch_dist;
        pc_sum_[dir][t] += gain;
        pc_count_[dir][t] += 1;
        pc_total_[dir] += gain;
        pc_total_count_[dir] += 1;
    }

    double pseudocost(int dir, std::size_t t) const {
        if (pc_count_[dir][t] > 0) return pc_sum_[dir][t] / pc_count_[dir][t];
        return pc_total_count_[dir] > 0 ? pc_total_[dir] / static_cast<double>(pc_total_count_[dir]) : 1.0;
    }

    // Highest priority class first; inside it the pseudocost product score,
    // most-fractional breaking ties.
    int select_branch(double) {
        int best_col = -1;
        int best_prio = 0;
        double best_score = -1.0;
        double best_frac = 0.0;
        for (std::size_t t = 0; t < int_cols_.size(); ++t) {
            const int k = int_cols_[t];
            const double v = engine_.value(k);
            const double frac = std::abs(v - std::round(v));
            if (frac <= opt_.integrality_tol + 1e-12) continue;
            const int prio = priority_[t];
            if (best_col >= 0 && prio < best_prio) continue;
            const double down = v - std::floor(v);
            const double up = std::ceil(v) - v;
            const double score = std::max(pseudocost(0, t) * down, 1e-6) * std::max(pseudocost(1, t) * up, 1e-6);
            if (best_col < 0 || prio > best_prio || score > best_score * (1.0 + 1e-9) ||
                (score >= best_score * (1.0 - 1e-9) && frac > best_frac)) {
                best_col = k;
                best_prio = prio;
                best_score = score;
                best_frac = frac;
            }
        }
        return best_col;
    }

    void apply(const std::vector<std::int32_t>& fixings) {
        std::vector<double> lo = root_lo_;
        std::vector<double> hi = root_hi_;
        for (auto f : fixings) {
            const int col = f >> 1;
            const double val = f & 1;
            const auto t = static_cast<std::size_t>(slot_[static_cast<std::size_t>(col)]);
            lo[t] = hi[t] = val;
        }
        for (std::size_t t = 0; t < int_cols_.size(); ++t) {
            if (lo[t] != cur_lo_[t] || hi[t] != cur_hi_[t]) {
                engine_.set_column_bounds(int_cols_[t], lo[t], hi[t]);
                cur_lo_[t] = lo[t];
                cur_hi_[t] = hi[t];
            }
        }
    }

    void take_incumbent(double obj) {
        has_incumbent_ = true;
        incumbent_obj_ = obj;
        incumbent_.resize(static_cast<std::size_t>(engine_.num_cols()));
        for (int k = 0; k < engine_.num_cols(); ++k) incumbent_[static_cast<std::size_t>(k)] = engine_.value(k);
        for (int k : int_cols_) {
            auto& v = incumbent_[static_cast<std::size_t>(k)];
            v = std::round(v);
        }
    }

    // Re-solve the LP with every binary fixed at its incumbent value so the
    // continuous part is consistent with exactly integral binaries.
    std::vector<double> polish() {
        for (std::size_t t = 0; t < int_cols_.size(); ++t) {
            const double v = incumbent_[static_cast<std::size_t>(int_cols_[t])];
            engine_.set_column_bounds(int_cols_[t], v, v);
            cur_lo_[t] = cur_hi_[t] = v;
        }
        std::vector<double> reduced = incumbent_;
        if (engine_.solve() == LpStatus::Optimal) {
            for (int k = 0; k < engine_.num_cols(); ++k) reduced[static_cast<std::size_t>(k)] = engine_.value(k);
            for (int k : int_cols_) reduced[static_cast<std::size_t>(k)] = incumbent_[static_cast<std::size_t>(k)];
        }
        return pre_.expand(reduced);
    }

    const MilpModel& model_;
    const Presolved& pre_;
    const SolverOptions& opt_;
    LpEngine engine_;
    std::vector<int> int_cols_;
    std::vector<int> slot_;
    std::vector<int> priority_;
    std::vector<double> root_lo_, root_hi_, cur_lo_, cur_hi_;
    std::array<std::vector<double>, 2> pc_sum_;
    std::array<std::vector<long>, 2> pc_count_;
    std::array<double, 2> pc_total_{0.0, 0.0};
    std::array<long, 2> pc_total_count_{0, 0};
    bool has_incumbent_ = false;
    double incumbent_obj_ = kInf;
    std::vector<double> incumbent_;
    long nodes_ = 0;
    long order_ = 0;
};

}  // namespace

Solution solve(const MilpModel& model, const SolverOptions& options) {
    model.validate();
    if (options.backend == Backend::External) return solve_external(model, options);

    const auto start = Clock::now();
    const Presolved pre = detail::presolve(model, false);
    if (pre.infeasible) {
        Solution s;
        s.status = SolveStatus::Infeasible;
        s.message = "infeasible in presolve";
        s.stats.seconds = elapsed(start);
        return s;
    }
    if (pre.lp.num_cols == 0) {
        Solution s = trivial_solution(model, pre);
        s.stats.seconds = elapsed(start);
        return s;
    }
    BranchAndBound bb(model, pre, options);
    Solution s = bb.run();
    s.stats.seconds = elapsed(start);
    return s;
}

Solution solve_lp_relaxation(const MilpModel& model, const SolverOptions& options) {
    model.validate();
    const auto start = Clock::now();
    const Presolved pre = detail::presolve(model, true);
    Solution s;
    if (pre.infeasible) {
        s.status = SolveStatus::Infeasible;
        s.stats.seconds = elapsed(start);
        return s;
    }
    if (pre.lp.num_cols == 0) {
        s = trivial_solution(model, pre);
        s.stats.seconds = elapsed(start);
        return s;
    }
    LpEngine engine(pre.lp);
    const LpStatus st = engine.solve(deadline_from(options.time_limit, start));
    s.stats.lp_iterations = engine.iterations();
    s.stats.seconds = elapsed(start);
    switch (st) {
        case LpStatus::Optimal: {
            std::vector<double> reduced(static_cast<std::size_t>(engine.num_cols()));
            for (int k = 0; k < engine.num_cols(); ++k) reduced[static_cast<std::size_t>(k)] = engine.value(k);
            s.values = pre.expand(reduced);
            s.status = SolveStatus::Optimal;
            s.objective = model.evaluate_objective(s.values);
            s.bound = s.objective;
            break;
        }
        case LpStatus::Infeasible: s.status = SolveStatus::Infeasible; break;
        case LpStatus::Unbounded:
            s.status = SolveStatus::Unbounded;
            s.message = "LP relaxation unbounded";
            break;
        case LpStatus::TimeLimit:
            s.status = SolveStatus::FeasibleLimit;
            s.message = "time limit";
            break;
        case LpStatus::IterationLimit:
            s.status = SolveStatus::Error;
            s.message = "iteration limit";
            break;
    }
    return s;
}

}  // namespace rdt::milp
