#include "lp_engine.hpp"

#include <algorithm>
#include <cmath>

namespace rdt::milp::detail {

namespace {

constexpr double kArtificialBound = 1e7;
constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kDropTol = 1e-13;
constexpr long kRefreshInterval = 256;
constexpr long kRefactorFloor = 200;

}  // namespace

LpEngine::LpEngine(const LpProblem& p)
    : m_(static_cast<int>(p.rows.size())), n_(p.num_cols), total_(n_ + m_), rows_(p.rows) {
    const auto total = static_cast<std::size_t>(total_);
    tab_.assign(static_cast<std::size_t>(m_) * total, 0.0);
    cost_.assign(total, 0.0);
    lo_.assign(total, 0.0);
    hi_.assign(total, 0.0);
    artificial_.assign(total, 0);
    x_.assign(total, 0.0);
    state_.assign(total, AtLower);
    where_.assign(total, -1);
    basis_.resize(static_cast<std::size_t>(m_));

    for (int j = 0; j < n_; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        cost_[uj] = p.cost[uj];
        lo_[uj] = p.lower[uj];
        hi_[uj] = p.upper[uj];
        const double c = cost_[uj];
        const bool lo_fin = std::isfinite(lo_[uj]);
        const bool hi_fin = std::isfinite(hi_[uj]);
        if (lo_fin && hi_fin) {
            state_[uj] = (c >= 0.0 || lo_[uj] == hi_[uj]) ? AtLower : AtUpper;
        } else if (lo_fin) {
            if (c < 0.0) {
                hi_[uj] = std::max(lo_[uj], 0.0) + kArtificialBound;
                artificial_[uj] = 1;
                state_[uj] = AtUpper;
            } else {
                state_[uj] = AtLower;
            }
        } else if (hi_fin) {
            if (c > 0.0) {
                lo_[uj] = std::min(hi_[uj], 0.0) - kArtificialBound;
                artificial_[uj] = 1;
                state_[uj] = AtLower;
            } else {
                state_[uj] = AtUpper;
            }
        } else if (c == 0.0) {
            state_[uj] = FreeZero;
        } else {
            lo_[uj] = -kArtificialBound;
            hi_[uj] = kArtificialBound;
            artificial_[uj] = 1;
            state_[uj] = c > 0.0 ? AtLower : AtUpper;
        }
        x_[uj] = state_[uj] == AtLower ? lo_[uj] : state_[uj] == AtUpper ? hi_[uj] : 0.0;
    }

    for (int i = 0; i < m_; ++i) {
        const auto slack = static_cast<std::size_t>(n_ + i);
        double* r = row(i);
        double activity = 0.0;
        for (const auto& t : p.rows[static_cast<std::size_t>(i)]) {
            r[t.var] -= t.coef;
            activity += t.coef * x_[static_cast<std::size_t>(t.var)];
        }
        r[n_ + i] = 1.0;
        lo_[slack] = p.row_lower[static_cast<std::size_t>(i)];
        hi_[slack] = p.row_upper[static_cast<std::size_t>(i)];
        basis_[static_cast<std::size_t>(i)] = n_ + i;
        where_[slack] = i;
        state_[slack] = Basic;
        x_[slack] = activity;
    }
    work_cost_ = cost_;
    d_ = cost_;
    nz_.reserve(total);
}

double LpEngine::objective() const {
    double z = 0.0;
    for (int j = 0; j < n_; ++j) z += cost_[static_cast<std::size_t>(j)] * x_[static_cast<std::size_t>(j)];
    return z;
}

void LpEngine::pivot(int r, int q) {
    double* pr = row(r);
    const double inv = 1.0 / pr[q];
    nz_.clear();
    for (int j = 0; j < total_; ++j) {
        if (pr[j] == 0.0) continue;
        const double v = pr[j] * inv;
        if (std::abs(v) < kDropTol) {
            pr[j] = 0.0;
        } else {
            pr[j] = v;
            nz_.push_back(j);
        }
    }
    pr[q] = 1.0;
    for (int i = 0; i < m_; ++i) {
        if (i == r) continue;
        double* ri = row(i);
        const double a = ri[q];
        if (a == 0.0) continue;
        for (int j : nz_) {
            const double v = ri[j] - a * pr[j];
            ri[j] = std::abs(v) < kDropTol ? 0.0 : v;
        }
        ri[q] = 0.0;
    }
    const double dq = d_[static_cast<std::size_t>(q)];
    if (dq != 0.0) {
        for (int j : nz_) d_[static_cast<std::size_t>(j)] -= dq * pr[j];
    }
    d_[static_cast<std::size_t>(q)] = 0.0;

    const int leaving = basis_[static_cast<std::size_t>(r)];
    where_[static_cast<std::size_t>(leaving)] = -1;
    basis_[static_cast<std::size_t>(r)] = q;
    where_[static_cast<std::size_t>(q)] = r;
    state_[static_cast<std::size_t>(q)] = Basic;
    ++iterations_;
    ++since_refresh_;
    ++since_refactor_;
}

void LpEngine::refactor() {
    std::fill(tab_.begin(), tab_.end(), 0.0);
    for (int i = 0; i < m_; ++i) {
        double* r = row(i);
        for (const auto& t : rows_[static_cast<std::size_t>(i)]) r[t.var] -= t.coef;
        r[n_ + i] = 1.0;
    }
    const std::vector<int> wanted = basis_;
    for (int j = 0; j < total_; ++j) where_[static_cast<std::size_t>(j)] = -1;
    for (int i = 0; i < m_; ++i) {
        basis_[static_cast<std::size_t>(i)] = n_ + i;
        where_[static_cast<std::size_t>(n_ + i)] = i;
    }
    std::vector<char> keep(static_cast<std::size_t>(total_), 0);
    for (int b : wanted) keep[static_cast<std::size_t>(b)] = 1;
    const long saved_iterations = iterations_;
    for (int j : wanted) {
        if (j >= n_) continue;
        int r = -1;
        double best = 1e-9;
        for (int i = 0; i < m_; ++i) {
            const int b = basis_[static_cast<std::size_t>(i)];
            if (b < n_ || keep[static_cast<std::size_t>(b)]) continue;
            const double a = std::abs(row(i)[j]);
            if (a > best) {
                best = a;
                r = i;
            }
        }
        if (r >= 0) {
            pivot(r, j);
            continue;
        }
        // numerically singular: leave j nonbasic at its nearest bound
        const auto uj = static_cast<std::size_t>(j);
        if (std::isfinite(lo_[uj]) && (!std::isfinite(hi_[uj]) || x_[uj] - lo_[uj] <= hi_[uj] - x_[uj])) {
            state_[uj] = AtLower;
            x_[uj] = lo_[uj];
        } else if (std::isfinite(hi_[uj])) {
            state_[uj] = AtUpper;
            x_[uj] = hi_[uj];
        } else {
            state_[uj] = FreeZero;
            x_[uj] = 0.0;
        }
    }
    for (int i = 0; i < m_; ++i) state_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = Basic;
    iterations_ = saved_iterations;
    since_refactor_ = 0;
    recompute_reduced_costs();
    recompute_basic_values();
}

void LpEngine::shift_nonbasic(int j, double new_value) {
    const double delta = new_value - x_[static_cast<std::size_t>(j)];
    x_[static_cast<std::size_t>(j)] = new_value;
    if (delta == 0.0) return;
    for (int i = 0; i < m_; ++i) {
        const double a = row(i)[j];
        if (a != 0.0) x_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] -= a * delta;
    }
}

void LpEngine::recompute_reduced_costs() {
    d_ = work_cost_;
    for (int i = 0; i < m_; ++i) {
        const double cb = work_cost_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])];
        if (cb == 0.0) continue;
        const double* ri = row(i);
        for (int j = 0; j < total_; ++j) {
            if (ri[j] != 0.0) d_[static_cast<std::size_t>(j)] -= cb * ri[j];
        }
    }
    for (int b : basis_) d_[static_cast<std::size_t>(b)] = 0.0;
}

void LpEngine::recompute_basic_values() {
    std::vector<int> active;
    for (int j = 0; j < total_; ++j) {
        if (state_[static_cast<std::size_t>(j)] != Basic && x_[static_cast<std::size_t>(j)] != 0.0) active.push_back(j);
    }
    for (int i = 0; i < m_; ++i) {
        const double* ri = row(i);
        double s = 0.0;
        for (int j : active) s += ri[j] * x_[static_cast<std::size_t>(j)];
        x_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = -s;
    }
    since_refresh_ = 0;
}

void LpEngine::set_column_bounds(int col, double lower, double upper) {
    const auto j = static_cast<std::size_t>(col);
    lo_[j] = lower;
    hi_[j] = upper;
    artificial_[j] = 0;
    if (state_[j] == Basic) return;
    State target;
    if (lower == upper) {
        target = AtLower;
    } else if (d_[j] > kDualTol) {
        target = AtLower;
    } else if (d_[j] < -kDualTol) {
        target = AtUpper;
    } else {
        target = state_[j] == AtUpper ? AtUpper : AtLower;
    }
    if (target == AtLower && !std::isfinite(lower)) target = AtUpper;
    if (target == AtUpper && !std::isfinite(upper)) target = AtLower;
    state_[j] = target;
    shift_nonbasic(col, target == AtLower ? lower : upper);
}

bool LpEngine::repair_dual_feasibility() {
    bool shifted = false;
    for (int j = 0; j < total_; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        const auto st = state_[uj];
        if (st == Basic || lo_[uj] == hi_[uj]) continue;
        const double dj = d_[uj];
        if (st == AtLower && dj < -kDualTol) {
            if (std::isfinite(hi_[uj])) {
                state_[uj] = AtUpper;
                shift_nonbasic(j, hi_[uj]);
            } else {
                work_cost_[uj] -= dj;
                d_[uj] = 0.0;
                shifted = true;
            }
        } else if (st == AtUpper && dj > kDualTol) {
            if (std::isfinite(lo_[uj])) {
                state_[uj] = AtLower;
                shift_nonbasic(j, lo_[uj]);
            } else {
                work_cost_[uj] -= dj;
                d_[uj] = 0.0;
                shifted = true;
            }
        } else if (st == FreeZero && std::abs(dj) > kDualTol) {
            work_cost_[uj] -= dj;
            d_[uj] = 0.0;
            shifted = true;
        }
    }
    return shifted;
}

void LpEngine::perturb_costs() {
    std::uniform_real_distribution<double> u(0.5, 1.0);
    for (int j = 0; j < total_; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        const auto st = state_[uj];
        if (st == Basic || st == FreeZero || lo_[uj] == hi_[uj]) continue;
        const double delta = 1e-7 * (1.0 + std::abs(cost_[uj])) * u(rng_);
        if (st == AtLower) {
            work_cost_[uj] += delta;
            d_[uj] += delta;
        } else {
            work_cost_[uj] -= delta;
            d_[uj] -= delta;
        }
    }
}

LpStatus LpEngine::dual_simplex(Clock::time_point deadline) {
    const long limit = iterations_ + 50L * (m_ + n_) + 10000;
    while (true) {
        if ((iterations_ & 63) == 0 && Clock::now() > deadline) return LpStatus::TimeLimit;
        if (iterations_ > limit) return LpStatus::IterationLimit;
        if (since_refactor_ > 2 * std::max<long>(kRefactorFloor, m_)) {
            refactor();
        } else if (since_refresh_ > kRefreshInterval) {
            recompute_basic_values();
        }

        int r = -1;
        double worst = kPrimalTol;
        for (int i = 0; i < m_; ++i) {
            const auto b = static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)]);
            const double v = x_[b];
            double inf = 0.0;
            if (v < lo_[b] - kPrimalTol) {
                inf = lo_[b] - v;
            } else if (v > hi_[b] + kPrimalTol) {
                inf = v - hi_[b];
            }
            if (inf > worst) {
                worst = inf;
                r = i;
            }
        }
        if (r < 0) return LpStatus::Optimal;

        const int p = basis_[static_cast<std::size_t>(r)];
        const auto up = static_cast<std::size_t>(p);
        const bool increase = x_[up] < lo_[up];
        const double target = increase ? lo_[up] : hi_[up];
        const double sigma = increase ? 1.0 : -1.0;
        const double* pr = row(r);

        auto slack_of = [&](int j, double a, double& mag) {
            const auto uj = static_cast<std::size_t>(j);
            const auto st = state_[uj];
            if (st == Basic) return false;
            if (st == FreeZero) {
                mag = 0.0;
                return true;
            }
            if (lo_[uj] == hi_[uj]) return false;
            if (st == AtLower && sigma * a < 0.0) {
                mag = std::max(d_[uj], 0.0);
                return true;
            }
            if (st == AtUpper && sigma * a > 0.0) {
                mag = std::max(-d_[uj], 0.0);
                return true;
            }
            return false;
        };

        double t_max = kInf;
        for (int j = 0; j < total_; ++j) {
            const double a = pr[j];
            if (std::abs(a) < kPivotTol) continue;
            double mag = 0.0;
            if (!slack_of(j, a, mag)) continue;
            t_max = std::min(t_max, (mag + kDualTol) / std::abs(a));
        }
        if (!std::isfinite(t_max)) {
            if (since_refactor_ == 0) return LpStatus::Infeasible;
            refactor();
            continue;
        }

        int q = -1;
        double best_a = 0.0;
        for (int j = 0; j < total_; ++j) {
            const double a = pr[j];
            if (std::abs(a) < kPivotTol) continue;
            double mag = 0.0;
            if (!slack_of(j, a, mag)) continue;
            if (mag / std::abs(a) <= t_max && std::abs(a) > best_a) {
                best_a = std::abs(a);
                q = j;
            }
        }

        const double dx = (target - x_[up]) / (-pr[q]);
        shift_nonbasic(q, x_[static_cast<std::size_t>(q)] + dx);
        x_[up] = target;
        pivot(r, q);
        state_[up] = increase ? AtLower : AtUpper;
    }
}

LpStatus LpEngine::primal_simplex(Clock::time_point deadline) {
    const long limit = iterations_ + 50L * (m_ + n_) + 10000;
    bool bland = false;
    int degenerate = 0;
    while (true) {
        if ((iterations_ & 63) == 0 && Clock::now() > deadline) return LpStatus::TimeLimit;
        if (iterations_ > limit) return LpStatus::IterationLimit;
        if (since_refactor_ > 2 * std::max<long>(kRefactorFloor, m_)) {
            refactor();
        } else if (since_refresh_ > kRefreshInterval) {
            recompute_basic_values();
        }

        int q = -1;
        double best = 0.0;
        for (int j = 0; j < total_; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            const auto st = state_[uj];
            if (st == Basic || lo_[uj] == hi_[uj]) continue;
            const double dj = d_[uj];
            double score = 0.0;
            if (st == AtLower && dj < -kDualTol) {
                score = -dj;
            } else if (st == AtUpper && dj > kDualTol) {
                score = dj;
            } else if (st == FreeZero && std::abs(dj) > kDualTol) {
                score = std::abs(dj);
            }
            if (score <= 0.0) continue;
            if (bland) {
                q = j;
                break;
            }
            if (score > best) {
                best = score;
                q = j;
            }
        }
        if (q < 0) return LpStatus::Optimal;

        const auto uq = static_cast<std::size_t>(q);
        const double dir = d_[uq] < 0.0 ? 1.0 : -1.0;

        auto limit_of = [&](int i, double g, double tol) {
            const auto b = static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)]);
            if (g > 0.0) {
                return std::isfinite(lo_[b]) ? (x_[b] - lo_[b] + tol) / g : kInf;
            }
            return std::isfinite(hi_[b]) ? (hi_[b] - x_[b] + tol) / (-g) : kInf;
        };

        int r = -1;
        double theta = kInf;
        if (bland) {
            for (int i = 0; i < m_; ++i) {
                const double g = row(i)[q] * dir;
                if (std::abs(g) < kPivotTol) continue;
                const double lim = std::max(0.0, limit_of(i, g, 0.0));
                if (lim < theta - 1e-12 ||
                    (std::abs(lim - theta) <= 1e-12 && r >= 0 &&
                     basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(r)])) {
                    theta = lim;
                    r = i;
                }
            }
        } else {
            double t_max = kInf;
            for (int i = 0; i < m_; ++i) {
                const double g = row(i)[q] * dir;
                if (std::abs(g) < kPivotTol) continue;
                t_max = std::min(t_max, limit_of(i, g, kPrimalTol));
            }
            double best_g = 0.0;
            if (std::isfinite(t_max)) {
                for (int i = 0; i < m_; ++i) {
                    const double g = row(i)[q] * dir;
                    if (std::abs(g) < kPivotTol) continue;
                    const double lim = limit_of(i, g, 0.0);
                    if (lim <= t_max && std::abs(g) > best_g) {
                        best_g = std::abs(g);
                        r = i;
                        theta = std::max(0.0, lim);
                    }
                }
            }
        }

        const double flip = (std::isfinite(hi_[uq]) && std::isfinite(lo_[uq])) ? hi_[uq] - lo_[uq] : kInf;
        if (r < 0 && !std::isfinite(flip)) {
            if (since_refactor_ == 0) return LpStatus::Unbounded;
            refactor();
            continue;
        }

        if (flip <= theta) {
            state_[uq] = dir > 0.0 ? AtUpper : AtLower;
            shift_nonbasic(q, dir > 0.0 ? hi_[uq] : lo_[uq]);
            degenerate = 0;
            continue;
        }

        const int leaving = basis_[static_cast<std::size_t>(r)];
        const auto ul = static_cast<std::size_t>(leaving);
        const double g = row(r)[q] * dir;
        shift_nonbasic(q, x_[uq] + dir * theta);
        const bool to_lower = g > 0.0;
        x_[ul] = to_lower ? lo_[ul] : hi_[ul];
        pivot(r, q);
        state_[ul] = to_lower ? AtLower : AtUpper;

        if (theta < 1e-12) {
            if (++degenerate > 50) bland = true;
        } else {
            degenerate = 0;
            bland = false;
        }
    }
}

double LpEngine::max_primal_infeasibility() const {
    double worst = 0.0;
    for (int b : basis_) {
        const auto ub = static_cast<std::size_t>(b);
        worst = std::max({worst, lo_[ub] - x_[ub], x_[ub] - hi_[ub]});
    }
    return worst;
}

bool LpEngine::hits_artificial_bound() const {
    for (int j = 0; j < n_; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (!artificial_[uj]) continue;
        if (std::abs(x_[uj]) > 0.5 * kArtificialBound) return true;
    }
    return false;
}

LpStatus LpEngine::solve(Clock::time_point deadline) {
    if (since_refactor_ > std::max<long>(kRefactorFloor, m_)) refactor();
    for (int pass = 0; pass < 4; ++pass) {
        repair_dual_feasibility();
        perturb_costs();
        LpStatus st = dual_simplex(deadline);
        work_cost_ = cost_;
        recompute_reduced_costs();
        if (st != LpStatus::Optimal) return st;

        st = primal_simplex(deadline);
        if (st != LpStatus::Optimal) return st;
        recompute_basic_values();
        if (max_primal_infeasibility() <= 1e-7) {
            if (hits_artificial_bound()) return LpStatus::Unbounded;
            return LpStatus::Optimal;
        }
    }
    return LpStatus::IterationLimit;
}

}  // namespace rdt::milp::detail
