#include "presolve.hpp"

#include <algorithm>
#include <cmath>

namespace rdt::milp::detail {

namespace {

constexpr double kTol = 1e-9;

struct Row {
    std::vector<Term> terms;
    double lo = -kInf;
    double hi = kInf;
    bool active = true;
};

}  // namespace

std::vector<double> Presolved::expand(const std::vector<double>& reduced) const {
    std::vector<double> full = fixed_value;
    for (std::size_t k = 0; k < kept_cols.size(); ++k) {
        full[static_cast<std::size_t>(kept_cols[k])] = reduced[k];
    }
    return full;
}

Presolved presolve(const MilpModel& model, bool relax_integrality) {
    const int n = model.num_variables();
    const auto un = static_cast<std::size_t>(n);
    std::vector<double> lo(un), hi(un);
    std::vector<char> integer(un, 0), fixed(un, 0);
    for (int j = 0; j < n; ++j) {
        const auto& v = model.variable(j);
        const auto uj = static_cast<std::size_t>(j);
        lo[uj] = v.lower;
        hi[uj] = v.upper;
        integer[uj] = v.kind == VarKind::Binary ? 1 : 0;
        if (integer[uj] && !relax_integrality) {
            lo[uj] = std::ceil(lo[uj] - kTol);
            hi[uj] = std::floor(hi[uj] + kTol);
        }
    }

    Presolved out;
    auto mark_infeasible = [&]() {
        out.infeasible = true;
        return out;
    };

    std::vector<Row> rows;
    rows.reserve(static_cast<std::size_t>(model.num_constraints()));
    for (const auto& c : model.constraints()) {
        Row r;
        r.terms = c.terms;
        switch (c.sense) {
            case Sense::LessEqual: r.hi = c.rhs; break;
            case Sense::GreaterEqual: r.lo = c.rhs; break;
            case Sense::Equal: r.lo = r.hi = c.rhs; break;
        }
        rows.push_back(std::move(r));
    }

    auto tighten = [&](int j, double new_lo, double new_hi) -> bool {
        const auto uj = static_cast<std::size_t>(j);
        if (integer[uj] && !relax_integrality) {
            new_lo = std::ceil(new_lo - kTol);
            new_hi = std::floor(new_hi + kTol);
        }
        if (new_lo > lo[uj] + kTol) lo[uj] = new_lo;
        if (new_hi < hi[uj] - kTol) hi[uj] = new_hi;
        if (lo[uj] > hi[uj]) {
            if (lo[uj] - hi[uj] > 1e-7 * std::max(1.0, std::abs(lo[uj]))) return false;
            hi[uj] = lo[uj];
        }
        return true;
    };

    bool changed = true;
    for (int sweep = 0; changed && sweep < 50; ++sweep) {
        changed = false;
        for (auto& r : rows) {
            if (!r.active) continue;
            // substitute fixed columns
            std::size_t w = 0;
            for (std::size_t k = 0; k < r.terms.size(); ++k) {
                const auto t = r.terms[k];
                const auto uj = static_cast<std::size_t>(t.var);
                if (lo[uj] == hi[uj]) {
                    r.lo -= t.coef * lo[uj];
                    r.hi -= t.coef * lo[uj];
                    changed = true;
                } else {
                    r.terms[w++] = t;
                }
            }
            r.terms.resize(w);

            if (r.terms.empty()) {
                if (r.lo > kTol * 100 || r.hi < -kTol * 100) return mark_infeasible();
                r.active = false;
                changed = true;
                continue;
            }
            if (r.terms.size() == 1) {
                const auto t = r.terms.front();
                double nlo = -kInf, nhi = kInf;
                if (t.coef > 0.0) {
                    nlo = r.lo / t.coef;
                    nhi = r.hi / t.coef;
                } else {
                    nlo = r.hi / t.coef;
                    nhi = r.lo / t.coef;
                }
                if (!tighten(t.var, nlo, nhi)) return mark_infeasible();
                r.active = false;
                changed = true;
                continue;
            }
            // activity bounds
            double amin = 0.0, amax = 0.0;
            for (const auto& t : r.terms) {
                const auto uj = static_cast<std::size_t>(t.var);
                if (t.coef > 0.0) {
                    amin += t.coef * lo[uj];
                    amax += t.coef * hi[uj];
                } else {
                    amin += t.coef * hi[uj];
                    amax += t.coef * lo[uj];
                }
            }
            if (std::isnan(amin)) amin = -kInf;
            if (std::isnan(amax)) amax = kInf;
            if (amin > r.hi + 1e-7 || amax < r.lo - 1e-7) return mark_infeasible();
            if (amin >= r.lo - kTol && amax <= r.hi + kTol) {
                r.active = false;
                changed = true;
                continue;
            }
            // forcing rows: every column pinned at the bound that attains the limit
            const bool force_max = std::isfinite(amax) && amax <= r.lo + kTol;
            const bool force_min = std::isfinite(amin) && amin >= r.hi - kTol;
            if (force_max || force_min) {
                for (const auto& t : r.terms) {
                    const auto uj = static_cast<std::size_t>(t.var);
                    const bool take_hi = (t.coef > 0.0) == force_max;
                    const double v = take_hi ? hi[uj] : lo[uj];
                    lo[uj] = hi[uj] = v;
                }
                r.active = false;
                changed = true;
            }
        }
    }

    // columns that appear in no active row are fixed at their cheapest bound
    std::vector<int> occurrences(un, 0);
    for (const auto& r : rows) {
        if (!r.active) continue;
        for (const auto& t : r.terms) ++occurrences[static_cast<std::size_t>(t.var)];
    }
    for (int j = 0; j < n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (lo[uj] == hi[uj] || occurrences[uj] > 0) continue;
        const double c = model.objective(j);
        double v;
        if (c > 0.0) {
            v = lo[uj];
        } else if (c < 0.0) {
            v = hi[uj];
        } else {
            v = std::isfinite(lo[uj]) ? lo[uj] : std::isfinite(hi[uj]) ? hi[uj] : 0.0;
        }
        if (!std::isfinite(v)) continue;  // unbounded direction, left to the LP
        lo[uj] = hi[uj] = v;
    }

    out.fixed_value.assign(un, 0.0);
    std::vector<int> new_index(un, -1);
    out.objective_offset = model.objective_constant();
    for (int j = 0; j < n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (lo[uj] == hi[uj]) {
            fixed[uj] = 1;
            out.fixed_value[uj] = lo[uj];
            out.objective_offset += model.objective(j) * lo[uj];
            continue;
        }
        new_index[uj] = static_cast<int>(out.kept_cols.size());
        out.kept_cols.push_back(j);
        out.is_integer.push_back(integer[uj]);
        out.lp.cost.push_back(model.objective(j));
        out.lp.lower.push_back(lo[uj]);
        out.lp.upper.push_back(hi[uj]);
        out.fixed_value[uj] = std::isfinite(lo[uj]) ? lo[uj] : 0.0;
    }
    out.lp.num_cols = static_cast<int>(out.kept_cols.size());

    for (auto& r : rows) {
        if (!r.active) continue;
        std::vector<Term> terms;
        double shift = 0.0;
        for (const auto& t : r.terms) {
            const auto uj = static_cast<std::size_t>(t.var);
            if (fixed[uj]) {
                shift += t.coef * lo[uj];
            } else {
                terms.push_back({new_index[uj], t.coef});
            }
        }
        const double rlo = r.lo - shift;
        const double rhi = r.hi - shift;
        if (terms.empty()) {
            if (rlo > 1e-7 || rhi < -1e-7) return mark_infeasible();
            continue;
        }
        out.lp.rows.push_back(std::move(terms));
        out.lp.row_lower.push_back(rlo);
        out.lp.row_upper.push_back(rhi);
    }
    return out;
}

}  // namespace rdt::milp::detail
