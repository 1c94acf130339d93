#include <array>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>

#include "doctest.h"
#include "rdt/milp.hpp"

using namespace rdt::milp;

namespace {

// Random model over binaries and at most two boxed continuous variables.
struct RandomModel {
    MilpModel model;
    int binaries = 0;
    int continuous = 0;
};

RandomModel random_model(std::mt19937_64& rng, int max_binaries) {
    RandomModel rm;
    std::uniform_int_distribution<int> nb_dist(1, max_binaries);
    std::uniform_int_distribution<int> nc_dist(0, 2);
    std::uniform_int_distribution<int> coef(-5, 5);
    std::uniform_int_distribution<int> cost(-6, 9);
    rm.binaries = nb_dist(rng);
    rm.continuous = nc_dist(rng);
    for (int j = 0; j < rm.binaries; ++j) rm.model.add_binary("b" + std::to_string(j), cost(rng));
    for (int j = 0; j < rm.continuous; ++j) {
        rm.model.add_continuous("y" + std::to_string(j), 0.0, 1.0 + (rng() % 4), cost(rng) * 0.5);
    }
    const int n = rm.binaries + rm.continuous;
    // rows are built around a random point so most instances are feasible
    std::vector<double> anchor(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        anchor[static_cast<std::size_t>(j)] =
            j < rm.binaries ? static_cast<double>(rng() % 2) : std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    const int rows = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < rows; ++i) {
        std::vector<Term> terms;
        double act = 0.0;
        for (int j = 0; j < n; ++j) {
            if (rng() % 3 == 0) continue;
            const double c = coef(rng);
            terms.push_back({j, c});
            act += c * anchor[static_cast<std::size_t>(j)];
        }
        const int s = static_cast<int>(rng() % 5);
        const double slack = static_cast<double>(rng() % 3) - 0.5;
        if (s == 0) {
            rm.model.add_constraint("", terms, Sense::Equal, act);
        } else if (s % 2 == 1) {
            rm.model.add_constraint("", terms, Sense::LessEqual, act + slack);
        } else {
            rm.model.add_constraint("", terms, Sense::GreaterEqual, act - slack);
        }
    }
    return rm;
}

// Minimum of c.y over {y in box : A y (sense) b} for one or two variables,
// by enumerating boundary intersections. Returns +inf when empty.
struct HalfPlane {
    std::array<double, 2> a{};
    double b = 0.0;  // a.y <= b
};

double small_lp_min(int dims, const std::array<double, 2>& c, std::vector<HalfPlane> hp) {
    constexpr double tol = 1e-9;
    auto feasible = [&](const std::array<double, 2>& y) {
        for (const auto& h : hp) {
            if (h.a[0] * y[0] + h.a[1] * y[1] > h.b + tol) return false;
        }
        return true;
    };
    double best = kInf;
    if (dims == 0) return feasible({0.0, 0.0}) ? 0.0 : kInf;
    std::vector<std::array<double, 2>> candidates;
    if (dims == 1) {
        for (const auto& h : hp) {
            if (std::abs(h.a[0]) > 1e-12) candidates.push_back({h.b / h.a[0], 0.0});
        }
    } else {
        for (std::size_t i = 0; i < hp.size(); ++i) {
            for (std::size_t k = i + 1; k < hp.size(); ++k) {
                const double det = hp[i].a[0] * hp[k].a[1] - hp[i].a[1] * hp[k].a[0];
                if (std::abs(det) < 1e-12) continue;
                candidates.push_back({(hp[i].b * hp[k].a[1] - hp[i].a[1] * hp[k].b) / det,
                                      (hp[i].a[0] * hp[k].b - hp[i].b * hp[k].a[0]) / det});
            }
        }
    }
    for (const auto& y : candidates) {
        if (feasible(y)) best = std::min(best, c[0] * y[0] + c[1] * y[1]);
    }
    return best;
}

double enumerate(const RandomModel& rm) {
    const auto& m = rm.model;
    double best = kInf;
    for (long mask = 0; mask < (1L << rm.binaries); ++mask) {
        double base = m.objective_constant();
        for (int j = 0; j < rm.binaries; ++j) base += m.objective(j) * static_cast<double>((mask >> j) & 1);
        std::vector<HalfPlane> hp;
        for (int j = 0; j < rm.continuous; ++j) {
            const int v = rm.binaries + j;
            HalfPlane lo, hi;
            lo.a[static_cast<std::size_t>(j)] = -1.0;
            lo.b = -m.variable(v).lower;
            hi.a[static_cast<std::size_t>(j)] = 1.0;
            hi.b = m.variable(v).upper;
            hp.push_back(lo);
            hp.push_back(hi);
        }
        for (const auto& con : m.constraints()) {
            HalfPlane h;
            double fixed = 0.0;
            for (const auto& t : con.terms) {
                if (t.var < rm.binaries) {
                    fixed += t.coef * static_cast<double>((mask >> t.var) & 1);
                } else {
                    h.a[static_cast<std::size_t>(t.var - rm.binaries)] = t.coef;
                }
            }
            h.b = con.rhs - fixed;
            HalfPlane neg{{-h.a[0], -h.a[1]}, -h.b};
            if (con.sense != Sense::GreaterEqual) hp.push_back(h);
            if (con.sense != Sense::LessEqual) hp.push_back(neg);
        }
        std::array<double, 2> c{};
        for (int j = 0; j < rm.continuous; ++j) c[static_cast<std::size_t>(j)] = m.objective(rm.binaries + j);
        const double lp = small_lp_min(rm.continuous, c, hp);
        if (std::isfinite(lp)) best = std::min(best, base + lp);
    }
    return best;
}

SolverOptions exact() {
    SolverOptions o;
    o.relative_gap = 1e-9;
    return o;
}

bool scipy_available() {
    static const bool ok = std::system("python3 -c 'import scipy.optimize' >/dev/null 2>&1") == 0;
    return ok;
}

std::string adapter_command() {
    return std::string("python3 ") + RDT_TOOLS_DIR + "/scipy_milp_adapter.py {model} {solution}";
}

}  // namespace

TEST_CASE("single continuous bound") {
    MilpModel m;
    const int x = m.add_continuous("x", -kInf, kInf, 1.0);
    m.add_constraint("lb", {{x, 1.0}}, Sense::GreaterEqual, 3.0);
    const auto s = solve(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.value(x) == doctest::Approx(3.0));
    CHECK(s.objective == doctest::Approx(3.0));
}

TEST_CASE("two binaries covering 1.5") {
    MilpModel m;
    const int x = m.add_binary("x", 1.0);
    const int y = m.add_binary("y", 1.0);
    m.add_constraint("cover", {{x, 1.0}, {y, 1.0}}, Sense::GreaterEqual, 1.5);
    const auto s = solve(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective == doctest::Approx(2.0));
    const auto r = solve_lp_relaxation(m);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(1.5));
}

TEST_CASE("contradictory binary is infeasible") {
    MilpModel m;
    const int x = m.add_binary("x");
    m.add_constraint("lo", {{x, 1.0}}, Sense::GreaterEqual, 0.5);
    m.add_constraint("hi", {{x, 1.0}}, Sense::LessEqual, 0.4);
    CHECK(solve(m).status == SolveStatus::Infeasible);
}

TEST_CASE("lp relaxation edge cases") {
    SUBCASE("no constraints, zero objective") {
        MilpModel m;
        m.add_continuous("x", 0.0, 5.0);
        const auto s = solve_lp_relaxation(m);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(s.objective == 0.0);
    }
    SUBCASE("infeasible") {
        MilpModel m;
        const int x = m.add_continuous("x", 0.0, kInf);
        const int y = m.add_continuous("y", 0.0, kInf);
        m.add_constraint("a", {{x, 1.0}, {y, 1.0}}, Sense::LessEqual, 1.0);
        m.add_constraint("b", {{x, 1.0}, {y, 2.0}}, Sense::GreaterEqual, 3.0);
        CHECK(solve_lp_relaxation(m).status == SolveStatus::Infeasible);
    }
    SUBCASE("unbounded") {
        MilpModel m;
        const int x = m.add_continuous("x", 0.0, kInf, -1.0);
        const int y = m.add_continuous("y", 0.0, kInf);
        m.add_constraint("a", {{x, 1.0}, {y, -1.0}}, Sense::LessEqual, 1.0);
        CHECK(solve_lp_relaxation(m).status == SolveStatus::Unbounded);
    }
}

TEST_CASE("model invariants are enforced") {
    MilpModel m;
    const int x = m.add_binary("x");
    CHECK_THROWS_AS(m.add_binary("x"), ModelError);
    CHECK_THROWS_AS(m.add_constraint("bad", {{7, 1.0}}, Sense::LessEqual, 0.0), ModelError);
    m.set_bounds(x, 0.0, 2.0);
    CHECK_THROWS_AS(m.validate(), ModelError);
}

TEST_CASE("builtin solver matches exhaustive enumeration") {
    std::mt19937_64 rng(20240611);
    int feasible = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const auto rm = random_model(rng, 12);
        const double expected = enumerate(rm);
        const auto s = solve(rm.model, exact());
        CAPTURE(trial);
        if (!std::isfinite(expected)) {
            CHECK(s.status == SolveStatus::Infeasible);
            continue;
        }
        ++feasible;
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(s.objective == doctest::Approx(expected).epsilon(1e-7));
        CHECK(rm.model.max_violation(s.values) <= 1e-6);
        CHECK(rm.model.max_integrality_violation(s.values) == 0.0);
    }
    CHECK(feasible > 150);
}

TEST_CASE("lp relaxation bounds the integer optimum") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const auto rm = random_model(rng, 10);
        const auto s = solve(rm.model, exact());
        if (s.status != SolveStatus::Optimal) continue;
        const auto r = solve_lp_relaxation(rm.model);
        REQUIRE(r.status == SolveStatus::Optimal);
        CHECK(r.objective <= s.objective + 1e-7);
        CHECK(s.bound <= s.objective + 1e-9);
    }
}

TEST_CASE("builtin solve is deterministic") {
    std::mt19937_64 rng(5);
    const auto rm = random_model(rng, 12);
    const auto a = solve(rm.model);
    const auto b = solve(rm.model);
    CHECK(a.status == b.status);
    CHECK(a.values == b.values);
}

TEST_CASE("mps writer") {
    SUBCASE("one variable has one column entry") {
        MilpModel m;
        m.add_continuous("x", 3.0, kInf, 1.0);
        const auto text = write_model(m);
        const auto cols = text.find("COLUMNS\n");
        const auto rhs = text.find("RHS\n");
        REQUIRE(cols != std::string::npos);
        const auto body = text.substr(cols + 8, rhs - cols - 8);
        CHECK(body == "    x obj 1\n");
        CHECK(text.find(" LO bnd x 3\n") != std::string::npos);
    }
    SUBCASE("zero coefficients are omitted") {
        MilpModel m;
        const int x = m.add_continuous("x", 0.0, 1.0, 0.0);
        const int y = m.add_continuous("y", 0.0, 1.0, 2.0);
        m.add_constraint("r", {{x, 0.0}, {y, 1.0}}, Sense::LessEqual, 1.0);
        const auto text = write_model(m);
        CHECK(text.find("x r") == std::string::npos);
        CHECK(text.find("y obj 2 r 1") != std::string::npos);
    }
    SUBCASE("binaries are marked") {
        MilpModel m;
        m.add_binary("z", 1.0);
        const auto text = write_model(m);
        CHECK(text.find("INTORG") < text.find("z obj 1"));
        CHECK(text.find("INTEND") > text.find("z obj 1"));
        CHECK(text.find(" UP bnd z 1\n") != std::string::npos);
    }
}

TEST_CASE("external solution parsing") {
    MilpModel m;
    const int x = m.add_binary("x", 1.0);
    const int y = m.add_continuous("y", 0.0, 4.0, 1.0);
    SUBCASE("two values") {
        const auto s = parse_external_solution("status optimal\nobjective 2.5\nx 1\ny 1.5\n", m);
        REQUIRE(s.status == SolveStatus::Optimal);
        REQUIRE(s.values.size() == 2);
        CHECK(s.value(x) == 1.0);
        CHECK(s.value(y) == 1.5);
        CHECK(s.objective == 2.5);
    }
    SUBCASE("unknown name") {
        try {
            (void)parse_external_solution("status optimal\nobjective 1\nzz 1\n", m);
            FAIL("expected an error");
        } catch (const SolverError& e) {
            CHECK(std::string(e.what()).find("zz") != std::string::npos);
        }
    }
    SUBCASE("near-integral binary is rounded") {
        const auto s = parse_external_solution("status optimal\nobjective 1\nx 0.9999997\ny 0\n", m);
        CHECK(s.value(x) == 1.0);
    }
    SUBCASE("fractional binary is rejected") {
        CHECK_THROWS_AS(parse_external_solution("status optimal\nobjective 1\nx 0.5\n", m), SolverError);
    }
    SUBCASE("missing objective") {
        CHECK_THROWS_AS(parse_external_solution("status optimal\nx 1\n", m), SolverError);
    }
    SUBCASE("malformed") {
        CHECK_THROWS_AS(parse_external_solution("status optimal\nobjective 1\nx one\n", m), SolverError);
        CHECK_THROWS_AS(parse_external_solution("objective 1\n", m), SolverError);
    }
}

TEST_CASE("external backend failures") {
    MilpModel m;
    m.add_binary("x", 1.0);
    SolverOptions o;
    o.backend = Backend::External;
    SUBCASE("nonzero exit") {
        o.external_command = "false {model} {solution}";
        CHECK_THROWS_AS(solve(m, o), SolverError);
    }
    SUBCASE("no solution file") {
        o.external_command = "true {model} {solution}";
        CHECK_THROWS_AS(solve(m, o), SolverError);
    }
}

TEST_CASE("external round trip agrees with builtin") {
    if (!scipy_available()) {
        MESSAGE("python3 with scipy not available; skipping");
        return;
    }
    SolverOptions o;
    o.backend = Backend::External;
    o.external_command = adapter_command();
    {
        MilpModel m;
        const int x = m.add_binary("x", 1.0);
        const int y = m.add_binary("y", 1.0);
        m.add_constraint("cover", {{x, 1.0}, {y, 1.0}}, Sense::GreaterEqual, 1.5);
        const auto s = solve(m, o);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(s.objective == doctest::Approx(2.0));
    }
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 15; ++trial) {
        const auto rm = random_model(rng, 8);
        const auto a = solve(rm.model, exact());
        const auto b = solve(rm.model, o);
        CAPTURE(trial);
        CHECK(a.status == b.status);
        if (a.status == SolveStatus::Optimal && b.status == SolveStatus::Optimal) {
            CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-6));
        }
    }
}
