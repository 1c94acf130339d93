#include <cmath>
#include <set>

#include "doctest.h"
#include "rdt/fragility.hpp"
#include "support.hpp"

using namespace rdt;
using namespace rdt::testing;

namespace {

// Star feeder with `n` damageable spokes plus one candidate and one
// non-damageable line.
Network star(int n) {
    NetDoc d;
    d.bus("s", "ABC", true);
    for (int i = 0; i < n; ++i) {
        const std::string b = "b" + std::to_string(i);
        d.bus(b, "A").line("L" + std::to_string(i), "s", b, "A");
    }
    d.bus("safe", "A").line("U", "s", "safe", "A", 100.0, {{"damageable", false}});
    d.line("C", "b0", "safe", "A", 100.0, {{"status", "candidate"}});
    return d.build();
}

FragilityParams with_line_prob(double p, int count, std::uint64_t seed = 1) {
    FragilityParams f;
    f.line_failure_prob = p;
    f.scenario_count = count;
    f.seed = seed;
    return f;
}

}  // namespace

TEST_CASE("two-pole line failure probability") {
    CHECK(line_failure_probability(0.0) == 0.0);
    CHECK(line_failure_probability(1.0) == 1.0);
    // pole probability that gives 20% per line: 1 - sqrt(0.8)
    const double pole = 1.0 - std::sqrt(0.8);
    CHECK(pole == doctest::Approx(0.1055728).epsilon(1e-7));
    CHECK(line_failure_probability(0.1055728) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(line_failure_probability(pole) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK_THROWS_AS(line_failure_probability(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(line_failure_probability(1.5), std::invalid_argument);
}

TEST_CASE("parameter validation") {
    FragilityParams f;
    f.scenario_count = 0;
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);
    f.scenario_count = 1;
    f.line_failure_prob = 2.0;
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);
    f.line_failure_prob.reset();
    f.pole_failure_prob = 0.5;
    CHECK_NOTHROW(f.validate());
    CHECK(f.per_line_probability() == doctest::Approx(0.75));
}

TEST_CASE("probability extremes") {
    const Network n = star(10);
    const auto none = sample_scenarios(n, with_line_prob(0.0, 5));
    REQUIRE(none.size() == 6);
    for (const auto& s : none) CHECK(s.damaged_line_ids.empty());

    const auto all = sample_scenarios(n, with_line_prob(1.0, 5));
    std::vector<std::string> damageable;
    for (int i = 0; i < 10; ++i) damageable.push_back("L" + std::to_string(i));
    CHECK(all[0].damaged_line_ids.empty());
    for (std::size_t s = 1; s < all.size(); ++s) CHECK(all[s].damaged_line_ids == damageable);
}

TEST_CASE("baseline first and ids in order") {
    const auto sc = sample_scenarios(star(5), with_line_prob(0.3, 4));
    REQUIRE(sc.size() == 5);
    for (std::size_t s = 0; s < sc.size(); ++s) CHECK(sc[s].id == static_cast<int>(s));
    CHECK(sc[0].is_baseline());
    CHECK(sc[0].damaged_line_ids.empty());
}

TEST_CASE("binomial mean over 200 lines and 50 scenarios") {
    const Network n = star(200);
    const auto sc = sample_scenarios(n, with_line_prob(0.2, 50, 99));
    double total = 0.0;
    for (std::size_t s = 1; s < sc.size(); ++s) total += static_cast<double>(sc[s].damaged_line_ids.size());
    const double mean = total / 50.0;
    CHECK(std::abs(mean - 40.0) <= 3.0 * std::sqrt(200.0 * 0.2 * 0.8));
}

TEST_CASE("determinism and seed sensitivity") {
    const Network n = star(40);
    CHECK(serialize_scenarios(sample_scenarios(n, with_line_prob(0.3, 10, 5))) ==
          serialize_scenarios(sample_scenarios(n, with_line_prob(0.3, 10, 5))));
    CHECK(serialize_scenarios(sample_scenarios(n, with_line_prob(0.3, 10, 5))) !=
          serialize_scenarios(sample_scenarios(n, with_line_prob(0.3, 10, 6))));
}

TEST_CASE("raising the probability never shrinks a damage set") {
    const Network n = star(30);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto prev = sample_scenarios(n, with_line_prob(0.0, 8, seed));
        for (double p : {0.1, 0.2, 0.35, 0.5, 0.8, 1.0}) {
            const auto cur = sample_scenarios(n, with_line_prob(p, 8, seed));
            for (std::size_t s = 0; s < cur.size(); ++s) {
                const std::set<std::string> now(cur[s].damaged_line_ids.begin(), cur[s].damaged_line_ids.end());
                for (const auto& id : prev[s].damaged_line_ids) CHECK(now.count(id) == 1);
            }
            prev = cur;
        }
    }
}

TEST_CASE("candidate and protected lines never fail") {
    const Network n = star(12);
    for (const auto& s : sample_scenarios(n, with_line_prob(1.0, 20, 3))) {
        for (const auto& id : s.damaged_line_ids) {
            CHECK(id != "C");
            CHECK(id != "U");
        }
    }
}

TEST_CASE("uniforms depend only on seed, scenario and line") {
    const double u = line_uniform(42, 3, "L7");
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(line_uniform(42, 3, "L7") == u);
    CHECK(line_uniform(42, 4, "L7") != u);
    CHECK(line_uniform(43, 3, "L7") != u);
    CHECK(line_uniform(42, 3, "L8") != u);
}

TEST_CASE("scenario file round trip and validation") {
    const Network n = star(8);
    const auto sc = sample_scenarios(n, with_line_prob(0.4, 6, 8));
    const std::string text = serialize_scenarios(sc);
    const auto back = load_scenarios(text, n);
    REQUIRE(back.size() == sc.size());
    for (std::size_t s = 0; s < sc.size(); ++s) {
        CHECK(back[s].id == sc[s].id);
        CHECK(back[s].damaged_line_ids == sc[s].damaged_line_ids);
    }
    CHECK(serialize_scenarios(back) == text);

    CHECK_THROWS(load_scenarios(R"({"scenarios":[{"id":0,"damaged":[]},{"id":1,"damaged":["C"]}]})", n));
    CHECK_THROWS(load_scenarios(R"({"scenarios":[{"id":0,"damaged":[]},{"id":1,"damaged":["U"]}]})", n));
    CHECK_THROWS(load_scenarios(R"({"scenarios":[{"id":0,"damaged":[]},{"id":1,"damaged":["nope"]}]})", n));
}

TEST_CASE("damage mask follows line order") {
    const Network n = star(4);
    const auto mask = damage_mask(n, scenario(1, {"L1", "L3"}));
    REQUIRE(mask.size() == n.lines.size());
    CHECK(mask[1] == 1);
    CHECK(mask[3] == 1);
    CHECK(mask[0] == 0);
    CHECK(mask[2] == 0);
}
