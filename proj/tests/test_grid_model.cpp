#include <cmath>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>

#include "doctest.h"
#include "rdt/grid_model.hpp"
#include "support.hpp"

using namespace rdt;
using namespace rdt::testing;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

NetDoc two_bus() {
    NetDoc d;
    d.bus("s", "ABC", true).bus("b1", "ABC").line("L1", "s", "b1", "ABC").load("ld", "b1", "ABC", 10.0);
    return d;
}

// Connected components of a graph given as an edge list.
std::vector<int> components(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [u, v] : edges) {
        adj[static_cast<std::size_t>(u)].push_back(v);
        adj[static_cast<std::size_t>(v)].push_back(u);
    }
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    for (int r = 0; r < n; ++r) {
        if (comp[static_cast<std::size_t>(r)] >= 0) continue;
        std::queue<int> q;
        q.push(r);
        comp[static_cast<std::size_t>(r)] = r;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (comp[static_cast<std::size_t>(v)] < 0) {
                    comp[static_cast<std::size_t>(v)] = r;
                    q.push(v);
                }
            }
        }
    }
    return comp;
}

}  // namespace

TEST_CASE("minimal document") {
    const Network n = two_bus().build();
    CHECK(n.buses.size() == 2);
    CHECK(n.lines.size() == 1);
    CHECK(n.loads.size() == 1);
    CHECK(n.substations() == std::vector<int>{0});
    CHECK(n.lines[0].from_bus == 0);
    CHECK(n.lines[0].to_bus == 1);
}

TEST_CASE("dangling bus reference names the bus") {
    NetDoc d = two_bus();
    d.line("L2", "b1", "b99", "A");
    CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("b99"), NetworkError);
}

TEST_CASE("invalid elements are rejected with their id") {
    SUBCASE("nonpositive capacity") {
        NetDoc d = two_bus();
        d.doc["lines"][0]["capacity_kva"] = 0.0;
        CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("L1"), NetworkError);
    }
    SUBCASE("disconnected existing graph") {
        NetDoc d = two_bus();
        d.bus("far", "A");
        CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("far"), NetworkError);
    }
    SUBCASE("line phases outside an endpoint") {
        NetDoc d = two_bus();
        d.bus("b2", "A").line("L2", "b1", "b2", "AB");
        CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("L2"), NetworkError);
    }
    SUBCASE("load phases outside its bus") {
        NetDoc d = two_bus();
        d.bus("b2", "A").line("L2", "b1", "b2", "A").load("bad", "b2", "B", 5.0);
        CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("bad"), NetworkError);
    }
    SUBCASE("candidate without switch") {
        NetDoc d = two_bus();
        d.bus("b2", "A").line("L2", "b1", "b2", "A").line("C", "s", "b2", "A", 100.0,
                                                            {{"status", "candidate"}, {"switch", false}});
        CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("C"), NetworkError);
    }
    SUBCASE("impedance for an undeclared phase pair") {
        NetDoc d = two_bus();
        d.bus("b2", "A").line("L2", "b1", "b2", "A");
        d.doc["lines"][1]["impedance_ohm_per_km"][4] = {{"re", 0.1}, {"im", 0.1}};
        CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("L2"), NetworkError);
    }
    SUBCASE("negative real demand") {
        NetDoc d = two_bus();
        d.load("neg", "b1", "A", -1.0);
        CHECK_THROWS_WITH_AS(d.build(), doctest::Contains("neg"), NetworkError);
    }
    SUBCASE("unknown key") {
        NetDoc d = two_bus();
        d.doc["buses"][1]["voltage"] = 1.0;
        CHECK_THROWS_AS(d.build(), NetworkError);
    }
}

TEST_CASE("per-unit conversion") {
    const Bases b{1000.0, 7.2};
    CHECK(to_per_unit(100.0, Quantity::Power, b) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(to_per_unit(0.0, Quantity::Impedance, b) == 0.0);
    // 1.2096 * 5000 / (1000 * 12.47^2)
    const Bases utility{5000.0, 12.47};
    CHECK(to_per_unit(1.2096, Quantity::Impedance, utility) == doctest::Approx(0.03889).epsilon(1e-4));
    CHECK(to_per_unit(1.2096, Quantity::Impedance, utility) ==
          doctest::Approx(1.2096 * 5000.0 / (1000.0 * 12.47 * 12.47)).epsilon(1e-14));
    CHECK(to_per_unit(7.2, Quantity::Voltage, b) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(to_per_unit(1.0, Quantity::Power, Bases{}), NetworkError);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> val(-1e4, 1e4);
    for (int i = 0; i < 200; ++i) {
        const double x = val(rng);
        for (auto kind : {Quantity::Power, Quantity::Impedance, Quantity::Voltage}) {
            const double back = from_per_unit(to_per_unit(x, kind, utility), kind, utility);
            CHECK(std::abs(back - x) <= 1e-12 * std::abs(x));
        }
    }
}

TEST_CASE("line impedance scales with length and coordinates give the length") {
    NetDoc d;
    d.bus("s", "ABC", true).bus("b1", "ABC");
    d.doc["buses"][0]["coords"] = {0.0, 0.0};
    d.doc["buses"][1]["coords"] = {300.0, 400.0};
    d.line("L1", "s", "b1", "ABC");
    d.doc["lines"][0]["length_km"] = nullptr;
    const Network n = d.build();
    CHECK(n.lines[0].length == doctest::Approx(0.5));
    const double zbase = 7.2 * 7.2 * 1000.0 / 1000.0;
    CHECK(n.lines[0].impedance_pu[0]->real() == doctest::Approx(0.35 * 0.5 / zbase));
    CHECK(n.lines[0].impedance_pu[1]->imag() == doctest::Approx(0.40 * 0.5 / zbase));
    CHECK(n.lines[0].capacity_pu == doctest::Approx(2.0));

    d.doc["lines"][0]["length_km"] = 2.0;  // explicit length wins
    CHECK(d.build().lines[0].length == doctest::Approx(2.0));
}

TEST_CASE("absent phase pairs stay absent") {
    NetDoc d;
    d.bus("s", "ABC", true).bus("b1", "A").line("L1", "s", "b1", "A").load("x", "b1", "A", 1.0);
    const Network n = d.build();
    int present = 0;
    for (const auto& z : n.lines[0].impedance_pu) present += z ? 1 : 0;
    CHECK(present == 1);
    CHECK(n.lines[0].impedance_pu[pair_index(Phase::A, Phase::A)].has_value());
}

TEST_CASE("fixtures match their manifest") {
    const auto manifest = json::parse(slurp(fixture("manifest.json")));
    REQUIRE(manifest.size() >= 6);
    for (const auto& [name, summary] : manifest.items()) {
        CAPTURE(name);
        const Network n = load_network_file(fixture(name + ".json"));
        CHECK(n.buses.size() == summary["buses"].get<std::size_t>());
        CHECK(n.lines.size() == summary["lines"].get<std::size_t>());
        CHECK(n.loads.size() == summary["loads"].get<std::size_t>());
        CHECK(n.critical_load_count() == summary["critical_loads"].get<int>());
        CHECK(n.microgrids.size() == summary["microgrid_sites"].get<std::size_t>());
        int candidates = 0;
        for (const auto& l : n.lines) candidates += l.is_candidate() ? 1 : 0;
        CHECK(candidates == summary["candidate_lines"].get<int>());
        CHECK(n.total_real_demand_pu() * n.bases.kva ==
              doctest::Approx(summary["total_real_kw"].get<double>()).epsilon(1e-12));
        CHECK(n.critical_real_demand_pu() * n.bases.kva ==
              doctest::Approx(summary["critical_real_kw"].get<double>()).epsilon(1e-12));
    }
    CHECK(load_network_file(fixture("feeder30.json")).buses.size() == 30);
}

TEST_CASE("serialize round trip is byte identical") {
    for (const char* name : {"five_bus.json", "feeder30.json", "two_feeder.json"}) {
        CAPTURE(name);
        const std::string once = serialize(load_network_file(fixture(name)));
        CHECK(serialize(load_network(once)) == once);
    }
}

TEST_CASE("every line phase set is inside both endpoint phase sets") {
    for (const char* name : {"five_bus.json", "feeder30.json", "two_feeder.json"}) {
        const Network n = load_network_file(fixture(name));
        for (const auto& l : n.lines) {
            CHECK(l.phases.subset_of(n.buses[static_cast<std::size_t>(l.from_bus)].phases));
            CHECK(l.phases.subset_of(n.buses[static_cast<std::size_t>(l.to_bus)].phases));
        }
    }
}

TEST_CASE("parallel edge aggregation") {
    SUBCASE("two parallel lines become one edge") {
        NetDoc d;
        d.bus("s", "ABC", true).bus("b", "ABC").line("L1", "s", "b", "ABC").line("L2", "b", "s", "A");
        const auto g = aggregate_parallel_edges(d.build());
        REQUIRE(g.edges.size() == 1);
        CHECK(g.edges[0].lines == std::vector<int>{0, 1});
        CHECK(g.edge_of_line == std::vector<int>{0, 0});
    }
    SUBCASE("no parallel lines keeps the graph") {
        const Network n = load_network_file(fixture("feeder30.json"));
        const auto g = aggregate_parallel_edges(n);
        CHECK(g.edges.size() == n.lines.size());
        for (std::size_t k = 0; k < n.lines.size(); ++k) {
            const auto& e = g.edges[static_cast<std::size_t>(g.edge_of_line[k])];
            CHECK(e.lines == std::vector<int>{static_cast<int>(k)});
            CHECK(std::min(n.lines[k].from_bus, n.lines[k].to_bus) == e.u);
            CHECK(std::max(n.lines[k].from_bus, n.lines[k].to_bus) == e.v);
        }
    }
    SUBCASE("triangle with one doubled side has three edges") {
        NetDoc d;
        d.bus("s", "ABC", true).bus("a", "ABC").bus("b", "ABC");
        d.line("L1", "s", "a", "ABC").line("L2", "a", "b", "ABC").line("L3", "b", "s", "ABC").line("L4", "s", "a", "A");
        CHECK(aggregate_parallel_edges(d.build()).edges.size() == 3);
    }
}

TEST_CASE("aggregation preserves connectivity") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 6);
        NetDoc d;
        d.bus("n0", "ABC", true);
        std::vector<std::pair<int, int>> edges;
        for (int i = 1; i < n; ++i) {
            d.bus("n" + std::to_string(i), "ABC");
            const int p = static_cast<int>(rng() % static_cast<unsigned>(i));
            d.line("T" + std::to_string(i), "n" + std::to_string(p), "n" + std::to_string(i), "ABC");
            edges.emplace_back(p, i);
        }
        const int extra = static_cast<int>(rng() % 5);
        for (int k = 0; k < extra; ++k) {
            const int a = static_cast<int>(rng() % static_cast<unsigned>(n));
            const int b = static_cast<int>(rng() % static_cast<unsigned>(n));
            if (a == b) continue;
            d.line("X" + std::to_string(k), "n" + std::to_string(a), "n" + std::to_string(b), "ABC", 100.0,
                   {{"status", "candidate"}});
            edges.emplace_back(a, b);
        }
        const Network net = d.build();
        const auto g = aggregate_parallel_edges(net);
        CHECK(g.edges.size() <= net.lines.size());
        std::vector<std::pair<int, int>> reduced;
        for (const auto& e : g.edges) reduced.emplace_back(e.u, e.v);
        const auto c1 = components(n, edges);
        const auto c2 = components(n, reduced);
        for (int u = 0; u < n; ++u) {
            for (int v = 0; v < n; ++v) {
                CHECK((c1[static_cast<std::size_t>(u)] == c1[static_cast<std::size_t>(v)]) ==
                      (c2[static_cast<std::size_t>(u)] == c2[static_cast<std::size_t>(v)]));
            }
        }
    }
}

TEST_CASE("documented example network loads") {
    const Network n = load_network_file(std::string(RDT_DOCS_DIR) + "/example_network.json");
    CHECK(n.buses.size() == 4);
    CHECK(n.lines.size() == 4);
    // L1 has no length; its buses are 800 m apart
    CHECK(n.lines[1].length == doctest::Approx(0.8));
    CHECK(n.lines[3].is_candidate());
    CHECK(n.lines[3].has_switch);
    CHECK_FALSE(n.lines[3].damageable);
    CHECK(n.lines[0].is_transformer);
    CHECK(n.microgrids[1].is_existing);
    CHECK(n.critical_load_count() == 1);
    CHECK(serialize(load_network(serialize(n))) == serialize(n));
}
