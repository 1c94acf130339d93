#include "rdt/fragility.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace rdt {

using json = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

double line_failure_probability(double p) {
    check_probability(p, "pole failure probability");
    return 1.0 - (1.0 - p) * (1.0 - p);
}

double FragilityParams::per_line_probability() const {
    return line_failure_prob ? *line_failure_prob : line_failure_probability(pole_failure_prob);
}

void FragilityParams::validate() const {
    check_probability(pole_failure_prob, "pole failure probability");
    if (line_failure_prob) check_probability(*line_failure_prob, "line failure probability");
    if (scenario_count < 1) throw std::invalid_argument("scenario count must be at least 1");
}

double line_uniform(std::uint64_t seed, int scenario, std::string_view line_id) {
    const std::uint64_t key = fnv1a(line_id);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(scenario), static_cast<std::uint32_t>(key),
                      static_cast<std::uint32_t>(key >> 32)};
    std::mt19937_64 gen(seq);
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

std::vector<DamageScenario> sample_scenarios(const Network& network, const FragilityParams& params) {
    params.validate();
    const double p = params.per_line_probability();
    std::vector<DamageScenario> out;
    out.push_back({0, {}, params.seed});
    for (int s = 1; s <= params.scenario_count; ++s) {
        DamageScenario sc{s, {}, params.seed};
        for (const auto& l : network.lines) {
            if (l.is_candidate() || !l.damageable) continue;
            if (line_uniform(params.seed, s, l.id) < p) sc.damaged_line_ids.push_back(l.id);
        }
        out.push_back(std::move(sc));
    }
    return out;
}

std::vector<char> damage_mask(const Network& network, const DamageScenario& scenario) {
    std::vector<char> mask(network.lines.size(), 0);
    for (const auto& id : scenario.damaged_line_ids) {
        const auto k = network.line_index(id);
        if (!k) throw std::invalid_argument("scenario " + std::to_string(scenario.id) + " names unknown line " + id);
        mask[static_cast<std::size_t>(*k)] = 1;
    }
    return mask;
}

std::string serialize_scenarios(const std::vector<DamageScenario>& scenarios) {
    json doc;
    doc["scenarios"] = json::array();
    for (const auto& s : scenarios) {
        json j;
        j["id"] = s.id;
        j["seed"] = s.seed;
        j["damaged"] = s.damaged_line_ids;
        doc["scenarios"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

std::vector<DamageScenario> load_scenarios(std::string_view text, const Network& network) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario file: malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("scenarios") || !doc.at("scenarios").is_array()) {
        throw std::invalid_argument("scenario file: missing 'scenarios' array");
    }
    std::vector<DamageScenario> out;
    std::set<int> ids;
    for (const auto& j : doc.at("scenarios")) {
        if (!j.is_object() || !j.contains("id") || !j.at("id").is_number_integer()) {
            throw std::invalid_argument("scenario file: every scenario needs an integer id");
        }
        DamageScenario s;
        s.id = j.at("id").get<int>();
        if (s.id < 0 || !ids.insert(s.id).second) {
            throw std::invalid_argument("scenario file: invalid or repeated id " + std::to_string(s.id));
        }
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        const std::string where = "scenario " + std::to_string(s.id);
        if (j.contains("damaged")) {
            if (!j.at("damaged").is_array()) throw std::invalid_argument(where + ": 'damaged' must be an array");
            std::set<int> seen;
            for (const auto& d : j.at("damaged")) {
                if (!d.is_string()) throw std::invalid_argument(where + ": line ids must be strings");
                const auto id = d.get<std::string>();
                const auto k = network.line_index(id);
                if (!k) throw std::invalid_argument(where + " names unknown line " + id);
                const auto& l = network.lines[static_cast<std::size_t>(*k)];
                if (l.is_candidate() || !l.damageable) {
                    throw std::invalid_argument(where + ": line " + id + " is not damageable");
                }
                seen.insert(*k);
            }
            for (int k : seen) s.damaged_line_ids.push_back(network.lines[static_cast<std::size_t>(k)].id);
        }
        if (s.id == 0 && !s.damaged_line_ids.empty()) {
            throw std::invalid_argument("scenario 0 is the undamaged baseline");
        }
        out.push_back(std::move(s));
    }
    if (ids.empty() || *ids.begin() != 0) throw std::invalid_argument("scenario file: baseline scenario 0 missing");
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

}  // namespace rdt
