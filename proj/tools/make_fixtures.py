#!/usr/bin/env python3
"""Writes the synthetic feeders used by the tests and the example configs.

Usage: make_fixtures.py [OUT_DIR]   (default: data/fixtures next to this script)

Output is deterministic; rerunning overwrites the files byte for byte.
"""

import json
import math
import os
import random
import sys

PHASES = "ABC"
SELF_Z = (0.35, 0.75)    # ohm/km
MUTUAL_Z = (0.15, 0.40)


def impedance(phases, self_z=SELF_Z, mutual_z=MUTUAL_Z):
    out = []
    for r in PHASES:
        for c in PHASES:
            if r in phases and c in phases:
                re, im = self_z if r == c else mutual_z
                out.append({"re": re, "im": im})
            else:
                out.append(None)
    return out


def bus(bid, phases, x, y, substation=False):
    return {"id": bid, "phases": phases, "substation": substation, "v_ref": 1.0, "coords": [x, y]}


def line(lid, a, b, phases, capacity, *, status="existing", switch=None, damageable=None,
         hardenable=None, construction_cost=0.0, harden_cost=0.0, length_km=None, transformer=False):
    cand = status == "candidate"
    d = {
        "id": lid, "from": a, "to": b, "phases": phases, "length_km": length_km,
        "impedance_ohm_per_km": impedance(phases), "capacity_kva": capacity,
        "transformer": transformer,
        "switch": cand if switch is None else switch,
        "status": status,
        "damageable": (not cand) if damageable is None else damageable,
    }
    d["hardenable"] = d["damageable"] if hardenable is None else hardenable
    d["construction_cost"] = construction_cost
    d["harden_cost"] = harden_cost
    return d


def load(lid, b, phases, kw, critical=False, pf=0.95):
    kvar = round(kw * math.tan(math.acos(pf)), 3)
    return {"id": lid, "bus": b, "demand_kva": {p: {"re": kw, "im": kvar} for p in phases},
            "critical": critical}


def site(sid, b, step_kva, max_steps, fixed, rate, existing=False):
    return {"id": sid, "bus": b, "step_kva": step_kva, "max_steps": max_steps, "fixed_cost": fixed,
            "variable_cost_per_kva": rate, "existing": existing}


def network(name, buses, lines, loads, sites):
    return {"name": name, "bases": {"kva": 1000.0, "kv": 7.2}, "buses": buses, "lines": lines,
            "loads": loads, "microgrids": sites}


def five_bus(harden_cost):
    # sub -ABC- n1 -ABC- n2 -A- n3 (critical);  n1 -A- n4
    # Only the lateral feeding the critical load can fail. Keeping it means
    # hardening it or installing a 1-step microgrid (25k fixed + 100k step).
    buses = [bus("sub", "ABC", 0, 0, True), bus("n1", "ABC", 500, 0), bus("n2", "ABC", 1000, 0),
             bus("n3", "A", 1000, 400), bus("n4", "A", 500, 400)]
    lines = [
        line("L1", "sub", "n1", "ABC", 2000, damageable=False),
        line("L2", "n1", "n2", "ABC", 2000, damageable=False),
        line("L3", "n2", "n3", "A", 1000, harden_cost=harden_cost),
        line("L4", "n1", "n4", "A", 1000, damageable=False),
    ]
    loads = [load("crit", "n3", "A", 50.0, critical=True), load("res", "n4", "A", 30.0),
             load("bal", "n2", "ABC", 50.0)]
    sites = [site("G3", "n3", 60.0, 1, 25000.0, 100000.0 / 60.0)]
    return network("five_bus", buses, lines, loads, sites)


def feeder30():
    """Three-phase trunk with single-phase laterals, 30 buses."""
    rng = random.Random(30)
    buses = [bus("sub", "ABC", 0, 0, True)]
    lines, loads, sites = [], [], []
    trunk = [f"t{k}" for k in range(1, 10)]
    prev = "sub"
    for k, t in enumerate(trunk, start=1):
        buses.append(bus(t, "ABC", 400 * k, 0))
        lines.append(line(f"T{k}", prev, t, "ABC", 3000, switch=(k % 3 == 0),
                          harden_cost=float(30000 + 2000 * k), damageable=(k > 1)))
        prev = t
    # balanced three-phase loads on the trunk
    for k in (3, 6, 9):
        loads.append(load(f"D{k}", f"t{k}", "ABC", 40.0 + 5 * k, critical=(k == 9)))
    # laterals: (parent trunk index, phase, depth)
    plan = [(1, "A", 2), (2, "B", 2), (3, "C", 2), (4, "A", 2), (5, "B", 3), (6, "C", 2),
            (7, "A", 2), (8, "B", 3), (9, "C", 2)]
    lat_ends = {}
    n = 0
    for parent, ph, depth in plan:
        up = f"t{parent}"
        for d in range(1, depth + 1):
            n += 1
            b = f"l{parent}{'abc'[d - 1]}"
            buses.append(bus(b, ph, 400 * parent, 300 * d * (1 if parent % 2 else -1)))
            lines.append(line(f"S{parent}{d}", up, b, ph, 800, harden_cost=float(12000 + 3000 * d)))
            kw = float(rng.randrange(20, 70, 5))
            loads.append(load(f"P{parent}{d}", b, ph, kw))
            up = b
        lat_ends[parent] = up
    assert len(buses) == 30, len(buses)
    # critical loads at the far ends of three laterals, plus t9 above
    for parent in (4, 5, 8):
        b = lat_ends[parent]
        ph = next(x for x in buses if x["id"] == b)["phases"]
        loads.append(load(f"K{parent}", b, ph, 40.0, critical=True))
        sites.append(site(f"G{parent}", b, 30.0, 3, 8000.0, 600.0))
    sites.append(site("G9", "t9", 20.0, 3, 8000.0, 600.0))
    # candidate ties: trunk bypass and lateral-to-lateral ties on matching phases
    lines.append(line("C1", "t3", "t7", "ABC", 3000, status="candidate", construction_cost=90000.0))
    lines.append(line("C2", lat_ends[1], lat_ends[4], "A", 800, status="candidate", construction_cost=35000.0))
    lines.append(line("C3", lat_ends[2], lat_ends[5], "B", 800, status="candidate", construction_cost=40000.0))
    lines.append(line("C4", lat_ends[5], lat_ends[8], "B", 800, status="candidate", construction_cost=45000.0))
    return network("feeder30", buses, lines, loads, sites)


def feeder_half(tag, x0, mirror):
    """One radial feeder: substation, 4-bus trunk, two laterals, a critical end load."""
    sgn = -1 if mirror else 1
    p = tag
    buses = [bus(f"{p}sub", "ABC", x0, 0, True)]
    lines, loads = [], []
    prev = f"{p}sub"
    for k in range(1, 5):
        b = f"{p}t{k}"
        buses.append(bus(b, "ABC", x0 + sgn * 500 * k, 0))
        lines.append(line(f"{p}T{k}", prev, b, "ABC", 2000, harden_cost=60000.0, damageable=(k <= 2)))
        prev = b
    loads.append(load(f"{p}D2", f"{p}t2", "ABC", 30.0))
    loads.append(load(f"{p}K4", f"{p}t4", "ABC", 40.0, critical=True))
    for k, ph in ((1, "A"), (3, "B")):
        b = f"{p}l{k}"
        buses.append(bus(b, ph, x0 + sgn * 500 * k, 300))
        lines.append(line(f"{p}S{k}", f"{p}t{k}", b, ph, 800, damageable=False))
        loads.append(load(f"{p}P{k}", b, ph, 25.0))
    sites = [site(f"{p}G4", f"{p}t4", 15.0, 4, 25000.0, 1000.0)]
    return buses, lines, loads, sites


def two_feeder():
    ab, al, ad, ag = feeder_half("a", 0, False)
    bb, bl, bd, bg = feeder_half("b", 5000, True)
    joint_lines = al + bl + [line("TIE", "at4", "bt4", "ABC", 2000, status="candidate",
                                  construction_cost=30000.0, length_km=1.0)]
    joint = network("two_feeder", ab + bb, joint_lines, ad + bd, ag + bg)
    a = network("feeder_a", ab, al, ad, ag)
    b = network("feeder_b", bb, bl, bd, bg)
    # Storms hit one feeder at a time; scenario ids line up across the three files.
    damage = [["aT1"], ["bT2"], ["aT2"], ["bT1"]]
    scen = {"joint": [], "a": [], "b": []}
    for key in scen:
        scen[key].append({"id": 0, "seed": 0, "damaged": []})
    for i, d in enumerate(damage, start=1):
        scen["joint"].append({"id": i, "seed": 0, "damaged": d})
        scen["a"].append({"id": i, "seed": 0, "damaged": [x for x in d if x.startswith("a")]})
        scen["b"].append({"id": i, "seed": 0, "damaged": [x for x in d if x.startswith("b")]})
    return joint, a, b, scen


def summary(net):
    total = sum(v["re"] for ld in net["loads"] for v in ld["demand_kva"].values())
    crit = sum(v["re"] for ld in net["loads"] if ld["critical"] for v in ld["demand_kva"].values())
    return {
        "buses": len(net["buses"]),
        "lines": len(net["lines"]),
        "candidate_lines": sum(1 for l in net["lines"] if l["status"] == "candidate"),
        "loads": len(net["loads"]),
        "critical_loads": sum(1 for ld in net["loads"] if ld["critical"]),
        "total_real_kw": round(total, 6),
        "critical_real_kw": round(crit, 6),
        "microgrid_sites": len(net["microgrids"]),
    }


def dump(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "..", "data", "fixtures")
    os.makedirs(out, exist_ok=True)
    nets = {
        "five_bus": five_bus(50000.0),
        "five_bus_costly_harden": five_bus(200000.0),
        "feeder30": feeder30(),
    }
    joint, a, b, scen = two_feeder()
    nets.update({"two_feeder": joint, "feeder_a": a, "feeder_b": b})
    for name, net in nets.items():
        dump(os.path.join(out, f"{name}.json"), net)
    dump(os.path.join(out, "two_feeder_scenarios.json"), {"scenarios": scen["joint"]})
    dump(os.path.join(out, "feeder_a_scenarios.json"), {"scenarios": scen["a"]})
    dump(os.path.join(out, "feeder_b_scenarios.json"), {"scenarios": scen["b"]})
    dump(os.path.join(out, "manifest.json"), {name: summary(net) for name, net in nets.items()})


if __name__ == "__main__":
    main()
