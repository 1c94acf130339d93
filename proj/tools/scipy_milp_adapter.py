#!/usr/bin/env python3
"""External solver adapter: free-format MPS in, rdt solution text out.

Usage: scipy_milp_adapter.py MODEL.mps SOLUTION.sol

Solves with scipy.optimize.milp (HiGHS) and writes

    status optimal|infeasible|unbounded|feasible
    objective <value>
    <name> <value>
"""
import math
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix


def read_mps(path):
    rows, row_sense, obj_row = [], {}, None
    cols, col_index, integer = [], {}, []
    entries, rhs, obj_offset = [], {}, 0.0
    lower, upper = {}, {}
    section, in_int = None, False
    with open(path) as f:
        for raw in f:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                section = line.split()[0]
                continue
            tok = line.split()
            if section == "ROWS":
                kind, name = tok
                if kind == "N":
                    obj_row = name
                else:
                    row_sense[name] = kind
                    rows.append(name)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "MARKER":
                    in_int = tok[2] == "INTORG"
                    continue
                name = tok[0]
                if name not in col_index:
                    col_index[name] = len(cols)
                    cols.append(name)
                    integer.append(in_int)
                for k in range(1, len(tok), 2):
                    entries.append((name, tok[k], float(tok[k + 1])))
            elif section == "RHS":
                for k in range(1, len(tok), 2):
                    if tok[k] == obj_row:
                        obj_offset = -float(tok[k + 1])
                    else:
                        rhs[tok[k]] = float(tok[k + 1])
            elif section == "BOUNDS":
                kind, name = tok[0], tok[2]
                val = float(tok[3]) if len(tok) > 3 else None
                if kind == "UP":
                    upper[name] = val
                elif kind == "LO":
                    lower[name] = val
                elif kind == "FX":
                    lower[name] = upper[name] = val
                elif kind == "FR":
                    lower[name], upper[name] = -math.inf, math.inf
                elif kind == "MI":
                    lower[name] = -math.inf
    return rows, row_sense, obj_row, cols, col_index, integer, entries, rhs, obj_offset, lower, upper


def main():
    model_path, sol_path = sys.argv[1], sys.argv[2]
    rows, row_sense, obj_row, cols, col_index, integer, entries, rhs, obj_offset, lower, upper = read_mps(model_path)
    n = len(cols)
    row_index = {r: i for i, r in enumerate(rows)}
    c = np.zeros(n)
    ri, ci, vals = [], [], []
    for col, row, v in entries:
        j = col_index[col]
        if row == obj_row:
            c[j] += v
        else:
            ri.append(row_index[row])
            ci.append(j)
            vals.append(v)
    lb = np.array([lower.get(name, 0.0) for name in cols])
    ub = np.array([upper.get(name, math.inf) for name in cols])
    constraints = []
    if rows:
        a = coo_matrix((vals, (ri, ci)), shape=(len(rows), n)).tocsr()
        lo = np.full(len(rows), -np.inf)
        hi = np.full(len(rows), np.inf)
        for name, i in row_index.items():
            b = rhs.get(name, 0.0)
            kind = row_sense[name]
            if kind in ("L", "E"):
                hi[i] = b
            if kind in ("G", "E"):
                lo[i] = b
        constraints.append(LinearConstraint(a, lo, hi))
    res = milp(c, constraints=constraints, integrality=np.array(integer, dtype=int),
               bounds=Bounds(lb, ub), options={"mip_rel_gap": 1e-9})
    with open(sol_path, "w") as out:
        if res.status == 0:
            out.write("status optimal\n")
        elif res.status == 2:
            out.write("status infeasible\n")
            return
        elif res.status == 3:
            out.write("status unbounded\n")
            return
        elif res.x is not None:
            out.write("status feasible\n")
        else:
            out.write("status infeasible\n")
            return
        out.write("objective %.17g\n" % (res.fun + obj_offset))
        for name, v in zip(cols, res.x):
            out.write("%s %.17g\n" % (name, v))


if __name__ == "__main__":
    main()
