"""Read a free-MPS file and solve it with scipy's HiGHS interface.

Prints the optimal objective, or `infeasible`.
"""
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix


def read_mps(path):
    rows, senses, cols, entries, rhs = [], {}, {}, [], {}
    cost = {}
    lo, hi, binary = {}, {}, set()
    section = None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            if not line.startswith(" "):
                section = line.split()[0]
                continue
            tok = line.split()
            if section == "ROWS":
                if tok[0] == "N":
                    continue
                senses[tok[1]] = tok[0]
                rows.append(tok[1])
            elif section == "COLUMNS":
                name = tok[0]
                cols.setdefault(name, len(cols))
                for r, v in zip(tok[1::2], tok[2::2]):
                    if r == "obj":
                        cost[name] = float(v)
                    else:
                        entries.append((r, name, float(v)))
            elif section == "RHS":
                for r, v in zip(tok[1::2], tok[2::2]):
                    rhs[r] = float(v)
            elif section == "BOUNDS":
                kind, name = tok[0], tok[2]
                if kind == "BV":
                    binary.add(name)
                    lo[name], hi[name] = 0.0, 1.0
                elif kind == "FX":
                    lo[name] = hi[name] = float(tok[3])
                elif kind == "LO":
                    lo[name] = float(tok[3])
                elif kind == "UP":
                    hi[name] = float(tok[3])
    return rows, senses, cols, entries, rhs, cost, lo, hi, binary


def main():
    rows, senses, cols, entries, rhs, cost, lo, hi, binary = read_mps(sys.argv[1])
    n = len(cols)
    if n == 0:
        print("0")
        return
    rix = {r: i for i, r in enumerate(rows)}
    c = np.zeros(n)
    for name, v in cost.items():
        c[cols[name]] = v
    lb = np.array([lo.get(k, 0.0) for k in cols])
    ub = np.array([hi.get(k, np.inf) for k in cols])
    integrality = np.array([1 if k in binary else 0 for k in cols])
    constraints = []
    if rows:
        a = coo_matrix(
            ([v for _, _, v in entries],
             ([rix[r] for r, _, _ in entries], [cols[k] for _, k, _ in entries])),
            shape=(len(rows), n),
        ).tocsr()
        b = np.array([rhs.get(r, 0.0) for r in rows])
        cl = np.where([senses[r] in ("G", "E") for r in rows], b, -np.inf)
        cu = np.where([senses[r] in ("L", "E") for r in rows], b, np.inf)
        constraints.append(LinearConstraint(a, cl, cu))
    res = milp(c, constraints=constraints, integrality=integrality,
               bounds=Bounds(lb, ub),
               options={"mip_rel_gap": 0.0, "time_limit": 120.0})
    if res.status == 2:
        print("infeasible")
    elif res.x is None:
        print("error", res.status, res.message)
        sys.exit(1)
    else:
        print(repr(float(res.fun)))


if __name__ == "__main__":
    main()
