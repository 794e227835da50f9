"""The instability-minimization linear program over all preference profiles.

Columns are assignment probabilities ``x[p, s, c]`` and violation slacks
``v[p, s, c]`` for every stored profile ``p`` (all profiles, or one
representative per relabeling orbit), plus a bound ``t`` for the worst-case
objective. Rows are ``lo <= A @ x <= hi``.

With orbit reduction, the outcome at a non-representative profile is the
representative's matrix carried along the stored relabeling. Incentive rows
therefore reference the representative of each deviated profile with
permuted cells, and stabilizer rows force each representative's matrix to be
invariant under the relabelings that fix its profile, so the expanded
mechanism is exactly equivariant.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .mechanisms import TabularMechanism
from .prefs import (
    OrbitTable,
    build_orbit_table,
    decode_batch,
    digit_weights,
    permutations_of,
    profile_count,
)

MAX_ROWS = 2_000_000
MAX_COLS = 2_000_000


class LpSizeError(RuntimeError):
    def __init__(self, msg: str, stats: dict):
        super().__init__(msg)
        self.stats = stats


class ModelError(ValueError):
    pass


_NAME = re.compile(r"^(x|v)_p(\d+)_s(\d+)_c(\d+)$")


@dataclass(frozen=True)
class VarKey:
    kind: str  # "assign" | "slack" | "maxbound"
    profile: Optional[int] = None
    s: Optional[int] = None
    c: Optional[int] = None

    @property
    def name(self) -> str:
        if self.kind == "maxbound":
            return "t"
        tag = "x" if self.kind == "assign" else "v"
        return f"{tag}_p{self.profile}_s{self.s}_c{self.c}"

    @classmethod
    def parse(cls, name: str) -> "VarKey":
        if name == "t":
            return cls("maxbound")
        mt = _NAME.match(name)
        if not mt:
            raise ModelError(f"not a model variable name: {name!r}")
        kind = "assign" if mt.group(1) == "x" else "slack"
        return cls(kind, int(mt.group(2)), int(mt.group(3)), int(mt.group(4)))


@dataclass
class LpModel:
    """``minimize obj @ x`` s.t. ``row_lo <= A @ x <= row_hi``, ``lb <= x <= ub``."""

    names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    obj: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    row_names: list[str]
    integer: np.ndarray
    meta: dict = field(default_factory=dict)
    orbits: Optional[OrbitTable] = None

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    @property
    def is_integer(self) -> bool:
        return bool(self.integer.any())

    def keys(self) -> list[VarKey]:
        return [VarKey.parse(n) for n in self.names]

    def column(self, name: str) -> int:
        idx = self.__dict__.get("_col_index")
        if idx is None:
            idx = self.__dict__["_col_index"] = {n: i for i, n in enumerate(self.names)}
        return idx[name]

    def summary(self) -> dict:
        return {
            "vars": self.num_vars,
            "rows": self.num_rows,
            "nnz": int(self.A.nnz),
            "flags": {k: self.meta[k] for k in ("n", "m", "objective", "nonwasteful", "anonymity", "symmetry", "integral") if k in self.meta},
            "representatives": self.meta.get("representatives"),
            "profiles": self.meta.get("profiles"),
        }

    def average_from_objective(self, value: float) -> float:
        """Objective A is orbit-weighted total violation; divide by the profile count."""
        return value / self.meta["profiles"]


def model_statistics(n: int, m: int, objective: str = "A", nonwasteful: bool = False,
                     anonymity: bool = False, symmetry: bool = False) -> dict:
    """Column and (upper bound on) row counts, computed without building anything."""
    total = profile_count(n, m)
    reps = len(build_orbit_table(n, m, symmetry).reps) if anonymity else total
    cells = n * m
    sp_rows = reps * (n * (math.factorial(m) - 1) * m + m * (math.factorial(n) - 1) * n)
    return {
        "profiles": total,
        "representatives": reps,
        "assign_vars": reps * cells,
        "slack_vars": reps * cells,
        "vars": 2 * reps * cells + (objective == "B"),
        "rows_upper_bound": reps * (cells + n + m + (objective == "B")) + sp_rows
        + (reps * cells * (2 * math.factorial(n) * math.factorial(m) if anonymity else 0)),
    }


def build_lp(n: int, m: int, objective: str = "A", nonwasteful: bool = False,
             anonymity: bool = False, symmetry: bool = False, integral: bool = False,
             max_rows: int = MAX_ROWS, profiles=None) -> LpModel:
    """Assemble the model; ``profiles`` restricts it to a subset of profile indices.

    A restricted model keeps only incentive rows whose deviated profile is in
    the subset, so it is a relaxation of the full one: its optimum is a lower
    bound and its infeasibility implies infeasibility of the full model.
    """
    if profiles is not None:
        if anonymity or symmetry:
            raise ModelError("profile restriction is only available without reduction")
        subset = np.unique(np.asarray(profiles, dtype=np.int64))
        if subset.size == 0 or subset[0] < 0 or subset[-1] >= profile_count(n, m):
            raise ModelError("profile subset out of range")
        return _assemble(n, m, objective, nonwasteful, False, False, integral,
                         OrbitTable.trivial(n, m), subset)
    if objective not in ("A", "B"):
        raise ModelError(f"objective must be 'A' or 'B', got {objective!r}")
    if symmetry and n != m:
        raise ModelError("symmetry reduction needs n == m")
    if symmetry and not anonymity:
        raise ModelError("symmetry reduction is only offered together with anonymity")
    stats = model_statistics(n, m, objective, nonwasteful, anonymity, symmetry)
    if stats["vars"] > MAX_COLS or stats["rows_upper_bound"] > max_rows:
        raise LpSizeError(
            f"model too large: {stats['assign_vars']} assign variables, "
            f"{stats['vars']} columns, up to {stats['rows_upper_bound']} rows "
            f"(caps {MAX_COLS} columns / {max_rows} rows); enable anonymity/symmetry reduction",
            stats,
        )
    orbits = build_orbit_table(n, m, symmetry) if anonymity else OrbitTable.trivial(n, m)
    return _assemble(n, m, objective, nonwasteful, anonymity, symmetry, integral, orbits)


def build_ip(n: int, m: int, objective: str = "A", nonwasteful: bool = False,
             anonymity: bool = False, symmetry: bool = False, max_rows: int = MAX_ROWS,
             profiles=None) -> LpModel:
    """Same model with integral assignment variables (deterministic mechanisms)."""
    return build_lp(n, m, objective, nonwasteful, anonymity, symmetry, True, max_rows, profiles)


class _Rows:
    def __init__(self):
        self.r, self.c, self.v, self.lo, self.hi, self.names = [], [], [], [], [], []
        self.count = 0

    def add(self, rows, cols, vals, lo, hi, names):
        """``rows`` index into the ``len(names)`` new rows."""
        self.r.append(np.asarray(rows, dtype=np.int64).ravel() + self.count)
        self.c.append(np.asarray(cols, dtype=np.int64).ravel())
        self.v.append(np.broadcast_to(np.asarray(vals, dtype=float), np.shape(rows)).ravel())
        k = len(names)
        self.lo.append(np.broadcast_to(np.asarray(lo, dtype=float), (k,)))
        self.hi.append(np.broadcast_to(np.asarray(hi, dtype=float), (k,)))
        self.names.extend(names)
        self.count += k


def _assemble(n, m, objective, nonwasteful, anonymity, symmetry, integral,
              orbits: OrbitTable, subset=None) -> LpModel:
    reps = orbits.reps if subset is None else subset
    R, cells = len(reps), n * m
    S, C = decode_batch(reps, n, m)
    spos = np.argsort(S, axis=2)  # spos[r, s, c]: position of c in s's ranking
    cpos = np.argsort(C, axis=2)  # cpos[r, c, s]
    base = np.arange(R)[:, None, None] * cells
    X = base + np.arange(cells).reshape(1, n, m)  # column of x[r, s, c]
    V = R * cells + X
    ncols = 2 * R * cells + (objective == "B")
    T_COL = ncols - 1

    names = [f"x_p{r}_s{s}_c{c}" for r in reps for s in range(n) for c in range(m)]
    names += [f"v_p{r}_s{s}_c{c}" for r in reps for s in range(n) for c in range(m)]
    if objective == "B":
        names.append("t")
    lb = np.zeros(ncols)
    ub = np.full(ncols, np.inf)
    ub[: R * cells] = 1.0
    obj = np.zeros(ncols)
    if objective == "A":
        weights = np.array([orbits.orbit_size[int(r)] for r in reps], dtype=float)
        obj[R * cells: 2 * R * cells] = np.repeat(weights, cells)
    else:
        obj[T_COL] = 1.0
    integer = np.zeros(ncols, dtype=bool)
    if integral:
        integer[: R * cells] = True

    rows = _Rows()
    labels = [(int(r), s, c) for r in reps for s in range(n) for c in range(m)]

    # violation slack: v + x(s,c) + sum_{c' >_s c} x(s,c') + sum_{s' >_c s} x(s',c) >= 1
    rr, ss, cc = np.meshgrid(np.arange(R), np.arange(n), np.arange(m), indexing="ij")
    row_id = (rr * cells + ss * m + cc)
    ent_r, ent_c = [row_id.ravel()], [V[rr, ss, cc].ravel()]
    for c2 in range(m):
        mask = spos[rr, ss, c2] <= spos[rr, ss, cc]
        ent_r.append(row_id[mask]); ent_c.append(X[rr, ss, c2][mask])
    for s2 in range(n):
        mask = cpos[rr, cc, s2] < cpos[rr, cc, ss]
        ent_r.append(row_id[mask]); ent_c.append(X[rr, s2, cc][mask])
    r_all = np.concatenate(ent_r)
    rows.add(r_all, np.concatenate(ent_c), 1.0, 1.0, np.inf, [f"stv_p{r}_s{s}_c{c}" for r, s, c in labels])

    # capacities; non-wastefulness fills the shorter side (both sides when n == m)
    full_rows = nonwasteful and n <= m
    full_cols = nonwasteful and m <= n
    rows.add(np.repeat(np.arange(R * n), m), X.ravel(), 1.0, 1.0 if full_rows else -np.inf, 1.0,
             [f"stu_p{r}_s{s}" for r in reps for s in range(n)])
    rows.add(np.repeat(np.arange(R * m), n), X.transpose(0, 2, 1).ravel(), 1.0,
             1.0 if full_cols else -np.inf, 1.0, [f"sch_p{r}_c{c}" for r in reps for c in range(m)])

    # incentive rows: truthful upper-contour mass >= the mass obtained after misreporting
    src = np.array([g.transport(np.arange(cells).reshape(n, m)).ravel() for g in orbits.elements])
    w = digit_weights(n, m)
    sp_r, sp_c, sp_v, sp_names = [], [], [], []
    nrow = 0
    for side, count, k in (("s", n, m), ("c", m, n)):
        perms = permutations_of(k)
        radix = len(perms)
        for a in range(count):
            slot = a if side == "s" else n + a
            digit = (reps // w[slot]) % radix
            truth = S[:, a, :] if side == "s" else C[:, a, :]  # (R, k) ranking
            for d in range(radix):
                moved = np.nonzero(digit != d)[0]
                q = reps[moved] + (d - digit[moved]) * w[slot]
                if subset is not None:
                    inside = np.isin(q, subset)
                    moved, q = moved[inside], q[inside]
                if not len(moved):
                    continue
                q_rep = orbits.rep[q]
                q_pos = np.searchsorted(reps, q_rep)
                q_src = src[orbits.witness[q]]  # (len, cells)
                for t in range(k):
                    top = truth[moved, : t + 1]  # (len, t+1) partners at least as good
                    if side == "s":
                        own_cells = a * m + top
                    else:
                        own_cells = top * m + a
                    ids = np.arange(len(moved)) + nrow
                    rid = np.repeat(ids, t + 1)
                    sp_r += [rid, rid]
                    sp_c += [(moved[:, None] * cells + own_cells).ravel(),
                             (q_pos[:, None] * cells + np.take_along_axis(q_src, own_cells, axis=1)).ravel()]
                    sp_v += [np.ones(rid.size), -np.ones(rid.size)]
                    agent = f"{side}{a}"
                    sp_names += [f"sp_p{reps[i]}_{agent}_d{d}_t{t}" for i in moved]
                    nrow += len(moved)
    if nrow:
        M = sp.coo_matrix((np.concatenate(sp_v), (np.concatenate(sp_r), np.concatenate(sp_c))), shape=(nrow, ncols)).tocsr()
        M.sum_duplicates()
        M.eliminate_zeros()
        keep = np.nonzero(np.diff(M.indptr))[0]  # rows that cancel entirely are vacuous
        M = M[keep].tocoo()
        rows.add(M.row, M.col, M.data, 0.0, np.inf, [sp_names[i] for i in keep])

    # stabilizer invariance: x[r] == transport_h(x[r]) for every h fixing profile r
    if orbits.reduced:
        st_r, st_c, st_v, st_names = [], [], [], []
        seen = set()
        for i, r in enumerate(reps):
            for h in orbits.stabilizers[int(r)]:
                for cell, other in enumerate(src[h]):
                    pair = (i, min(cell, other), max(cell, other))
                    if cell == other or pair in seen:
                        continue
                    seen.add(pair)
                    k = len(st_names)
                    st_r += [k, k]
                    st_c += [i * cells + pair[1], i * cells + pair[2]]
                    st_v += [1.0, -1.0]
                    st_names.append(f"stab_p{r}_c{pair[1]}_c{pair[2]}")
        if st_names:
            rows.add(st_r, st_c, st_v, 0.0, 0.0, st_names)

    if objective == "B":
        rr = np.repeat(np.arange(R), cells + 1)
        cols = np.concatenate([np.append(V[i].ravel(), T_COL) for i in range(R)])
        vals = np.tile(np.append(np.ones(cells), -1.0), R)
        rows.add(rr, cols, vals, -np.inf, 0.0, [f"wc_p{r}" for r in reps])

    A = sp.coo_matrix(
        (np.concatenate(rows.v), (np.concatenate(rows.r), np.concatenate(rows.c))), shape=(rows.count, ncols)
    ).tocsr()
    A.sum_duplicates()
    meta = {
        "n": n, "m": m, "objective": objective, "nonwasteful": nonwasteful,
        "anonymity": anonymity, "symmetry": symmetry, "integral": integral,
        "representatives": R, "profiles": profile_count(n, m) if subset is None else R,
        "restricted": subset is not None,
        "orbit_weights": {int(r): orbits.orbit_size[int(r)] for r in reps} if orbits.reduced else None,
    }
    return LpModel(names, lb, ub, obj, A, np.concatenate(rows.lo), np.concatenate(rows.hi),
                   rows.names, integer, meta, orbits)


# --- MPS files and solutions ----------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def export_mps(model: LpModel, destination, strict: bool = False) -> Path:
    """Write free-format MPS (or fixed-format with 8-char names plus a name map)."""
    destination = Path(destination)
    if strict:
        col_names = [f"C{i:07d}" for i in range(model.num_vars)]
        row_names = [f"R{i:07d}" for i in range(model.num_rows)]
        mapping = {"columns": dict(zip(col_names, model.names)), "rows": dict(zip(row_names, model.row_names))}
        destination.with_suffix(destination.suffix + ".names.json").write_text(json.dumps(mapping))
        obj_name = "OBJ"
    else:
        col_names, row_names, obj_name = model.names, model.row_names, "OBJ"

    def line(*fields):
        if not strict:
            return " " + " ".join(fields) + "\n"
        f = list(fields) + [""] * (6 - len(fields))
        return f" {f[0]:<2} {f[1]:<8}  {f[2]:<8}  {f[3]:>12}   {f[4]:<8}  {f[5]:>12}".rstrip() + "\n"

    out = [f"NAME          {'SPMATCH' if strict else 'spmatch_' + str(model.meta.get('n')) + 'x' + str(model.meta.get('m'))}\n", "ROWS\n"]
    out.append(line("N", obj_name))
    senses = []
    for name, lo, hi in zip(row_names, model.row_lo, model.row_hi):
        if lo == hi:
            s = "E"
        elif np.isinf(hi):
            s = "G"
        elif np.isinf(lo):
            s = "L"
        else:
            s = "L"  # ranged, see RANGES
        senses.append(s)
        out.append(line(s, name))
    out.append("COLUMNS\n")
    csc = model.A.tocsc()
    in_int = False
    for j, cname in enumerate(col_names):
        if model.integer[j] and not in_int:
            out.append(line("", "MARKER", "'MARKER'", "", "'INTORG'") if strict else "    MARKER  'MARKER'  'INTORG'\n")
            in_int = True
        elif not model.integer[j] and in_int:
            out.append(line("", "MARKER", "'MARKER'", "", "'INTEND'") if strict else "    MARKER  'MARKER'  'INTEND'\n")
            in_int = False
        if model.obj[j] != 0:
            out.append(line("", cname, obj_name, _fmt(model.obj[j])))
        lo_, hi_ = csc.indptr[j], csc.indptr[j + 1]
        for i, v in zip(csc.indices[lo_:hi_], csc.data[lo_:hi_]):
            out.append(line("", cname, row_names[i], _fmt(v)))
        if model.obj[j] == 0 and lo_ == hi_:
            out.append(line("", cname, obj_name, "0"))
    if in_int:
        out.append(line("", "MARKER", "'MARKER'", "", "'INTEND'") if strict else "    MARKER  'MARKER'  'INTEND'\n")
    out.append("RHS\n")
    ranges = []
    for name, s, lo, hi in zip(row_names, senses, model.row_lo, model.row_hi):
        rhs = lo if s in ("E", "G") else hi
        if rhs != 0:
            out.append(line("", "RHS", name, _fmt(rhs)))
        if s == "L" and not np.isinf(lo):
            ranges.append((name, hi - lo))
    if ranges:
        out.append("RANGES\n")
        for name, r in ranges:
            out.append(line("", "RNG", name, _fmt(r)))
    out.append("BOUNDS\n")
    for cname, lo, hi, isint in zip(col_names, model.lb, model.ub, model.integer):
        if np.isinf(lo) and np.isinf(hi):
            out.append(line("FR", "BND", cname))
            continue
        if lo != 0:
            out.append(line("MI", "BND", cname) if np.isinf(lo) else line("LO", "BND", cname, _fmt(lo)))
        if not np.isinf(hi):
            out.append(line("UP", "BND", cname, _fmt(hi)))
        elif isint:
            out.append(line("PL", "BND", cname))
    out.append("ENDATA\n")
    destination.write_text("".join(out))
    return destination


def read_mps(source) -> LpModel:
    """Parse a free-format MPS file written by :func:`export_mps` (or its strict variant)."""
    source = Path(source)
    sidecar = source.with_suffix(source.suffix + ".names.json")
    rename_c, rename_r = {}, {}
    if sidecar.exists():
        mp = json.loads(sidecar.read_text())
        rename_c, rename_r = mp["columns"], mp["rows"]
    section = None
    obj_row = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    cols: dict[str, dict[str, float]] = {}
    col_order: list[str] = []
    integer: set[str] = set()
    rhs: dict[str, float] = {}
    rng: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    in_int = False
    for raw in source.read_text().splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            section = raw.split()[0]
            continue
        f = raw.split()
        if section == "ROWS":
            if f[0] == "N":
                obj_row = f[1]
            else:
                row_sense[f[1]] = f[0]
                row_order.append(f[1])
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                in_int = f[2] == "'INTORG'"
                continue
            name = f[0]
            if name not in cols:
                cols[name] = {}
                col_order.append(name)
            if in_int:
                integer.add(name)
            for rname, val in zip(f[1::2], f[2::2]):
                cols[name][rname] = float(val)
        elif section == "RHS":
            for rname, val in zip(f[1::2], f[2::2]):
                rhs[rname] = float(val)
        elif section == "RANGES":
            for rname, val in zip(f[1::2], f[2::2]):
                rng[rname] = float(val)
        elif section == "BOUNDS":
            kind, name = f[0], f[2]
            b = bounds.setdefault(name, [0.0, np.inf])
            if kind == "UP":
                b[1] = float(f[3])
            elif kind == "LO":
                b[0] = float(f[3])
            elif kind == "FX":
                b[0] = b[1] = float(f[3])
            elif kind == "FR":
                b[0], b[1] = -np.inf, np.inf
            elif kind == "MI":
                b[0] = -np.inf
            elif kind == "BV":
                b[0], b[1] = 0.0, 1.0
                integer.add(name)
    ridx = {r: i for i, r in enumerate(row_order)}
    rr, cc, vv = [], [], []
    obj = np.zeros(len(col_order))
    for j, name in enumerate(col_order):
        for rname, val in cols[name].items():
            if rname == obj_row:
                obj[j] = val
            else:
                rr.append(ridx[rname]); cc.append(j); vv.append(val)
    A = sp.coo_matrix((vv, (rr, cc)), shape=(len(row_order), len(col_order))).tocsr()
    lo = np.empty(len(row_order))
    hi = np.empty(len(row_order))
    for i, r in enumerate(row_order):
        b = rhs.get(r, 0.0)
        s = row_sense[r]
        if s == "E":
            lo[i] = hi[i] = b
        elif s == "G":
            lo[i], hi[i] = b, np.inf
        else:
            lo[i], hi[i] = -np.inf, b
        if r in rng:
            lo[i] = hi[i] - abs(rng[r])
    lb = np.array([bounds.get(c, [0.0, np.inf])[0] for c in col_order])
    ub = np.array([bounds.get(c, [0.0, np.inf])[1] for c in col_order])
    names = [rename_c.get(c, c) for c in col_order]
    rnames = [rename_r.get(r, r) for r in row_order]
    return LpModel(names, lb, ub, obj, A, lo, hi, rnames, np.array([c in integer for c in col_order]))


def write_solution(model: LpModel, x: np.ndarray, destination) -> Path:
    destination = Path(destination)
    destination.write_text("".join(f"{n} {_fmt(v)}\n" for n, v in zip(model.names, x)))
    return destination


def import_solution(model: LpModel, source) -> np.ndarray:
    """Read ``name value`` lines; every model variable must appear exactly once."""
    values: dict[str, float] = {}
    unknown, bad = [], []
    for lineno, raw in enumerate(Path(source).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            bad.append(f"line {lineno}: {raw!r}")
            continue
        name, val = parts
        try:
            values[name] = float(val)
        except ValueError:
            bad.append(f"line {lineno}: {raw!r}")
            continue
        try:
            model.column(name)
        except KeyError:
            unknown.append(name)
    if bad:
        raise ModelError("malformed solution file: " + "; ".join(bad[:10]))
    if unknown:
        raise ModelError(f"unknown variables in solution: {', '.join(unknown[:20])}")
    missing = [n for n in model.names if n not in values]
    if missing:
        more = f" (and {len(missing) - 20} more)" if len(missing) > 20 else ""
        raise ModelError(f"solution misses variables: {', '.join(missing[:20])}{more}")
    return np.array([values[n] for n in model.names])


def extract_mechanism(model: LpModel, x: np.ndarray, tol: float = 1e-6) -> TabularMechanism:
    """Turn an LP point into a tabular mechanism over the model's orbit table."""
    from .solver import verify_solution

    if model.meta.get("restricted"):
        raise ModelError("a model restricted to a profile subset does not define a full mechanism")
    report = verify_solution(model, x, tol)
    if not report.feasible:
        raise ModelError(f"assignment infeasible: worst violation {report.worst_violation:.3e} at {report.worst_row}")
    n, m = model.meta["n"], model.meta["m"]
    reps = model.orbits.reps
    R = len(reps)
    X = np.clip(np.asarray(x[: R * n * m]).reshape(R, n, m), 0.0, 1.0)
    flags = [k for k in ("anonymity", "symmetry", "nonwasteful") if model.meta.get(k)]
    name = f"lp({model.meta['objective']}{'+' + '+'.join(flags) if flags else ''})"
    return TabularMechanism(model.orbits, {int(r): X[i] for i, r in enumerate(reps)}, name=name)


def profile_neighborhood(n: int, m: int, centers, radius: int) -> np.ndarray:
    """Profiles reachable from ``centers`` by at most ``radius`` single-agent misreports."""
    w = digit_weights(n, m)
    radices = [math.factorial(m)] * n + [math.factorial(n)] * m
    frontier = np.unique(np.asarray(centers, dtype=np.int64))
    seen = frontier
    for _ in range(radius):
        step = []
        for slot, radix in enumerate(radices):
            digit = (frontier // w[slot]) % radix
            for d in range(radix):
                step.append(frontier + (d - digit) * w[slot])
        frontier = np.setdiff1d(np.unique(np.concatenate(step)), seen)
        seen = np.union1d(seen, frontier)
    return seen
