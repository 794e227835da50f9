"""LP solving: an in-process dense simplex and an external HiGHS bridge.

The dense solver is a two-phase tableau method meant for small models (the
2x2 markets and test problems). It uses Dantzig pricing and switches to
Bland's rule once it sees a run of degenerate pivots, which rules out
cycling. Larger models go through :func:`solve_external`, which exchanges an
MPS file and a ``name value`` solution file with HiGHS.
"""
from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .lpmodel import LpModel, ModelError, export_mps, import_solution, write_solution

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10
DENSE_LIMIT = 4_000_000  # tableau entries


class SolverError(RuntimeError):
    pass


@dataclass
class SolveResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit" | "time_limit" | "error"
    x: Optional[np.ndarray]
    objective: Optional[float]
    iterations: int = 0
    seconds: float = 0.0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class VerifyReport:
    feasible: bool
    worst_violation: float
    worst_row: str
    objective: float


def verify_solution(model: LpModel, x: np.ndarray, tol: float = 1e-6) -> VerifyReport:
    """Largest bound or row violation of ``x``, with the row (or column) it occurs at."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.num_vars,):
        raise ModelError(f"expected {model.num_vars} values, got {x.shape}")
    ax = model.A @ x
    row_gap = np.maximum(model.row_lo - ax, ax - model.row_hi)
    col_gap = np.maximum(model.lb - x, x - model.ub)
    worst, where = 0.0, ""
    if row_gap.size and row_gap.max() > worst:
        i = int(np.argmax(row_gap))
        worst, where = float(row_gap[i]), model.row_names[i]
    if col_gap.size and col_gap.max() > worst:
        j = int(np.argmax(col_gap))
        worst, where = float(col_gap[j]), f"bound {model.names[j]}"
    if model.is_integer:
        frac = np.abs(x - np.round(x))[model.integer]
        if frac.size and frac.max() > worst:
            j = int(np.flatnonzero(model.integer)[np.argmax(frac)])
            worst, where = float(frac.max()), f"integrality {model.names[j]}"
    return VerifyReport(worst <= tol, worst, where, float(model.obj @ x))


# --- dense two-phase simplex ----------------------------------------------

class _Standard:
    """``min c@y  s.t.  E y = b, y >= 0`` plus the map back to model columns."""

    def __init__(self, model: LpModel):
        A = model.A.toarray()
        nv = model.num_vars
        lb, ub = model.lb.astype(float), model.ub.astype(float)
        # x = shift + sum_k scale_k * y_k
        self.back: list[tuple[int, float]] = []
        shift = np.zeros(nv)
        box_rows = []
        for j in range(nv):
            if np.isfinite(lb[j]):
                shift[j] = lb[j]
                self.back.append((j, 1.0))
                if np.isfinite(ub[j]):
                    box_rows.append((len(self.back) - 1, ub[j] - lb[j]))
            elif np.isfinite(ub[j]):
                shift[j] = ub[j]
                self.back.append((j, -1.0))
            else:
                self.back.append((j, 1.0))
                self.back.append((j, -1.0))
        self.shift = shift
        ny = len(self.back)
        Ay = np.zeros((A.shape[0], ny))
        cy = np.zeros(ny)
        for k, (j, sgn) in enumerate(self.back):
            Ay[:, k] = sgn * A[:, j]
            cy[k] = sgn * model.obj[j]
        base = A @ shift
        lo, hi = model.row_lo - base, model.row_hi - base
        self.const = float(model.obj @ shift)

        # rows: equality, <= with slack, >= with surplus
        eq_rows, eq_b, signs = [], [], []
        for i in range(A.shape[0]):
            if lo[i] == hi[i]:
                eq_rows.append(Ay[i]); eq_b.append(lo[i]); signs.append(0.0)
                continue
            if np.isfinite(hi[i]):
                eq_rows.append(Ay[i]); eq_b.append(hi[i]); signs.append(1.0)
            if np.isfinite(lo[i]):
                eq_rows.append(Ay[i]); eq_b.append(lo[i]); signs.append(-1.0)
        for k, width in box_rows:
            row = np.zeros(ny)
            row[k] = 1.0
            eq_rows.append(row); eq_b.append(width); signs.append(1.0)
        nrows = len(eq_rows)
        slack_cols = [i for i, s in enumerate(signs) if s != 0]
        E = np.zeros((nrows, ny + len(slack_cols)))
        if nrows:
            E[:, :ny] = np.array(eq_rows)
        for k, i in enumerate(slack_cols):
            E[i, ny + k] = signs[i]
        b = np.array(eq_b, dtype=float)
        neg = b < 0
        E[neg] *= -1
        b[neg] *= -1
        self.E, self.b = E, b
        self.c = np.concatenate([cy, np.zeros(len(slack_cols))])
        self.ny = ny

    def recover(self, y: np.ndarray) -> np.ndarray:
        x = self.shift.copy()
        for k, (j, sgn) in enumerate(self.back):
            x[j] += sgn * y[k]
        return x


def _pivot(T: np.ndarray, r: int, k: int) -> None:
    T[r] /= T[r, k]
    col = T[:, k].copy()
    col[r] = 0.0
    nz = np.flatnonzero(np.abs(col) > 0)
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def _iterate(T, basis, allowed, max_iter, stall_limit, deadline):
    """Minimize the objective in the last row of ``T`` (reduced costs, value in the corner)."""
    m = T.shape[0] - 1
    its, stall, bland = 0, 0, False
    while True:
        if its >= max_iter:
            return "iteration_limit", its
        if deadline is not None and time.monotonic() > deadline:
            return "time_limit", its
        red = T[-1, :-1]
        cand = np.flatnonzero((red < -FEAS_TOL) & allowed)
        if not cand.size:
            return "optimal", its
        k = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
        col = T[:m, k]
        pos = col > PIVOT_TOL
        if not pos.any():
            return "unbounded", its
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + FEAS_TOL * max(1.0, abs(best)))
        r = int(ties[np.argmin(basis[ties])]) if bland else int(ties[np.argmax(col[ties])])
        stall = stall + 1 if best <= FEAS_TOL else 0
        if stall >= stall_limit:
            bland = True
        _pivot(T, r, k)
        basis[r] = k
        its += 1


def solve_dense(model: LpModel, max_iter: int = 200_000, stall_limit: int = 50,
                time_limit: Optional[float] = None) -> SolveResult:
    """Solve a continuous model with the in-process tableau simplex."""
    if model.is_integer:
        raise SolverError("the in-process simplex solves continuous models only; use solve_external")
    t0 = time.monotonic()
    deadline = None if time_limit is None else t0 + time_limit
    std = _Standard(model)
    E, b, c = std.E, std.b, std.c
    m, nvar = E.shape
    if (m + 1) * (nvar + m + 1) > DENSE_LIMIT:
        raise SolverError(f"model too large for the dense simplex ({m} rows x {nvar} columns); use solve_external")

    # phase 1 with one artificial per row
    T = np.zeros((m + 1, nvar + m + 1))
    T[:m, :nvar] = E
    T[:m, nvar: nvar + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :nvar] = -E.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = np.arange(nvar, nvar + m)
    allowed = np.ones(nvar + m, dtype=bool)
    status, its1 = _iterate(T, basis, allowed, max_iter, stall_limit, deadline)
    elapsed = lambda: time.monotonic() - t0
    if status in ("iteration_limit", "time_limit"):
        return SolveResult(status, None, None, its1, elapsed(), "phase 1 stopped")
    if -T[-1, -1] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return SolveResult("infeasible", None, None, its1, elapsed(), f"phase 1 residual {-T[-1, -1]:.3e}")

    # move artificials out of the basis; rows where that is impossible are redundant
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= nvar:
            cand = np.flatnonzero(np.abs(T[r, :nvar]) > 1e-9)
            if cand.size:
                k = int(cand[np.argmax(np.abs(T[r, cand]))])
                _pivot(T, r, k)
                basis[r] = k
            else:
                keep[r] = False
    T = np.vstack([T[:m][keep], T[-1:]])
    basis = basis[keep]
    T = np.delete(T, np.s_[nvar: nvar + m], axis=1)
    m = T.shape[0] - 1

    # phase 2 objective in reduced form
    T[-1] = 0.0
    T[-1, :nvar] = c
    cb = c[basis]
    T[-1] -= cb @ T[:m]
    status, its2 = _iterate(T, basis, np.ones(nvar, dtype=bool), max_iter - its1, stall_limit, deadline)
    its = its1 + its2
    if status != "optimal":
        return SolveResult(status, None, None, its, elapsed(), "phase 2 stopped")
    y = np.zeros(nvar)
    y[basis] = T[:m, -1]
    x = std.recover(y[: std.ny])
    return SolveResult("optimal", x, float(model.obj @ x), its, elapsed())


# --- external solver ------------------------------------------------------

def external_available() -> bool:
    try:
        import highspy  # noqa: F401
    except ImportError:
        return False
    return True


def solve_external(model: LpModel, time_limit: Optional[float] = None, threads: int = 1,
                   workdir=None, mip_gap: Optional[float] = None, verbose: bool = False) -> SolveResult:
    """Round-trip through MPS and a solution file with HiGHS.

    Only the files cross the boundary: the model is written as MPS, solved,
    written back as ``name value`` lines and re-imported by name.
    """
    try:
        import highspy
    except ImportError as exc:
        raise SolverError("external solving needs the 'highspy' package (pip install highspy)") from exc
    t0 = time.monotonic()
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        mps = export_mps(model, Path(tmp) / "model.mps")
        h = highspy.Highs()
        h.setOptionValue("output_flag", bool(verbose))
        h.setOptionValue("threads", int(threads))
        if time_limit is not None:
            h.setOptionValue("time_limit", float(time_limit))
        if mip_gap is not None:
            h.setOptionValue("mip_rel_gap", float(mip_gap))
        if h.readModel(str(mps)) != highspy.HighsStatus.kOk:
            return SolveResult("error", None, None, 0, time.monotonic() - t0, "solver rejected the MPS file")
        h.run()
        status = h.getModelStatus()
        info = h.getInfo()
        its = int(getattr(info, "simplex_iteration_count", 0) or 0)
        label = {
            highspy.HighsModelStatus.kOptimal: "optimal",
            highspy.HighsModelStatus.kInfeasible: "infeasible",
            highspy.HighsModelStatus.kUnbounded: "unbounded",
            highspy.HighsModelStatus.kTimeLimit: "time_limit",
            highspy.HighsModelStatus.kIterationLimit: "iteration_limit",
        }.get(status, "error")
        if label != "optimal":
            return SolveResult(label, None, None, its, time.monotonic() - t0, h.modelStatusToString(status))
        values = list(h.getSolution().col_value)
        names = [h.getLp().col_names_[j] for j in range(len(values))]
        sol = Path(tmp) / "model.sol"
        sol.write_text("".join(f"{n} {v!r}\n" for n, v in zip(names, values)))
        x = import_solution(model, sol)
    return SolveResult("optimal", x, float(model.obj @ x), its, time.monotonic() - t0)


def solve(model: LpModel, method: str = "auto", **kw) -> SolveResult:
    """``auto`` uses the dense simplex when it fits, otherwise the external solver."""
    if method == "dense":
        return solve_dense(model, **kw)
    if method == "external":
        return solve_external(model, **kw)
    if method != "auto":
        raise SolverError(f"unknown method {method!r}")
    if not model.is_integer and model.num_vars + model.num_rows < 3000:
        return solve_dense(model, **{k: v for k, v in kw.items() if k == "time_limit"})
    return solve_external(model, **kw)


__all__ = [
    "SolveResult", "SolverError", "VerifyReport", "solve", "solve_dense",
    "solve_external", "verify_solution", "external_available", "write_solution",
]
