"""Exhaustive (or sampled) audits of mechanism properties and objectives.

Every check reports a *slack*: the most negative margin of the property's
defining inequality over everything it examined. A check passes iff the
worst slack is at least ``-tol``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np

from .matching import total_violations_batch
from .mechanisms import Mechanism
from .prefs import (
    GroupElement,
    Profile,
    agents,
    all_profiles,
    apply_group,
    deviations,
    digit_weights,
    group_elements,
    index_map,
    misreport,
    permutations_of,
    profile_count,
)

EXHAUSTIVE_LIMIT = 10**8
DEFAULT_TOL = 1e-7


class AuditSizeError(RuntimeError):
    """The market is too large for exhaustive checking; use sampled mode."""


@dataclass
class AuditReport:
    property: str
    passed: bool
    worst_slack: float
    witness: Optional[dict[str, Any]]
    checked: int
    coverage: str = "exhaustive"

    def to_json(self) -> str:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return json.dumps(d)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{self.property:<16} {status}  worst_slack={self.worst_slack:+.3e}  checked={self.checked} ({self.coverage})"
        if self.witness and not self.passed:
            line += "\n  witness: " + ", ".join(f"{k}={v}" for k, v in self.witness.items())
        return line


@dataclass
class ObjectiveSummary:
    average_stv: float
    worst_stv: float
    average_waste: float
    argmax: int
    profiles: int = field(default=0)

    def row(self) -> tuple[float, float, float]:
        return (self.average_stv, self.worst_stv, self.average_waste)


def _report(prop, slack, witness, checked, tol, coverage="exhaustive") -> AuditReport:
    slack = float(slack) + 0.0  # no negative zero in reports
    return AuditReport(prop, slack >= -tol, slack, witness if slack < -tol else None, int(checked), coverage)


def exceeds_exhaustive_limit(n: int, m: int) -> bool:
    try:
        return profile_count(n, m) > EXHAUSTIVE_LIMIT
    except OverflowError:
        return True


def _gate(n: int, m: int) -> int:
    if exceeds_exhaustive_limit(n, m):
        raise AuditSizeError(f"{n}x{m} market exceeds {EXHAUSTIVE_LIMIT} profiles; pass sampled=<count>")
    return profile_count(n, m)


def _rng(seed):
    from .sim import make_rng

    return make_rng(seed, "audit")


# --- strategy-proofness ---------------------------------------------------

def check_strategyproof(
    mech: Mechanism, n: int, m: int, tol: float = DEFAULT_TOL,
    sampled: Optional[int] = None, seed: int = 0,
) -> AuditReport:
    """First-order stochastic dominance of truth-telling, for every agent and threshold."""
    if sampled:
        return _sp_sampled(mech, n, m, tol, sampled, seed)
    total = _gate(n, m)
    F = mech.table(n, m)
    S, C = all_profiles(n, m)
    idx = np.arange(total, dtype=np.int64)
    w = digit_weights(n, m)
    rows = np.arange(total)[:, None]
    worst, witness, checked = np.inf, None, 0
    for a in agents(n, m):
        if a.side == "s":
            slot, k = a.index, m
            R = S[:, a.index, :]
            own = F[:, a.index, :]                      # (P, m) over schools
            get = lambda q, R=R, i=a.index: F[q[:, None], i, R]
        else:
            slot, k = n + a.index, n
            R = C[:, a.index, :]
            own = F[:, :, a.index]                      # (P, n) over students
            get = lambda q, R=R, j=a.index: F[q[:, None], R, j]
        truth = np.cumsum(own[rows, R], axis=1)
        radix = len(permutations_of(k))
        digit = (idx // w[slot]) % radix
        for d in range(radix):
            moved = digit != d
            q = idx + (d - digit) * w[slot]
            slack = truth - np.cumsum(get(q), axis=1)
            slack[~moved] = np.inf
            checked += int(moved.sum()) * k
            pos = np.unravel_index(np.argmin(slack), slack.shape)
            if slack[pos] < worst:
                worst = float(slack[pos])
                p_idx, t = int(pos[0]), int(pos[1])
                witness = {
                    "profile": p_idx,
                    "agent": str(a),
                    "misreport": [int(x) for x in permutations_of(k)[d]],
                    "threshold": f"{'c' if a.side == 's' else 's'}{int(R[p_idx, t]) + 1}",
                }
    return _report("strategyproof", worst, witness, checked, tol)


def sp_slack_at(mech: Mechanism, p: Profile) -> tuple[float, Optional[dict]]:
    """Worst dominance margin over every deviation available at one profile."""
    base = mech(p)
    worst, witness = np.inf, None
    for a in agents(p.n, p.m):
        truth = p.preference(a)
        own = base[a.index, list(truth)] if a.side == "s" else base[list(truth), a.index]
        cum = np.cumsum(own)
        for dev in deviations(p, a):
            out = mech(misreport(p, a, dev))
            other = out[a.index, list(truth)] if a.side == "s" else out[list(truth), a.index]
            slack = cum - np.cumsum(other)
            t = int(np.argmin(slack))
            if slack[t] < worst:
                worst = float(slack[t])
                witness = {
                    "profile": str(p), "agent": str(a), "misreport": list(dev),
                    "threshold": f"{'c' if a.side == 's' else 's'}{truth[t] + 1}",
                }
    return worst, witness


def _sp_sampled(mech, n, m, tol, count, seed):
    from .sim import random_profile

    rng = _rng(seed)
    worst, witness, checked = np.inf, None, 0
    for _ in range(count):
        p = random_profile(rng, n, m)
        slack, wit = sp_slack_at(mech, p)
        checked += 1
        if slack < worst:
            worst, witness = slack, wit
    return _report("strategyproof", worst, witness, checked, tol, f"sampled {count} profiles")


# --- anonymity and symmetry -----------------------------------------------

def _equivariance(prop, mech, n, m, elements, tol, sampled, seed):
    if sampled:
        rng = _rng(seed)
        from .sim import random_profile

        worst, witness = 0.0, None
        for _ in range(sampled):
            p = random_profile(rng, n, m)
            g = elements[int(rng.integers(len(elements)))]
            gap = float(np.abs(mech(apply_group(p, g)) - g.transport(mech(p))).max())
            if -gap < worst:
                worst, witness = -gap, {"profile": str(p), "group": _fmt_g(g)}
        return _report(prop, worst, witness, sampled, tol, f"sampled {sampled} (profile, relabeling) pairs")
    total = _gate(n, m)
    F = mech.table(n, m)
    worst, witness = 0.0, None
    for g in elements:
        gap = np.abs(F[index_map(g, n, m)] - g.transport(F)).max(axis=(1, 2))
        i = int(np.argmax(gap))
        if -gap[i] < worst:
            worst, witness = -float(gap[i]), {"profile": i, "group": _fmt_g(g)}
    return _report(prop, worst, witness, total * len(elements), tol)


def _fmt_g(g: GroupElement) -> str:
    s = ",".join(str(x + 1) for x in g.pi_s)
    c = ",".join(str(x + 1) for x in g.pi_c)
    return f"pi_s=({s}) pi_c=({c})" + (" swap" if g.swap else "")


def check_anonymous(mech, n, m, tol=DEFAULT_TOL, sampled: Optional[int] = None, seed: int = 0) -> AuditReport:
    elements = group_elements(n, m)[1:]
    return _equivariance("anonymous", mech, n, m, elements, tol, sampled, seed)


def check_symmetric(mech, n, tol=DEFAULT_TOL, sampled: Optional[int] = None, seed: int = 0) -> AuditReport:
    swap = GroupElement(tuple(range(n)), tuple(range(n)), True)
    return _equivariance("symmetric", mech, n, n, [swap], tol, sampled, seed)


# --- non-wastefulness -----------------------------------------------------

def nonwaste_slack(F: np.ndarray) -> np.ndarray:
    """Per-profile margin: a deficient student and a deficient school must not coexist."""
    row_def = (1.0 - F.sum(axis=2)).max(axis=1)
    col_def = (1.0 - F.sum(axis=1)).max(axis=1)
    return -np.minimum(row_def, col_def)


def check_nonwasteful(mech, n, m, tol=DEFAULT_TOL, sampled: Optional[int] = None, seed: int = 0) -> AuditReport:
    if sampled:
        from .sim import random_profile

        rng = _rng(seed)
        profiles = [random_profile(rng, n, m) for _ in range(sampled)]
        F = np.stack([mech(p) for p in profiles])
        slack = nonwaste_slack(F)
        i = int(np.argmin(slack))
        return _report("nonwasteful", slack[i], {"profile": str(profiles[i])}, sampled, tol, f"sampled {sampled} profiles")
    total = _gate(n, m)
    slack = nonwaste_slack(mech.table(n, m))
    i = int(np.argmin(slack))
    return _report("nonwasteful", slack[i], {"profile": i}, total, tol)


# --- objectives -----------------------------------------------------------

def evaluate_objectives(mech: Mechanism, n: int, m: int) -> ObjectiveSummary:
    """Average and worst total violation and average waste over all profiles."""
    total = _gate(n, m)
    F = mech.table(n, m)
    S, C = all_profiles(n, m)
    v = total_violations_batch(F, S, C)
    waste = min(n, m) - F.sum(axis=(1, 2))
    return ObjectiveSummary(float(v.mean()), float(v.max()), float(waste.mean()), int(np.argmax(v)), total)


def audit_suite(mech: Mechanism, n: int, m: int, tol: float = DEFAULT_TOL,
                properties=("strategyproof", "anonymous", "symmetric", "nonwasteful")) -> list[AuditReport]:
    out = []
    for prop in properties:
        if prop == "strategyproof":
            out.append(check_strategyproof(mech, n, m, tol))
        elif prop == "anonymous":
            out.append(check_anonymous(mech, n, m, tol))
        elif prop == "symmetric" and n == m:
            out.append(check_symmetric(mech, n, tol))
        elif prop == "nonwasteful":
            out.append(check_nonwasteful(mech, n, m, tol))
    return out
