"""Randomized and deterministic matchings, stability violation, waste, BvN."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .prefs import Profile

DEFAULT_TOL = 1e-9


class MatchingError(ValueError):
    pass


@dataclass(frozen=True)
class DeterministicMatching:
    """``assignment[s]`` is the school of student s, or None if unmatched."""

    n: int
    m: int
    assignment: tuple[Optional[int], ...]

    def __post_init__(self):
        taken = [c for c in self.assignment if c is not None]
        if len(self.assignment) != self.n:
            raise MatchingError("assignment length must equal n")
        if len(set(taken)) != len(taken) or any(not 0 <= c < self.m for c in taken):
            raise MatchingError(f"assignment {self.assignment} is not injective into {self.m} schools")

    @classmethod
    def from_pairs(cls, n: int, m: int, pairs) -> "DeterministicMatching":
        a: list[Optional[int]] = [None] * n
        for s, c in pairs:
            if a[s] is not None:
                raise MatchingError(f"student {s} matched twice")
            a[s] = c
        return cls(n, m, tuple(a))

    @classmethod
    def from_matrix(cls, r: np.ndarray, tol: float = DEFAULT_TOL) -> "DeterministicMatching":
        r = np.asarray(r, dtype=float)
        if np.any((np.abs(r) > tol) & (np.abs(r - 1) > tol)):
            raise MatchingError("matrix is not 0/1")
        n, m = r.shape
        a: list[Optional[int]] = [None] * n
        for s, c in zip(*np.nonzero(r > 0.5)):
            if a[s] is not None:
                raise MatchingError(f"student {s} matched twice")
            a[s] = int(c)
        return cls(n, m, tuple(a))

    def pairs(self) -> list[tuple[int, int]]:
        return [(s, c) for s, c in enumerate(self.assignment) if c is not None]

    def school_partner(self) -> list[Optional[int]]:
        partner: list[Optional[int]] = [None] * self.m
        for s, c in self.pairs():
            partner[c] = s
        return partner

    def to_matrix(self) -> np.ndarray:
        r = np.zeros((self.n, self.m))
        for s, c in self.pairs():
            r[s, c] = 1.0
        return r

    def is_perfect(self) -> bool:
        return len(self.pairs()) == min(self.n, self.m)

    def __str__(self) -> str:
        return "{" + ", ".join(f"(s{s + 1},c{c + 1})" for s, c in self.pairs()) + "}"


@dataclass
class Decomposition:
    terms: list[tuple[float, DeterministicMatching]]

    def reconstruct(self) -> np.ndarray:
        n, m = self.terms[0][1].n, self.terms[0][1].m
        out = np.zeros((n, m))
        for w, d in self.terms:
            out += w * d.to_matrix()
        return out

    @property
    def total_weight(self) -> float:
        return float(sum(w for w, _ in self.terms))


def check_feasible(r: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return ``r`` as a float array after checking it is doubly substochastic."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 2:
        raise MatchingError("a matching is a 2-d matrix")
    if r.size and (r.min() < -tol or r.max() > 1 + tol):
        raise MatchingError("entries must lie in [0, 1]")
    if np.any(r.sum(axis=1) > 1 + tol) or np.any(r.sum(axis=0) > 1 + tol):
        raise MatchingError("row and column sums must be at most 1")
    return r


def violation_matrix(r: np.ndarray, p: Profile) -> np.ndarray:
    """Per-pair fractional-stability violations: max(1 - at-least-as-good mass, 0)."""
    r = np.asarray(r, dtype=float)
    if r.shape != (p.n, p.m):
        raise MatchingError(f"matrix shape {r.shape} does not match a {p.n}x{p.m} profile")
    S, C = p.arrays()
    return violations_batch(r[None], S, C)[0]


def violations_batch(F: np.ndarray, S: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Pair violations for a batch of matrices ``F`` (B, n, m) at profiles (S, C)."""
    B, n, m = F.shape
    rows = np.arange(B)[:, None, None]
    # mass student s gets from schools at least as good as c, indexed by c
    s_idx = np.arange(n)[None, :, None]
    along_s = F[rows, s_idx, S]  # (B, n, m) in preference order
    cum_s = np.empty_like(F)
    cum_s[rows, s_idx, S] = np.cumsum(along_s, axis=2)
    c_idx = np.arange(m)[None, :, None]
    along_c = F.transpose(0, 2, 1)[rows, c_idx, C]  # (B, m, n)
    cum_c = np.empty((B, m, n))
    cum_c[rows, c_idx, C] = np.cumsum(along_c, axis=2)
    # r(s,c) is counted in both cumulative sums
    return np.maximum(1.0 - cum_s - cum_c.transpose(0, 2, 1) + F, 0.0)


def total_violations_batch(F: np.ndarray, S: np.ndarray, C: np.ndarray) -> np.ndarray:
    return violations_batch(F, S, C).sum(axis=(1, 2))


def pair_violation(r: np.ndarray, p: Profile, s: int, c: int) -> float:
    if not (0 <= s < p.n and 0 <= c < p.m):
        raise MatchingError(f"pair ({s}, {c}) out of range")
    r = check_feasible(r)
    better_c = p.students[s][: p.students[s].index(c)]
    better_s = p.schools[c][: p.schools[c].index(s)]
    slack = 1.0 - r[s, c] - sum(r[s, x] for x in better_c) - sum(r[x, c] for x in better_s)
    return max(slack, 0.0)


def total_violation(r: np.ndarray, p: Profile) -> float:
    r = check_feasible(r)
    return float(violation_matrix(r, p).sum())


def blocking_pairs(d: DeterministicMatching, p: Profile) -> list[tuple[int, int]]:
    """Pairs who both strictly prefer each other to their partners (unmatched is worst)."""
    spos, cpos = p.student_rank(), p.school_rank()
    partner_of_school = d.school_partner()
    out = []
    for s in range(p.n):
        for c in range(p.m):
            if d.assignment[s] == c:
                continue
            cur_c = d.assignment[s]
            s_wants = cur_c is None or spos[s, c] < spos[s, cur_c]
            cur_s = partner_of_school[c]
            c_wants = cur_s is None or cpos[c, s] < cpos[c, cur_s]
            if s_wants and c_wants:
                out.append((s, c))
    return out


def is_fractionally_stable(r: np.ndarray, p: Profile, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.all(violation_matrix(check_feasible(r), p) <= tol))


def waste(r: np.ndarray) -> float:
    r = check_feasible(r)
    return float(min(r.shape) - r.sum())


def _pad(r: np.ndarray) -> np.ndarray:
    n, m = r.shape
    row_def = np.clip(1.0 - r.sum(axis=1), 0.0, None)
    col_def = np.clip(1.0 - r.sum(axis=0), 0.0, None)
    big = np.zeros((n + m, m + n))
    big[:n, :m] = r
    big[:n, m:] = np.diag(row_def)
    big[n:, :m] = np.diag(col_def)
    big[n:, m:] = r.T
    return big


def bvn_decompose(r: np.ndarray, tol: float = DEFAULT_TOL) -> Decomposition:
    """Write a doubly substochastic matrix as a lottery over deterministic matchings.

    The matrix is completed to an (n+m)-square doubly stochastic one with
    dummy agents; perfect matchings on the positive support are peeled off
    with their bottleneck weight until nothing is left.
    """
    r = check_feasible(r, tol)
    n, m = r.shape
    work = _pad(np.clip(r, 0.0, 1.0))
    size = n + m
    max_terms = size * size - 2 * size + 2
    merged: dict[DeterministicMatching, float] = {}
    remaining = 1.0
    for _ in range(max_terms):
        if remaining <= tol:
            break
        support = work > tol
        # prefer heavy entries; forbidden cells cost more than any full matching
        cost = np.where(support, -work, size + 1.0)
        rows, cols = linear_sum_assignment(cost)
        if not support[rows, cols].all():
            raise MatchingError("no perfect matching on the support; matrix is not substochastic")
        w = float(work[rows, cols].min())
        work[rows, cols] -= w
        remaining -= w
        d = DeterministicMatching.from_pairs(
            n, m, [(i, j) for i, j in zip(rows, cols) if i < n and j < m]
        )
        merged[d] = merged.get(d, 0.0) + w
    else:
        if remaining > tol:
            raise MatchingError("decomposition did not terminate within the term bound")
    total = sum(merged.values())
    return Decomposition([(w / total, d) for d, w in merged.items()])
