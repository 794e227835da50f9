"""Vectorized dictatorship kernels over batches of (profile, ordering) rows.

Rankings come as ``S`` (B, n, m) and ``C`` (B, m, n). Orderings are integer
arrays (B, L) of agent codes: student ``i`` is ``i``, school ``j`` is ``n + j``.
Kernels return 0/1 matrices of shape (B, n, m).
"""
from __future__ import annotations

import numpy as np


def _top_available(ranking: np.ndarray, free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First entry of each ranking row whose agent is still free."""
    rows = np.arange(ranking.shape[0])
    ok = free[rows[:, None], ranking]
    pos = ok.argmax(axis=1)
    return ranking[rows, pos], ok.any(axis=1)


def _dictate(S, C, orders, stu, sch, t, active):
    """Let the agent at ordering position ``t`` pick, in rows where ``active``."""
    B, n, _ = S.shape
    rows = np.arange(B)
    code = orders[:, t]
    is_stu = code < n
    # students
    i = np.where(is_stu, code, 0)
    act = active & is_stu & (stu[rows, i] < 0)
    if act.any():
        r = rows[act]
        pick, found = _top_available(S[r, i[act]], sch[r] < 0)
        r, who, pick = r[found], i[act][found], pick[found]
        stu[r, who] = pick
        sch[r, pick] = who
    # schools
    j = np.where(is_stu, 0, code - n)
    act = active & ~is_stu & (sch[rows, j] < 0)
    if act.any():
        r = rows[act]
        pick, found = _top_available(C[r, j[act]], stu[r] < 0)
        r, who, pick = r[found], j[act][found], pick[found]
        sch[r, who] = pick
        stu[r, pick] = who


def _to_matrix(stu: np.ndarray, m: int) -> np.ndarray:
    B, n = stu.shape
    out = np.zeros((B, n, m))
    r, s = np.nonzero(stu >= 0)
    out[r, s, stu[r, s]] = 1.0
    return out


def sd_batch(S: np.ndarray, C: np.ndarray, orders: np.ndarray) -> np.ndarray:
    B, n, m = S.shape
    orders = np.broadcast_to(orders, (B, orders.shape[-1]))
    stu = np.full((B, n), -1, dtype=np.int64)
    sch = np.full((B, m), -1, dtype=np.int64)
    everyone = np.ones(B, dtype=bool)
    for t in range(orders.shape[1]):
        _dictate(S, C, orders, stu, sch, t, everyone)
    return _to_matrix(stu, m)


def alg3_batch(S: np.ndarray, C: np.ndarray, orders: np.ndarray) -> np.ndarray:
    """Dictatorship until two students remain, then a stable 2x2 resolution."""
    B, n, m = S.shape
    if n != m or n < 2:
        raise ValueError("alg3 needs a balanced market with n >= 2")
    orders = np.broadcast_to(orders, (B, orders.shape[-1]))
    rows = np.arange(B)
    stu = np.full((B, n), -1, dtype=np.int64)
    sch = np.full((B, m), -1, dtype=np.int64)
    for t in range(orders.shape[1]):
        active = (stu >= 0).sum(axis=1) < n - 2
        if not active.any():
            break
        _dictate(S, C, orders, stu, sch, t, active)

    # residual 2x2 market: students a < b, schools x < y
    free_s = np.argsort(stu >= 0, axis=1, kind="stable")[:, :2]
    free_c = np.argsort(sch >= 0, axis=1, kind="stable")[:, :2]
    a, b = free_s[:, 0], free_s[:, 1]
    x, y = free_c[:, 0], free_c[:, 1]
    spos = np.argsort(S, axis=2)  # spos[r, s, c]: position of c in s's list
    cpos = np.argsort(C, axis=2)

    def s_prefers(s, c, other):
        return spos[rows, s, c] < spos[rows, s, other]

    def c_prefers(c, s, other):
        return cpos[rows, c, s] < cpos[rows, c, other]

    # (a,x)+(b,y) is justified by a qualifying pair from it, likewise (a,y)+(b,x)
    straight = (
        (s_prefers(a, x, y) & c_prefers(x, a, b)) | (s_prefers(b, y, x) & c_prefers(y, b, a))
    )
    crossed = (
        (s_prefers(a, y, x) & c_prefers(y, a, b)) | (s_prefers(b, x, y) & c_prefers(x, b, a))
    )
    # otherwise the highest-ordered remaining agent takes its top remaining partner
    remaining = np.zeros((B, n + m), dtype=bool)
    remaining[:, :n] = stu < 0
    remaining[:, n:] = sch < 0
    first = orders[rows, remaining[rows[:, None], orders].argmax(axis=1)]
    lead_is_stu = first < n
    lead_s = np.where(lead_is_stu, first, 0)
    lead_c = np.where(lead_is_stu, 0, first - n)
    # a student leader picks between x and y; a school leader between a and b
    stu_pick_x = np.where(lead_s == a, s_prefers(a, x, y), s_prefers(b, x, y))
    stu_straight = np.where(lead_s == a, stu_pick_x, ~stu_pick_x)
    sch_pick_a = np.where(lead_c == x, c_prefers(x, a, b), c_prefers(y, a, b))
    sch_straight = np.where(lead_c == x, sch_pick_a, ~sch_pick_a)
    fallback = np.where(lead_is_stu, stu_straight, sch_straight)
    use_straight = straight | (~crossed & fallback)

    stu[rows, a] = np.where(use_straight, x, y)
    stu[rows, b] = np.where(use_straight, y, x)
    return _to_matrix(stu, m)
