"""Naive reference implementations used as test oracles.

Nothing here imports the package's numerical code paths: profiles are plain
tuples, lotteries use exact fractions and relabelings are done with dicts.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def rankings(k):
    return list(itertools.permutations(range(k)))


def naive_profiles(n, m):
    """All profiles as (students, schools) in index order (student 1 most significant)."""
    for combo in itertools.product(rankings(m), repeat=n):
        for sch in itertools.product(rankings(n), repeat=m):
            yield combo, sch


def naive_count(n, m):
    return sum(1 for _ in naive_profiles(n, m))


def prefers(ranking, a, b):
    return ranking.index(a) < ranking.index(b)


def naive_pair_violation(r, students, schools, s, c):
    better_c = [x for x in range(len(schools)) if prefers(students[s], x, c)]
    better_s = [x for x in range(len(students)) if prefers(schools[c], x, s)]
    slack = 1 - r[s][c] - sum(r[s][x] for x in better_c) - sum(r[x][c] for x in better_s)
    return max(slack, 0)


def naive_total_violation(r, students, schools):
    return sum(
        naive_pair_violation(r, students, schools, s, c)
        for s in range(len(students)) for c in range(len(schools))
    )


def naive_blocking_pairs(assign, students, schools):
    """``assign`` maps student -> school (missing means unmatched)."""
    school_of = dict(assign)
    student_of = {c: s for s, c in school_of.items()}
    out = []
    for s in range(len(students)):
        for c in range(len(schools)):
            if school_of.get(s) == c:
                continue
            s_wants = s not in school_of or prefers(students[s], c, school_of[s])
            c_wants = c not in student_of or prefers(schools[c], s, student_of[c])
            if s_wants and c_wants:
                out.append((s, c))
    return out


def naive_sd(students, schools, order):
    """``order`` is a list of ('s', i) / ('c', j); returns student -> school."""
    school_of, student_of = {}, {}
    for side, i in order:
        if side == "s":
            if i in school_of:
                continue
            for c in students[i]:
                if c not in student_of:
                    school_of[i], student_of[c] = c, i
                    break
        else:
            if i in student_of:
                continue
            for s in schools[i]:
                if s not in school_of:
                    school_of[s], student_of[i] = i, s
                    break
    return school_of


def to_matrix(assign, n, m, one=1):
    r = [[0] * m for _ in range(n)]
    for s, c in assign.items():
        r[s][c] = one
    return r


def exact_lottery(rule, students, schools, orderings):
    """Uniform mixture of ``rule`` over ``orderings`` in exact rationals."""
    n, m = len(students), len(schools)
    acc = [[Fraction(0)] * m for _ in range(n)]
    w = Fraction(1, len(orderings))
    for order in orderings:
        for s, c in rule(students, schools, order).items():
            acc[s][c] += w
    return acc


def union_orderings(n, m):
    everyone = [("s", i) for i in range(n)] + [("c", j) for j in range(m)]
    return [list(p) for p in itertools.permutations(everyone)]


def alternating_orderings(n):
    out = []
    for a in itertools.permutations(range(n)):
        for b in itertools.permutations(range(n)):
            s = [("s", i) for i in a]
            c = [("c", j) for j in b]
            out.append([x for pair in zip(s, c) for x in pair])
            out.append([x for pair in zip(c, s) for x in pair])
    return out


def one_side_lottery(students, schools):
    """RSD2: each side with probability 1/2, then a uniform ordering of it."""
    n, m = len(students), len(schools)
    stu = exact_lottery(naive_sd, students, schools, [[("s", i) for i in p] for p in itertools.permutations(range(n))])
    sch = exact_lottery(naive_sd, students, schools, [[("c", j) for j in p] for p in itertools.permutations(range(m))])
    return [[(stu[s][c] + sch[s][c]) / 2 for c in range(m)] for s in range(n)]


def relabel(students, schools, pi_s, pi_c, swap=False):
    """Student s becomes pi_s[s]; names inside rankings are renamed the same way."""
    if swap:
        students, schools = schools, students
    new_students = {pi_s[s]: tuple(pi_c[c] for c in students[s]) for s in range(len(students))}
    new_schools = {pi_c[c]: tuple(pi_s[s] for s in schools[c]) for c in range(len(schools))}
    return (
        tuple(new_students[i] for i in range(len(students))),
        tuple(new_schools[j] for j in range(len(schools))),
    )


def burnside_orbits(n, m, symmetry=False):
    """Number of orbits = average number of fixed points over the group."""
    group = [
        (a, b, sw)
        for sw in ((False, True) if symmetry else (False,))
        for a in itertools.permutations(range(n))
        for b in itertools.permutations(range(m))
    ]
    profiles = list(naive_profiles(n, m))
    fixed = 0
    for a, b, sw in group:
        fixed += sum(1 for st, sc in profiles if relabel(st, sc, a, b, sw) == (st, sc))
    assert fixed % len(group) == 0
    return fixed // len(group)


def profitable_misreports(mech, n, m):
    """Brute force: every (profile, agent, report) where the report FOSD-beats truth somewhere.

    ``mech(students, schools)`` returns an n x m matrix.
    """
    found = []
    for st, sc in naive_profiles(n, m):
        base = mech(st, sc)
        for side, count, k in (("s", n, m), ("c", m, n)):
            for i in range(count):
                truth = st[i] if side == "s" else sc[i]
                for rep in rankings(k):
                    if rep == truth:
                        continue
                    if side == "s":
                        out = mech(st[:i] + (rep,) + st[i + 1:], sc)
                        get = lambda r, x: r[i][x]
                    else:
                        out = mech(st, sc[:i] + (rep,) + sc[i + 1:])
                        get = lambda r, x: r[x][i]
                    t_cum = d_cum = 0
                    for x in truth:
                        t_cum += get(base, x)
                        d_cum += get(out, x)
                        if d_cum > t_cum + 1e-12:
                            found.append((st, sc, side, i, rep))
                            break
    return found


def vertex_enumeration(c, A, lo, hi, lb, ub):
    """min c@x over {lo <= A x <= hi, lb <= x <= ub} by trying every basis of active constraints.

    Only for a handful of variables; returns (value, x) or (None, None) if infeasible.
    """
    c, A = np.asarray(c, float), np.asarray(A, float)
    n = len(c)
    planes = []
    for i in range(len(A)):
        for b in (lo[i], hi[i]):
            if np.isfinite(b):
                planes.append((A[i], b))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        for b in (lb[j], ub[j]):
            if np.isfinite(b):
                planes.append((e, b))
    best, arg = None, None
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[k][0] for k in combo])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([planes[k][1] for k in combo]))
        ax = A @ x
        ok = np.all(ax >= np.asarray(lo) - 1e-7) and np.all(ax <= np.asarray(hi) + 1e-7)
        ok = ok and np.all(x >= np.asarray(lb) - 1e-7) and np.all(x <= np.asarray(ub) + 1e-7)
        if ok and (best is None or c @ x < best):
            best, arg = float(c @ x), x
    return best, arg


def perm_count_formula(n, m):
    return math.factorial(m) ** n * math.factorial(n) ** m
