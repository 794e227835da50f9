"""The mechanism zoo and the anonymizing / symmetrizing transformers.

Every mechanism maps a profile to an n x m probability matrix. Randomized
mechanisms return the exact lottery (the average of the deterministic
outcomes over their ordering distribution), never a sample.

``mech(profile)`` evaluates one profile; ``mech.table(n, m)`` evaluates every
profile of the market in index order and is what audits use.
"""
from __future__ import annotations

import csv
import itertools
import math
import re
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .matching import DeterministicMatching, check_feasible
from .prefs import (
    Agent,
    GroupElement,
    OrbitTable,
    Profile,
    ProfileError,
    all_profiles,
    build_orbit_table,
    group_elements,
    index_map,
)

EXACT_ENUMERATION_MAX_SIDE = 10


class MechanismError(ValueError):
    pass


Ordering = tuple[Agent, ...]


def natural_ordering(n: int, m: int) -> Ordering:
    return tuple(Agent("s", i) for i in range(n)) + tuple(Agent("c", j) for j in range(m))


def parse_ordering(text: str, n: Optional[int] = None, m: Optional[int] = None) -> Ordering:
    """``"s1,c1,s2"`` (1-based labels). ``"nat"`` means s1..sn then c1..cm."""
    text = text.strip()
    if text == "nat":
        if n is None or m is None:
            raise MechanismError("'nat' ordering needs the market size")
        return natural_ordering(n, m)
    try:
        order = tuple(Agent.parse(x) for x in text.split(","))
    except ProfileError as e:
        raise MechanismError(str(e)) from None
    check_ordering(order)
    return order


def check_ordering(order: Sequence[Agent]) -> None:
    if len(set(order)) != len(order):
        raise MechanismError(f"ordering repeats an agent: {format_ordering(order)}")


def format_ordering(order: Sequence[Agent]) -> str:
    return ",".join(str(a) for a in order)


def ordering_codes(order: Sequence[Agent], n: int) -> np.ndarray:
    return np.array([a.index if a.side == "s" else n + a.index for a in order], dtype=np.int64)


# --- scalar listings ------------------------------------------------------

def sd(p: Profile, order: Sequence[Agent]) -> DeterministicMatching:
    """Sequential dictatorship; agents already matched are skipped."""
    check_ordering(order)
    stu: list[Optional[int]] = [None] * p.n
    sch: list[Optional[int]] = [None] * p.m
    for a in order:
        if a.side == "s":
            if stu[a.index] is not None:
                continue
            pick = next((c for c in p.students[a.index] if sch[c] is None), None)
            if pick is not None:
                stu[a.index], sch[pick] = pick, a.index
        else:
            if sch[a.index] is not None:
                continue
            pick = next((s for s in p.schools[a.index] if stu[s] is None), None)
            if pick is not None:
                sch[a.index], stu[pick] = pick, a.index
    return DeterministicMatching(p.n, p.m, tuple(stu))


def _mutual_pair_2x2(p: Profile, ss: list[int], cc: list[int]) -> Optional[list[tuple[int, int]]]:
    """A pair who each prefer the other within the residual 2x2 market, plus the leftovers."""
    for s in ss:
        for c in cc:
            s2 = ss[1] if s == ss[0] else ss[0]
            c2 = cc[1] if c == cc[0] else cc[0]
            if p.students[s].index(c) < p.students[s].index(c2) and p.schools[c].index(s) < p.schools[c].index(s2):
                return [(s, c), (s2, c2)]
    return None


def alg1(p: Profile) -> DeterministicMatching:
    """2x2: match a mutually top pair if there is one, else student 1 takes her top."""
    if (p.n, p.m) != (2, 2):
        raise MechanismError("alg1 is defined for 2x2 markets")
    for s in range(2):
        for c in range(2):
            if p.students[s][0] == c and p.schools[c][0] == s:
                return DeterministicMatching.from_pairs(2, 2, [(s, c), (1 - s, 1 - c)])
    c = p.students[0][0]
    return DeterministicMatching.from_pairs(2, 2, [(0, c), (1, 1 - c)])


def alg2(p: Profile) -> DeterministicMatching:
    """3x3: student 1 takes her top; the residual 2x2 market is resolved like alg1."""
    if (p.n, p.m) != (3, 3):
        raise MechanismError("alg2 is defined for 3x3 markets")
    c1 = p.students[0][0]
    ss, cc = [1, 2], [c for c in range(3) if c != c1]
    pairs = _mutual_pair_2x2(p, ss, cc)
    if pairs is None:
        c = next(c for c in p.students[1] if c in cc)
        pairs = [(1, c), (2, cc[0] if c == cc[1] else cc[1])]
    return DeterministicMatching.from_pairs(3, 3, [(0, c1)] + pairs)


def alg3(p: Profile, order: Sequence[Agent]) -> DeterministicMatching:
    """Dictatorship in ``order`` until two students remain, then a stable 2x2 close.

    When no mutually preferred pair exists in the residual market, the
    highest-ordered remaining agent takes its top remaining partner; this
    applies to a school leader exactly as to a student leader.
    """
    if p.n != p.m or p.n < 2:
        raise MechanismError("alg3 needs a balanced market with n >= 2")
    check_ordering(order)
    if set(order) != set(natural_ordering(p.n, p.m)):
        raise MechanismError("alg3 needs an ordering of every student and school")
    S, C = set(range(p.n)), set(range(p.m))
    pairs = []
    for a in order:
        if len(S) <= 2:
            break
        if a.side == "s" and a.index in S:
            j = next(c for c in p.students[a.index] if c in C)
            pairs.append((a.index, j))
            S.remove(a.index)
            C.remove(j)
        elif a.side == "c" and a.index in C:
            j = next(s for s in p.schools[a.index] if s in S)
            pairs.append((j, a.index))
            C.remove(a.index)
            S.remove(j)
    ss, cc = sorted(S), sorted(C)
    rest = _mutual_pair_2x2(p, ss, cc)
    if rest is None:
        lead = next(a for a in order if (a.index in S if a.side == "s" else a.index in C))
        if lead.side == "s":
            j = next(c for c in p.students[lead.index] if c in C)
            rest = [(lead.index, j), (next(s for s in ss if s != lead.index), next(c for c in cc if c != j))]
        else:
            j = next(s for s in p.schools[lead.index] if s in S)
            rest = [(j, lead.index), (next(s for s in ss if s != j), next(c for c in cc if c != lead.index))]
    return DeterministicMatching.from_pairs(p.n, p.m, pairs + rest)


# --- mechanism objects ----------------------------------------------------

class Mechanism:
    """Base class. Subclasses implement ``batch`` or ``__call__`` (or both)."""

    name = "mechanism"

    def supports(self, n: int, m: int) -> bool:
        return True

    def require(self, n: int, m: int) -> None:
        if not self.supports(n, m):
            raise MechanismError(f"{self.name} is not defined for {n}x{m} markets")

    def __call__(self, p: Profile) -> np.ndarray:
        self.require(p.n, p.m)
        S, C = p.arrays()
        return self.batch(S, C)[0]

    def batch(self, S: np.ndarray, C: np.ndarray) -> np.ndarray:
        out = np.empty((S.shape[0], S.shape[1], S.shape[2]))
        for b in range(S.shape[0]):
            out[b] = self(Profile.from_lists(S[b], C[b]))
        return out

    def table(self, n: int, m: int) -> np.ndarray:
        """Outcome at every profile, shape (profile_count, n, m); cached per market."""
        cache = self.__dict__.setdefault("_tables", {})
        if (n, m) not in cache:
            self.require(n, m)
            t = self._build_table(n, m)
            t.flags.writeable = False
            cache[(n, m)] = t
        return cache[(n, m)]

    def _build_table(self, n: int, m: int) -> np.ndarray:
        S, C = all_profiles(n, m)
        return self.batch(S, C)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class FunctionMechanism(Mechanism):
    """Wrap any ``Profile -> matrix`` (or ``-> DeterministicMatching``) callable."""

    def __init__(self, fn: Callable, name: str = "custom", sizes=None):
        self.fn = fn
        self.name = name
        self.sizes = sizes

    def supports(self, n, m):
        return self.sizes is None or (n, m) in self.sizes

    def __call__(self, p):
        self.require(p.n, p.m)
        out = self.fn(p)
        if isinstance(out, DeterministicMatching):
            return out.to_matrix()
        return np.asarray(out, dtype=float)


class OrderedRule(Mechanism):
    """A deterministic dictatorship-style rule with one fixed ordering."""

    def __init__(self, kind: str, order: Optional[Sequence[Agent]] = None, name: Optional[str] = None):
        if kind not in ("sd", "alg3"):
            raise MechanismError(f"unknown rule {kind!r}")
        self.kind = kind
        self.order = None if order is None else tuple(order)
        if self.order is not None:
            check_ordering(self.order)
        self.name = name or (f"{kind}:{format_ordering(self.order)}" if self.order else f"{kind}:nat")

    def ordering(self, n: int, m: int) -> Ordering:
        return self.order if self.order is not None else natural_ordering(n, m)

    def supports(self, n, m):
        if self.kind == "alg3" and (n != m or n < 2):
            return False
        order = self.ordering(n, m)
        if any(a.index >= (n if a.side == "s" else m) for a in order):
            return False
        if self.kind == "alg3":
            return set(order) == set(natural_ordering(n, m))
        # sd needs one full side so that the outcome is a maximal matching
        students = {a.index for a in order if a.side == "s"}
        schools = {a.index for a in order if a.side == "c"}
        return students == set(range(n)) or schools == set(range(m))

    def match(self, p: Profile) -> DeterministicMatching:
        self.require(p.n, p.m)
        order = self.ordering(p.n, p.m)
        return sd(p, order) if self.kind == "sd" else alg3(p, order)

    def __call__(self, p):
        return self.match(p).to_matrix()

    def batch(self, S, C):
        n, m = S.shape[1], S.shape[2]
        self.require(n, m)
        codes = ordering_codes(self.ordering(n, m), n)
        kernel = kernels.sd_batch if self.kind == "sd" else kernels.alg3_batch
        return kernel(S, C, codes[None, :])


class Alg1(OrderedRule):
    def __init__(self):
        super().__init__("alg3", None, name="alg1")

    def supports(self, n, m):
        return (n, m) == (2, 2)

    def match(self, p):
        return alg1(p)


class Alg2(OrderedRule):
    def __init__(self):
        super().__init__("alg3", None, name="alg2")

    def supports(self, n, m):
        return (n, m) == (3, 3)

    def match(self, p):
        return alg2(p)


def _side_orders(k: int, side: str):
    return [tuple(Agent(side, i) for i in perm) for perm in itertools.permutations(range(k))]


def _pad_codes(codes: list[np.ndarray]) -> np.ndarray:
    # one-side orderings differ in length when n != m; repeating the last
    # dictator is a no-op because matched agents are skipped
    L = max(len(c) for c in codes)
    return np.array([np.pad(c, (0, L - len(c)), mode="edge") for c in codes], dtype=np.int64)


def merge(students: Ordering, schools: Ordering, student_slots) -> Ordering:
    """Merge two side orderings, placing students at positions ``student_slots``."""
    slots = set(student_slots)
    it_s, it_c = iter(students), iter(schools)
    return tuple(next(it_s) if i in slots else next(it_c) for i in range(len(students) + len(schools)))


def interleave(first: Ordering, second: Ordering) -> Ordering:
    out = []
    for pair in itertools.zip_longest(first, second):
        out.extend(a for a in pair if a is not None)
    return tuple(out)


class RandomOrderRule(Mechanism):
    """Exact lottery of an ordered rule over a random ordering.

    methods:
      ``interleaved``  independent uniform orderings of each side merged by a
                       uniformly random interleaving pattern;
      ``alternating``  independent uniform orderings of each side, dictators
                       strictly alternating sides from a uniformly chosen side;
      ``one-side``     a uniformly chosen side, then a uniform ordering of it;
      ``union``        a uniform ordering of all students and schools together.

    ``interleaved`` and ``union`` induce the same ordering distribution; they
    are built differently and cross-checked in the tests.
    """

    METHODS = ("interleaved", "alternating", "one-side", "union")

    def __init__(self, kind: str, method: str, name: Optional[str] = None):
        if kind not in ("sd", "alg3"):
            raise MechanismError(f"unknown rule {kind!r}")
        if method not in self.METHODS:
            raise MechanismError(f"unknown randomization {method!r}")
        if kind == "alg3" and method == "one-side":
            raise MechanismError("alg3 needs orderings over both sides")
        self.kind, self.method = kind, method
        self.name = name or f"{kind}-{method}"

    def supports(self, n, m):
        if self.kind == "alg3" and (n != m or n < 2):
            return False
        if self.method == "alternating" and n != m:
            return False
        return True

    def ordering_count(self, n: int, m: int) -> int:
        if self.method == "alternating":
            return 2 * math.factorial(n) * math.factorial(m)
        if self.method == "one-side":
            return math.factorial(n) + math.factorial(m)
        return math.factorial(n + m)

    def orderings(self, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        """All orderings as codes (K, L) with their probabilities (K,)."""
        if max(n, m) > EXACT_ENUMERATION_MAX_SIDE:
            raise MechanismError(
                f"exact enumeration beyond {EXACT_ENUMERATION_MAX_SIDE} agents per side; "
                "use sampled mixtures from spmatch.sim"
            )
        stu, sch = _side_orders(n, "s"), _side_orders(m, "c")
        if self.method == "alternating":
            orders = [o for a in stu for b in sch for o in (interleave(a, b), interleave(b, a))]
            weights = [1.0 / len(orders)] * len(orders)
        elif self.method == "interleaved":
            patterns = list(itertools.combinations(range(n + m), n))
            orders = [merge(a, b, pat) for a in stu for b in sch for pat in patterns]
            weights = [1.0 / len(orders)] * len(orders)
        elif self.method == "one-side":
            orders = stu + sch
            weights = [0.5 / len(stu)] * len(stu) + [0.5 / len(sch)] * len(sch)
        else:
            everyone = natural_ordering(n, m)
            orders = [tuple(everyone[i] for i in perm) for perm in itertools.permutations(range(n + m))]
            weights = [1.0 / len(orders)] * len(orders)
        return _pad_codes([ordering_codes(o, n) for o in orders]), np.array(weights)

    def sample_orderings(self, n: int, m: int, k: int, rng: np.random.Generator) -> np.ndarray:
        """``k`` orderings drawn from the method's distribution, as codes (k, L)."""
        if self.method == "union":
            return np.array([rng.permutation(n + m) for _ in range(k)], dtype=np.int64)
        out = []
        for _ in range(k):
            a = tuple(Agent("s", int(i)) for i in rng.permutation(n))
            b = tuple(Agent("c", int(j)) for j in rng.permutation(m))
            if self.method == "interleaved":
                pattern = sorted(int(x) for x in rng.choice(n + m, size=n, replace=False))
                order = merge(a, b, pattern)
            elif self.method == "alternating":
                order = interleave(a, b) if rng.integers(2) == 0 else interleave(b, a)
            else:
                order = a if rng.integers(2) == 0 else b
            out.append(ordering_codes(order, n))
        return _pad_codes(out)

    def _kernel(self):
        return kernels.sd_batch if self.kind == "sd" else kernels.alg3_batch

    def batch(self, S, C):
        n, m = S.shape[1], S.shape[2]
        self.require(n, m)
        codes, weights = self.orderings(n, m)
        kernel = self._kernel()
        # identical orderings (e.g. interleavings) are evaluated once
        uniq, inv = np.unique(codes, axis=0, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=weights)
        acc = np.zeros(S.shape, dtype=float)
        for code, wk in zip(uniq, w):
            acc += wk * kernel(S, C, code[None, :])
        return acc

    def __call__(self, p):
        self.require(p.n, p.m)
        codes, weights = self.orderings(p.n, p.m)
        S, C = p.arrays()
        K = len(codes)
        out = self._kernel()(np.repeat(S, K, axis=0), np.repeat(C, K, axis=0), codes)
        return np.tensordot(weights, out, axes=1)

    def sampled(self, p: Profile, k: int, rng: np.random.Generator) -> np.ndarray:
        """Empirical lottery over ``k`` sampled orderings (for markets too big to enumerate)."""
        self.require(p.n, p.m)
        codes = self.sample_orderings(p.n, p.m, k, rng)
        S, C = p.arrays()
        out = self._kernel()(np.repeat(S, k, axis=0), np.repeat(C, k, axis=0), codes)
        return out.mean(axis=0)


class Anonymized(Mechanism):
    """Average a mechanism over every relabeling of students and schools."""

    def __init__(self, inner: Mechanism):
        self.inner = inner
        self.name = f"anon({inner.name})"

    def supports(self, n, m):
        return self.inner.supports(n, m)

    def __call__(self, p):
        self.require(p.n, p.m)
        from .prefs import apply_group

        G = group_elements(p.n, p.m)
        acc = np.zeros((p.n, p.m))
        for g in G:
            acc += g.inverse().transport(self.inner(apply_group(p, g)))
        return acc / len(G)

    def _build_table(self, n, m):
        F = self.inner.table(n, m)
        G = group_elements(n, m)
        acc = np.zeros(F.shape)
        for g in G:
            acc += g.inverse().transport(F[index_map(g, n, m)])
        return acc / len(G)


class Symmetrized(Mechanism):
    """Average a mechanism with its role-swapped, transposed outcome."""

    def __init__(self, inner: Mechanism):
        self.inner = inner
        self.name = f"sym({inner.name})"

    def supports(self, n, m):
        return n == m and self.inner.supports(n, m)

    def __call__(self, p):
        self.require(p.n, p.m)
        return 0.5 * (self.inner(p) + self.inner(p.swapped()).T)

    def _build_table(self, n, m):
        F = self.inner.table(n, m)
        swap = GroupElement(tuple(range(n)), tuple(range(m)), True)
        return 0.5 * (F + F[index_map(swap, n, m)].transpose(0, 2, 1))


def anonymize(f: Mechanism) -> Mechanism:
    return Anonymized(f)


def symmetrize(f: Mechanism) -> Mechanism:
    return Symmetrized(f)


class TabularMechanism(Mechanism):
    """Matrices stored on orbit representatives, expanded by transport."""

    def __init__(self, orbits: OrbitTable, matrices: dict[int, np.ndarray], name: str = "tab"):
        self.orbits = orbits
        self.n, self.m = orbits.n, orbits.m
        missing = [int(r) for r in orbits.reps if int(r) not in matrices]
        if missing:
            raise MechanismError(f"table misses {len(missing)} representatives, e.g. {missing[:5]}")
        self.matrices = {k: check_feasible(v, 1e-6) for k, v in matrices.items()}
        self.name = name

    def supports(self, n, m):
        return (n, m) == (self.n, self.m)

    def at_index(self, index: int) -> np.ndarray:
        rep, g = self.orbits.rep_of(index)
        return g.transport(self.matrices[rep])

    def __call__(self, p):
        self.require(p.n, p.m)
        from .prefs import encode

        return self.at_index(encode(p))

    def _build_table(self, n, m):
        reps = self.orbits.reps
        stacked = np.stack([self.matrices[int(r)] for r in reps])
        slot = np.searchsorted(reps, self.orbits.rep)
        base = stacked[slot]
        out = np.empty_like(base)
        for k, g in enumerate(self.orbits.elements):
            sel = self.orbits.witness == k
            if sel.any():
                out[sel] = g.transport(base[sel])
        return out

    def batch(self, S, C):
        from .prefs import encode_batch

        idx = encode_batch(S, C)
        return np.stack([self.at_index(int(i)) for i in idx])

    # -- csv ---------------------------------------------------------------
    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            ot = self.orbits
            fh.write(f"# n={self.n} m={self.m} reduced={int(ot.reduced)} symmetry={int(ot.use_symmetry)}\n")
            w = csv.writer(fh)
            w.writerow(["profile_index", "s", "c", "prob"])
            for rep in sorted(self.matrices):
                M = self.matrices[rep]
                for s, c in zip(*np.nonzero(M > 0)):
                    w.writerow([rep, int(s), int(c), repr(float(M[s, c]))])

    @classmethod
    def load(cls, path, n: Optional[int] = None, m: Optional[int] = None) -> "TabularMechanism":
        text = Path(path).read_text().splitlines()
        meta = {}
        if text and text[0].startswith("#"):
            meta = dict(kv.split("=") for kv in text[0][1:].split())
            text = text[1:]
        n = int(meta.get("n", n or 0))
        m = int(meta.get("m", m or 0))
        if not n or not m:
            raise MechanismError(f"{path}: market size unknown (no '# n=.. m=..' header)")
        rows = list(csv.DictReader(text))
        if meta.get("reduced", "0") == "1":
            orbits = build_orbit_table(n, m, meta.get("symmetry", "0") == "1")
        else:
            orbits = OrbitTable.trivial(n, m)
        mats: dict[int, np.ndarray] = {int(r): np.zeros((n, m)) for r in orbits.reps}
        for row in rows:
            i = int(row["profile_index"])
            if i not in mats:
                raise MechanismError(f"{path}: profile {i} is not an orbit representative")
            mats[i][int(row["s"]), int(row["c"])] = float(row["prob"])
        return cls(orbits, mats, name=f"tab:{path}")


def tabular(matrices: dict[int, np.ndarray], orbits: Optional[OrbitTable] = None, n=None, m=None) -> TabularMechanism:
    if orbits is None:
        if n is None or m is None:
            raise MechanismError("tabular mechanism without an orbit table needs n and m")
        orbits = OrbitTable.trivial(n, m)
    return TabularMechanism(orbits, matrices)


def tabulate(f: Mechanism, n: int, m: int) -> TabularMechanism:
    """Materialize ``f`` as an unreduced table."""
    T = f.table(n, m)
    return TabularMechanism(OrbitTable.trivial(n, m), {i: T[i] for i in range(len(T))}, name=f"tab({f.name})")


# --- descriptors ----------------------------------------------------------

_SIMPLE = {
    "alg1": Alg1,
    "alg2": Alg2,
    "rsd1": lambda: RandomOrderRule("sd", "interleaved", name="rsd1"),
    "rsd2": lambda: RandomOrderRule("sd", "one-side", name="rsd2"),
    "rsd-alt": lambda: RandomOrderRule("sd", "alternating", name="rsd-alt"),
    "rsd-union": lambda: RandomOrderRule("sd", "union", name="rsd-union"),
    "alg3-alt": lambda: RandomOrderRule("alg3", "alternating", name="alg3-alt"),
    "alg3-union": lambda: RandomOrderRule("alg3", "union", name="alg3-union"),
}


def parse_mechanism(text: str) -> Mechanism:
    """Build a mechanism from a descriptor such as ``sym(anon(alg2))`` or ``sd:s1,s2,s3``."""
    text = text.strip()
    if text in _SIMPLE:
        return _SIMPLE[text]()
    wrapped = re.fullmatch(r"(anon|sym)\((.*)\)", text)
    if wrapped:
        inner = parse_mechanism(wrapped.group(2))
        return anonymize(inner) if wrapped.group(1) == "anon" else symmetrize(inner)
    kind, sep, arg = text.partition(":")
    if kind in ("sd", "alg3"):
        if not sep or arg == "nat":
            return OrderedRule(kind, None)
        return OrderedRule(kind, parse_ordering(arg))
    if kind == "tab" and sep:
        return TabularMechanism.load(arg)
    raise MechanismError(f"unknown mechanism descriptor {text!r}")
