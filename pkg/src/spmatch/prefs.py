"""Preference profiles: dense indexing, relabeling group actions, orbits.

A profile for ``n`` students and ``m`` schools is stored as two tuples of
rankings. Every ranking lists opposite-side indices, most preferred first.
Being unmatched is implicitly ranked last by everyone, so it never appears.

Profiles are indexed in mixed radix: each agent contributes the
lexicographic rank of its ranking as one digit, students first (student 0 is
the most significant digit), then schools. The index is therefore strictly
monotone in lexicographic profile order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import numpy as np

Preference = tuple[int, ...]

INDEX_CAP = 2**63 - 1


class ProfileError(ValueError):
    pass


class Agent(NamedTuple):
    """A student (``side == "s"``) or a school (``side == "c"``), 0-based."""

    side: str
    index: int

    def __str__(self) -> str:
        return f"{self.side}{self.index + 1}"

    @classmethod
    def parse(cls, text: str) -> "Agent":
        text = text.strip()
        if len(text) < 2 or text[0] not in "sc" or not text[1:].isdigit():
            raise ProfileError(f"bad agent label {text!r}")
        return cls(text[0], int(text[1:]) - 1)


@lru_cache(maxsize=None)
def permutations_of(k: int) -> np.ndarray:
    """All permutations of ``range(k)`` in lexicographic order, shape (k!, k)."""
    return np.array(list(itertools.permutations(range(k))), dtype=np.int64).reshape(-1, k)


@lru_cache(maxsize=None)
def _perm_rank_table(k: int) -> dict[Preference, int]:
    return {p: i for i, p in enumerate(itertools.permutations(range(k)))}


def check_preference(ranking: Sequence[int], k: int) -> Preference:
    ranking = tuple(int(x) for x in ranking)
    if sorted(ranking) != list(range(k)):
        raise ProfileError(f"{ranking} is not a ranking of {k} agents")
    return ranking


def preference_rank(ranking: Sequence[int]) -> int:
    return _perm_rank_table(len(ranking))[tuple(ranking)]


def lehmer_rank(rankings: np.ndarray) -> np.ndarray:
    """Vectorized lexicographic rank of each row of ``rankings`` (shape (..., k))."""
    k = rankings.shape[-1]
    out = np.zeros(rankings.shape[:-1], dtype=np.int64)
    for i in range(k):
        smaller = (rankings[..., i + 1:] < rankings[..., i : i + 1]).sum(axis=-1)
        out += smaller * math.factorial(k - 1 - i)
    return out


@dataclass(frozen=True)
class Profile:
    n: int
    m: int
    students: tuple[Preference, ...]
    schools: tuple[Preference, ...]

    def __post_init__(self):
        if len(self.students) != self.n or len(self.schools) != self.m:
            raise ProfileError("preference list count does not match (n, m)")
        for r in self.students:
            check_preference(r, self.m)
        for r in self.schools:
            check_preference(r, self.n)

    @classmethod
    def from_lists(cls, students, schools) -> "Profile":
        students = tuple(tuple(int(x) for x in r) for r in students)
        schools = tuple(tuple(int(x) for x in r) for r in schools)
        return cls(len(students), len(schools), students, schools)

    def preference(self, agent: Agent) -> Preference:
        return self.students[agent.index] if agent.side == "s" else self.schools[agent.index]

    def student_rank(self) -> np.ndarray:
        """``pos[s, c]`` is the position of school c in student s's ranking."""
        pos = np.empty((self.n, self.m), dtype=np.int64)
        for s, r in enumerate(self.students):
            pos[s, list(r)] = np.arange(self.m)
        return pos

    def school_rank(self) -> np.ndarray:
        """``pos[c, s]`` is the position of student s in school c's ranking."""
        pos = np.empty((self.m, self.n), dtype=np.int64)
        for c, r in enumerate(self.schools):
            pos[c, list(r)] = np.arange(self.n)
        return pos

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Rankings as a batch of one: shapes (1, n, m) and (1, m, n)."""
        S = np.array(self.students, dtype=np.int64).reshape(1, self.n, self.m)
        C = np.array(self.schools, dtype=np.int64).reshape(1, self.m, self.n)
        return S, C

    def swapped(self) -> "Profile":
        """Exchange the roles of students and schools (balanced markets only)."""
        if self.n != self.m:
            raise ProfileError("role swap needs n == m")
        return Profile(self.n, self.m, self.schools, self.students)

    def __str__(self) -> str:
        return format_profile(self)


def format_profile(p: Profile) -> str:
    stu = " ".join(f"s{i + 1}:" + ",".join(map(str, r)) for i, r in enumerate(p.students))
    sch = " ".join(f"c{j + 1}:" + ",".join(map(str, r)) for j, r in enumerate(p.schools))
    return f"{p.n} {p.m} | {stu} | {sch}"


def parse_profile(text: str, n: int | None = None, m: int | None = None) -> Profile:
    """Parse ``n m | s1:2,0,1 ... | c1:1,0,2 ...`` or a bare profile index.

    Rankings are 0-based, most preferred first; 1-based labels such as
    ``s1:c3,c1,c2`` are accepted too. A bare integer needs ``n`` and ``m``.
    """
    text = text.strip()
    if "|" not in text:
        if n is None or m is None:
            raise ProfileError("a profile index needs n and m")
        try:
            idx = int(text)
        except ValueError:
            raise ProfileError(f"cannot parse profile {text!r}") from None
        return decode(idx, n, m)
    parts = [p.strip() for p in text.split("|")]
    if len(parts) != 3:
        raise ProfileError(f"expected 'n m | students | schools', got {text!r}")
    try:
        n_, m_ = (int(x) for x in parts[0].split())
    except ValueError:
        raise ProfileError(f"bad header {parts[0]!r}") from None

    def partner(tok: str, other: str) -> int:
        tok = tok.strip()
        if tok[:1] == other:
            return int(tok[1:]) - 1
        return int(tok)

    def side(chunk: str, prefix: str, count: int) -> list[Preference]:
        other = "c" if prefix == "s" else "s"
        items = chunk.split()
        if len(items) != count:
            raise ProfileError(f"expected {count} '{prefix}' entries, got {len(items)}")
        out = []
        for i, item in enumerate(items):
            label, _, ranks = item.partition(":")
            if label != f"{prefix}{i + 1}":
                raise ProfileError(f"expected label {prefix}{i + 1}, got {label!r}")
            try:
                out.append(tuple(partner(x, other) for x in ranks.split(",")))
            except ValueError:
                raise ProfileError(f"bad ranking {item!r}") from None
        return out

    return Profile.from_lists(side(parts[1], "s", n_), side(parts[2], "c", m_))


# --- dense indexing -------------------------------------------------------

def profile_count(n: int, m: int) -> int:
    if n < 1 or m < 1:
        raise ProfileError("n and m must be positive")
    total = math.factorial(m) ** n * math.factorial(n) ** m
    if total > INDEX_CAP:
        raise OverflowError(f"{n}x{m} market has {total} profiles, beyond the 64-bit index range")
    return total


def _radices(n: int, m: int) -> list[int]:
    return [math.factorial(m)] * n + [math.factorial(n)] * m


def digit_weights(n: int, m: int) -> np.ndarray:
    """Place value of each agent's digit, students then schools."""
    radices = _radices(n, m)
    w = [1] * len(radices)
    for i in range(len(radices) - 2, -1, -1):
        w[i] = w[i + 1] * radices[i + 1]
    return np.array(w, dtype=np.int64)


def agent_slot(agent: Agent, n: int) -> int:
    return agent.index if agent.side == "s" else n + agent.index


def encode(p: Profile) -> int:
    profile_count(p.n, p.m)
    idx = 0
    for radix, r in zip(_radices(p.n, p.m), p.students + p.schools):
        idx = idx * radix + preference_rank(r)
    return idx


def decode(index: int, n: int, m: int) -> Profile:
    total = profile_count(n, m)
    if not 0 <= index < total:
        raise ProfileError(f"profile index {index} out of range [0, {total})")
    digits = []
    for radix in reversed(_radices(n, m)):
        index, d = divmod(index, radix)
        digits.append(d)
    digits.reverse()
    ps, pc = permutations_of(m), permutations_of(n)
    students = tuple(tuple(int(x) for x in ps[d]) for d in digits[:n])
    schools = tuple(tuple(int(x) for x in pc[d]) for d in digits[n:])
    return Profile(n, m, students, schools)


def decode_batch(indices: np.ndarray, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Rankings for many indices at once: shapes (B, n, m) and (B, m, n)."""
    indices = np.asarray(indices, dtype=np.int64)
    w = digit_weights(n, m)
    radices = np.array(_radices(n, m), dtype=np.int64)
    digits = (indices[:, None] // w[None, :]) % radices[None, :]
    S = permutations_of(m)[digits[:, :n]]
    C = permutations_of(n)[digits[:, n:]]
    return S, C


def encode_batch(S: np.ndarray, C: np.ndarray) -> np.ndarray:
    n, m = S.shape[1], S.shape[2]
    digits = np.concatenate([lehmer_rank(S), lehmer_rank(C)], axis=1)
    return digits @ digit_weights(n, m)


@lru_cache(maxsize=8)
def all_profiles(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Every profile of the market in index order (read-only arrays)."""
    S, C = decode_batch(np.arange(profile_count(n, m), dtype=np.int64), n, m)
    S.flags.writeable = False
    C.flags.writeable = False
    return S, C


def iter_profiles(n: int, m: int) -> Iterator[Profile]:
    for i in range(profile_count(n, m)):
        yield decode(i, n, m)


# --- misreports -----------------------------------------------------------

def misreport(p: Profile, agent: Agent, new_pref: Sequence[int]) -> Profile:
    """The profile where ``agent`` reports ``new_pref`` and nobody else changes."""
    if agent.side == "s":
        if not 0 <= agent.index < p.n:
            raise ProfileError(f"no student {agent}")
        new = check_preference(new_pref, p.m)
        students = p.students[: agent.index] + (new,) + p.students[agent.index + 1 :]
        return Profile(p.n, p.m, students, p.schools)
    if agent.side == "c":
        if not 0 <= agent.index < p.m:
            raise ProfileError(f"no school {agent}")
        new = check_preference(new_pref, p.n)
        schools = p.schools[: agent.index] + (new,) + p.schools[agent.index + 1 :]
        return Profile(p.n, p.m, p.students, schools)
    raise ProfileError(f"unknown side {agent.side!r}")


def agents(n: int, m: int) -> list[Agent]:
    return [Agent("s", i) for i in range(n)] + [Agent("c", j) for j in range(m)]


def deviations(p: Profile, agent: Agent) -> list[Preference]:
    """All non-truthful reports available to ``agent``."""
    k = p.m if agent.side == "s" else p.n
    truth = p.preference(agent)
    return [tuple(int(x) for x in r) for r in permutations_of(k) if tuple(r) != truth]


# --- relabeling group -----------------------------------------------------

@dataclass(frozen=True)
class GroupElement:
    """Relabel students by ``pi_s`` and schools by ``pi_c``, after an optional role swap.

    Acting on a profile, student ``s`` becomes student ``pi_s[s]`` and every
    school name ``c`` inside a ranking becomes ``pi_c[c]`` (dually for
    schools). With ``swap`` set, students and schools first exchange roles.
    An equivariant mechanism satisfies ``f(g . p) == g.transport(f(p))``.
    """

    pi_s: tuple[int, ...]
    pi_c: tuple[int, ...]
    swap: bool = False

    @classmethod
    def identity(cls, n: int, m: int) -> "GroupElement":
        return cls(tuple(range(n)), tuple(range(m)), False)

    def __post_init__(self):
        if sorted(self.pi_s) != list(range(len(self.pi_s))):
            raise ProfileError(f"pi_s={self.pi_s} is not a permutation")
        if sorted(self.pi_c) != list(range(len(self.pi_c))):
            raise ProfileError(f"pi_c={self.pi_c} is not a permutation")
        if self.swap and len(self.pi_s) != len(self.pi_c):
            raise ProfileError("role swap needs n == m")

    def compose(self, other: "GroupElement") -> "GroupElement":
        """``self * other``: act by ``other`` first, then by ``self``."""
        a1, b1 = other.pi_s, other.pi_c
        if self.swap:
            a1, b1 = b1, a1
        pi_s = tuple(self.pi_s[a1[i]] for i in range(len(a1)))
        pi_c = tuple(self.pi_c[b1[j]] for j in range(len(b1)))
        return GroupElement(pi_s, pi_c, self.swap != other.swap)

    __mul__ = compose

    def inverse(self) -> "GroupElement":
        inv_s = tuple(int(x) for x in np.argsort(self.pi_s))
        inv_c = tuple(int(x) for x in np.argsort(self.pi_c))
        if self.swap:
            return GroupElement(inv_c, inv_s, True)
        return GroupElement(inv_s, inv_c, False)

    def act_arrays(self, S: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.swap:
            S, C = C, S
        a = np.array(self.pi_s, dtype=np.int64)
        b = np.array(self.pi_c, dtype=np.int64)
        S2 = np.empty_like(S)
        C2 = np.empty_like(C)
        S2[:, a] = b[S]
        C2[:, b] = a[C]
        return S2, C2

    def transport(self, M: np.ndarray) -> np.ndarray:
        """Carry a matching matrix (or a batch, shape (..., n, m)) along the relabeling."""
        M = np.asarray(M)
        if self.swap:
            M = np.swapaxes(M, -1, -2)
        out = np.empty_like(M)
        out[..., np.array(self.pi_s)[:, None], np.array(self.pi_c)[None, :]] = M
        return out

    def cell(self, s: int, c: int) -> tuple[int, int]:
        """Where entry (s, c) of a matrix lands under ``transport``."""
        if self.swap:
            s, c = c, s
        return self.pi_s[s], self.pi_c[c]


def apply_group(p: Profile, g: GroupElement) -> Profile:
    if len(g.pi_s) != p.n or len(g.pi_c) != p.m:
        raise ProfileError("group element does not match the market size")
    S, C = p.arrays()
    S2, C2 = g.act_arrays(S, C)
    return Profile.from_lists(S2[0], C2[0])


def group_elements(n: int, m: int, use_symmetry: bool = False) -> list[GroupElement]:
    """Relabelings of both sides, times the role swap when ``use_symmetry``.

    The identity comes first.
    """
    if use_symmetry and n != m:
        raise ProfileError("role swap needs n == m")
    swaps = (False, True) if use_symmetry else (False,)
    return [
        GroupElement(tuple(a), tuple(b), sw)
        for sw in swaps
        for a in itertools.permutations(range(n))
        for b in itertools.permutations(range(m))
    ]


@lru_cache(maxsize=256)
def index_map(g: GroupElement, n: int, m: int) -> np.ndarray:
    """``index_map(g)[i]`` is the index of ``g . decode(i)``, for every profile."""
    S, C = all_profiles(n, m)
    out = encode_batch(*g.act_arrays(S, C))
    out.flags.writeable = False
    return out


@dataclass
class OrbitTable:
    """Partition of all profiles into orbits of a relabeling group.

    ``rep[i]`` is the smallest index in the orbit of profile ``i`` and
    ``witness[i]`` indexes the element of ``elements`` carrying ``rep[i]`` to ``i``.
    """

    n: int
    m: int
    use_symmetry: bool
    elements: list[GroupElement]
    reps: np.ndarray
    rep: np.ndarray
    witness: np.ndarray
    orbit_size: dict[int, int]
    stabilizers: dict[int, list[int]]

    def rep_of(self, index: int) -> tuple[int, GroupElement]:
        return int(self.rep[index]), self.elements[int(self.witness[index])]

    @property
    def group_order(self) -> int:
        return len(self.elements)

    @classmethod
    def trivial(cls, n: int, m: int) -> "OrbitTable":
        """Every profile its own orbit: the unreduced setting."""
        total = profile_count(n, m)
        idx = np.arange(total, dtype=np.int64)
        return cls(
            n, m, False, [GroupElement.identity(n, m)], idx, idx,
            np.zeros(total, dtype=np.int64), {int(i): 1 for i in idx}, {int(i): [0] for i in idx},
        )

    @property
    def reduced(self) -> bool:
        return self.group_order > 1


@lru_cache(maxsize=8)
def build_orbit_table(n: int, m: int, use_symmetry: bool = False) -> OrbitTable:
    elements = group_elements(n, m, use_symmetry)
    total = profile_count(n, m)
    best = np.arange(total, dtype=np.int64)
    best_g = np.zeros(total, dtype=np.int64)
    maps = []
    for k, g in enumerate(elements):
        im = index_map(g, n, m)
        maps.append(im)
        better = im < best
        best[better] = im[better]
        best_g[better] = k
    # best = g . i with g = elements[best_g[i]]; the witness carries rep back to i
    position = {g: k for k, g in enumerate(elements)}
    inverse_id = np.array([position[g.inverse()] for g in elements], dtype=np.int64)
    witness = inverse_id[best_g]
    reps, counts = np.unique(best, return_counts=True)
    stab = {
        int(r): [k for k, im in enumerate(maps) if im[r] == r] for r in reps
    }
    return OrbitTable(
        n, m, use_symmetry, elements, reps, best, witness,
        {int(r): int(c) for r, c in zip(reps, counts)}, stab,
    )
