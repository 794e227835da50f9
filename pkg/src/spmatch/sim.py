"""Seeded Monte Carlo comparison of mechanisms on uniform random profiles.

Random streams are Philox generators keyed by ``(seed, n, rep, label)``
through :class:`numpy.random.SeedSequence` spawn keys, so every replication
draws the same numbers no matter how the work is scheduled.
"""
from __future__ import annotations

import csv
import math
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .matching import total_violation, waste
from .mechanisms import (
    Anonymized,
    Mechanism,
    MechanismError,
    RandomOrderRule,
    Symmetrized,
    parse_mechanism,
)
from .prefs import Profile


def _key(x) -> int:
    if isinstance(x, (int, np.integer)):
        return int(x)
    return zlib.crc32(str(x).encode())


def make_rng(seed: int, *keys) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def random_profile(rng: np.random.Generator, n: int, m: int) -> Profile:
    """Independent uniform rankings for every agent."""
    students = [tuple(int(x) for x in rng.permutation(m)) for _ in range(n)]
    schools = [tuple(int(x) for x in rng.permutation(n)) for _ in range(m)]
    return Profile.from_lists(students, schools)


def split_descriptors(text: str) -> list[str]:
    """Split ``"alg3:s1,c1,s2,c2,sd:nat"`` into descriptors; agent labels stay attached."""
    out: list[str] = []
    depth = 0
    for tok in re.split(r"(,)", text):
        if tok == ",":
            continue
        if out and (depth > 0 or re.fullmatch(r"[sc]\d+", tok.strip())):
            out[-1] += "," + tok
        else:
            out.append(tok)
        depth += tok.count("(") - tok.count(")")
    return [d.strip() for d in out if d.strip()]


def parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


@dataclass
class SimConfig:
    n_values: list[int]
    reps: int
    seed: int
    mechanisms: list[str]
    samples: int = 256
    exact_limit: int = 5040
    output: Optional[str] = None
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.mechanisms:
            raise ValueError("no mechanisms configured")
        if not self.n_values or min(self.n_values) < 1:
            raise ValueError("market sizes must be positive")

    @classmethod
    def from_file(cls, path, **overrides) -> "SimConfig":
        """Flat ``key = value`` text; keys n, reps, seed, mechs, samples, exact_limit, output."""
        raw: dict[str, str] = {}
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            k, sep, v = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: expected key=value, got {line!r}")
            raw[k.strip()] = v.strip()
        raw.update({k: str(v) for k, v in overrides.items() if v is not None})
        known = {"n", "reps", "seed", "mechs", "samples", "exact_limit", "output", "threads"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            n_values=parse_range(raw.get("n", "2..10")),
            reps=int(raw.get("reps", 1000)),
            seed=int(raw.get("seed", 0)),
            mechanisms=split_descriptors(raw.get("mechs", "alg3:nat,sd:nat")),
            samples=int(raw.get("samples", 256)),
            exact_limit=int(raw.get("exact_limit", 5040)),
            output=raw.get("output"),
            threads=int(raw.get("threads", 1)),
        )


@dataclass
class SimRecord:
    n: int
    rep: int
    stv: dict[str, float] = field(default_factory=dict)
    waste: dict[str, float] = field(default_factory=dict)

    def difference(self, a: str, b: str) -> float:
        return self.stv[a] - self.stv[b]


def _evaluate(mech: Mechanism, p: Profile, cfg: SimConfig, rep: int) -> np.ndarray:
    if isinstance(mech, RandomOrderRule) and mech.ordering_count(p.n, p.m) > cfg.exact_limit:
        rng = make_rng(cfg.seed, p.n, rep, "orderings", mech.name)
        return mech.sampled(p, cfg.samples, rng)
    return mech(p)


def _check_sizes(mechs: list[Mechanism], cfg: SimConfig) -> None:
    for n in cfg.n_values:
        for mech in mechs:
            if not mech.supports(n, n):
                raise MechanismError(f"{mech.name} is not defined for n={n}")
            if isinstance(mech, (Anonymized, Symmetrized)):
                inner = mech
                while isinstance(inner, (Anonymized, Symmetrized)):
                    inner = inner.inner
                if isinstance(mech, Anonymized) and math.factorial(n) ** 2 > cfg.exact_limit:
                    raise MechanismError(f"{mech.name}: {math.factorial(n) ** 2} relabelings at n={n} exceed exact_limit")
                if isinstance(inner, RandomOrderRule) and inner.ordering_count(n, n) > cfg.exact_limit:
                    raise MechanismError(f"{mech.name}: wrapped lottery too large to enumerate at n={n}")


def _run_block(cfg: SimConfig, n: int, reps: Iterable[int]) -> list[SimRecord]:
    mechs = [parse_mechanism(d) for d in cfg.mechanisms]
    out = []
    for rep in reps:
        p = random_profile(make_rng(cfg.seed, n, rep, "profile"), n, n)
        rec = SimRecord(n, rep)
        for d, mech in zip(cfg.mechanisms, mechs):
            r = _evaluate(mech, p, cfg, rep)
            rec.stv[d] = total_violation(r, p)
            rec.waste[d] = waste(r)
        out.append(rec)
    return out


def run_comparison(cfg: SimConfig) -> list[SimRecord]:
    """One shared random profile per (n, rep), evaluated by every mechanism."""
    _check_sizes([parse_mechanism(d) for d in cfg.mechanisms], cfg)
    jobs = [(n, range(cfg.reps)) for n in cfg.n_values]
    if cfg.threads > 1:
        with ProcessPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(_run_block, [cfg] * len(jobs), *zip(*jobs)))
    else:
        parts = [_run_block(cfg, n, reps) for n, reps in jobs]
    return [rec for part in parts for rec in part]


@dataclass
class AggregateRow:
    n: int
    series: str
    mean: float
    max: float
    stderr: float
    count: int


def _agg(n, series, values) -> AggregateRow:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return AggregateRow(n, series, float(v.mean()), float(v.max()), se, len(v))


def summarize(records: list[SimRecord], pairs: Optional[list[tuple[str, str]]] = None) -> list[AggregateRow]:
    """Per-n mean / max / standard error for each mechanism and each pairwise difference.

    Differences are labelled ``"a - b"`` (pairwise per instance) and
    ``"mean(a) - mean(b)"`` (difference of the per-mechanism means).
    """
    rows: list[AggregateRow] = []
    for n in sorted({r.n for r in records}):
        recs = [r for r in records if r.n == n]
        names = list(recs[0].stv)
        for name in names:
            rows.append(_agg(n, name, [r.stv[name] for r in recs]))
        for a, b in pairs if pairs is not None else [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]:
            rows.append(_agg(n, f"{a} - {b}", [r.difference(a, b) for r in recs]))
            gap = float(np.mean([r.stv[a] for r in recs]) - np.mean([r.stv[b] for r in recs]))
            rows.append(AggregateRow(n, f"mean({a}) - mean({b})", gap, gap, 0.0, len(recs)))
    return rows


def write_records(records: list[SimRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "rep", "mechanism", "stv", "waste"])
        for r in records:
            for name in r.stv:
                w.writerow([r.n, r.rep, name, repr(r.stv[name]), repr(r.waste[name])])


def read_records(path) -> list[SimRecord]:
    by_key: dict[tuple[int, int], SimRecord] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["n"]), int(row["rep"]))
            rec = by_key.setdefault(key, SimRecord(*key))
            rec.stv[row["mechanism"]] = float(row["stv"])
            rec.waste[row["mechanism"]] = float(row["waste"])
    return list(by_key.values())


def write_aggregate(rows: list[AggregateRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "mechanism", "mean_stv", "max_stv", "stderr"])
        for r in rows:
            w.writerow([r.n, r.series, f"{r.mean:.6f}", f"{r.max:.6f}", f"{r.stderr:.6f}"])


def write_plot_data(rows: list[AggregateRow], directory) -> list[Path]:
    """One two-column ``n value`` file per series (mean values)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for series in dict.fromkeys(r.series for r in rows):
        slug = re.sub(r"[^A-Za-z0-9]+", "_", series).strip("_")
        path = directory / f"{slug}.dat"
        path.write_text("".join(f"{r.n} {r.mean:.6f}\n" for r in rows if r.series == series))
        paths.append(path)
    return paths
