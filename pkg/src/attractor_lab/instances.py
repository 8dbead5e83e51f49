"""Reproducible random finite-engine instances within the oracle bounds."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .attractor import ORACLE_MAX_BLOCKS, ORACLE_MAX_M, ORACLE_MAX_N, OracleBoundError
from .metric import FiniteSpace
from .randomset import FiniteUniverse, RandomSetFin
from .rds import FiniteRDS, make_finite_rds

DEFAULT_BOUNDS = (ORACLE_MAX_M, ORACLE_MAX_N, ORACLE_MAX_BLOCKS)


@dataclass
class Instance:
    rds: FiniteRDS
    family: List[RandomSetFin]
    probe: RandomSetFin          # arbitrary (possibly non-measurable) set-valued map
    seed: int
    index: int

    @property
    def universe(self) -> FiniteUniverse:
        return self.rds.universe

    def to_dict(self) -> dict:
        return {"seed": self.seed, "index": self.index, "rds": self.rds.to_dict(),
                "family": [B.to_dict() for B in self.family], "probe": self.probe.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        c = FiniteRDS.from_dict(d["rds"])
        u = c.universe
        return cls(c, [RandomSetFin.from_dict(u, b) for b in d["family"]],
                   RandomSetFin.from_dict(u, d["probe"]), int(d.get("seed", 0)), int(d.get("index", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _set_partitions(items: List[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _shift_compatible(blocks, shift) -> bool:
    index = {i: k for k, b in enumerate(blocks) for i in b}
    for b in blocks:
        images = {index[int(shift[i])] for i in b}
        if len(images) != 1 or len(blocks[images.pop()]) != len(b):
            return False
    return True


def random_universe(rng: np.random.Generator, m: int, max_blocks: int) -> FiniteUniverse:
    shift = rng.permutation(m)
    # weights constant on shift orbits; some orbits get weight zero
    orbit_of = -np.ones(m, dtype=int)
    k = 0
    for i in range(m):
        if orbit_of[i] < 0:
            j = i
            while orbit_of[j] < 0:
                orbit_of[j] = k
                j = int(shift[j])
            k += 1
    orbit_w = rng.integers(1, 5, size=k).astype(float)
    orbit_w[rng.random(k) < 0.25] = 0.0
    if orbit_w.sum() == 0:
        orbit_w[rng.integers(k)] = 1.0
    w = orbit_w[orbit_of]
    w = w / w.sum()
    options = [p for p in _set_partitions(list(range(m)))
               if len(p) <= max_blocks and _shift_compatible(p, shift)]
    blocks = options[rng.integers(len(options))]
    return FiniteUniverse(w, shift, tuple(tuple(b) for b in blocks))


def random_space(rng: np.random.Generator, n: int) -> FiniteSpace:
    if rng.random() < 0.5:
        return FiniteSpace.discrete(n)
    return FiniteSpace.from_line(np.sort(rng.choice(np.arange(1, 4 * n + 1), size=n, replace=False)) / n)


def random_block_constant(rng, u: FiniteUniverse, n: int, p: float = 0.4) -> RandomSetFin:
    per_block = rng.random((len(u.blocks), n)) < p
    return RandomSetFin(u, per_block[u.block_of])


def random_instance(seed: int, index: int, bounds: Tuple[int, int, int] = DEFAULT_BOUNDS) -> Instance:
    max_m, max_n, max_b = bounds
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    u = random_universe(rng, m, max_b)
    space = random_space(rng, n)
    two_sided = rng.random() < 0.25
    per_block = []
    for _ in u.blocks:
        if two_sided:
            per_block.append(rng.permutation(n))
        elif rng.random() < 0.3:
            per_block.append(np.full(n, rng.integers(n)))
        else:
            per_block.append(rng.integers(0, n, size=n))
    gens = np.asarray(per_block)[u.block_of]
    c = make_finite_rds(u, gens, two_sided=two_sided, space=space)
    family = [random_block_constant(rng, u, n) for _ in range(int(rng.integers(1, 4)))]
    probe = RandomSetFin(u, rng.random((m, n)) < 0.4)
    return Instance(c, family, probe, int(seed), int(index))


def check_bounds(bounds) -> Tuple[int, int, int]:
    m, n, b = (int(v) for v in bounds)
    if m > ORACLE_MAX_M or n > ORACLE_MAX_N or b > ORACLE_MAX_BLOCKS or min(m, n, b) < 1:
        raise OracleBoundError(f"bounds m<={m}, n<={n}, blocks<={b} exceed the oracle limits "
                               f"m<={ORACLE_MAX_M}, n<={ORACLE_MAX_N}, blocks<={ORACLE_MAX_BLOCKS}")
    return m, n, b


def generate_instances(count: int, bounds=DEFAULT_BOUNDS, seed: int = 1,
                       out_dir: Optional[Path] = None) -> List[Instance]:
    """``count`` instances; instance ``i`` depends only on ``(seed, i)``."""
    bounds = check_bounds(bounds)
    out = [random_instance(seed, i, bounds) for i in range(int(count))]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for inst in out:
            (out_dir / f"instance_{inst.index:04d}.json").write_text(inst.to_json() + "\n")
    return out


# ---------------------------------------------------------------------------
# engine versus enumeration


def hull_by_enumeration(K: RandomSetFin) -> np.ndarray:
    """Intersection of every block-constant superset of ``K`` (checked on
    essential points); zero-probability blocks are left empty."""
    u = K.universe
    n = K.n
    positive = [k for k, bw in enumerate(u.block_weights) if bw > 0]
    ess = u.essential
    out = np.zeros((u.m, n), dtype=bool)
    member = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    for k in positive:
        rows = np.flatnonzero((u.block_of == k) & ess)
        need = K.sections_mask[rows].any(axis=0)
        supersets = member[np.all(member | ~need[None, :], axis=1)]
        out[u.block_of == k] = np.logical_and.reduce(supersets, axis=0)
    return out


@dataclass
class OracleComparison:
    index: int
    pullback_equal: Optional[bool]
    weak_equal: Optional[bool]
    weak_inside_pullback: bool
    pullback_strict: bool
    weak_strict: bool
    attracts_family: bool
    hull_equal: bool
    oracle_candidates: Optional[int]
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.pullback_equal and self.weak_equal and self.weak_inside_pullback
                    and self.pullback_strict and self.weak_strict and self.attracts_family
                    and self.hull_equal)

    @property
    def determined(self) -> bool:
        return self.pullback_equal is not None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def compare_with_oracle(inst: Instance, use_oracle: bool = True) -> OracleComparison:
    from .attractor import (attracts, brute_force_attractors, is_strictly_invariant,
                            minimal_pullback_attractor, minimal_weak_attractor, oracle_minimum)
    from .cover import finite_scales
    from .randomset import closed_random_hull

    c, fam = inst.rds, inst.family
    A, _ = minimal_pullback_attractor(c, fam)
    W, _, _ = minimal_weak_attractor(c, fam)
    hull, _ = closed_random_hull(inst.probe, finite_scales(c.space))
    hull_eq = hull.equal_on(RandomSetFin(c.universe, hull_by_enumeration(inst.probe)))
    p_eq = w_eq = None
    count = None
    note = ""
    if use_oracle:
        try:
            pull = brute_force_attractors(c, fam, "pullback")
            weak = brute_force_attractors(c, fam, "weak")
            count = len(pull)
            p_min, w_min = oracle_minimum(pull), oracle_minimum(weak)
            p_eq = p_min is not None and A.equal_on(p_min)
            w_eq = w_min is not None and W.equal_on(w_min)
        except OracleBoundError as exc:
            note = str(exc)
    return OracleComparison(
        inst.index, p_eq, w_eq, W.subset_on(A),
        is_strictly_invariant(c, A), is_strictly_invariant(c, W),
        all(attracts(c, B, A, "pullback").converges for B in fam),
        bool(hull_eq), count, note)
