"""Random sets over finite probability spaces with partition sigma-algebras.

A :class:`FiniteUniverse` is ``Omega = {0, ..., m-1}`` with point weights, a
weight-preserving shift permutation and a partition whose blocks generate the
sigma-algebra.  A random set assigns each ``omega`` a subset of a finite
carrier ``{0, ..., n-1}``; on a finite metric carrier every subset is closed
and compact, so "closed random set" just means "block-constant".

Null sets are unions of zero-probability blocks.  A zero-weight point inside
a block of positive probability is *not* negligible: ``{omega}`` is not
measurable there.  All almost-sure statements in this package quantify over
the ``essential`` indices, i.e. points of positive-probability blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .cover import CoverFamily
from .metric import DomainError

WEIGHT_TOL = 1e-12


class UniverseError(ValueError):
    """Inconsistent universe data (shift, weights or partition)."""


@dataclass(frozen=True, eq=False)
class FiniteUniverse:
    weights: np.ndarray
    shift: np.ndarray
    blocks: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        s = np.asarray(self.shift, dtype=int)
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "shift", s)
        object.__setattr__(self, "blocks", blocks)
        w.setflags(write=False)
        s.setflags(write=False)
        self._validate()

    def _validate(self):
        m = len(self.weights)
        if m == 0:
            raise UniverseError("universe must have at least one point")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise UniverseError("weights must be non-negative and sum to 1")
        if self.shift.shape != (m,) or sorted(self.shift.tolist()) != list(range(m)):
            raise UniverseError("shift must be a permutation of the sample points")
        if np.any(np.abs(self.weights[self.shift] - self.weights) > WEIGHT_TOL):
            raise UniverseError("shift must preserve the weights")
        flat = sorted(i for b in self.blocks for i in b)
        if flat != list(range(m)) or any(len(b) == 0 for b in self.blocks):
            raise UniverseError("blocks must partition the sample points")
        bid = self.block_of
        for b in self.blocks:
            images = {int(bid[self.shift[i]]) for i in b}
            if len(images) != 1 or len(self.blocks[images.pop()]) != len(b):
                raise UniverseError("shift must map blocks onto blocks")

    def __eq__(self, other):
        if not isinstance(other, FiniteUniverse):
            return NotImplemented
        return (self.blocks == other.blocks and np.array_equal(self.shift, other.shift)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.weights.tobytes(), self.shift.tobytes(), self.blocks))

    # -- basic structure ---------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def block_of(self) -> np.ndarray:
        out = np.empty(self.m, dtype=int)
        for k, b in enumerate(self.blocks):
            out[list(b)] = k
        return out

    @property
    def block_weights(self) -> np.ndarray:
        return np.array([self.weights[list(b)].sum() for b in self.blocks])

    @property
    def essential(self) -> np.ndarray:
        """Mask of points in positive-probability blocks."""
        return self.block_weights[self.block_of] > WEIGHT_TOL

    @property
    def inverse_shift(self) -> np.ndarray:
        return np.argsort(self.shift)

    def shift_by(self, omega: int, t: int) -> int:
        """``theta_t omega`` for any integer ``t``."""
        perm = self.shift if t >= 0 else self.inverse_shift
        for _ in range(abs(int(t))):
            omega = int(perm[omega])
        return int(omega)

    def orbit(self, omega: int) -> List[int]:
        out = [int(omega)]
        nxt = int(self.shift[omega])
        while nxt != omega:
            out.append(nxt)
            nxt = int(self.shift[nxt])
        return out

    def orbit_length(self, omega: int) -> int:
        return len(self.orbit(omega))

    def block_closure(self, mask) -> np.ndarray:
        """Smallest block union containing ``mask`` (along the last-but-one
        axis when ``mask`` is 2-d with ``omega`` first)."""
        mask = np.asarray(mask, dtype=bool)
        bid = self.block_of
        nb = len(self.blocks)
        if mask.ndim == 1:
            hit = np.zeros(nb, dtype=bool)
            np.logical_or.at(hit, bid, mask)
            return hit[bid]
        hit = np.zeros((nb,) + mask.shape[1:], dtype=bool)
        np.logical_or.at(hit, bid, mask)
        return hit[bid]

    def outer_measure(self, mask) -> float:
        """``P*`` of an arbitrary index set."""
        return float(self.weights @ self.block_closure(mask))

    def is_measurable_mask(self, mask) -> bool:
        mask = np.asarray(mask, dtype=bool)
        return bool(np.array_equal(self.block_closure(mask), mask))

    # -- constructors and serialisation -----------------------------------

    @classmethod
    def trivial(cls) -> "FiniteUniverse":
        return cls(np.ones(1), np.zeros(1, dtype=int), ((0,),))

    @classmethod
    def full(cls, weights, shift=None) -> "FiniteUniverse":
        """Every subset measurable (one block per point)."""
        m = len(weights)
        shift = np.arange(m) if shift is None else shift
        return cls(np.asarray(weights, dtype=float), shift, tuple((i,) for i in range(m)))

    def to_dict(self) -> dict:
        return {"weights": [float(w) for w in self.weights],
                "shift": [int(s) for s in self.shift],
                "blocks": [list(b) for b in self.blocks]}

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteUniverse":
        return cls(np.asarray(d["weights"], dtype=float), np.asarray(d["shift"], dtype=int),
                   tuple(tuple(b) for b in d["blocks"]))


@dataclass(frozen=True, eq=False)
class RandomSetFin:
    """Per-sample-point subsets of a finite carrier, stored as a boolean
    ``[omega, x]`` matrix."""

    universe: FiniteUniverse
    sections_mask: np.ndarray

    def __post_init__(self):
        s = np.array(self.sections_mask, dtype=bool)
        if s.ndim != 2 or s.shape[0] != self.universe.m:
            raise DomainError("sections must be an [omega, x] boolean matrix")
        s.setflags(write=False)
        object.__setattr__(self, "sections_mask", s)

    @property
    def n(self) -> int:
        return self.sections_mask.shape[1]

    @classmethod
    def from_sections(cls, universe: FiniteUniverse, n: int, sections: Sequence[Iterable[int]]):
        if len(sections) != universe.m:
            raise DomainError("need one section per sample point")
        mask = np.zeros((universe.m, n), dtype=bool)
        for w, sec in enumerate(sections):
            idx = list(sec)
            if idx and (min(idx) < 0 or max(idx) >= n):
                raise DomainError(f"section {sec!r} leaves the carrier")
            mask[w, idx] = True
        return cls(universe, mask)

    @classmethod
    def constant(cls, universe: FiniteUniverse, n: int, points: Iterable[int]):
        return cls.from_sections(universe, n, [list(points)] * universe.m)

    @classmethod
    def empty(cls, universe: FiniteUniverse, n: int):
        return cls(universe, np.zeros((universe.m, n), dtype=bool))

    @classmethod
    def full(cls, universe: FiniteUniverse, n: int):
        return cls(universe, np.ones((universe.m, n), dtype=bool))

    def section(self, omega: int) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(self.sections_mask[omega]))

    def sections(self) -> List[frozenset]:
        return [self.section(w) for w in range(self.universe.m)]

    def is_measurable(self) -> bool:
        return is_measurable(self)

    def union(self, other: "RandomSetFin") -> "RandomSetFin":
        return RandomSetFin(self.universe, self.sections_mask | other.sections_mask)

    def intersection(self, other: "RandomSetFin") -> "RandomSetFin":
        return RandomSetFin(self.universe, self.sections_mask & other.sections_mask)

    def subset_on(self, other: "RandomSetFin", where=None) -> bool:
        where = self.universe.essential if where is None else np.asarray(where, dtype=bool)
        return not np.any(self.sections_mask[where] & ~other.sections_mask[where])

    def equal_on(self, other: "RandomSetFin", where=None) -> bool:
        where = self.universe.essential if where is None else np.asarray(where, dtype=bool)
        return bool(np.array_equal(self.sections_mask[where], other.sections_mask[where]))

    def to_dict(self) -> dict:
        return {"carrier_size": self.n, "sections": [sorted(s) for s in self.sections()]}

    @classmethod
    def from_dict(cls, universe: FiniteUniverse, d: dict) -> "RandomSetFin":
        return cls.from_sections(universe, int(d["carrier_size"]), d["sections"])

    def __repr__(self):
        return f"RandomSetFin({[sorted(s) for s in self.sections()]})"


def is_measurable(C: RandomSetFin) -> bool:
    """True iff the sections are constant on every block of the partition."""
    s = C.sections_mask
    for b in C.universe.blocks:
        rows = s[list(b)]
        if np.any(rows != rows[0]):
            return False
    return True


# ---------------------------------------------------------------------------
# hulls


@dataclass
class ScaleTrace:
    radius: float
    hits: np.ndarray            # [omega, member]: K(omega) meets G
    measurable_hits: np.ndarray  # [omega, member]: smallest block union containing hits
    probability: np.ndarray     # [member]: P of measurable_hits column
    selected: Optional[List[Tuple[int, ...]]] = None  # per member: maximizing subfamily


@dataclass
class HullTrace:
    scales: List[ScaleTrace] = field(default_factory=list)
    certificate: Tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "certificate": list(self.certificate),
            "scales": [{"radius": s.radius, "probabilities": s.probability.tolist(),
                        **({"selected": [list(x) for x in s.selected]} if s.selected is not None else {})}
                       for s in self.scales],
        }


def _check_scales(scales, n):
    scales = list(scales)
    if not scales:
        raise DomainError("at least one cover scale is required")
    for cov in scales:
        if cov.member_matrix.shape[1] != n:
            raise DomainError("cover scale does not match the carrier size")
    return scales


def _bool_product(left: np.ndarray, right) -> np.ndarray:
    """Boolean matrix product of a dense mask with a sparse 0/1 matrix."""
    return (sparse.csr_matrix(left.astype(np.float64)) @ right).toarray() > 0


def _level(measurable_hits: np.ndarray, cov: CoverFamily) -> np.ndarray:
    """Sections of the union of ``G x M^G`` over the members of one scale."""
    return _bool_product(measurable_hits, cov.member_sparse)


def _hull_masks(stack: np.ndarray, u: FiniteUniverse, scales, trace: Optional[HullTrace] = None) -> np.ndarray:
    """Hulls of a stack of set-valued maps ``[alpha, omega, x]`` at once."""
    a, m, n = stack.shape
    flat = stack.reshape(a * m, n)
    out = np.ones_like(flat)
    for cov in scales:
        k = len(cov)
        hits = _bool_product(flat, cov.member_sparse.T).reshape(a, m, k)
        mh = u.block_closure(hits.transpose(1, 0, 2)).transpose(1, 0, 2)
        if trace is not None:
            trace.scales.append(ScaleTrace(cov.radius, hits[0], mh[0], u.weights @ mh[0]))
        out &= _level(mh.reshape(a * m, k), cov)
    return out.reshape(a, m, n)


def closed_random_hull(K: RandomSetFin, scales: Sequence[CoverFamily]) -> Tuple[RandomSetFin, HullTrace]:
    """Smallest closed random set containing ``K`` (which need not be
    measurable).

    At each scale the hitting set ``{omega : K(omega) meets G}`` is replaced
    by the smallest block union containing it, whose probability is the outer
    probability of the hitting set.
    """
    scales = _check_scales(scales, K.n)
    trace = HullTrace()
    out = _hull_masks(K.sections_mask[None], K.universe, scales, trace)
    return RandomSetFin(K.universe, out[0]), trace


def closed_random_hulls(family: Sequence[RandomSetFin], scales: Sequence[CoverFamily]) -> List[RandomSetFin]:
    """``closed_random_hull`` applied member-wise, batched over the family."""
    family = list(family)
    if not family:
        return []
    u = family[0].universe
    scales = _check_scales(scales, family[0].n)
    out = _hull_masks(np.stack([K.sections_mask for K in family]), u, scales)
    return [RandomSetFin(u, o) for o in out]


def _greedy_subfamily(cols: np.ndarray, weights: np.ndarray) -> Tuple[List[int], np.ndarray]:
    """Indices whose hitting sets (rows of ``cols``) reach the largest
    probability, chosen by largest probability gain; further indices are
    then added only to reach zero-probability blocks."""
    current = np.zeros(cols.shape[1], dtype=bool)
    seq: List[int] = []
    while True:
        gains = (cols & ~current) @ weights
        a = int(np.argmax(gains))
        if gains[a] <= 1e-15:
            break
        seq.append(a)
        current |= cols[a]
    while True:
        gains = (cols & ~current).sum(axis=1)
        a = int(np.argmax(gains))
        if gains[a] == 0:
            break
        seq.append(a)
        current |= cols[a]
    return seq, current


def minimal_closed_cover_of_family(family: Sequence[RandomSetFin], scales: Sequence[CoverFamily],
                                   universe: Optional[FiniteUniverse] = None,
                                   n: Optional[int] = None) -> Tuple[RandomSetFin, HullTrace]:
    """Smallest closed random set containing every member almost surely.

    For each cover member ``G`` a subfamily is chosen greedily so that the
    union of its hitting sets reaches the supremal probability; the union of
    all chosen indices is the countable-subfamily certificate.  Members that
    are not measurable are replaced by their closed random hulls first.
    """
    family = list(family)
    if not family:
        if universe is None or n is None:
            raise DomainError("an empty family needs an explicit universe and carrier size")
        return RandomSetFin.empty(universe, n), HullTrace()
    u = family[0].universe
    n = family[0].n
    scales = _check_scales(scales, n)
    rough = [i for i, K in enumerate(family) if not is_measurable(K)]
    members = list(family)
    for i, H in zip(rough, closed_random_hulls([family[i] for i in rough], scales)):
        members[i] = H
    stack = np.stack([K.sections_mask for K in members])  # [alpha, omega, x]
    a = len(members)
    flat = stack.reshape(a * u.m, n)
    w = u.weights
    trace = HullTrace()
    out = np.ones((u.m, n), dtype=bool)
    chosen = set()
    for cov in scales:
        k = len(cov)
        hit_alpha = _bool_product(flat, cov.member_sparse.T).reshape(a, u.m, k)
        M = np.zeros((u.m, k), dtype=bool)
        selected = []
        for g in range(k):
            cols = hit_alpha[:, :, g]
            if not cols.any():
                selected.append(())
                continue
            seq, M[:, g] = _greedy_subfamily(cols, w)
            selected.append(tuple(seq))
            chosen.update(seq)
        trace.scales.append(ScaleTrace(cov.radius, hit_alpha.any(axis=0), M, w @ M, selected))
        out &= _level(M, cov)
    trace.certificate = tuple(sorted(chosen))
    return RandomSetFin(u, out), trace


def verein_representation(family: Sequence[RandomSetFin], certificate: Iterable[int]) -> RandomSetFin:
    """Closure of the union of the certified subfamily (closure is the
    identity on a finite carrier)."""
    family = list(family)
    idx = list(certificate)
    u = family[0].universe
    if not idx:
        return RandomSetFin.empty(u, family[0].n)
    return RandomSetFin(u, np.any(np.stack([family[i].sections_mask for i in idx]), axis=0))


# ---------------------------------------------------------------------------
# serialisation helpers


def dump_random_sets(universe: FiniteUniverse, sets: Sequence[RandomSetFin]) -> str:
    return json.dumps({"universe": universe.to_dict(), "sets": [s.to_dict() for s in sets]},
                      sort_keys=True)


def load_random_sets(text: str) -> Tuple[FiniteUniverse, List[RandomSetFin]]:
    d = json.loads(text)
    u = FiniteUniverse.from_dict(d["universe"])
    return u, [RandomSetFin.from_dict(u, s) for s in d["sets"]]
