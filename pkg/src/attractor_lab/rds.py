"""Cocycles over finite universes: exact pullback tails, Omega-limit sets,
invariance checks, the Omega-limit containment lemma and perfection.

A finite engine stores one generator map per sample point,
``gen[omega]: {0..n-1} -> {0..n-1}``, and defines

    phi(t, omega) = gen(theta_{t-1} omega) o ... o gen(omega).

Pullback maps ``a_t(omega) = phi(t, theta_{-t} omega)`` live in a finite
monoid and are driven by a periodic symbol sequence, so the pair
``(a_t, t mod orbit_length)`` is eventually periodic.  Detecting that cycle
turns every ``t -> infinity`` limit into a finite computation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .metric import DomainError, FiniteSpace
from .randomset import FiniteUniverse, RandomSetFin


class CocycleError(ValueError):
    """Generator tables inconsistent with the requested cocycle."""


def _identity(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def _inverse(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


@dataclass
class PullbackTail:
    """Composed pullback maps ``a_t`` for ``t < preperiod + period``."""

    omega: int
    preperiod: int
    period: int
    maps: np.ndarray  # [t, x]

    def map_at(self, t: int) -> np.ndarray:
        if t < self.preperiod + self.period:
            return self.maps[t]
        return self.maps[self.preperiod + (t - self.preperiod) % self.period]

    @property
    def cycle(self) -> range:
        return range(self.preperiod, self.preperiod + self.period)


@dataclass
class ForwardTail:
    """Forward maps ``phi(t, omega)`` for ``t < preperiod + period``."""

    omega: int
    preperiod: int
    period: int
    maps: np.ndarray

    def map_at(self, t: int) -> np.ndarray:
        if t < self.preperiod + self.period:
            return self.maps[t]
        return self.maps[self.preperiod + (t - self.preperiod) % self.period]

    @property
    def cycle(self) -> range:
        return range(self.preperiod, self.preperiod + self.period)


class FiniteRDS:
    """Discrete-time cocycle on a finite carrier.

    ``overrides`` maps ``(t, omega)`` to a replacement for ``phi(t, omega)``;
    it models a crude cocycle whose identity fails on an exceptional set and
    is used only by :meth:`phi`/:meth:`evaluate`.  Tails are always built from
    the generator tables.
    """

    def __init__(self, universe: FiniteUniverse, gens, space: Optional[FiniteSpace] = None,
                 two_sided: bool = False, overrides: Optional[Dict[Tuple[int, int], np.ndarray]] = None):
        gens = np.array(gens, dtype=np.int64)
        if gens.ndim != 2 or gens.shape[0] != universe.m:
            raise CocycleError("need one generator map per sample point")
        n = gens.shape[1]
        if n == 0 or gens.min() < 0 or gens.max() >= n:
            raise CocycleError("generator maps must send the carrier into itself")
        if two_sided:
            for w, g in enumerate(gens):
                if len(np.unique(g)) != n:
                    raise CocycleError(f"generator at omega={w} is not bijective")
        gens.setflags(write=False)
        self.universe = universe
        self.gens = gens
        self.space = space if space is not None else FiniteSpace.discrete(n)
        if self.space.n != n:
            raise CocycleError("carrier size does not match the generator tables")
        self.two_sided = bool(two_sided)
        self.overrides = {(int(t), int(w)): np.asarray(f, dtype=np.int64)
                          for (t, w), f in (overrides or {}).items()}
        self._pullback: Dict[int, PullbackTail] = {}
        self._forward: Dict[int, ForwardTail] = {}

    @property
    def n(self) -> int:
        return self.gens.shape[1]

    @property
    def time_domain(self) -> str:
        return "Z" if self.two_sided else "N0"

    # -- evaluation ---------------------------------------------------------

    def shift(self, omega: int, s: int) -> int:
        return self.universe.shift_by(omega, s)

    def distance(self, x, y) -> np.ndarray:
        return self.space.matrix[np.asarray(x), np.asarray(y)]

    def _compose(self, t: int, omega: int) -> np.ndarray:
        if t < 0:
            if not self.two_sided:
                raise DomainError("negative times need a two-sided cocycle")
            return _inverse(self._compose(-t, self.shift(omega, t)))
        f = _identity(self.n)
        w = omega
        for _ in range(t):
            f = self.gens[w][f]
            w = int(self.universe.shift[w])
        return f

    def phi(self, t: int, omega: int) -> np.ndarray:
        key = (int(t), int(omega))
        if key in self.overrides:
            return self.overrides[key]
        return self._compose(int(t), int(omega))

    def evaluate(self, t: int, omega: int, x):
        return self.phi(t, omega)[np.asarray(x)]

    # -- tails -------------------------------------------------------------

    def pullback_tail(self, omega: int) -> PullbackTail:
        omega = int(omega)
        tail = self._pullback.get(omega)
        if tail is None:
            tail = self._pullback[omega] = self._build_tail(omega, backward=True)
        return tail

    def forward_tail(self, omega: int) -> ForwardTail:
        omega = int(omega)
        tail = self._forward.get(omega)
        if tail is None:
            tail = self._forward[omega] = self._build_tail(omega, backward=False)
        return tail

    def _build_tail(self, omega: int, backward: bool):
        u = self.universe
        L = u.orbit_length(omega)
        step = u.inverse_shift if backward else u.shift
        a = _identity(self.n)
        maps = [a]
        seen = {(a.tobytes(), 0): 0}
        w = omega
        t = 0
        while True:
            if backward:
                w = int(step[w])
                a = a[self.gens[w]]          # a_{t+1} = a_t o gen(theta_{-(t+1)} omega)
            else:
                a = self.gens[w][a]          # phi(t+1) = gen(theta_t omega) o phi(t)
                w = int(step[w])
            t += 1
            key = (a.tobytes(), t % L)
            if key in seen:
                pre = seen[key]
                cls = PullbackTail if backward else ForwardTail
                return cls(omega, pre, t - pre, np.stack(maps))
            seen[key] = t
            maps.append(a)

    def pullback_image(self, B: RandomSetFin, omega: int, t: int) -> np.ndarray:
        """Mask of ``phi(t, theta_{-t} omega) B(theta_{-t} omega)``."""
        a = self.pullback_tail(omega).map_at(t)
        src = self.shift(omega, -t)
        out = np.zeros(self.n, dtype=bool)
        out[a[B.sections_mask[src]]] = True
        return out

    def forward_image(self, B: RandomSetFin, omega: int, t: int) -> np.ndarray:
        """Mask of ``phi(t, omega) B(omega)``."""
        f = self.forward_tail(omega).map_at(t)
        out = np.zeros(self.n, dtype=bool)
        out[f[B.sections_mask[omega]]] = True
        return out

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {"universe": self.universe.to_dict(),
                "generators": self.gens.tolist(),
                "metric": self.space.matrix.tolist(),
                "two_sided": self.two_sided}

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteRDS":
        u = FiniteUniverse.from_dict(d["universe"])
        space = FiniteSpace(np.asarray(d["metric"], dtype=float)) if "metric" in d else None
        return make_finite_rds(u, d["generators"], two_sided=bool(d.get("two_sided", False)), space=space)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def make_finite_rds(u: FiniteUniverse, gens, two_sided: bool = False,
                    space: Optional[FiniteSpace] = None) -> FiniteRDS:
    """Build a finite engine; generators must be constant on blocks so that
    ``(omega, x) -> phi(t, omega) x`` is measurable."""
    c = FiniteRDS(u, gens, space=space, two_sided=two_sided)
    for b in u.blocks:
        rows = c.gens[list(b)]
        if np.any(rows != rows[0]):
            raise CocycleError(f"generators differ inside block {b}")
    return c


# ---------------------------------------------------------------------------
# cocycle identity


@dataclass
class ViolationReport:
    tol: float
    checked: int = 0
    max_residual: float = 0.0
    violations: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def exceptional_omegas(self) -> List[int]:
        return sorted({v["omega"] for v in self.violations if isinstance(v["omega"], (int, np.integer))})

    def to_dict(self) -> dict:
        return {"tol": self.tol, "checked": self.checked, "max_residual": self.max_residual,
                "violations": self.violations}


def default_tolerance(c) -> float:
    if isinstance(c, FiniteRDS):
        return 0.0
    return float(getattr(c, "cocycle_tolerance", 1e-9))


def cocycle_check(c, pairs: Iterable[Tuple[float, float]], states, omegas=None,
                  tol: Optional[float] = None) -> ViolationReport:
    """Check ``phi(0) = id`` and ``phi(t+s, w) = phi(t, theta_s w) phi(s, w)``.

    ``c`` needs ``evaluate(t, omega, states)``, ``shift(omega, s)`` and
    ``distance(x, y)``; ``omegas`` defaults to every sample point of a finite
    engine.
    """
    tol = default_tolerance(c) if tol is None else float(tol)
    if omegas is None:
        if not isinstance(c, FiniteRDS):
            raise DomainError("continuous cocycles need explicit noise samples")
        omegas = range(c.universe.m)
    states = np.asarray(states)
    rep = ViolationReport(tol)

    def record(kind, s, t, w, x, lhs, rhs):
        res = np.atleast_1d(np.asarray(c.distance(lhs, rhs), dtype=float))
        rep.checked += len(res)
        if len(res):
            rep.max_residual = max(rep.max_residual, float(np.max(res)))
        for i in np.flatnonzero(res > tol):
            xi = x[i] if np.ndim(x) else x
            rep.violations.append({"kind": kind, "s": s, "t": t, "omega": _label(w),
                                   "x": np.asarray(xi).tolist(), "residual": float(res[i])})

    for w in omegas:
        record("identity", 0, 0, w, states, c.evaluate(0, w, states), states)
        for s, t in pairs:
            lhs = c.evaluate(t + s, w, states)
            rhs = c.evaluate(t, c.shift(w, s), c.evaluate(s, w, states))
            record("composition", s, t, w, states, lhs, rhs)
    return rep


def _label(w):
    if isinstance(w, (int, np.integer)):
        return int(w)
    return getattr(w, "label", repr(w))


# ---------------------------------------------------------------------------
# Omega-limit sets


def omega_limit_mask(c: FiniteRDS, B: RandomSetFin, omega: int) -> np.ndarray:
    tail = c.pullback_tail(omega)
    out = np.zeros(c.n, dtype=bool)
    for t in tail.cycle:
        out |= c.pullback_image(B, omega, t)
    return out


def omega_limit_exact(c: FiniteRDS, B: RandomSetFin, omega: int) -> frozenset:
    """Union of the pullback images of ``B`` over one period of the tail."""
    return frozenset(int(i) for i in np.flatnonzero(omega_limit_mask(c, B, omega)))


def omega_limit_set(c: FiniteRDS, B: RandomSetFin) -> RandomSetFin:
    """``Omega_B`` as a random set (every sample point)."""
    return RandomSetFin(c.universe, np.stack([omega_limit_mask(c, B, w) for w in range(c.universe.m)]))


@dataclass
class CloudSeries:
    horizons: List[float]
    clouds: List[np.ndarray]
    eps: float
    shrinking: List[bool]

    def to_dict(self) -> dict:
        return {"eps": self.eps, "horizons": list(self.horizons), "shrinking": self.shrinking,
                "clouds": [np.asarray(cl).tolist() for cl in self.clouds]}


def cluster_representatives(points, eps: float, distance) -> np.ndarray:
    """Greedy eps-net of a point cloud in the given order."""
    points = np.asarray(points)
    reps = []
    for p in points:
        if not reps or np.min(distance(p, np.asarray(reps))) > eps:
            reps.append(p)
    return np.asarray(reps)


def omega_limit_estimate(c, B, omega, horizons: Sequence[float], eps: float,
                         t_max: Optional[float] = None, times_per_unit: int = 1) -> CloudSeries:
    """eps-cluster representatives of pullback images ``phi(t, theta_{-t} w) b``
    for ``t`` in ``[T, t_max]``, one cloud per horizon ``T``.

    ``c`` must expose ``pullback(omega, t, points)``; extending the noise path
    is the evaluator's business.
    """
    if not horizons:
        raise DomainError("at least one horizon is required")
    if eps <= 0:
        raise DomainError("eps must be positive")
    horizons = sorted(float(h) for h in horizons)
    t_max = horizons[-1] if t_max is None else float(t_max)
    B = np.atleast_1d(np.asarray(B, dtype=float))
    grid = np.arange(int(round(horizons[0] * times_per_unit)), int(round(t_max * times_per_unit)) + 1) / times_per_unit
    images = {float(t): np.asarray(c.pullback(omega, float(t), B)) for t in grid}
    clouds, shrinking = [], []
    prev = None
    for T in horizons:
        pts = np.concatenate([images[t] for t in grid if t >= T - 1e-12])
        cloud = cluster_representatives(pts, eps, c.distance)
        if prev is not None:
            # later clouds must lie within eps of the earlier one to count as shrinking
            shrinking.append(bool(np.all([np.min(c.distance(p, prev)) <= 2 * eps for p in cloud])))
        clouds.append(cloud)
        prev = cloud
    return CloudSeries(horizons, clouds, float(eps), shrinking)


# ---------------------------------------------------------------------------
# invariance


@dataclass
class InvarianceVerdict:
    mode: str
    holds: bool
    counterexamples: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "holds": self.holds, "counterexamples": self.counterexamples}


def invariance_check(c: FiniteRDS, D: RandomSetFin, mode: str = "strict", t_max: int = 1,
                     where=None) -> InvarianceVerdict:
    """Exact check of ``phi(t, w) D(w) ⊆ D(theta_t w)`` (forward) or equality
    (strict) for ``1 <= t <= t_max`` on the essential sample points."""
    if mode not in ("forward", "strict"):
        raise DomainError(f"unknown invariance mode {mode!r}")
    u = c.universe
    where = u.essential if where is None else np.asarray(where, dtype=bool)
    out = InvarianceVerdict(mode, True)
    S = D.sections_mask
    for w in np.flatnonzero(where):
        for t in range(1, int(t_max) + 1):
            img = np.zeros(c.n, dtype=bool)
            img[c.phi(t, int(w))[S[w]]] = True
            target = S[c.shift(int(w), t)]
            extra = img & ~target
            missing = target & ~img if mode == "strict" else np.zeros_like(target)
            if extra.any() or missing.any():
                out.holds = False
                out.counterexamples.append({"omega": int(w), "t": t,
                                            "image": np.flatnonzero(img).tolist(),
                                            "target": np.flatnonzero(target).tolist()})
    return out


@dataclass
class LimitLemmaVerdict:
    status: str  # "pass" | "fail" | "premise-failure"
    premise_omegas: List[int]
    premise_failures: List[int]
    containment_violations: List[dict] = field(default_factory=list)
    invariance_violations: List[dict] = field(default_factory=list)

    @property
    def conclusions_hold(self) -> bool:
        return not self.containment_violations and not self.invariance_violations

    def to_dict(self) -> dict:
        return {"status": self.status, "premise_omegas": self.premise_omegas,
                "premise_failures": self.premise_failures,
                "containment_violations": self.containment_violations,
                "invariance_violations": self.invariance_violations}


def lemma_tq2_check(c: FiniteRDS, B: RandomSetFin, K: RandomSetFin) -> LimitLemmaVerdict:
    """If the pullback images of ``B`` eventually stay inside ``K``, then
    ``Omega_B ⊆ K`` and ``Omega_B(theta_t w) ⊆ phi(t, w) Omega_B(w)``.

    The premise is checked per sample point along the periodic tail; the
    conclusions are checked wherever it holds.
    """
    u = c.universe
    ess = np.flatnonzero(u.essential)
    ok, bad = [], []
    for w in ess:
        tail = c.pullback_tail(int(w))
        inside = all(not np.any(c.pullback_image(B, int(w), t) & ~K.sections_mask[w]) for t in tail.cycle)
        (ok if inside else bad).append(int(w))
    limits = {int(w): omega_limit_mask(c, B, int(w)) for w in range(u.m)}
    verdict = LimitLemmaVerdict("pass", ok, bad)
    for w in ok:
        extra = limits[w] & ~K.sections_mask[w]
        if extra.any():
            verdict.containment_violations.append({"omega": w, "outside": np.flatnonzero(extra).tolist()})
        horizon = max(c.pullback_tail(w).period, u.orbit_length(w))
        for t in range(1, horizon + 1):
            img = np.zeros(c.n, dtype=bool)
            img[c.phi(t, w)[limits[w]]] = True
            missing = limits[c.shift(w, t)] & ~img
            if missing.any():
                verdict.invariance_violations.append({"omega": w, "t": t,
                                                      "missing": np.flatnonzero(missing).tolist()})
    if not verdict.conclusions_hold:
        verdict.status = "fail"
    elif bad:
        verdict.status = "premise-failure"
    return verdict


# ---------------------------------------------------------------------------
# perfection


def perfection_set(c: FiniteRDS, exceptional: Iterable[int]) -> np.ndarray:
    """Mask of sample points whose whole shift orbit avoids ``exceptional``."""
    u = c.universe
    bad = np.zeros(u.m, dtype=bool)
    bad[list(exceptional)] = True
    good = np.ones(u.m, dtype=bool)
    for w in range(u.m):
        if any(bad[v] for v in u.orbit(w)):
            good[w] = False
    return good


def perfect(c: FiniteRDS, violations) -> FiniteRDS:
    """Modify a crude cocycle off an invariant full-measure set.

    ``violations`` is either a :class:`ViolationReport` or an explicit
    collection of exceptional sample points.  The result agrees with ``c``
    on sample points whose orbit avoids the exceptional set and is the
    identity elsewhere.
    """
    if isinstance(violations, ViolationReport):
        exceptional = set(violations.exceptional_omegas)
        for v in violations.violations:
            if v["kind"] == "composition":
                exceptional.add(c.shift(v["omega"], v["s"]))
    else:
        exceptional = {int(w) for w in violations}
    good = perfection_set(c, exceptional)
    gens = c.gens.copy()
    gens[~good] = _identity(c.n)
    overrides = {(t, w): f for (t, w), f in c.overrides.items() if good[w]}
    return FiniteRDS(c.universe, gens, space=c.space, two_sided=c.two_sided, overrides=overrides)

