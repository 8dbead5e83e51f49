"""The circle SDE ``dX = cos X dW1 + sin X dW2``.

One noise realization is a :class:`CirclePathBundle`: Brownian increments on
unit time intervals, each generated from its own counter-keyed stream, so
pullback evaluation at a longer horizon only adds older intervals.  Paths
are integrated with Euler-Maruyama; the Ito and Stratonovich forms agree
here, so no drift correction is needed.

Discrete-time pullback images of fixed points synchronize at a random
stable point ``S(omega)``; the continuous-time backward trajectory of any
``y`` is a Brownian motion on the circle and keeps returning to any ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence

import numba
import numpy as np

from ..metric import TWO_PI, DomainError

SUBSTEPS = 1000
SYNC_RADIUS = 0.05
UNCONVERGED_DISPERSION = 0.2


@numba.njit(cache=True)
def _wrap(x):
    y = x % TWO_PI
    return y if y < TWO_PI else 0.0


@numba.njit(cache=True)
def _em_rows(x, inc):
    # forward Euler-Maruyama for every row over all increments
    for r in range(x.shape[0]):
        v = x[r]
        for i in range(inc.shape[0]):
            v += math.cos(v) * inc[i, 0] + math.sin(v) * inc[i, 1]
        x[r] = _wrap(v)


@numba.njit(cache=True)
def _em_multistart(x, start, inc, first):
    # row r starts moving at global step start[r]; inc[i] is global step first + i
    for r in range(x.shape[0]):
        v = x[r]
        lo = max(start[r] - first, 0)
        for i in range(lo, inc.shape[0]):
            v += math.cos(v) * inc[i, 0] + math.sin(v) * inc[i, 1]
        x[r] = _wrap(v)


@numba.njit(cache=True)
def _em_logderiv(x, inc):
    # Euler-Maruyama for the state and its variational equation
    # dv = v (-sin X dW1 + cos X dW2); returns log|v| gained
    acc = 0.0
    for i in range(inc.shape[0]):
        s, c = math.sin(x), math.cos(x)
        acc += math.log(abs(1.0 - s * inc[i, 0] + c * inc[i, 1]))
        x += c * inc[i, 0] + s * inc[i, 1]
    return _wrap(x), acc


@numba.njit(cache=True)
def _inverse_step(y, a, b):
    # solve x + cos(x) a + sin(x) b = y by Newton (the map is increasing for |(a, b)| < 1)
    x = y - math.cos(y) * a - math.sin(y) * b
    for _ in range(50):
        f = x + math.cos(x) * a + math.sin(x) * b - y
        d = 1.0 - math.sin(x) * a + math.cos(x) * b
        step = f / d
        x -= step
        if abs(step) < 1e-15:
            break
    return x


@numba.njit(cache=True)
def _inverse_sweep(y, inc, positions):
    # undo the steps of inc in reverse order; positions[i] is the state
    # before step i; returns the log of the forward derivative gained
    acc = 0.0
    for i in range(inc.shape[0] - 1, -1, -1):
        y = _inverse_step(y, inc[i, 0], inc[i, 1])
        acc += math.log(1.0 - math.sin(y) * inc[i, 0] + math.cos(y) * inc[i, 1])
        positions[i] = y
    return acc


@numba.njit(cache=True)
def _arc(a, b):
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


@numba.njit(cache=True)
def _count_epochs(positions, t_end, dt, target, delta, min_gap, state):
    # positions run backward in time from t_end; state = [armed, last_epoch, count]
    n = positions.shape[0]
    for i in range(n - 1, -1, -1):
        t = t_end + (n - i) * dt
        d = _arc(positions[i], target)
        if state[0] > 0.5:
            if d < delta and t - state[1] >= min_gap:
                state[2] += 1.0
                state[1] = t
                state[0] = 0.0
        elif d > 2.0 * delta:
            state[0] = 1.0


def wrap(x):
    return np.mod(x, TWO_PI)


def arc_distance(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % TWO_PI
    return np.minimum(d, TWO_PI - d)


# ---------------------------------------------------------------------------
# noise


class CirclePathBundle:
    """Increments of ``(W1, W2)`` for one noise realization.

    Unit interval ``[k, k+1)`` holds ``substeps`` increments drawn from the
    stream keyed by ``(seed, sign(k), |k|)``.  ``offset`` (in substeps)
    realizes the shift ``theta``.
    """

    def __init__(self, seed: int, substeps: int = SUBSTEPS, amplitude: float = 1.0,
                 offset: int = 0, _cache: Optional[Dict[int, np.ndarray]] = None):
        self.seed = int(seed)
        self.substeps = int(substeps)
        self.amplitude = float(amplitude)
        self.offset = int(offset)
        self._cache = {} if _cache is None else _cache

    @property
    def dt(self) -> float:
        return 1.0 / self.substeps

    @property
    def label(self) -> str:
        return f"circle(seed={self.seed}, offset={self.offset})"

    def unit(self, k: int) -> np.ndarray:
        inc = self._cache.get(k)
        if inc is None:
            ss = np.random.SeedSequence([self.seed, 0 if k >= 0 else 1, abs(int(k))])
            z = np.random.Generator(np.random.Philox(ss)).standard_normal((self.substeps, 2))
            inc = z * (math.sqrt(self.dt) * self.amplitude)
            inc.setflags(write=False)
            self._cache[k] = inc
        return inc

    def unit_uncached(self, k: int) -> np.ndarray:
        if k in self._cache:
            return self._cache[k]
        ss = np.random.SeedSequence([self.seed, 0 if k >= 0 else 1, abs(int(k))])
        z = np.random.Generator(np.random.Philox(ss)).standard_normal((self.substeps, 2))
        return z * (math.sqrt(self.dt) * self.amplitude)

    def steps(self, t: float) -> int:
        k = t * self.substeps
        r = round(k)
        if abs(k - r) > 1e-6:
            raise DomainError(f"time {t!r} is not on the substep grid")
        return int(r)

    def increments(self, t0: float, t1: float) -> np.ndarray:
        """Increments for times ``[t0, t1)`` of this (shifted) realization."""
        a = self.steps(t0) + self.offset
        b = self.steps(t1) + self.offset
        if b <= a:
            return np.zeros((0, 2))
        ka, kb = a // self.substeps, (b - 1) // self.substeps
        blocks = [self.unit(k) for k in range(ka, kb + 1)]
        full = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]
        lo = a - ka * self.substeps
        return full[lo: lo + (b - a)]

    def shifted(self, s: float) -> "CirclePathBundle":
        return CirclePathBundle(self.seed, self.substeps, self.amplitude,
                                self.offset + self.steps(s), self._cache)

    def clear(self):
        self._cache.clear()


class CircleSDE:
    """Cocycle protocol; ``omega`` is a :class:`CirclePathBundle`."""

    cocycle_tolerance = 1e-6

    def evaluate(self, t, omega: CirclePathBundle, x):
        if t < 0:
            raise DomainError("use the inverse sweep for negative times")
        out = np.array(np.atleast_1d(x), dtype=float)
        _em_rows(out, omega.increments(0.0, t))
        return out

    def shift(self, omega: CirclePathBundle, s):
        return omega.shifted(s)

    def pullback(self, omega: CirclePathBundle, t, x):
        return self.evaluate(t, omega.shifted(-t), x)

    def distance(self, a, b):
        return arc_distance(a, b)

    def tq7_report(self, family, bundle: CirclePathBundle, **kwargs):
        return circle_tq7_report(bundle, deterministic_points=family, **kwargs)


# ---------------------------------------------------------------------------
# pullback images and the stable point


def circle_pullback(bundle: CirclePathBundle, x0s, n: float) -> np.ndarray:
    """``phi(n, theta_{-n} omega) x0`` for each ``x0``, one noise realization."""
    out = np.array(np.atleast_1d(x0s), dtype=float)
    if n < 0:
        raise DomainError("horizon must be non-negative")
    _em_rows(out, bundle.increments(-n, 0.0))
    return out


def pullback_cloud(bundle: CirclePathBundle, x0s, horizons: Sequence[int]) -> np.ndarray:
    """Pullback images for every horizon in one sweep: ``[horizon, x0]``."""
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    horizons = np.asarray(horizons, dtype=np.int64)
    if np.any(horizons < 0):
        raise DomainError("horizons must be non-negative")
    N = int(horizons.max())
    x = np.tile(x0s, len(horizons))
    start = np.repeat((N - horizons) * bundle.substeps, len(x0s)).astype(np.int64)
    _em_multistart(x, start, bundle.increments(-N, 0.0), 0)
    return x.reshape(len(horizons), len(x0s))


def circular_median(angles) -> float:
    """Sample point minimizing the summed arc distance to the others."""
    a = np.asarray(angles, dtype=float)
    cost = arc_distance(a[:, None], a[None, :]).sum(axis=1)
    return float(a[int(np.argmin(cost))])


def circular_mad(angles, centre: float) -> float:
    return float(np.median(arc_distance(angles, centre)))


def synchronization_diameter(angles) -> float:
    a = np.asarray(angles, dtype=float)
    return float(arc_distance(a[:, None], a[None, :]).max())


class StablePoint(NamedTuple):
    estimate: float
    dispersion: float

    @property
    def converged(self) -> bool:
        return self.dispersion <= UNCONVERGED_DISPERSION


def stable_point_estimate(bundle: CirclePathBundle, T: float = 30.0, points: int = 64) -> StablePoint:
    """Circular median of pullback images of equispaced points at horizon
    ``T``; uses only the increments on ``[-T, 0]``."""
    if T < 10:
        raise DomainError("T must be at least 10")
    x0 = np.arange(points) * (TWO_PI / points)
    img = circle_pullback(bundle, x0, T)
    s = circular_median(img)
    return StablePoint(s, circular_mad(img, s))


def unstable_point_estimate(bundle: CirclePathBundle, T: float = 30.0, points: int = 64) -> StablePoint:
    """Same construction for the time-reversed flow: inverse images of
    equispaced points pulled back from time ``T`` to 0 (future increments)."""
    x0 = np.arange(points) * (TWO_PI / points)
    pos = np.empty(bundle.substeps)
    out = []
    for y in x0:
        v = y
        for k in range(int(T) - 1, -1, -1):
            _inverse_sweep(v, bundle.increments(k, k + 1), pos)
            v = pos[0]
        out.append(v % TWO_PI)
    s = circular_median(out)
    return StablePoint(s, circular_mad(out, s))


# ---------------------------------------------------------------------------
# Lyapunov exponents


def lyapunov_estimate(bundle: CirclePathBundle, T: float = 2000.0, x0: float = 0.0) -> float:
    """``(1/T) log |v(T)|`` for the variational equation along the forward
    trajectory from ``x0`` (increments on ``[0, T]``)."""
    if T < 100:
        raise DomainError("T must be at least 100")
    x, acc = float(x0), 0.0
    for k in range(int(T)):
        x, gained = _em_logderiv(x, bundle.unit_uncached(k))
        acc += gained
    return acc / int(T)


def lyapunov_two_point(bundle: CirclePathBundle, T: float = 2000.0, x0: float = 0.0,
                       eps: float = 1e-7) -> float:
    """Separation growth of two nearby trajectories, renormalized every
    unit of time (no derivative formula involved)."""
    pair = np.array([x0, x0 + eps])
    acc = 0.0
    for k in range(int(T)):
        _em_rows(pair, bundle.unit_uncached(k))
        sep = float(arc_distance(pair[0], pair[1]))
        acc += math.log(sep / eps)
        pair[1] = pair[0] + eps
    return acc / int(T)


def lyapunov_reversed(bundle: CirclePathBundle, T: float = 2000.0, buffer: int = 30, y0: float = 0.0) -> float:
    """Forward exponent measured along the trajectory of the unstable point.

    The trajectory ``U(theta_s omega)``, ``0 <= s <= T``, is obtained by
    undoing steps from time ``T + buffer`` down to 0 (the reversed flow
    synchronizes onto it); the forward log-derivative gained along it is
    accumulated on ``[0, T]``.
    """
    if T < 100:
        raise DomainError("T must be at least 100")
    pos = np.empty(bundle.substeps)
    y, acc = float(y0), 0.0
    for k in range(int(T) + buffer - 1, -1, -1):
        gained = _inverse_sweep(y, bundle.unit_uncached(k), pos)
        y = pos[0]
        if k < int(T):
            acc += gained
    return acc / int(T)


# ---------------------------------------------------------------------------
# continuous versus discrete time


@dataclass
class HitReport:
    x: float
    y: float
    epochs: List[float]
    horizon_used: float
    verdict: str  # certified | undetermined

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def backward_hits(bundle: CirclePathBundle, y: float, x: float, delta: float = 0.1,
                  budget: float = 1e4, needed: int = 3, min_gap: float = 1.0) -> HitReport:
    """Follow ``t -> phi(-t, omega) y`` and count separated entries into the
    ``delta``-ball around ``x`` (re-armed after leaving the ``2 delta``-ball)."""
    pos = np.empty(bundle.substeps)
    state = np.array([1.0, -np.inf, 0.0])
    epochs: List[float] = []
    v = float(y)
    t = 0.0
    for k in range(1, int(budget) + 1):
        _inverse_sweep(v, bundle.unit_uncached(-k), pos)
        v = pos[0]
        before = state[2]
        _count_epochs(pos, t, bundle.dt, float(x), float(delta), float(min_gap), state)
        if state[2] > before:
            epochs.append(float(state[1]))
        t = float(k)
        if state[2] >= needed:
            return HitReport(float(x), float(y), epochs, t, "certified")
    return HitReport(float(x), float(y), epochs, t, "undetermined")


@dataclass
class ContinuousCloud:
    x: float
    delta: float
    targets: List[float]
    certified: List[bool]

    @property
    def coverage(self) -> float:
        """Fraction of the circle within ``delta`` of a certified target."""
        pts = np.asarray(self.targets)[np.asarray(self.certified, dtype=bool)]
        if pts.size == 0:
            return 0.0
        grid = np.arange(10_000) * (TWO_PI / 10_000)
        return float(np.mean(arc_distance(grid[:, None], pts[None, :]).min(axis=1) <= self.delta))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["coverage"] = self.coverage
        return d


def continuous_omega_cloud(bundle: CirclePathBundle, x: float, delta: float = 0.1,
                           budget: float = 1e3, needed: int = 3) -> ContinuousCloud:
    """Continuous-time Omega-limit of ``{x}`` as an eps-net: target ``y`` is
    kept when the backward trajectory of ``y`` returns to ``x`` at
    ``needed`` separated epochs.  Uniform time sampling of pullback images
    misses these returns, which occupy exponentially little time."""
    k = int(math.ceil(math.pi / delta))
    targets = np.arange(k) * (TWO_PI / k)
    cert = [backward_hits(bundle, float(y), x, delta=delta / 2, budget=budget, needed=needed).verdict
            == "certified" for y in targets]
    return ContinuousCloud(float(x), float(delta), targets.tolist(), cert)


@dataclass
class OmegaContrast:
    seed: int
    stable_point: float
    stable_dispersion: float
    discrete_max_distance: float
    discrete_within: bool
    hits: List[HitReport] = field(default_factory=list)

    @property
    def certified_fraction(self) -> float:
        return float(np.mean([h.verdict == "certified" for h in self.hits])) if self.hits else math.nan

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["hits"] = [h.to_dict() for h in self.hits]
        d["certified_fraction"] = self.certified_fraction
        return d


def discrete_omega_cloud(bundle: CirclePathBundle, xs, horizons: Sequence[int]) -> np.ndarray:
    return pullback_cloud(bundle, xs, horizons).ravel()


def discrete_vs_continuous_omega(bundle: CirclePathBundle, xs=None, pairs=None,
                                 horizons: Sequence[int] = tuple(range(40, 61)),
                                 radius: float = 0.1, delta: float = 0.1, budget: float = 1e4,
                                 stable_horizon: float = 30.0) -> OmegaContrast:
    """(a) discrete-time pullback clouds of fixed points against ``S_est``;
    (b) continuous-time backward hitting of ``x`` by ``phi(-t) y`` per pair."""
    xs = np.arange(8) * (TWO_PI / 8) if xs is None else np.asarray(xs, dtype=float)
    if pairs is None:
        pairs = [(float(x), float((x + 2.0) % TWO_PI)) for x in xs]
    sp = stable_point_estimate(bundle, stable_horizon)
    cloud = discrete_omega_cloud(bundle, xs, horizons)
    far = float(np.max(arc_distance(cloud, sp.estimate)))
    hits = [backward_hits(bundle, y, x, delta=delta, budget=budget) for x, y in pairs]
    return OmegaContrast(bundle.seed, sp.estimate, sp.dispersion, far, far <= radius, hits)


@dataclass
class CircleTq7Report:
    seed: int
    stable_point: float
    deterministic_cloud_max_distance: float
    target_centre: float
    target_halfwidth: float
    adversarial_start: float
    adversarial_horizon: int
    adversarial_image: float
    adversarial_meets_target: bool
    attractor_far_from_target: bool

    @property
    def witnessed(self) -> bool:
        return self.adversarial_meets_target and self.attractor_far_from_target

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["witnessed"] = self.witnessed
        return d


def backward_image(bundle: CirclePathBundle, y: float, n: int) -> float:
    """``phi(-n, omega) y``: the start point whose pullback image at horizon
    ``n`` is ``y``."""
    pos = np.empty(bundle.substeps)
    v = float(y)
    for k in range(1, n + 1):
        _inverse_sweep(v, bundle.unit(-k), pos)
        v = pos[0]
    return v % TWO_PI


def circle_tq7_report(bundle: CirclePathBundle, deterministic_points=None,
                      horizons: Sequence[int] = tuple(range(40, 61)), n0: int = 25,
                      halfwidth: float = 0.1, stable_horizon: float = 30.0) -> CircleTq7Report:
    """Minimal point attractor (≈ the stable point) versus an Omega-limit
    cloud of a start point chosen by backward iteration so that its pullback
    image at horizon ``n0`` lands in an arc ``J`` opposite the stable point."""
    xs = np.arange(8) * (TWO_PI / 8) if deterministic_points is None else np.asarray(deterministic_points, float)
    sp = stable_point_estimate(bundle, stable_horizon)
    cloud = discrete_omega_cloud(bundle, xs, horizons)
    det_far = float(np.max(arc_distance(cloud, sp.estimate)))
    centre = float((sp.estimate + math.pi) % TWO_PI)
    z = backward_image(bundle, centre, n0)
    img = float(circle_pullback(bundle, [z], n0)[0])
    meets = bool(arc_distance(img, centre) <= halfwidth)
    return CircleTq7Report(bundle.seed, sp.estimate, det_far, centre, halfwidth, z, n0, img, meets,
                           bool(det_far < math.pi - halfwidth - det_far))


# ---------------------------------------------------------------------------
# multi-seed experiments


@dataclass
class SynchronizationReport:
    seeds: List[int]
    horizon: int
    points: int
    radius: float
    diameters: List[float]

    @property
    def fraction(self) -> float:
        return float(np.mean(np.asarray(self.diameters) <= self.radius))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["fraction"] = self.fraction
        return d


def synchronization_experiment(seeds: Sequence[int], horizon: int = 30, points: int = 16,
                               radius: float = SYNC_RADIUS) -> SynchronizationReport:
    x0 = np.arange(points) * (TWO_PI / points)
    diam = [synchronization_diameter(circle_pullback(CirclePathBundle(s), x0, horizon)) for s in seeds]
    return SynchronizationReport([int(s) for s in seeds], int(horizon), int(points), float(radius), diam)


@dataclass
class LyapunovReport:
    seeds: List[int]
    T: float
    forward: List[float]
    reversed: List[float]
    target: float = -0.5
    tolerance: float = 0.05

    @property
    def forward_mean(self) -> float:
        return float(np.mean(self.forward))

    @property
    def reversed_mean(self) -> float:
        return float(np.mean(self.reversed)) if self.reversed else math.nan

    @property
    def within(self) -> bool:
        return abs(self.forward_mean - self.target) <= self.tolerance

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(forward_mean=self.forward_mean, reversed_mean=self.reversed_mean, within=self.within)
        return d


def lyapunov_experiment(seeds: Sequence[int], T: float = 2000.0, reversed_paths: int = 0) -> LyapunovReport:
    """Forward exponent per seed; the reversed (unstable-point) exponent on
    the first ``reversed_paths`` seeds."""
    seeds = [int(s) for s in seeds]
    fwd = [lyapunov_estimate(CirclePathBundle(s), T) for s in seeds]
    rev = [lyapunov_reversed(CirclePathBundle(s), T) for s in seeds[:reversed_paths]]
    return LyapunovReport(seeds, float(T), fwd, rev)


@dataclass
class OmegaExperimentReport:
    seeds: List[int]
    budget: float
    radius: float
    contrasts: List[OmegaContrast]

    @property
    def discrete_fraction(self) -> float:
        return float(np.mean([c.discrete_within for c in self.contrasts]))

    @property
    def certified_fraction(self) -> float:
        return float(np.mean([h.verdict == "certified" for c in self.contrasts for h in c.hits]))

    @property
    def undetermined_pairs(self) -> int:
        return sum(h.verdict != "certified" for c in self.contrasts for h in c.hits)

    def to_dict(self) -> dict:
        return {"seeds": self.seeds, "budget": self.budget, "radius": self.radius,
                "discrete_fraction": self.discrete_fraction,
                "certified_fraction": self.certified_fraction,
                "undetermined_pairs": self.undetermined_pairs,
                "contrasts": [c.to_dict() for c in self.contrasts]}


def omega_experiment(seeds: Sequence[int], budget: float = 1e4, radius: float = 0.1) -> OmegaExperimentReport:
    out = [discrete_vs_continuous_omega(CirclePathBundle(s), radius=radius, budget=budget) for s in seeds]
    return OmegaExperimentReport([int(s) for s in seeds], float(budget), float(radius), out)
