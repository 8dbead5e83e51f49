"""Metric spaces, point-to-set distances and the Hausdorff semi-metric.

Empty sets follow the usual attractor conventions: ``d(x, {}) = inf``,
``d({}, A) = 0`` and ``d(B, {}) = inf`` for non-empty ``B``.  These are
encoded in :class:`ExtDist` values rather than raised as errors.

The module also hosts the triple-exponential warp used for the strip
example, whose distances routinely exceed the floating-point range and are
therefore carried as :class:`WarpedMagnitude` values.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numba
import numpy as np

TWO_PI = 2.0 * math.pi
ABS_TOL = 1e-12


class DomainError(ValueError):
    """A point or parameter lies outside the domain of an operation."""


class UnsupportedSpaceError(ValueError):
    """The requested construction is not available on this carrier."""


class ExtDist(float):
    """Non-negative extended real distance in ``[0, inf]``.

    Addition saturates at ``inf`` (inherited from IEEE arithmetic).
    """

    def __new__(cls, value=0.0):
        v = float(value)
        if math.isnan(v) or v < 0.0:
            raise DomainError(f"distance must lie in [0, inf], got {value!r}")
        return super().__new__(cls, v)

    def __add__(self, other):
        return ExtDist(float(self) + float(other))

    __radd__ = __add__

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self)

    def __repr__(self):
        return f"ExtDist({float(self)!r})"


INF = ExtDist(math.inf)
ZERO = ExtDist(0.0)


# ---------------------------------------------------------------------------
# spaces


class Space:
    """Base class for carriers.  Subclasses implement ``distance`` vectorised
    over the second argument and ``dense_sequence``."""

    name = "space"
    totally_bounded = False

    def check(self, x) -> None:
        pass

    def distance(self, x, y):
        raise NotImplementedError

    def pairwise(self, xs, ys) -> np.ndarray:
        xs = self.as_points(xs)
        ys = self.as_points(ys)
        return np.stack([np.asarray(self.distance(x, ys), dtype=float) for x in xs]) \
            if len(xs) else np.zeros((0, len(ys)))

    def as_points(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float)

    def dense_sequence(self) -> Iterator:
        raise NotImplementedError


class FiniteSpace(Space):
    """A finite carrier ``{0, ..., n-1}`` with an explicit metric matrix.

    ``values`` optionally attaches coordinates (e.g. grid positions) for
    reporting; the metric is always read from the matrix.
    """

    name = "finite"
    totally_bounded = True

    def __init__(self, matrix, values=None, validate=True):
        d = np.array(matrix, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DomainError("metric matrix must be square")
        self.matrix = d
        self.matrix.setflags(write=False)
        self.n = d.shape[0]
        self.values = None if values is None else np.asarray(values, dtype=float)
        if validate:
            self._validate()

    def _validate(self):
        d = self.matrix
        if np.any(d < 0) or np.any(np.diag(d) != 0):
            raise DomainError("metric must be non-negative with zero diagonal")
        if not np.allclose(d, d.T, atol=ABS_TOL, rtol=0):
            raise DomainError("metric must be symmetric")
        off = d + np.eye(self.n)
        if np.any(off <= 0):
            raise DomainError("distinct points must have positive distance")
        if self.n <= 60:
            viol = d[:, None, :] - (d[:, :, None] + d[None, :, :])
            if np.any(viol > ABS_TOL):
                raise DomainError("metric violates the triangle inequality")

    @classmethod
    def discrete(cls, n: int) -> "FiniteSpace":
        return cls(1.0 - np.eye(n))

    @classmethod
    def from_line(cls, values) -> "FiniteSpace":
        v = np.asarray(values, dtype=float)
        return cls(np.abs(v[:, None] - v[None, :]), values=v, validate=len(v) <= 60)

    def check(self, x) -> None:
        if not (isinstance(x, (int, np.integer)) and 0 <= x < self.n):
            raise DomainError(f"{x!r} is not a point of a {self.n}-point carrier")

    def distance(self, x, y):
        self.check(x)
        return self.matrix[x, np.asarray(y, dtype=int)]

    def as_points(self, pts) -> np.ndarray:
        return np.asarray(sorted(pts) if isinstance(pts, (set, frozenset)) else pts, dtype=int)

    def pairwise(self, xs, ys) -> np.ndarray:
        return self.matrix[np.ix_(self.as_points(xs), self.as_points(ys))]

    @functools.cached_property
    def min_separation(self) -> float:
        if self.n < 2:
            return math.inf
        return float(np.min(self.matrix + np.diag(np.full(self.n, np.inf))))

    def dense_sequence(self) -> Iterator[int]:
        return iter(range(self.n))

    def __repr__(self):
        return f"FiniteSpace(n={self.n})"


class RealLine(Space):
    name = "line"

    def check(self, x) -> None:
        if not np.all(np.isfinite(x)):
            raise DomainError(f"{x!r} is not a point of the real line")

    def distance(self, x, y):
        self.check(x)
        return np.abs(np.asarray(y, dtype=float) - x)


class Circle(Space):
    """The unit circle parameterised by ``[0, 2*pi)`` with arc-length metric."""

    name = "circle"
    totally_bounded = True

    def check(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x >= TWO_PI):
            raise DomainError(f"{x!r} is not in [0, 2*pi)")

    def distance(self, x, y):
        self.check(x)
        delta = np.abs(np.asarray(y, dtype=float) - x)
        return np.minimum(delta, TWO_PI - delta)

    def dense_sequence(self) -> Iterator[float]:
        # van der Corput points 0, 1/2, 1/4, 3/4, ... scaled to the circle
        k = 0
        while True:
            yield TWO_PI * _radical_inverse(k, 2)
            k += 1


def wrap_angle(x):
    """Reduce angles to ``[0, 2*pi)``."""
    y = np.mod(x, TWO_PI)
    return np.where(y >= TWO_PI, 0.0, y) if isinstance(y, np.ndarray) else (0.0 if y >= TWO_PI else y)


class Strip(Space):
    """``R x [0, 1]`` with the Euclidean metric."""

    name = "strip"

    def check(self, p) -> None:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != 2 or np.any(~np.isfinite(p)):
            raise DomainError(f"{p!r} is not a point of the strip")
        y = p[..., 1]
        if np.any(y < 0) or np.any(y > 1):
            raise DomainError(f"y-coordinate of {p!r} outside [0, 1]")

    def as_points(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float).reshape(-1, 2)

    def distance(self, x, y):
        self.check(x)
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        return np.hypot(y[:, 0] - x[0], y[:, 1] - x[1])


class Rectangle(Strip):
    """A compact rectangle ``[x0, x1] x [y0, y1]`` with the Euclidean metric."""

    name = "rectangle"
    totally_bounded = True

    def __init__(self, x0=0.0, x1=1.0, y0=0.0, y1=1.0):
        if not (x1 > x0 and y1 > y0):
            raise DomainError("empty rectangle")
        self.bounds = (float(x0), float(x1), float(y0), float(y1))

    def check(self, p) -> None:
        p = np.asarray(p, dtype=float)
        x0, x1, y0, y1 = self.bounds
        if p.shape[-1] != 2 or np.any(~np.isfinite(p)):
            raise DomainError(f"{p!r} is not a point of the rectangle")
        if (np.any(p[..., 0] < x0 - ABS_TOL) or np.any(p[..., 0] > x1 + ABS_TOL)
                or np.any(p[..., 1] < y0 - ABS_TOL) or np.any(p[..., 1] > y1 + ABS_TOL)):
            raise DomainError(f"{p!r} lies outside the rectangle")

    def dense_sequence(self) -> Iterator[np.ndarray]:
        # Halton sequence in bases 2 and 3
        x0, x1, y0, y1 = self.bounds
        k = 0
        while True:
            yield np.array([x0 + (x1 - x0) * _radical_inverse(k, 2),
                            y0 + (y1 - y0) * _radical_inverse(k, 3)])
            k += 1


def _radical_inverse(i: int, base: int) -> float:
    v, denom = 0.0, 1.0
    while i:
        denom *= base
        i, digit = divmod(i, base)
        v += digit / denom
    return v


# ---------------------------------------------------------------------------
# point-to-set and set-to-set distances


def _is_parametric(A) -> bool:
    return hasattr(A, "distance_to")


def _distances_to_set(points: np.ndarray, A, sp: Space) -> np.ndarray:
    """Vector of ``d(p, A)`` for every ``p`` in ``points``."""
    if _is_parametric(A):
        return np.asarray(A.distance_to(points), dtype=float)
    pts_a = sp.as_points(A)
    if len(pts_a) == 0:
        return np.full(len(points), np.inf)
    if isinstance(sp, FiniteSpace):
        return sp.matrix[np.ix_(points, pts_a)].min(axis=1)
    if isinstance(sp, (RealLine, Circle)) and len(points) * len(pts_a) > 10_000:
        return _nearest_1d(points, pts_a, periodic=isinstance(sp, Circle))
    if isinstance(sp, Strip) and len(points) * len(pts_a) > 10_000:
        from scipy.spatial import cKDTree
        return cKDTree(pts_a).query(points)[0]
    return sp.pairwise(points, pts_a).min(axis=1)


def _nearest_1d(points, targets, periodic):
    t = np.sort(np.asarray(targets, dtype=float))
    p = np.asarray(points, dtype=float)
    idx = np.searchsorted(t, p)
    lo = t[np.clip(idx - 1, 0, len(t) - 1)]
    hi = t[np.clip(idx, 0, len(t) - 1)]
    d = np.minimum(np.abs(p - lo), np.abs(p - hi))
    if periodic:
        # wrap-around candidates: first and last targets
        for c in (t[0], t[-1]):
            delta = np.abs(p - c)
            d = np.minimum(d, np.minimum(delta, TWO_PI - delta))
    return d


def dist_point_to_set(x, A, sp: Space) -> ExtDist:
    """``inf_{a in A} d(x, a)``; ``inf`` when ``A`` is empty."""
    sp.check(x)
    pts = sp.as_points([x])
    return ExtDist(float(_distances_to_set(pts, A, sp)[0]))


def hausdorff_semi(B, A, sp: Space) -> ExtDist:
    """Hausdorff semi-distance ``sup_{b in B} d(b, A)``.

    ``B`` must be an explicit finite set; ``A`` may be explicit or expose
    ``distance_to(points)``.
    """
    pts = sp.as_points(B)
    if len(pts) == 0:
        return ZERO
    for p in pts:
        sp.check(p.item() if pts.ndim == 1 and isinstance(sp, FiniteSpace) else p)
    return ExtDist(float(np.max(_distances_to_set(pts, A, sp))))


def hausdorff(A, B, sp: Space) -> ExtDist:
    """Symmetric Hausdorff distance."""
    return ExtDist(max(hausdorff_semi(A, B, sp), hausdorff_semi(B, A, sp)))


@dataclass(frozen=True)
class ClosedNeighborhood:
    """Predicate form of ``{y : d(y, A) <= delta}`` on a continuum carrier."""

    center: object
    delta: float
    space: Space

    def contains(self, points) -> np.ndarray:
        pts = self.space.as_points(points)
        return _distances_to_set(pts, self.center, self.space) <= self.delta + ABS_TOL

    def __contains__(self, y) -> bool:
        return bool(self.contains([y])[0])

    def distance_to(self, points) -> np.ndarray:
        pts = self.space.as_points(points)
        return np.maximum(_distances_to_set(pts, self.center, self.space) - self.delta, 0.0)


def eps_closed_neighborhood(A, delta: float, sp: Space):
    """Closed ``delta``-neighbourhood of ``A``.

    Returns a frozenset of indices on finite carriers and a
    :class:`ClosedNeighborhood` predicate otherwise.
    """
    if not delta >= 0:
        raise DomainError(f"neighbourhood radius must be >= 0, got {delta!r}")
    if isinstance(sp, FiniteSpace):
        pts = sp.as_points(A)
        if len(pts) == 0:
            return frozenset()
        near = sp.matrix[:, pts].min(axis=1) <= delta + ABS_TOL
        return frozenset(int(i) for i in np.flatnonzero(near))
    return ClosedNeighborhood(A, float(delta), sp)


# ---------------------------------------------------------------------------
# warped metric on the strip

_E = math.e
GAMMA_KNOT = 1.0
GAMMA_AT_KNOT = math.exp(math.exp(math.e))  # triple exponential at x = 1
LOG_GAMMA_AT_KNOT = math.exp(math.e)
LOG_FLOAT_MAX = math.log(np.finfo(float).max)
WARP_DOMAIN = 700.0


@functools.total_ordering
@dataclass(frozen=True)
class WarpedMagnitude:
    """Totally ordered distance that may exceed the float range.

    ``tag == "finite"``: ``value`` is the distance itself.
    ``tag == "tower"``: ``value`` is ``log(log(distance))``.
    Every finite value compares below every tower value.
    """

    tag: str
    value: float

    def __post_init__(self):
        if self.tag not in ("finite", "tower"):
            raise ValueError(f"unknown tag {self.tag!r}")

    @classmethod
    def finite(cls, f: float) -> "WarpedMagnitude":
        return cls("finite", float(f))

    @classmethod
    def tower(cls, l2: float) -> "WarpedMagnitude":
        return cls("tower", float(l2))

    def _key(self):
        return (0 if self.tag == "finite" else 1, self.value)

    def __lt__(self, other):
        if not isinstance(other, WarpedMagnitude):
            return NotImplemented
        return self._key() < other._key()

    def exceeds(self, level: float) -> bool:
        return self.tag == "tower" or self.value > level

    def loglog(self) -> float:
        """``log(log(distance))`` (``nan`` when the distance is <= 1)."""
        if self.tag == "tower":
            return self.value
        return math.log(math.log(self.value)) if self.value > 1.0 else math.nan


def gamma_warp(x: float) -> float:
    """Odd, increasing warp: ``exp(exp(exp(|x|)))`` beyond 1, linear inside.

    Overflows to ``inf`` for ``|x| > ~1.88``; use :func:`warped_plane_distance`
    for comparisons in that range.
    """
    ax = abs(x)
    if ax <= GAMMA_KNOT:
        v = GAMMA_AT_KNOT * ax
    else:
        e = math.exp(ax) if ax < LOG_FLOAT_MAX else math.inf
        ee = math.exp(e) if e < LOG_FLOAT_MAX else math.inf
        v = math.exp(ee) if ee < LOG_FLOAT_MAX else math.inf
    return math.copysign(v, x)


@numba.njit(cache=True)
def _log_gamma_abs(p):
    # (log Gamma(p), log log Gamma(p)) for p >= 0; first entry may be inf
    if p <= 1.0:
        l1 = math.log(GAMMA_AT_KNOT * p) if p > 0.0 else -math.inf
        l2 = math.log(l1) if l1 > 0.0 else math.nan
        return l1, l2
    e = math.exp(p)
    l1 = math.exp(e) if e < LOG_FLOAT_MAX else math.inf
    return l1, e


@numba.njit(cache=True)
def _log1mexp(logd):
    # log(1 - exp(-D)) given log D
    if logd < -30.0:
        return logd
    d = math.exp(logd) if logd < LOG_FLOAT_MAX else math.inf
    if d < 0.6931471805599453:
        return math.log(-math.expm1(-d))
    return math.log1p(-math.exp(-d))


@numba.njit(cache=True)
def _finish_above_knot(eq, logd):
    # eq = log log Gamma(q), logd = log(log Gamma(q) - log Gamma(p))
    c = _log1mexp(logd)
    if eq < LOG_FLOAT_MAX:
        l1 = math.exp(eq) + c
        return l1, (math.log(l1) if l1 > 0.0 else math.nan)
    return math.inf, eq + math.log1p(c * math.exp(-eq))


@numba.njit(cache=True)
def _log_gap_core(p, d):
    # log(Gamma(p + d) - Gamma(p)) for p >= 0, d > 0 with the increment d
    # carried exactly, as (L1, L2)
    if p >= 1.0:
        ep = math.exp(p)
        de = ep * math.expm1(d)                   # exp(p + d) - exp(p)
        eq = ep + de                              # log log Gamma(p + d)
        return _finish_above_knot(eq, eq + math.log(-math.expm1(-de)))
    inside = 1.0 - p
    if d <= inside:
        l1 = math.log(GAMMA_AT_KNOT * d)
        return l1, (math.log(l1) if l1 > 0.0 else math.nan)
    # split at the knot; both pieces are positive
    left = math.log(GAMMA_AT_KNOT * inside)
    r1, r2 = _log_gap_core(1.0, d - inside)
    if r1 == math.inf:
        return r1, r2
    hi, lo = (left, r1) if left >= r1 else (r1, left)
    l1 = hi + math.log1p(math.exp(lo - hi))
    return l1, (math.log(l1) if l1 > 0.0 else math.nan)


@numba.njit(cache=True)
def _log_gap_down(b, a):
    # log(Gamma(b) - Gamma(b - a)) for 0 < a <= b, splitting at the knot
    # with lengths a - (b - 1) and b - 1 so b - a is never formed there
    if b <= 1.0:
        l1 = math.log(GAMMA_AT_KNOT * a)
        return l1, (math.log(l1) if l1 > 0.0 else math.nan)
    above = b - 1.0
    if a <= above:
        return _log_gap_core(b - a, a)
    left = math.log(GAMMA_AT_KNOT * (a - above))
    r1, r2 = _log_gap_core(1.0, above)
    if r1 == math.inf:
        return r1, r2
    hi, lo = (left, r1) if left >= r1 else (r1, left)
    l1 = hi + math.log1p(math.exp(lo - hi))
    return l1, (math.log(l1) if l1 > 0.0 else math.nan)


@numba.njit(cache=True)
def _log_gap_same(p, q):
    # log(Gamma(q) - Gamma(p)) for 0 <= p < q, as (L1, L2)
    return _log_gap_core(p, q - p)


@numba.njit(cache=True)
def _log_gap_sum(p, q):
    # log(Gamma(p) + Gamma(q)) for p, q > 0
    hi, lo = (p, q) if p >= q else (q, p)
    lh1, eh = _log_gamma_abs(hi)
    ll1, el = _log_gamma_abs(lo)
    if lh1 < math.inf:
        l1 = lh1 + math.log1p(math.exp(ll1 - lh1))
        return l1, (math.log(l1) if l1 > 0.0 else math.nan)
    return math.inf, eh


@numba.njit(cache=True)
def log_gamma_gap(a, b):
    """``(log|G(b)-G(a)|, log log|G(b)-G(a)|)``; the first may overflow to inf."""
    if a == b:
        return -math.inf, math.nan
    if a > b:
        a, b = b, a
    if a >= 0.0:
        return _log_gap_same(a, b)
    if b <= 0.0:
        return _log_gap_same(-b, -a)
    return _log_gap_sum(-a, b)


@numba.njit(cache=True)
def log_gamma_increment(b, delta):
    """``log|G(b + delta) - G(b)|`` (and its log) with ``delta`` taken
    exactly, even when ``b + delta`` rounds to ``b``."""
    if delta == 0.0:
        return -math.inf, math.nan
    if b < 0.0:
        b, delta = -b, -delta
    if delta > 0.0:
        return _log_gap_core(b, delta)
    if -delta <= b:
        return _log_gap_down(b, -delta)
    return _log_gap_sum(-(b + delta), b)


TINY_LOG_DELTA = -600.0


@numba.njit(cache=True)
def log_gamma_increment_log(b, log_abs_delta, positive):
    """:func:`log_gamma_increment` with the increment given as
    ``(log|delta|, sign)``, for increments below the float range."""
    if log_abs_delta > TINY_LOG_DELTA:
        d = math.exp(log_abs_delta)
        return log_gamma_increment(b, d if positive else -d)
    if b < 0.0:
        b, positive = -b, not positive
    # |delta| < e^-600: b + delta stays on b's side of the knot unless b
    # itself is that small, where the warp is linear
    if b < 1.0:
        l1 = math.log(GAMMA_AT_KNOT) + log_abs_delta
        return l1, (math.log(l1) if l1 > 0.0 else math.nan)
    log_de = b + log_abs_delta                    # log(exp(b + delta) - exp(b))
    de = math.exp(log_de)
    eq = math.exp(b) + (de if positive else 0.0)
    return _finish_above_knot(eq, eq + log_de - 0.5 * de)


@numba.njit(cache=True)
def log_gamma_gap_array(a, b):
    """Elementwise :func:`log_gamma_gap` over broadcast-compatible 1-d arrays."""
    n = max(a.shape[0], b.shape[0])
    l1 = np.empty(n)
    l2 = np.empty(n)
    for i in range(n):
        ai = a[i] if a.shape[0] > 1 else a[0]
        bi = b[i] if b.shape[0] > 1 else b[0]
        l1[i], l2[i] = log_gamma_gap(ai, bi)
    return l1, l2


def _check_strip_point(p):
    if len(p) != 2:
        raise DomainError(f"{p!r} is not a point of the strip")
    x, y = float(p[0]), float(p[1])
    if not (0.0 <= y <= 1.0):
        raise DomainError(f"y-coordinate {y!r} outside [0, 1]")
    if not math.isfinite(x):
        raise DomainError(f"x-coordinate {x!r} is not finite")
    return x, y


def warped_plane_distance(p, q, warp: str = "triple-exp") -> WarpedMagnitude:
    """Distance ``|y' - y| + |G(x') - G(x)|`` on the strip.

    ``warp="identity"`` gives the plain l1-form with ``G(x) = x``.
    """
    x, y = _check_strip_point(p)
    xq, yq = _check_strip_point(q)
    dy = abs(yq - y)
    if warp == "identity":
        return WarpedMagnitude.finite(abs(xq - x) + dy)
    if warp != "triple-exp":
        raise DomainError(f"unknown warp {warp!r}")
    if max(abs(x), abs(xq)) > WARP_DOMAIN:
        raise DomainError(f"|x| beyond {WARP_DOMAIN} is outside the warped range")
    l1, l2 = log_gamma_gap(x, xq)
    if l1 <= LOG_FLOAT_MAX:
        return WarpedMagnitude.finite(math.exp(l1) + dy)
    return WarpedMagnitude.tower(l2)


def circle_points(n: int) -> np.ndarray:
    """``n`` equispaced points on the circle starting at 0."""
    return np.arange(n) * (TWO_PI / n)


def as_index_set(xs: Iterable[int]) -> frozenset:
    return frozenset(int(x) for x in xs)
