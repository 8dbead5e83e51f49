"""Strip system ``E = R x [0, 1]`` driven by a stationary Ornstein-Uhlenbeck
process.

Points above the floor move rigidly with the noise while their height
decreases deterministically; once on the floor they are pulled towards
``Z(t)`` exponentially fast.  With the Euclidean metric the singleton
``{(Z(0), 0)}`` attracts bounded floor sets forward in time; with a
triple-exponential warp of the x-axis it does not, while the sets
``A_gamma`` still do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numba
import numpy as np
from scipy.spatial import cKDTree

from ..parallel import ordered_map
from ..metric import DomainError, log_gamma_increment_log

CHUNK = 4096
_STREAM_INIT, _STREAM_FORWARD, _STREAM_BACKWARD = 0, 1, 2


def _normals(seed: int, stream: int, chunk: int, size: int) -> np.ndarray:
    """Counter-based block of standard normals: depends only on its key."""
    ss = np.random.SeedSequence([int(seed), stream, int(chunk)])
    return np.random.Generator(np.random.Philox(ss)).standard_normal(size)


@numba.njit(cache=True)
def _ar1_fill(start, decay, scale, noise, out):
    z = start
    for i in range(noise.shape[0]):
        z = decay * z + scale * noise[i]
        out[i] = z


class _OUStore:
    """Lazily extended values ``Z(k dt)`` for integer ``k`` of one path.

    Forward values follow the exact AR(1) transition; backward values use
    the same transition in reversed time (a stationary Gaussian AR(1)
    process is reversible).  Innovations are keyed by chunk index, so
    extending the window never changes stored values.
    """

    def __init__(self, dt: float, seed: int):
        if not dt > 0:
            raise DomainError("time step must be positive")
        self.dt = float(dt)
        self.seed = int(seed)
        self.decay = math.exp(-self.dt)
        self.scale = math.sqrt(-math.expm1(-2.0 * self.dt) / 2.0)
        z0 = _normals(seed, _STREAM_INIT, 0, 1)[0] * math.sqrt(0.5)
        self.forward = np.array([z0])       # k = 0, 1, 2, ...
        self.backward = np.array([z0])      # k = 0, -1, -2, ...

    def _extend(self, which: str, upto: int):
        arr = getattr(self, which)
        stream = _STREAM_FORWARD if which == "forward" else _STREAM_BACKWARD
        while len(arr) <= upto:
            chunk = (len(arr) - 1) // CHUNK
            noise = _normals(self.seed, stream, chunk, CHUNK)
            out = np.empty(CHUNK)
            _ar1_fill(arr[-1], self.decay, self.scale, noise, out)
            arr = np.concatenate([arr, out])
        setattr(self, which, arr)

    def values(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        out = np.empty(k.shape)
        pos = k >= 0
        if np.any(pos):
            self._extend("forward", int(k[pos].max()))
            out[pos] = self.forward[k[pos]]
        if np.any(~pos):
            self._extend("backward", int(-k[~pos].min()))
            out[~pos] = self.backward[-k[~pos]]
        return out


class OUPath:
    """One noise realization ``omega``: ``Z(t, omega)`` on the grid ``k dt``.

    ``shifted(s)`` returns ``theta_s omega`` as a view on the same store:
    ``Z(t, theta_s omega) = Z(t + s, omega)``.
    """

    def __init__(self, dt: float, seed: int, offset: int = 0, _store: Optional[_OUStore] = None):
        self._store = _store if _store is not None else _OUStore(dt, seed)
        self.offset = int(offset)

    @property
    def dt(self) -> float:
        return self._store.dt

    @property
    def seed(self) -> int:
        return self._store.seed

    @property
    def label(self) -> str:
        return f"ou(seed={self.seed}, offset={self.offset})"

    def steps(self, t) -> np.ndarray:
        k = np.asarray(t, dtype=float) / self.dt
        r = np.rint(k)
        if np.any(np.abs(k - r) > 1e-6):
            raise DomainError(f"time {t!r} is not on the grid of step {self.dt}")
        return r.astype(np.int64)

    def Z(self, t):
        v = self._store.values(self.steps(t) + self.offset)
        return v if np.ndim(t) else float(v)

    def values(self, k) -> np.ndarray:
        return self._store.values(np.asarray(k, dtype=np.int64) + self.offset)

    def shifted(self, s: float) -> "OUPath":
        return OUPath(self.dt, self.seed, self.offset + int(self.steps(s)), self._store)


def ou_sample(dt: float, window, seed: int) -> OUPath:
    """Path with the grid values on ``window = (t0, t1)`` materialized."""
    path = OUPath(dt, seed)
    t0, t1 = window
    path.values(np.arange(int(path.steps(t0)), int(path.steps(t1)) + 1))
    return path


# ---------------------------------------------------------------------------
# deterministic height dynamics


def g_speed(y):
    """Vertical velocity ``-min(1, 2 (1 - y))``."""
    return -np.minimum(1.0, 2.0 * (1.0 - np.asarray(y, dtype=float)))


def _check_height(y):
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)) or np.any(~np.isfinite(y)):
        raise DomainError("height outside [0, 1]")
    return y


def tau(y):
    """First time the height started at ``y`` reaches 0 (``inf`` at ``y = 1``)."""
    y = _check_height(y)
    with np.errstate(divide="ignore"):
        upper = 0.5 + 0.5 * np.log(0.5 / np.where(y < 1, 1.0 - y, 1.0))
    out = np.where(y <= 0.5, y, np.where(y < 1, upper, np.inf))
    return out if out.ndim else float(out)


def tau_inverse(s):
    """Height whose descent time is ``s`` (``s >= 0``)."""
    s = np.asarray(s, dtype=float)
    out = np.where(s <= 0.5, s, 1.0 - 0.5 * np.exp(-2.0 * (s - 0.5)))
    return out if out.ndim else float(out)


def h_flow(t, y):
    """Height at time ``t >= 0``; exponential approach below 1, then unit speed."""
    y = _check_height(y)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("height flow is defined for t >= 0")
    t_half = np.where((y > 0.5) & (y < 1), 0.5 * np.log(0.5 / np.where(y < 1, 1.0 - y, 1.0)), 0.0)
    high = np.where(t <= t_half, 1.0 - (1.0 - y) * np.exp(2.0 * t), 0.5 - (t - t_half))
    out = np.where(y >= 1, 1.0, np.where(y <= 0.5, y - t, high))
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# the cocycle


def strip_branches(t: float, ou: OUPath, x, y):
    """Both branch formulas (before and after landing), unselected."""
    z0, zt = ou.Z(0.0), ou.Z(t)
    x = np.asarray(x, dtype=float)
    before = x + zt - z0
    after = np.exp(tau(y) - t) * (x - z0) + zt
    return before, after


def strip_rds_eval(t: float, ou: OUPath, states) -> np.ndarray:
    """``phi(t, omega)(x, y)`` for an ``[N, 2]`` array of states."""
    if t < 0:
        raise DomainError("the strip cocycle is one-sided")
    s = np.atleast_2d(np.asarray(states, dtype=float))
    x, y = s[:, 0], _check_height(s[:, 1])
    z0, zt = ou.Z(0.0), ou.Z(t)
    landing = tau(y)
    landed = t >= landing
    with np.errstate(over="ignore", invalid="ignore"):
        after = np.exp(np.where(landed, landing - t, 0.0)) * (x - z0) + zt
    out = np.empty_like(s)
    out[:, 0] = np.where(landed, after, x + zt - z0)
    out[:, 1] = np.where(landed, 0.0, h_flow(t, y))
    return out


class StripRDS:
    """Cocycle protocol for the strip system; ``omega`` is an :class:`OUPath`."""

    cocycle_tolerance = 1e-9

    def evaluate(self, t, omega: OUPath, states):
        return strip_rds_eval(t, omega, states)

    def shift(self, omega: OUPath, s):
        return omega.shifted(s)

    def pullback(self, omega: OUPath, t, states):
        return strip_rds_eval(t, omega.shifted(-t), states)

    def distance(self, p, q):
        return np.linalg.norm(np.atleast_2d(p) - np.atleast_2d(q), axis=1)


# ---------------------------------------------------------------------------
# the strictly invariant sets A_gamma


@dataclass(frozen=True)
class AGammaSet:
    """``[Z - g, Z + g] x {0}`` together with the two walls ``{Z +- g} x [0, 1]``."""

    center: float
    gamma: float

    def distance_to(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = p[:, 0], p[:, 1]
        dx = np.abs(x - self.center)
        floor = np.hypot(np.maximum(dx - self.gamma, 0.0), y)
        below = np.clip(y, 0.0, 1.0)
        wall = np.hypot(np.abs(dx - self.gamma), y - below)
        return np.minimum(floor, wall)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        return self.distance_to(points) <= tol

    def boundary_samples(self, k: int) -> np.ndarray:
        """``k`` points spread over the floor segment and both walls."""
        s = (np.arange(k) + 0.5) / k * 3.0   # arclength parameter in units of (2g, 1, 1)
        out = np.empty((k, 2))
        floor = s < 1.0
        left = (s >= 1.0) & (s < 2.0)
        right = s >= 2.0
        out[floor, 0] = self.center - self.gamma + 2 * self.gamma * s[floor]
        out[floor, 1] = 0.0
        out[left, 0] = self.center - self.gamma
        out[left, 1] = s[left] - 1.0
        out[right, 0] = self.center + self.gamma
        out[right, 1] = s[right] - 2.0
        return out


def a_gamma_set(gamma: float, ou: OUPath, t: float = 0.0) -> AGammaSet:
    """``A_gamma(theta_t omega)``."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    return AGammaSet(ou.Z(t), float(gamma))


def a_gamma_preimage(gamma: float, ou: OUPath, t: float, points) -> np.ndarray:
    """Exact preimages in ``A_gamma(omega)`` of points of ``A_gamma(theta_t omega)``."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    z0, zt = ou.Z(0.0), ou.Z(t)
    x, y = p[:, 0], p[:, 1]
    off = x - zt
    out = np.empty_like(p)
    on_wall = y > 0
    # wall points keep their side and climb back along the height flow
    out[on_wall, 0] = z0 + np.sign(off[on_wall]) * gamma
    out[on_wall, 1] = tau_inverse(t + tau(y[on_wall]))
    floor = ~on_wall
    small = floor & (np.abs(off) <= gamma * math.exp(-t))
    out[small, 0] = z0 + math.exp(t) * off[small]
    out[small, 1] = 0.0
    # floor points further out come from a wall point that landed at time s
    wide = floor & ~small
    s_land = t + np.log(np.abs(off[wide]) / gamma)
    out[wide, 0] = z0 + np.sign(off[wide]) * gamma
    out[wide, 1] = tau_inverse(np.clip(s_land, 0.0, None))
    return out


def a_gamma_invariance_discrepancy(gamma: float, ou: OUPath, t: float, samples: int = 1000) -> float:
    """Two-sided discrepancy between ``phi(t) A_gamma(omega)`` and
    ``A_gamma(theta_t omega)`` on boundary samples.

    Forward: images of samples measured against the exact target set.
    Reverse: each target sample is reproduced by the image of its exact
    preimage, which must itself lie in the source set.

    Wall preimages sit at height ``1 - (1 - y) e^{-2t}``; beyond ``t ~ 18``
    that rounds to 1 (a fixed height) and the reverse check saturates.
    """
    src = a_gamma_set(gamma, ou)
    dst = a_gamma_set(gamma, ou, t)
    a = src.boundary_samples(samples)
    forward = float(np.max(dst.distance_to(strip_rds_eval(t, ou, a))))
    b = dst.boundary_samples(samples)
    pre = a_gamma_preimage(gamma, ou, t, b)
    reverse = max(float(np.max(src.distance_to(pre))),
                  float(np.max(np.linalg.norm(strip_rds_eval(t, ou, pre) - b, axis=1))))
    return max(forward, reverse)


def naive_sampled_discrepancy(gamma: float, ou: OUPath, t: float, samples: int) -> float:
    """Symmetric Hausdorff distance between the image of ``samples`` source
    points and ``samples`` target points (shrinks with the density)."""
    img = strip_rds_eval(t, ou, a_gamma_set(gamma, ou).boundary_samples(samples))
    tgt = a_gamma_set(gamma, ou, t).boundary_samples(samples)
    return float(max(cKDTree(tgt).query(img)[0].max(), cKDTree(img).query(tgt)[0].max()))


# ---------------------------------------------------------------------------
# forward attraction experiment

FLOOR_SET = (-2.0, 2.0)


def euclidean_forward_distance(t, ou: OUPath, samples: int = 101) -> np.ndarray:
    """``sup_x |phi(t)(x, 0) - (Z(t), 0)|`` over sampled ``x`` in ``[-2, 2]``, by evaluator."""
    xs = np.linspace(*FLOOR_SET, samples)
    states = np.column_stack([xs, np.zeros_like(xs)])
    out = []
    for s in np.atleast_1d(t):
        img = strip_rds_eval(float(s), ou, states)
        out.append(np.max(np.hypot(img[:, 0] - ou.Z(float(s)), img[:, 1])))
    return np.asarray(out)


def euclidean_forward_closed_form(t, ou: OUPath) -> np.ndarray:
    z0 = ou.Z(0.0)
    return np.exp(-np.asarray(t, dtype=float)) * max(abs(FLOOR_SET[0] - z0), abs(FLOOR_SET[1] - z0))


@numba.njit(cache=True)
def _warped_log_series(z, z0, decay_log, lo, hi):
    # max over the floor endpoints of log|G(Z_t + e^{-t}(x - Z_0)) - G(Z_t)|
    n = z.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = -math.inf
        for x in (lo, hi):
            c = x - z0
            if c == 0.0:
                continue
            l1, l2 = log_gamma_increment_log(z[i], decay_log[i] + math.log(abs(c)), c > 0.0)
            v = l1 if l1 < math.inf else math.exp(min(l2, 700.0))
            if v > best:
                best = v
        out[i] = best
    return out


def warped_forward_log_distance(ou: OUPath, t0: float, t1: float) -> tuple:
    """Grid times in ``[t0, t1]`` and ``log`` of the warped forward distance
    ``sup_x |G(first coord of phi(t)(x, 0)) - G(Z(t))|``."""
    k = np.arange(int(ou.steps(t0)), int(ou.steps(t1)) + 1)
    times = k * ou.dt
    z = ou.values(k)
    return times, _warped_log_series(z, ou.Z(0.0), -times, *FLOOR_SET)


@dataclass
class OUForwardReport:
    warp: str
    T: float
    paths: int
    seed: int
    dt: float
    euclid_max_residual: float
    euclid_ratio_at_20: float
    exceed_fraction: Optional[float]
    per_path_max_log: List[float] = field(default_factory=list)
    gamma_knot: float = 1.0
    gamma_inside: str = "linear on [-1, 1] with slope exp(exp(e))"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _one_path(seed: int, path_index: int, warp: str, T: float, dt: float):
    ou = OUPath(dt, int(np.random.SeedSequence([seed, path_index]).generate_state(1)[0]))
    ts = np.array([0.0, 1.0, 5.0, 10.0, 20.0])
    by_eval = euclidean_forward_distance(ts, ou)
    closed = euclidean_forward_closed_form(ts, ou)
    resid = float(np.max(np.abs(by_eval - closed)))
    ratio = float(by_eval[-1] / (closed[0]))
    if warp == "identity":
        return resid, ratio, None
    _, logd = warped_forward_log_distance(ou, T, 2 * T)
    return resid, ratio, float(np.max(logd))


def ou_forward_experiment(warp: str = "triple-exp", T: float = 100.0, paths: int = 200, seed: int = 1,
                          dt: float = 0.01, workers: int = 1) -> OUForwardReport:
    """Per path: closed-form check of the Euclidean forward distance and the
    largest warped forward distance over ``[T, 2T]``; reports the fraction of
    paths where the warped distance exceeds 1 somewhere."""
    if warp not in ("identity", "triple-exp"):
        raise DomainError(f"unknown warp {warp!r}")
    if T < 10:
        raise DomainError("T must be at least 10")
    rows = ordered_map(lambda i: _one_path(seed, i, warp, T, dt), range(paths), workers)
    resid = max(r[0] for r in rows)
    ratio = max(r[1] for r in rows)
    if warp == "identity":
        frac, logs = None, []
    else:
        logs = [r[2] for r in rows]
        frac = float(np.mean([v > 0.0 for v in logs]))
    return OUForwardReport(warp, float(T), int(paths), int(seed), float(dt), resid, ratio, frac, logs)
