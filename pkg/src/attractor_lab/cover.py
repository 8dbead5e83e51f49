"""Locally finite closed covers ``R(x, r)`` refining the open balls ``B(x, r)``.

Only totally bounded carriers are supported, so every cover built here is
finite.  Centers are picked greedily along the carrier's dense sequence
until the open half-radius balls cover the space; each member is then a
Voronoi cell with slack ``eta = r/8``, clipped to the closed half ball::

    R(x_k, r) = {y : d(y, x_k) <= r/2  and  d(y, x_k) <= d(y, x_j) + eta  for all j}

Every point is strictly inside the cell of its nearest center, which gives
the interior property needed by the hull constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import sparse

from .metric import ABS_TOL, Circle, DomainError, FiniteSpace, Rectangle, Space, \
    TWO_PI, UnsupportedSpaceError

SLACK_FRACTION = 1.0 / 8.0
_MAX_CENTERS = 200_000


@dataclass(frozen=True, eq=False)
class CoverFamily:
    radius: float
    centers: np.ndarray
    space: Space = field(repr=False)

    @property
    def eta(self) -> float:
        return SLACK_FRACTION * self.radius

    def __len__(self):
        return len(self.centers)

    def _center_distances(self, points) -> np.ndarray:
        # rows: points, columns: centers
        return self.space.pairwise(points, self.centers)

    def contains(self, k: int, points) -> np.ndarray:
        d = self._center_distances(points)
        own = d[:, k]
        return (own <= self.radius / 2 + ABS_TOL) & np.all(own[:, None] <= d + self.eta + ABS_TOL, axis=1)

    def membership(self, points) -> np.ndarray:
        """Boolean matrix ``[point, member]``."""
        d = self._center_distances(points)
        within = d <= self.radius / 2 + ABS_TOL
        nearest = d.min(axis=1, keepdims=True)
        # d(y, x_k) <= d(y, x_j) + eta for all j  <=>  d(y, x_k) <= min_j d(y, x_j) + eta
        return within & (d <= nearest + self.eta + ABS_TOL)

    def interior_margin(self, points) -> np.ndarray:
        """Largest slack with which a point satisfies some member's
        inequalities; positive values mean the point is interior."""
        d = self._center_distances(points)
        nearest = d.min(axis=1, keepdims=True)
        slack = np.minimum(self.radius / 2 - d, nearest + self.eta - d)
        return slack.max(axis=1)

    # -- finite carriers -------------------------------------------------

    @property
    def member_matrix(self) -> np.ndarray:
        """Boolean ``[member, point]`` matrix on a finite carrier."""
        if not isinstance(self.space, FiniteSpace):
            raise UnsupportedSpaceError("explicit members exist only on finite carriers")
        cached = self.__dict__.get("_member_matrix")
        if cached is None:
            cached = self.membership(np.arange(self.space.n)).T.copy()
            cached.setflags(write=False)
            object.__setattr__(self, "_member_matrix", cached)
        return cached

    @property
    def member_sparse(self):
        """``member_matrix`` as a CSR float matrix for boolean products."""
        cached = self.__dict__.get("_member_sparse")
        if cached is None:
            cached = sparse.csr_matrix(self.member_matrix.astype(np.float64))
            object.__setattr__(self, "_member_sparse", cached)
        return cached

    @property
    def members(self) -> List[frozenset]:
        return [frozenset(int(i) for i in np.flatnonzero(row)) for row in self.member_matrix]


def _covered_finite(sp: FiniteSpace, centers, r):
    if not centers:
        return np.zeros(sp.n, dtype=bool)
    return sp.matrix[:, centers].min(axis=1) < r / 2


def _circle_covered(centers, r) -> bool:
    if not centers:
        return False
    c = np.sort(np.asarray(centers))
    gaps = np.diff(np.concatenate([c, [c[0] + TWO_PI]]))
    return bool(np.all(gaps < r))


def _rectangle_covered(sp: Rectangle, centers, r) -> bool:
    if not centers:
        return False
    x0, x1, y0, y1 = sp.bounds
    s = r / 8
    nx = max(2, int(math.ceil((x1 - x0) / s)) + 1)
    ny = max(2, int(math.ceil((y1 - y0) / s)) + 1)
    gx, gy = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cell = math.hypot((x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1)) / 2
    c = np.asarray(centers)
    from scipy.spatial import cKDTree
    dist = cKDTree(c).query(grid)[0]
    return bool(np.all(dist < r / 2 - cell))


def build_cover(sp: Space, r: float) -> CoverFamily:
    """Finite closed cover at radius ``r`` of a totally bounded carrier."""
    if not r > 0:
        raise DomainError(f"cover radius must be positive, got {r!r}")
    if not sp.totally_bounded:
        raise UnsupportedSpaceError(f"{sp.name} carrier is not totally bounded")

    centers: list = []
    if isinstance(sp, FiniteSpace):
        for x in sp.dense_sequence():
            if not centers or sp.matrix[x, centers].min() >= r / 2:
                centers.append(x)
        return CoverFamily(float(r), np.asarray(centers, dtype=int), sp)

    if isinstance(sp, Circle):
        covered = lambda: _circle_covered(centers, r)  # noqa: E731
    elif isinstance(sp, Rectangle):
        covered = lambda: _rectangle_covered(sp, centers, r)  # noqa: E731
    else:
        raise UnsupportedSpaceError(f"no cover construction for {sp.name}")

    check_every = 1
    for x in sp.dense_sequence():
        # selecting at r/4 (not r/2) keeps the greedy pass from stalling on
        # points sitting exactly on the boundary of the covered region
        if centers and np.min(sp.distance(x, np.asarray(centers))) < r / 4:
            continue
        centers.append(x)
        if len(centers) >= check_every:
            if covered():
                break
            check_every = len(centers) + max(1, len(centers) // 4)
        if len(centers) > _MAX_CENTERS:
            raise UnsupportedSpaceError("cover construction did not terminate")
    if not covered():  # pragma: no cover - the dense sequence is infinite
        raise UnsupportedSpaceError("cover construction did not terminate")
    return CoverFamily(float(r), np.asarray(centers, dtype=float), sp)


def cover_scales(sp: Space, n_max: int) -> List[CoverFamily]:
    """Covers at radii ``1, 1/2, ..., 1/n_max``."""
    if int(n_max) != n_max or n_max < 1:
        raise DomainError(f"n_max must be a positive integer, got {n_max!r}")
    return [build_cover(sp, 1.0 / n) for n in range(1, int(n_max) + 1)]


def discrete_threshold(sp: FiniteSpace) -> int:
    """Smallest ``n`` whose cover at radius ``1/n`` consists of singletons."""
    dmin = sp.min_separation
    if math.isinf(dmin):
        return 1
    return int(math.floor(1.0 / (2.0 * dmin))) + 1


def finite_scales(sp: FiniteSpace) -> List[CoverFamily]:
    """All scales up to the discrete threshold, cached on the carrier."""
    cached = getattr(sp, "_cover_scales", None)
    if cached is None:
        cached = cover_scales(sp, discrete_threshold(sp))
        sp._cover_scales = cached
    return cached
