"""Probability metric spaces: samplers, metrics, diameters and ball measures.

Points are numpy arrays.  A single point is 1-d, a batch is 2-d with one
point per row.  Hamming points are ``uint8`` arrays of 0/1 symbols.

Metric normalisations (all chosen so that comparable ``eps`` values make
sense across kinds):

* ``hypercube-l2``: Euclidean distance divided by ``sqrt(n)``; diameter 1.
* ``hypercube-l1``: l1 distance divided by ``n``; diameter 1.
* ``torus``: per-coordinate circle geodesic (in turns, at most 1/2),
  combined in l2 and divided by ``sqrt(n)/2``; diameter 1.
* ``hamming``: fraction of differing symbols; diameter 1.
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
import math
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import betainc

from simconc import _rng

MC_SAMPLES = 100_000


class Kind(str, Enum):
    SPHERE_GEODESIC = "sphere-geodesic"
    SPHERE_EUCLIDEAN = "sphere-euclidean"
    HAMMING = "hamming"
    HYPERCUBE_L2 = "hypercube-l2"
    HYPERCUBE_L1 = "hypercube-l1"
    TORUS = "torus"
    BALL = "ball"


_SPHERES = (Kind.SPHERE_GEODESIC, Kind.SPHERE_EUCLIDEAN)
_TRANSITIVE = _SPHERES + (Kind.HAMMING, Kind.TORUS)


@dataclass(frozen=True)
class Space:
    """A probability metric space of a given kind and dimension.

    For spheres ``dim`` is the sphere dimension ``n``; points have ``n + 1``
    coordinates.  Every other kind stores ``n`` coordinates (or bits).
    """

    kind: Kind
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "dim", int(self.dim))
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")

    @property
    def coord_dim(self):
        return self.dim + 1 if self.kind in _SPHERES else self.dim

    @property
    def diameter(self):
        return diameter(self)

    @property
    def is_discrete(self):
        return self.kind is Kind.HAMMING

    @property
    def is_transitive(self):
        """True when measure-preserving motions act transitively."""
        return self.kind in _TRANSITIVE


def diameter(space):
    if space.kind is Kind.SPHERE_GEODESIC:
        return math.pi
    if space.kind in (Kind.SPHERE_EUCLIDEAN, Kind.BALL):
        return 2.0
    return 1.0


def sample(space, rng, size=None):
    """Draw points from the invariant (uniform) measure of ``space``.

    Returns a single point when ``size`` is None, else a ``(size, d)`` batch.
    """
    m = 1 if size is None else int(size)
    d = space.coord_dim
    kind = space.kind
    if kind in _SPHERES:
        pts = rng.standard_normal((m, d))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    elif kind is Kind.HAMMING:
        pts = rng.integers(0, 2, size=(m, d), dtype=np.uint8)
    elif kind is Kind.BALL:
        pts = rng.standard_normal((m, d))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        pts *= rng.random(m)[:, None] ** (1.0 / d)
    else:
        pts = rng.random((m, d))
    return pts[0] if size is None else pts


def sample_stream(space, count, seed, stream):
    """``count`` points drawn chunk-by-chunk from ``(seed, stream, chunk)``."""
    parts = [
        sample(space, _rng.generator(seed, stream, i), size)
        for i, size in enumerate(_rng.chunk_sizes(count))
    ]
    if not parts:
        return empty(space)
    return np.concatenate(parts)


def empty(space):
    dtype = np.uint8 if space.is_discrete else np.float64
    return np.empty((0, space.coord_dim), dtype=dtype)


def validate(space, points):
    """Raise ValueError unless every row of ``points`` lies in ``space``."""
    pts = np.atleast_2d(np.asarray(points))
    if pts.ndim != 2 or pts.shape[1] != space.coord_dim:
        raise ValueError(
            f"expected points with {space.coord_dim} coordinates for {space!r}, got shape {np.shape(points)}"
        )
    kind = space.kind
    if kind is Kind.HAMMING:
        if not np.isin(pts, (0, 1)).all():
            raise ValueError("Hamming points must contain only 0/1 symbols")
        return
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    if kind in _SPHERES:
        if np.abs(np.linalg.norm(pts, axis=1) - 1.0).max(initial=0.0) > 1e-12:
            raise ValueError("sphere points must have unit norm")
    elif kind is Kind.BALL:
        if np.linalg.norm(pts, axis=1).max(initial=0.0) > 1.0 + 1e-12:
            raise ValueError("ball points must have norm <= 1")
    elif kind is Kind.TORUS:
        if pts.min(initial=0.0) < 0.0 or pts.max(initial=0.0) >= 1.0:
            raise ValueError("torus coordinates must lie in [0, 1)")
    elif pts.min(initial=0.0) < 0.0 or pts.max(initial=0.0) > 1.0:
        raise ValueError("hypercube coordinates must lie in [0, 1]")


def as_points(space, points):
    """Coerce to a 2-d array of the space's dtype (no range validation)."""
    dtype = np.uint8 if space.is_discrete else np.float64
    pts = np.atleast_2d(np.asarray(points, dtype=dtype))
    if pts.ndim != 2 or pts.shape[1] != space.coord_dim:
        raise ValueError(
            f"expected points with {space.coord_dim} coordinates for {space!r}, got shape {np.shape(points)}"
        )
    return pts


def hamming_counts(P, Q):
    """Matrix of differing-symbol counts between rows of P and rows of Q."""
    Pf = np.asarray(P, dtype=np.float64)
    Qf = np.asarray(Q, dtype=np.float64)
    counts = Pf @ (1.0 - Qf).T + (1.0 - Pf) @ Qf.T
    return np.rint(counts).astype(np.int64)


def _geodesic_from_chord(chord, P, Q):
    theta = 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
    # arcsin loses accuracy near antipodes; use the antipodal chord there
    far = np.nonzero(chord > 1.9)
    if far[0].size:
        anti = np.linalg.norm(P[far[0]] + Q[far[1]], axis=1)
        theta[far] = math.pi - 2.0 * np.arcsin(np.minimum(anti / 2.0, 1.0))
    return theta


def _torus(P, Q, n):
    out = np.empty((P.shape[0], Q.shape[0]))
    step = max(1, 4_000_000 // max(1, Q.shape[0] * n))
    for i in range(0, P.shape[0], step):
        diff = np.abs(P[i:i + step, None, :] - Q[None, :, :])
        np.minimum(diff, 1.0 - diff, out=diff)
        out[i:i + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out / (math.sqrt(n) / 2.0)


def pairwise_distances(space, P, Q):
    """Distance matrix between the rows of P and the rows of Q."""
    P = as_points(space, P)
    Q = as_points(space, Q)
    n = space.dim
    kind = space.kind
    if kind is Kind.HAMMING:
        return hamming_counts(P, Q) / n
    if kind is Kind.SPHERE_GEODESIC:
        return _geodesic_from_chord(cdist(P, Q), P, Q)
    if kind in (Kind.SPHERE_EUCLIDEAN, Kind.BALL):
        return cdist(P, Q)
    if kind is Kind.HYPERCUBE_L2:
        return cdist(P, Q) / math.sqrt(n)
    if kind is Kind.HYPERCUBE_L1:
        return cdist(P, Q, "cityblock") / n
    return _torus(P, Q, n)


def distance(space, p, q):
    """Distance from point ``p`` to ``q`` (a point or a batch of points)."""
    p = np.asarray(p)
    q = np.asarray(q)
    if p.ndim != 1:
        raise ValueError("p must be a single point")
    d = pairwise_distances(space, p, q)[0]
    return float(d[0]) if q.ndim == 1 else d


def hamming_steps_below(r, n):
    """Largest integer k with k < r*n, using exact rational arithmetic.

    ``r`` may be a float (taken at its exact binary value) or a Fraction.
    """
    x = Fraction(r) * n
    return math.ceil(x) - 1


def hamming_ball_count(n, steps):
    """Number of strings within ``steps`` differing symbols of a fixed string."""
    steps = min(int(steps), n)
    return sum(math.comb(n, k) for k in range(steps + 1)) if steps >= 0 else 0


def sphere_cap_measure(n, theta):
    """Normalised measure of a geodesic cap of angular radius theta on S^n."""
    if theta <= 0.0:
        return 0.0
    if theta >= math.pi:
        return 1.0
    half = 0.5 * float(betainc(n / 2.0, 0.5, math.sin(theta) ** 2))
    return half if theta <= math.pi / 2 else 1.0 - half


class BallMeasure(NamedTuple):
    value: float
    stderr: float
    samples: int  # 0 for closed-form values


@lru_cache(maxsize=16)
def _reference_sample(space, samples, seed):
    pts = sample_stream(space, samples, seed, _rng.REFERENCE)
    pts.setflags(write=False)
    return pts


def reference_distances(space, center, samples=MC_SAMPLES, seed=0):
    """Distances from ``center`` to a fixed seeded reference sample of the measure.

    The torus is translation invariant, so distances are taken from the
    origin; every centre then sees the same empirical distribution.
    """
    ref = _reference_sample(space, int(samples), int(seed))
    if space.kind is Kind.TORUS:
        center = np.zeros(space.coord_dim)
    return pairwise_distances(space, center, ref)[0]


def ball_measure(space, center, r, samples=MC_SAMPLES, seed=0):
    """Measure of the open ball of radius ``r`` about ``center``.

    Closed form for Hamming cubes and spheres; Monte-Carlo over a seeded
    reference sample otherwise (same sample for every ``r``, so the estimate
    is monotone in ``r``).
    """
    r = float(r) if not isinstance(r, Fraction) else r
    if r <= 0:
        return BallMeasure(0.0, 0.0, 0)
    if r >= space.diameter:
        return BallMeasure(1.0, 0.0, 0)
    kind = space.kind
    n = space.dim
    if kind is Kind.HAMMING:
        count = hamming_ball_count(n, hamming_steps_below(r, n))
        return BallMeasure(count / 2 ** n, 0.0, 0)
    if kind is Kind.SPHERE_GEODESIC:
        return BallMeasure(sphere_cap_measure(n, r), 0.0, 0)
    if kind is Kind.SPHERE_EUCLIDEAN:
        return BallMeasure(sphere_cap_measure(n, 2.0 * math.asin(r / 2.0)), 0.0, 0)
    d = reference_distances(space, center, samples, seed)
    p = float(np.count_nonzero(d < r)) / d.size
    return BallMeasure(p, math.sqrt(p * (1.0 - p) / d.size), d.size)


def enumerate_hamming(n):
    """All 2**n binary strings as rows, in lexicographic order."""
    if n > 20:
        raise ValueError("refusing to enumerate more than 2**20 strings")
    idx = np.arange(2 ** n, dtype=np.int64)[:, None]
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)[None, :]
    return ((idx >> shifts) & 1).astype(np.uint8)
