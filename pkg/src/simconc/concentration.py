"""Concentration functions: exact values, witness lower bounds, Levy upper bounds.

The concentration function of a probability metric space is

    alpha(eps) = 1 - inf{ mu(O_eps(A)) : A Borel, mu(A) >= 1/2 },   alpha(0) = 1/2,

where ``O_eps(A)`` is the open eps-fattening of ``A``.  It is exactly
computable only on tiny Hamming cubes.  Elsewhere we bracket it: any single
half-measure set gives a lower bound, and a normal Levy family estimate
``C1 * exp(-C2 * eps**2 * n)`` gives an upper bound.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from simconc import _rng
from simconc.spaces import (
    Kind,
    enumerate_hamming,
    hamming_ball_count,
    hamming_counts,
    hamming_steps_below,
    pairwise_distances,
    reference_distances,
    sample,
    sample_stream,
)


@dataclass(frozen=True)
class LevyConstants:
    """Normal Levy family constants: ``alpha(eps) <= C1 * exp(-C2 * eps**2 * n)``."""

    C1: float
    C2: float
    n: float

    def __post_init__(self):
        for name in ("C1", "C2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value}")
        if not self.n > 0:
            raise ValueError(f"n must be positive, got {self.n}")


# kind -> (C1, C2, exponent dimension as a function of the space dimension)
LEVY_TABLE = {
    Kind.SPHERE_GEODESIC: (math.sqrt(math.pi / 8), 0.5, lambda n: n - 1),
    # chord <= arc, so chord fattenings are larger and the geodesic bound carries over
    Kind.SPHERE_EUCLIDEAN: (math.sqrt(math.pi / 8), 0.5, lambda n: n - 1),
    Kind.HAMMING: (1.0, 2.0, lambda n: n),
    # [0,1]^n is a (2*pi)**-0.5 Lipschitz image of the standard Gaussian
    Kind.HYPERCUBE_L2: (0.5, math.pi, lambda n: n),
    Kind.HYPERCUBE_L1: (0.5, math.pi, lambda n: n),
    Kind.TORUS: (0.5, math.pi / 4, lambda n: n),
    Kind.BALL: (1.0, 0.125, lambda n: n),
}


def default_levy_constants(space, C1=None, C2=None):
    """Table constants for ``space``, with optional overrides for C1/C2."""
    c1, c2, exponent_dim = LEVY_TABLE[space.kind]
    n = exponent_dim(space.dim)
    if n <= 0:
        # S^1: the (n-1) exponent vanishes; fall back to the plain dimension
        n = space.dim
    return LevyConstants(C1=c1 if C1 is None else float(C1), C2=c2 if C2 is None else float(C2), n=n)


def alpha_levy_upper(constants, eps):
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return min(0.5, constants.C1 * math.exp(-constants.C2 * eps * eps * constants.n))


# ---------------------------------------------------------------- Hamming, exact


def _popcount(a):
    return np.bitwise_count(a).astype(np.int64)


def _fattening_masks(n, steps):
    """For every subset mask of the n-cube, the mask of its fattening by ``steps``."""
    pts = enumerate_hamming(n)
    size = 2 ** n
    dist = hamming_counts(pts, pts)
    weights = (np.uint32(1) << np.arange(size, dtype=np.uint32))
    ball = ((dist <= steps) * weights[None, :]).sum(axis=1).astype(np.uint32)
    masks = np.arange(2 ** size, dtype=np.uint32)
    fat = np.zeros_like(masks)
    for a in range(size):
        member = ((masks >> np.uint32(a)) & np.uint32(1)).astype(bool)
        fat[member] |= ball[a]
    return masks, fat


def alpha_brute_force_hamming(n, eps):
    """Exact alpha(eps) of the normalised Hamming cube by enumerating every subset.

    Only n <= 4 is accepted (2**16 subsets).  Returns a Fraction.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"brute force needs 1 <= n <= 4, got {n}")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return Fraction(1, 2)
    size = 2 ** n
    steps = hamming_steps_below(eps, n)
    masks, fat = _fattening_masks(n, steps)
    qualifying = 2 * _popcount(masks) >= size
    smallest = int(_popcount(fat[qualifying]).min())
    return 1 - Fraction(smallest, size)


def alpha_extremal_hamming(n, eps):
    """Exact alpha(eps) for odd n from the isoperimetric extremal sets (Hamming balls).

    For odd n the ball of radius (n - 1)/2 has measure exactly 1/2, and
    fattening it by t whole steps leaves the strings at distance
    greater than (n - 1)/2 + t from the centre uncovered.
    """
    if n < 1 or n % 2 == 0:
        raise ValueError(f"extremal formula needs odd n, got {n}")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return Fraction(1, 2)
    t = hamming_steps_below(eps, n)
    covered = hamming_ball_count(n, (n - 1) // 2 + t)
    return Fraction(2 ** n - covered, 2 ** n)


def fattening_measure(n, subset_mask, delta):
    """Exact measure of O_delta(A) for A given as a bitmask over the n-cube."""
    steps = hamming_steps_below(delta, n)
    pts = enumerate_hamming(n)
    members = [i for i in range(2 ** n) if subset_mask >> i & 1]
    if not members:
        return Fraction(0)
    dist = hamming_counts(pts, pts[members])
    return Fraction(int(np.count_nonzero(dist.min(axis=1) <= steps)), 2 ** n)


# ----------------------------------------------------------- witness lower bound


def _witness_radius(space, pole, samples, seed):
    """Radius of a closed ball about ``pole`` with measure >= 1/2.

    Returns the radius and, for Hamming, the integer step count.
    """
    kind = space.kind
    if kind in (Kind.SPHERE_GEODESIC, Kind.SPHERE_EUCLIDEAN):
        return (math.pi / 2 if kind is Kind.SPHERE_GEODESIC else math.sqrt(2.0)), None
    if kind is Kind.HAMMING:
        n = space.dim
        m = 0
        while 2 * hamming_ball_count(n, m) < 2 ** n:
            m += 1
        return m / n, m
    d = np.sort(reference_distances(space, pole, samples, seed))
    return float(d[(d.size - 1) // 2]), None


def _outside_fattening(space, pole, radius, steps, eps, points):
    """Boolean mask of ``points`` not in the open eps-fattening of the witness ball."""
    kind = space.kind
    if kind is Kind.HAMMING:
        k = hamming_counts(pole[None, :], points)[0]
        # d(x, A) = (k - steps)/n for the closed ball of `steps`; exact test k - steps < eps*n
        return k - steps > hamming_steps_below(eps, space.dim)
    d = pairwise_distances(space, pole, points)[0]
    if kind is Kind.SPHERE_EUCLIDEAN:
        # chord metric is not a length metric: fatten the cap in angle
        cap = 2.0 * math.asin(radius / 2.0) + 2.0 * math.asin(min(eps / 2.0, 1.0))
        return 2.0 * np.arcsin(np.minimum(d / 2.0, 1.0)) >= cap
    return d >= radius + eps


def alpha_witness_lower(space, eps, samples, seed, exact=False):
    """Lower bound on alpha(eps) from one half-measure ball about a random pole.

    Returns ``(estimate, stderr)``.  With ``exact=True`` (Hamming only, small
    n) every string is enumerated and the estimate is a Fraction with zero
    stderr.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    pole = sample(space, _rng.generator(seed, _rng.POLE))
    radius, steps = _witness_radius(space, pole, samples or 100, seed)
    if exact:
        if space.kind is not Kind.HAMMING:
            raise ValueError("exact witness evaluation is only available for Hamming cubes")
        outside = _outside_fattening(space, pole, radius, steps, eps, enumerate_hamming(space.dim))
        return Fraction(int(outside.sum()), 2 ** space.dim), 0.0
    if samples < 100:
        raise ValueError(f"need at least 100 samples, got {samples}")
    hits = 0
    for i, size in enumerate(_rng.chunk_sizes(samples, 16 * _rng.CHUNK)):
        pts = sample(space, _rng.generator(seed, _rng.WITNESS, i), size)
        hits += int(_outside_fattening(space, pole, radius, steps, eps, pts).sum())
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)


# ----------------------------------------------------------------- curves


@dataclass(frozen=True)
class ConcentrationCurve:
    epsilons: tuple
    alpha_lower: tuple
    alpha_upper: tuple
    method: str  # BruteForce | ExtremalBall | WitnessMC | NormalLevyBound
    mc_samples: int = 0
    stderr: tuple = field(default=())

    def as_rows(self):
        errs = self.stderr or (0.0,) * len(self.epsilons)
        return [
            {"eps": e, "alpha_lower": float(lo), "alpha_upper": float(hi), "stderr": float(s)}
            for e, lo, hi, s in zip(self.epsilons, self.alpha_lower, self.alpha_upper, errs)
        ]


def concentration_curve(space, epsilons, method="WitnessMC", samples=100_000, seed=0, constants=None):
    """Tabulate a [lower, upper] bracket for alpha over ``epsilons``."""
    eps = tuple(sorted(float(e) for e in epsilons))
    if constants is None:
        constants = default_levy_constants(space)
    upper = tuple(alpha_levy_upper(constants, e) for e in eps)
    if method == "BruteForce":
        _require_hamming(space)
        vals = tuple(alpha_brute_force_hamming(space.dim, e) for e in eps)
        return ConcentrationCurve(eps, vals, vals, method)
    if method == "ExtremalBall":
        _require_hamming(space)
        vals = tuple(alpha_extremal_hamming(space.dim, e) for e in eps)
        return ConcentrationCurve(eps, vals, vals, method)
    if method == "NormalLevyBound":
        return ConcentrationCurve(eps, (0.0,) * len(eps), upper, method)
    if method != "WitnessMC":
        raise ValueError(f"unknown method {method!r}")
    lows = [alpha_witness_lower(space, e, samples, seed) for e in eps]
    return ConcentrationCurve(
        eps, tuple(v for v, _ in lows), upper, method, samples, tuple(s for _, s in lows)
    )


def _require_hamming(space):
    if space.kind is not Kind.HAMMING:
        raise ValueError("exact concentration functions are only available for Hamming cubes")


# -------------------------------------------------------- Lipschitz functions


@dataclass(frozen=True)
class LipschitzCheck:
    fraction_outside: float
    stderr: float
    median: float
    samples: int


def lipschitz_concentration_check(space, f, eps, samples, seed, points=None):
    """Fraction of points where a Lipschitz-1 ``f`` strays >= eps from its median.

    ``f`` maps a batch of points to a 1-d array.  The median is the lower
    empirical median.  Pass ``points`` to evaluate on a fixed set (e.g. all
    strings of a small cube) instead of sampling.
    """
    if points is None:
        if samples < 100:
            raise ValueError(f"need at least 100 samples, got {samples}")
        points = sample_stream(space, samples, seed, _rng.LIPSCHITZ)
    values = np.asarray(f(points), dtype=np.float64)
    m = values.size
    median = float(np.sort(values)[(m - 1) // 2])
    p = float(np.count_nonzero(np.abs(values - median) >= eps)) / m
    return LipschitzCheck(p, math.sqrt(p * (1.0 - p) / m), median, m)


def distance_to_pole(space, pole):
    """The Lipschitz-1 function x -> d(x, pole), vectorised over batches."""
    return lambda pts: pairwise_distances(space, pole, pts)[0]

