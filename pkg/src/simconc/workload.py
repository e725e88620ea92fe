"""Similarity workloads: a space plus a finite dataset, queried by brute force."""

import base64
from dataclasses import dataclass, field
from fractions import Fraction
import json
import math

import numpy as np

from simconc import _rng
from simconc.spaces import (
    MC_SAMPLES,
    Kind,
    Space,
    ball_measure,
    hamming_ball_count,
    hamming_counts,
    hamming_steps_below,
    pairwise_distances,
    reference_distances,
    sample,
    sample_stream,
    validate,
)

FORMAT_NAME = "simconc-dataset"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class BuildMode:
    kind: str = "iid"  # "iid" | "separated" | "explicit"
    delta: float | None = None

    def as_dict(self):
        return {"kind": self.kind} if self.delta is None else {"kind": self.kind, "delta": self.delta}


@dataclass(frozen=True, eq=False)
class Workload:
    space: Space
    points: np.ndarray
    build_mode: BuildMode = BuildMode()
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.uint8 if self.space.is_discrete else np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("dataset must be a nonempty 2-d array of points")
        validate(self.space, pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def from_points(cls, space, points, seed=0):
        return cls(space, points, BuildMode("explicit"), seed)


def build_dataset_iid(space, N, seed):
    """N points drawn independently from the measure of ``space``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return Workload(space, sample_stream(space, N, seed, _rng.DATASET), BuildMode("iid"), int(seed))


def build_dataset_separated(space, delta, seed, max_rejections=10_000, max_points=None, batch=1024):
    """Greedy delta-separated packing of candidates drawn from the measure.

    Candidates are kept when farther than ``delta`` from every kept point.
    Building stops after ``max_rejections`` consecutive rejections (the set is
    then maximal with high probability) or when ``max_points`` are kept.
    """
    if not 0 < delta < space.diameter:
        raise ValueError(f"delta must lie in (0, {space.diameter}), got {delta}")
    hamming = space.kind is Kind.HAMMING
    if hamming:
        # d > delta  <=>  k > delta*n  <=>  k > floor(delta*n)
        min_steps = math.floor(Fraction(delta) * space.dim)
    kept = []
    kept_arr = None
    run = 0
    drawn = 0
    stop = "rejections"
    chunk = 0
    done = False
    if hamming:
        dist, cut = hamming_counts, min_steps
    else:
        dist, cut = (lambda a, b: pairwise_distances(space, a, b)), delta
    while not done:
        cand = sample(space, _rng.generator(seed, _rng.DATASET, chunk), batch)
        chunk += 1
        if kept_arr is None:
            far_from_kept = np.ones(batch, bool)
        else:
            far_from_kept = (dist(cand, kept_arr) > cut).all(axis=1)
        close = dist(cand, cand) <= cut
        accepted = []
        for i in range(batch):
            drawn += 1
            if far_from_kept[i] and not close[i, accepted].any():
                accepted.append(i)
                kept.append(cand[i])
                run = 0
                if max_points is not None and len(kept) >= max_points:
                    stop, done = "max_points", True
                    break
            else:
                run += 1
                if run >= max_rejections:
                    done = True
                    break
        kept_arr = np.array(kept)
    meta = {"candidates": drawn, "consecutive_rejections": run, "stopped_by": stop,
            "max_rejections": max_rejections, "max_points": max_points}
    return Workload(space, np.array(kept), BuildMode("separated", float(delta)), int(seed), meta)


def is_separated(workload, delta):
    """Exact check that distinct data points are pairwise farther than ``delta``."""
    pts = workload.points
    if workload.space.kind is Kind.HAMMING:
        raw = hamming_counts(pts, pts)
        far = raw > math.floor(Fraction(delta) * workload.space.dim)
    else:
        far = pairwise_distances(workload.space, pts, pts) > delta
    np.fill_diagonal(far, True)
    return bool(far.all())


# ------------------------------------------------------------------ queries


def _raw_distances(workload, queries):
    """Distances from each query to each data point; integer steps for Hamming."""
    space = workload.space
    if space.kind is Kind.HAMMING:
        return hamming_counts(queries, workload.points)
    return pairwise_distances(space, queries, workload.points)


def _scale(workload, raw):
    return raw / workload.space.dim if workload.space.kind is Kind.HAMMING else raw


def nn_distance(workload, q):
    """Distance from ``q`` to its nearest data point, and that point's index (lowest on ties)."""
    raw = _raw_distances(workload, np.atleast_2d(q))[0]
    i = int(np.argmin(raw))
    return float(_scale(workload, raw[i])), i


def nn_distances(workload, queries, workers=1):
    """Vectorised :func:`nn_distance` over a batch; returns (dists, indices)."""
    queries = np.atleast_2d(queries)
    step = _rng.CHUNK

    def run(start):
        raw = _raw_distances(workload, queries[start:start + step])
        idx = np.argmin(raw, axis=1)
        return _scale(workload, raw[np.arange(idx.size), idx]), idx

    parts = _rng.map_chunks(run, range(0, queries.shape[0], step), workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def within_mask(workload, raw, radius, closed=False):
    """Mask of data points inside the ball of ``radius`` given raw distances.

    ``radius`` may be a Fraction; Hamming comparisons are exact.
    """
    if workload.space.kind is Kind.HAMMING:
        limit = Fraction(radius) * workload.space.dim
        steps = math.floor(limit) if closed else math.ceil(limit) - 1
        return raw <= steps
    return raw <= float(radius) if closed else raw < float(radius)


def range_count(workload, q, r, closed=False):
    """Number of data points with d(x, q) < r (or <= r when ``closed``)."""
    if r < 0:
        raise ValueError("r must be >= 0")
    raw = _raw_distances(workload, np.atleast_2d(q))[0]
    return int(np.count_nonzero(within_mask(workload, raw, r, closed)))


def sample_queries(space, num_queries, seed, stream=_rng.QUERIES):
    return sample_stream(space, num_queries, seed, stream)


def estimate_median_nn(workload, num_queries, seed, workers=1):
    """Lower empirical median of d_X over independent query samples."""
    if num_queries < 100:
        raise ValueError(f"need at least 100 queries, got {num_queries}")
    d, _ = nn_distances(workload, sample_queries(workload.space, num_queries, seed, _rng.MEDIAN), workers)
    return float(np.sort(d)[(d.size - 1) // 2])


def median_stderr(values):
    """Distribution-free one-sigma half-width of the sample median.

    Half the spread between the order statistics at ranks m/2 -/+ sqrt(m)/2.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    m = v.size
    half = math.sqrt(m) / 2.0
    lo = v[max(0, int(math.floor(m / 2 - half)))]
    hi = v[min(m - 1, int(math.ceil(m / 2 + half)))]
    return float(hi - lo) / 2.0


# -------------------------------------------------------------- half radii


def half_measure_radius(workload, x_index, tol=None, samples=MC_SAMPLES, seed=0):
    """R_x: the largest radius whose open ball about data point ``x_index`` has measure <= 1/2.

    Hamming cubes are solved exactly (the measure is a step function and the
    supremum sits on a step).  Other kinds bisect on ``[0, diameter]`` until
    the bracket is narrower than ``tol`` and return its lower end.
    """
    space = workload.space
    if tol is None:
        tol = 1e-3 * space.diameter
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = workload.points[x_index]
    if space.kind is Kind.HAMMING:
        n = space.dim
        j = 0
        while j < n and 2 * hamming_ball_count(n, j) <= 2 ** n:
            j += 1
        # open ball of radius j/n holds strings within j-1 steps
        return j / n
    if space.kind in (Kind.SPHERE_GEODESIC, Kind.SPHERE_EUCLIDEAN):
        measure = lambda r: ball_measure(space, x, r).value
    else:
        d = np.sort(reference_distances(space, x, samples, seed))
        measure = lambda r: np.searchsorted(d, r, side="left") / d.size
    lo, hi = 0.0, space.diameter
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if measure(mid) <= 0.5:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class WorkloadProfile:
    median_nn: float
    r_x: tuple
    r_interval_width: float
    homogeneity_eps: float
    is_weakly_homogeneous: bool
    tol: float

    def as_dict(self):
        return {
            "median_nn": self.median_nn,
            "r_x": list(self.r_x),
            "r_interval_width": self.r_interval_width,
            "homogeneity_eps": self.homogeneity_eps,
            "is_weakly_homogeneous": self.is_weakly_homogeneous,
            "tol": self.tol,
        }


def half_measure_radii(workload, tol=None, samples=MC_SAMPLES, seed=0):
    space = workload.space
    if space.kind in (Kind.HAMMING, Kind.TORUS):
        # transitive kinds with a centre-independent evaluation: one radius serves all
        r = half_measure_radius(workload, 0, tol, samples, seed)
        return (r,) * len(workload)
    return tuple(half_measure_radius(workload, i, tol, samples, seed) for i in range(len(workload)))


def profile(workload, homogeneity_eps, num_queries, seed, tol=None, workers=1, median_nn=None):
    """Median NN distance, all R_x, and the weak homogeneity verdict."""
    if tol is None:
        tol = 1e-3 * workload.space.diameter
    m = estimate_median_nn(workload, num_queries, seed, workers) if median_nn is None else median_nn
    radii = half_measure_radii(workload, tol, seed=seed)
    width = max(radii) - min(radii)
    return WorkloadProfile(m, radii, width, float(homogeneity_eps), bool(width < homogeneity_eps), tol)


def is_weakly_homogeneous(radii, eps):
    return (max(radii) - min(radii)) < eps


# ------------------------------------------------------------ serialisation


def dumps_workload(workload):
    """Serialise to a JSON document with a base64 body.

    Real coordinates are little-endian float64 in row-major order; Hamming
    strings are packed 8 bits per byte, MSB first, each row padded to a byte.
    """
    space = workload.space
    if space.kind is Kind.HAMMING:
        body = np.packbits(workload.points, axis=1).tobytes()
        encoding = "bits"
    else:
        body = workload.points.astype("<f8").tobytes()
        encoding = "f8le"
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": space.kind.value,
        "n": space.dim,
        "N": len(workload),
        "seed": workload.seed,
        "build_mode": workload.build_mode.as_dict(),
        "metadata": workload.metadata,
        "encoding": encoding,
        "data": base64.b64encode(body).decode("ascii"),
    }
    return json.dumps(doc, sort_keys=True)


def loads_workload(text):
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME:
        raise ValueError("not a simconc dataset document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset version {doc.get('version')}")
    space = Space(doc["kind"], doc["n"])
    N = int(doc["N"])
    raw = base64.b64decode(doc["data"])
    if doc["encoding"] == "bits":
        packed = np.frombuffer(raw, dtype=np.uint8).reshape(N, -1)
        pts = np.unpackbits(packed, axis=1, count=space.coord_dim)
    elif doc["encoding"] == "f8le":
        pts = np.frombuffer(raw, dtype="<f8").reshape(N, space.coord_dim)
    else:
        raise ValueError(f"unknown encoding {doc['encoding']!r}")
    mode = BuildMode(**doc["build_mode"])
    return Workload(space, pts, mode, int(doc["seed"]), doc.get("metadata", {}))


def save_workload(workload, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_workload(workload))


def load_workload(path):
    with open(path, encoding="utf-8") as fh:
        return loads_workload(fh.read())
