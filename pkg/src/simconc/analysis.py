"""Query instability, (1+eps)-radius neighbour counts and the lower-bound theorem.

For a query ``q`` with nearest-neighbour distance ``d_X(q)`` we count the data
points inside the ball of radius ``(1 + eps) * d_X(q)``.  The query is
eps-unstable when the closed ball holds more than half of the dataset.  The
lower-bound theorem says that, outside a set of queries of measure at most
``3 * alpha(M * eps / 6)``, the open ball holds at least

    min(|X|, ceil(1 / (2 * sqrt(alpha(M * eps / 6)))))

points, where ``M`` is the median of ``d_X``.  ``alpha`` is replaced by the
Levy upper bound here; that makes both bounds looser, so a pass is still
meaningful but a weaker statement.
"""

import csv
from dataclasses import dataclass, field
from fractions import Fraction
import io
import math

import numpy as np
from scipy import stats

from simconc import _rng
from simconc.concentration import alpha_levy_upper, default_levy_constants
from simconc.spaces import Kind, Space, pairwise_distances
from simconc.workload import (
    _raw_distances,
    _scale,
    build_dataset_iid,
    build_dataset_separated,
    estimate_median_nn,
    half_measure_radii,
    is_separated,
    median_stderr,
    sample_queries,
)

LEVY_NOTE = (
    "alpha replaced by its normal Levy upper bound; mass and count bounds are "
    "looser than with the true concentration function"
)


class DegenerateWorkloadError(ValueError):
    """Every sampled query coincides with a data point."""


@dataclass(frozen=True)
class QueryStat:
    query_seed_index: int
    d_x: float
    count_open: int
    count_closed: int
    unstable: bool
    coincident: bool


@dataclass(frozen=True, eq=False)
class QueryBatch:
    """Per-query statistics for one eps, stored column-wise."""

    eps: float
    dataset_size: int
    d_x: np.ndarray
    count_open: np.ndarray
    count_closed: np.ndarray

    @property
    def coincident(self):
        return self.d_x == 0

    @property
    def unstable(self):
        return 2 * self.count_closed > self.dataset_size

    def __len__(self):
        return self.d_x.size

    def __getitem__(self, i):
        return QueryStat(int(i), float(self.d_x[i]), int(self.count_open[i]), int(self.count_closed[i]),
                         bool(self.unstable[i]), bool(self.coincident[i]))

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query_index", "d_x", "count_open", "count_closed", "unstable", "coincident"])
        unstable, coincident = self.unstable, self.coincident
        for i in range(len(self)):
            w.writerow([i, repr(float(self.d_x[i])), int(self.count_open[i]), int(self.count_closed[i]),
                        int(unstable[i]), int(coincident[i])])

    def to_csv(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _counts(workload, raw, eps):
    """Open and closed counts within (1 + eps) * d_X for each row of raw distances."""
    dmin = raw.min(axis=1)
    if workload.space.kind is Kind.HAMMING:
        scale = 1 + Fraction(eps)
        open_steps = np.empty_like(dmin)
        closed_steps = np.empty_like(dmin)
        for k in np.unique(dmin):
            limit = scale * int(k)
            open_steps[dmin == k] = math.ceil(limit) - 1
            closed_steps[dmin == k] = math.floor(limit)
        c_open = (raw <= open_steps[:, None]).sum(axis=1)
        c_closed = (raw <= closed_steps[:, None]).sum(axis=1)
    else:
        radius = (1.0 + eps) * dmin
        c_open = (raw < radius[:, None]).sum(axis=1)
        c_closed = (raw <= radius[:, None]).sum(axis=1)
    return _scale(workload, dmin), c_open, c_closed


def query_stats(workload, queries, eps, workers=1):
    """Brute-force (1+eps)-radius counts for a batch of query points."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    queries = np.atleast_2d(queries)
    step = _rng.CHUNK

    def run(start):
        return _counts(workload, _raw_distances(workload, queries[start:start + step]), eps)

    parts = _rng.map_chunks(run, range(0, queries.shape[0], step), workers)
    return QueryBatch(
        float(eps), len(workload),
        np.concatenate([p[0] for p in parts]).astype(np.float64),
        np.concatenate([p[1] for p in parts]).astype(np.int64),
        np.concatenate([p[2] for p in parts]).astype(np.int64),
    )


def epsilon_radius_count(workload, q, eps):
    """Statistics of the eps-radius nearest-neighbour query centred at ``q``."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    return query_stats(workload, np.atleast_2d(q), eps)[0]


def _binomial(hits, total):
    p = hits / total
    return p, math.sqrt(p * (1.0 - p) / total)


@dataclass(frozen=True)
class InstabilityResult:
    fraction: float
    stderr: float
    num_queries: int
    num_coincident: int
    batch: QueryBatch = field(repr=False, compare=False)

    def __iter__(self):
        # unpacks as (fraction, stderr)
        return iter((self.fraction, self.stderr))


def instability_fraction(workload, eps, num_queries, seed, workers=1):
    """Fraction of sampled queries that are eps-unstable, with binomial stderr.

    Queries landing exactly on a data point are excluded and counted.
    """
    if num_queries < 100:
        raise ValueError(f"need at least 100 queries, got {num_queries}")
    batch = query_stats(workload, sample_queries(workload.space, num_queries, seed), eps, workers)
    keep = ~batch.coincident
    used = int(keep.sum())
    if used == 0:
        raise DegenerateWorkloadError("every sampled query coincides with a data point")
    frac, err = _binomial(int(batch.unstable[keep].sum()), used)
    return InstabilityResult(frac, err, num_queries, num_queries - used, batch)


# ------------------------------------------------------------------ theorem


def theorem_bounds(m_hat, eps, constants, dataset_size):
    """(alpha_arg, alpha, mass_bound, count_bound) for median NN distance ``m_hat``."""
    alpha_arg = m_hat * eps / 6.0
    alpha = alpha_levy_upper(constants, alpha_arg)
    alpha = min(0.5, max(alpha, math.ulp(0.0)))
    count_bound = min(dataset_size, math.ceil(1.0 / (2.0 * math.sqrt(alpha))))
    return alpha_arg, alpha, 3.0 * alpha, count_bound


@dataclass(frozen=True)
class TheoremReport:
    eps: float
    m_hat: float
    alpha_arg: float
    alpha_upper: float
    mass_bound: float
    count_bound: int
    violation_fraction: float
    num_queries: int
    stderr: float
    dataset_size: int
    r_interval_width: float
    homogeneity_threshold: float
    homogeneity_ok: bool
    status: str  # "ok" | "informational" | "overridden"
    constants: dict
    note: str = LEVY_NOTE
    batch: QueryBatch = field(default=None, repr=False, compare=False)

    @property
    def contract_holds(self):
        return self.violation_fraction <= self.mass_bound + 4.0 * self.stderr

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "batch"}
        out["contract_holds"] = self.contract_holds
        return out


def verify_theorem(workload, eps, num_queries, constants=None, seed=0, tol=None,
                   override_homogeneity=False, workers=1):
    """Measure how often the open (1+eps)-ball falls short of the theorem's count bound.

    The weak homogeneity precondition is checked at ``M * eps / 6 + 2 * tol``.
    A failed check downgrades the report to "informational" (or
    "overridden" when ``override_homogeneity`` is set) instead of raising.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    space = workload.space
    if constants is None:
        constants = default_levy_constants(space)
    if tol is None:
        tol = 1e-3 * space.diameter
    m_hat = estimate_median_nn(workload, num_queries, seed, workers)
    if m_hat <= 0:
        raise ValueError("median nearest-neighbour distance is zero; the bound is undefined")
    alpha_arg, alpha, mass_bound, count_bound = theorem_bounds(m_hat, eps, constants, len(workload))

    radii = half_measure_radii(workload, tol, seed=seed)
    width = max(radii) - min(radii)
    threshold = alpha_arg + 2.0 * tol
    homogeneous = width < threshold
    status = "ok" if homogeneous else ("overridden" if override_homogeneity else "informational")

    batch = query_stats(workload, sample_queries(space, num_queries, seed), eps, workers)
    violation, err = _binomial(int((batch.count_open < count_bound).sum()), len(batch))
    return TheoremReport(
        eps=float(eps), m_hat=m_hat, alpha_arg=alpha_arg, alpha_upper=alpha,
        mass_bound=mass_bound, count_bound=int(count_bound), violation_fraction=violation,
        num_queries=int(num_queries), stderr=err, dataset_size=len(workload),
        r_interval_width=width, homogeneity_threshold=threshold, homogeneity_ok=bool(homogeneous),
        status=status, constants={"C1": constants.C1, "C2": constants.C2, "n": constants.n},
        batch=batch,
    )


# -------------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    slope: float | None
    p_value: float | None
    rows_used: int

    def write_csv(self, fh):
        if not self.rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(self.rows[0]), lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    def as_dict(self):
        return {"rows": list(self.rows), "slope": self.slope, "p_value": self.p_value,
                "rows_used": self.rows_used}


def exponential_size(rate):
    """Dataset size rule ``n -> ceil(exp(rate * n))``."""
    return lambda n: math.ceil(math.exp(rate * n))


def growth_slope(dims, counts, seed=0):
    """Least-squares slope of log(count) against dimension, with a one-sided permutation p-value."""
    x = np.asarray(dims, dtype=np.float64)
    y = np.log(np.asarray(counts, dtype=np.float64))
    if x.size < 2:
        return None, None
    slope = float(np.polyfit(x, y, 1)[0])
    if x.size < 3:
        return slope, None
    res = stats.permutation_test(
        (x, y), lambda a, b: np.polyfit(a, b, 1)[0], permutation_type="pairings",
        alternative="greater", n_resamples=9999, vectorized=False, random_state=seed,
    )
    return slope, float(res.pvalue)


def dimension_sweep(kind, dims, N, eps, num_queries, seed, constants=None, m_floor=None, workers=1):
    """One row per dimension: median NN distance, instability, counts and theorem bounds.

    ``N`` is a dataset size or a callable mapping dimension to size.  Rows
    flag ``m_hat`` values at or below ``m_floor`` (default 0), where the
    standing assumption that M_n stays away from zero fails.
    """
    dims = [int(n) for n in dims]
    if dims != sorted(dims):
        raise ValueError("dims must be sorted ascending")
    size = N if callable(N) else (lambda n: int(N))
    floor = 0.0 if m_floor is None else float(m_floor)
    rows = []
    for n in dims:
        space = Space(kind, n)
        consts = constants if constants is not None else default_levy_constants(space)
        wl = build_dataset_iid(space, size(n), _rng.derive(seed, n))
        m_hat = estimate_median_nn(wl, num_queries, seed, workers)
        batch = query_stats(wl, sample_queries(space, num_queries, seed), eps, workers)
        keep = ~batch.coincident
        inst, inst_err = _binomial(int(batch.unstable[keep].sum()), max(1, int(keep.sum())))
        alpha_arg, alpha, mass_bound, count_bound = theorem_bounds(m_hat, eps, consts, len(wl))
        viol, viol_err = _binomial(int((batch.count_open < count_bound).sum()), len(batch))
        rows.append({
            "dim": n,
            "N": len(wl),
            "m_hat": m_hat,
            "m_hat_flag": int(m_hat <= floor),
            "instability_fraction": inst,
            "instability_stderr": inst_err,
            "mean_count_closed": float(batch.count_closed.mean()),
            "median_count_closed": float(np.median(batch.count_closed)),
            "count_bound": int(count_bound),
            "mass_bound": mass_bound,
            "violation_fraction": viol,
            "violation_stderr": viol_err,
        })
    used = [r for r in rows if r["median_count_closed"] < r["N"]]
    slope, p = growth_slope([r["dim"] for r in used], [r["median_count_closed"] for r in used], seed)
    return SweepResult(tuple(rows), slope, p, len(used))


# ------------------------------------------------------------ stable workloads


@dataclass(frozen=True)
class StableCheckReport:
    delta: float
    eps: float
    dataset_size: int
    build: dict
    separated: bool
    m_hat: float
    m_hat_stderr: float
    median_ok: bool
    num_queries: int
    num_unstable: int
    max_unstable_distance: float | None
    containment_bound: float
    containment_ok: bool

    @property
    def passed(self):
        return self.separated and self.median_ok and self.containment_ok

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["passed"] = self.passed
        return out


def stable_workload_check(space, delta, num_queries, seed, eps=1.0, max_rejections=10_000,
                          max_points=5_000, workers=1):
    """Build a delta-separated dataset and locate its eps-unstable query centres.

    For a maximal delta-separated set every query has ``d_X <= delta``, so two
    1-unstable centres share a data point within ``2 * delta`` of each and lie
    within ``4 * delta`` of each other.  The check asserts the looser
    ``8 * delta`` pairwise bound and ``M >= delta / 2 - 2 * stderr``.
    """
    if not 0 < delta < space.diameter / 8:
        raise ValueError(f"delta must lie in (0, diameter/8) = (0, {space.diameter / 8}), got {delta}")
    wl = build_dataset_separated(space, delta, seed, max_rejections, max_points)
    queries = sample_queries(space, num_queries, seed)
    batch = query_stats(wl, queries, eps, workers)
    d = batch.d_x
    m_hat = float(np.sort(d)[(d.size - 1) // 2])
    m_err = median_stderr(d)
    centres = queries[batch.unstable & ~batch.coincident]
    bound = 8.0 * delta
    if centres.shape[0] > 1:
        far = max(float(pairwise_distances(space, centres[i:i + 512], centres).max())
                  for i in range(0, centres.shape[0], 512))
    else:
        far = 0.0 if centres.shape[0] == 1 else None
    return StableCheckReport(
        delta=float(delta), eps=float(eps), dataset_size=len(wl), build=dict(wl.metadata),
        separated=is_separated(wl, delta), m_hat=m_hat, m_hat_stderr=m_err,
        median_ok=bool(m_hat >= delta / 2 - 2 * m_err), num_queries=int(num_queries),
        num_unstable=int(centres.shape[0]), max_unstable_distance=far, containment_bound=bound,
        containment_ok=bool(far is None or far <= bound),
    )
