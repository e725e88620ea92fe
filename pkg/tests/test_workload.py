import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simconc import _rng
from simconc.concentration import alpha_levy_upper, default_levy_constants
from simconc.spaces import Kind, Space, distance, enumerate_hamming, pairwise_distances, sample
from simconc.workload import (
    Workload,
    build_dataset_iid,
    build_dataset_separated,
    dumps_workload,
    estimate_median_nn,
    half_measure_radius,
    is_separated,
    load_workload,
    loads_workload,
    median_stderr,
    nn_distance,
    nn_distances,
    profile,
    range_count,
    sample_queries,
    save_workload,
)

SPHERE20 = Space("sphere-geodesic", 20)


def test_iid_singleton():
    wl = build_dataset_iid(SPHERE20, 1, 0)
    assert len(wl) == 1


def test_iid_deterministic():
    a = build_dataset_iid(Space("torus", 8), 2500, 77)
    b = build_dataset_iid(Space("torus", 8), 2500, 77)
    assert a.points.tobytes() == b.points.tobytes()
    assert dumps_workload(a) == dumps_workload(b)


def test_iid_rejects_empty():
    with pytest.raises(ValueError):
        build_dataset_iid(SPHERE20, 0, 0)


def test_workload_is_read_only():
    wl = build_dataset_iid(SPHERE20, 5, 0)
    with pytest.raises(ValueError):
        wl.points[0, 0] = 2.0


def test_workload_rejects_invalid_points():
    with pytest.raises(ValueError):
        Workload.from_points(Space("hypercube-l2", 2), [[0.5, 1.5]])
    with pytest.raises(ValueError):
        Workload.from_points(Space("hamming", 2), [[0, 2]])


# -------------------------------------------------------------- separated


def test_separated_near_diameter_is_singleton():
    wl = build_dataset_separated(Space("sphere-geodesic", 4), math.pi - 1e-9, 1, max_rejections=200)
    assert len(wl) == 1
    assert wl.metadata["stopped_by"] == "rejections"


def test_separated_hamming_pairs_differ_in_two_bits():
    wl = build_dataset_separated(Space("hamming", 3), 0.4, 5, max_rejections=500)
    pts = [tuple(p) for p in wl.points]
    for a, b in itertools.combinations(pts, 2):
        assert sum(x != y for x, y in zip(a, b)) >= 2
    # a maximal 2-separated code in the 3-cube has 2..4 words; greedy with 500 misses finds a maximal one
    strings = list(itertools.product((0, 1), repeat=3))
    for s in strings:
        assert min(sum(x != y for x, y in zip(s, p)) for p in pts) <= 1


@pytest.mark.parametrize("kind", ["torus", "ball", "hypercube-l1"])
def test_separated_exact_check(kind):
    wl = build_dataset_separated(Space(kind, 3), 0.3, 2, max_rejections=300)
    assert is_separated(wl, 0.3)
    D = pairwise_distances(wl.space, wl.points, wl.points)
    np.fill_diagonal(D, np.inf)
    assert D.min() > 0.3


def test_separated_max_points_cap():
    wl = build_dataset_separated(Space("torus", 16), 0.1, 3, max_points=300)
    assert len(wl) == 300
    assert wl.metadata["stopped_by"] == "max_points"


def test_separated_torus_median_nn():
    wl = build_dataset_separated(Space("torus", 16), 0.25, 4, max_rejections=10_000, max_points=2000)
    assert estimate_median_nn(wl, 2000, 4) >= 0.25 / 2 - 0.02


def test_separated_rejects_bad_delta():
    with pytest.raises(ValueError):
        build_dataset_separated(Space("torus", 4), 1.0, 0)


# ---------------------------------------------------------------- queries


def test_nn_of_data_point_is_itself():
    wl = build_dataset_iid(SPHERE20, 50, 3)
    assert nn_distance(wl, wl.points[17]) == (0.0, 17)


def test_nn_antipodal_pair():
    s = Space("sphere-geodesic", 2)
    e = np.array([0.0, 0.0, 1.0])
    wl = Workload.from_points(s, [e, -e])
    assert nn_distance(wl, -e) == (0.0, 1)


def test_nn_lowest_index_on_ties():
    s = Space("hamming", 3)
    wl = Workload.from_points(s, [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert nn_distance(wl, [0, 0, 0]) == (1 / 3, 0)


def _scan(wl, q):
    best, idx = None, None
    for i, x in enumerate(wl.points):
        d = sum(int(a) != int(b) for a, b in zip(q, x)) / wl.space.dim
        if best is None or d < best:
            best, idx = d, i
    return best, idx


def test_nn_hamming_matches_scan():
    s = Space("hamming", 3)
    rng = np.random.default_rng(8)
    for trial in range(20):
        wl = Workload.from_points(s, sample(s, rng, 4))
        for q in enumerate_hamming(3):
            assert nn_distance(wl, q) == _scan(wl, q)


@pytest.mark.parametrize("kind", list(Kind))
def test_nn_not_above_any_distance(kind):
    space = Space(kind, 6)
    wl = build_dataset_iid(space, 200, 1)
    Q = sample_queries(space, 1000, 2)
    d, idx = nn_distances(wl, Q)
    rng = np.random.default_rng(0)
    cols = rng.integers(0, len(wl), size=1000)
    spot = np.array([distance(space, Q[i], wl.points[c]) for i, c in enumerate(cols)])
    assert np.all(d <= spot + 1e-12)
    assert np.allclose(d, [distance(space, Q[i], wl.points[idx[i]]) for i in range(1000)])


def test_range_count_edges():
    wl = build_dataset_iid(Space("torus", 4), 100, 1)
    q = sample(wl.space, np.random.default_rng(1))
    assert range_count(wl, q, 0.0) == 0
    assert range_count(wl, q, 1.01) == 100
    with pytest.raises(ValueError):
        range_count(wl, q, -1)


def test_range_count_hamming_oracle():
    s = Space("hamming", 4)
    wl = build_dataset_iid(s, 9, 6)
    for q in enumerate_hamming(4):
        for r in (0.2, 0.25, 0.5, 0.75, 1.0):
            diffs = [sum(int(a) != int(b) for a, b in zip(q, x)) for x in wl.points]
            assert range_count(wl, q, r) == sum(4 * r > k for k in diffs)
            assert range_count(wl, q, r, closed=True) == sum(4 * r >= k for k in diffs)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), radii=st.lists(st.floats(0, 2.5), min_size=2, max_size=8))
def test_range_count_nondecreasing(seed, radii):
    wl = build_dataset_iid(Space("ball", 3), 60, seed)
    q = sample(wl.space, np.random.default_rng(seed))
    radii = sorted(radii)
    counts = [range_count(wl, q, r) for r in radii]
    assert counts == sorted(counts)


# ------------------------------------------------------------------ median


def test_median_nn_whole_cube_is_zero():
    wl = Workload.from_points(Space("hamming", 3), enumerate_hamming(3))
    assert estimate_median_nn(wl, 200, 0) == 0.0


def test_median_nn_singleton_sphere():
    wl = build_dataset_iid(Space("sphere-geodesic", 2), 1, 0)
    m = 20_000
    # d(q, x) = arccos(t) with t uniform on [-1, 1]: median pi/2, density 1/2 there
    se = 1 / (2 * 0.5 * math.sqrt(m))
    assert abs(estimate_median_nn(wl, m, 5) - math.pi / 2) < 4 * se


def test_median_nn_stability_across_seeds():
    wl = build_dataset_iid(Space("sphere-geodesic", 30), 500, 1)
    m = 4000
    a = estimate_median_nn(wl, m, 10)
    b = estimate_median_nn(wl, m, 11)
    d, _ = nn_distances(wl, sample_queries(wl.space, m, 12))
    iqr = np.subtract(*np.percentile(d, [75, 25]))
    assert abs(a - b) <= 4 * iqr / math.sqrt(m)


def test_median_nn_needs_queries():
    with pytest.raises(ValueError):
        estimate_median_nn(build_dataset_iid(SPHERE20, 3, 0), 50, 0)


def test_median_stderr_shrinks():
    rng = np.random.default_rng(0)
    assert median_stderr(rng.normal(size=40_000)) < median_stderr(rng.normal(size=400))


# ------------------------------------------------------------ half radii


@pytest.mark.parametrize("n", [2, 7, 50])
def test_half_radius_sphere(n):
    wl = build_dataset_iid(Space("sphere-geodesic", n), 3, 0)
    tol = 1e-3
    for i in range(3):
        assert abs(half_measure_radius(wl, i, tol) - math.pi / 2) <= tol


def test_half_radius_hamming_n3():
    wl = Workload.from_points(Space("hamming", 3), enumerate_hamming(3))
    # oracle: largest open radius with measure <= 1/2 sits on a step k/3
    best = 0
    for k in range(1, 4):
        inside = sum(1 for s in itertools.product((0, 1), repeat=3) if sum(s) < k)
        if inside <= 4:
            best = k / 3
    assert best == 2 / 3
    assert all(half_measure_radius(wl, i) == best for i in range(8))


@pytest.mark.parametrize("kind", ["sphere-geodesic", "sphere-euclidean", "hamming", "torus"])
def test_half_radius_identical_on_transitive_kinds(kind):
    wl = build_dataset_iid(Space(kind, 5), 12, 3)
    tol = 1e-3 * wl.space.diameter
    radii = [half_measure_radius(wl, i, tol, samples=20_000) for i in range(len(wl))]
    assert max(radii) - min(radii) <= 2 * tol


def test_half_radius_cube_depends_on_centre():
    s = Space("hypercube-l2", 4)
    wl = Workload.from_points(s, [[0.5] * 4, [0.0] * 4])
    centre, corner = (half_measure_radius(wl, i, samples=20_000) for i in range(2))
    assert centre < corner


# ----------------------------------------------------------------- profile


def test_profile_sphere_homogeneous():
    wl = build_dataset_iid(SPHERE20, 40, 1)
    tol = 1e-3
    prof = profile(wl, 2.5 * tol, 500, 1, tol)
    assert prof.is_weakly_homogeneous
    assert prof.r_interval_width <= 2 * tol
    assert all(0 < r <= math.pi for r in prof.r_x)
    assert prof.is_weakly_homogeneous == (prof.r_interval_width < prof.homogeneity_eps)


def test_profile_singleton():
    prof = profile(build_dataset_iid(Space("ball", 3), 1, 0), 1e-9, 200, 0)
    assert prof.r_interval_width == 0.0 and prof.is_weakly_homogeneous


def test_profile_ball_thin_shell():
    n = 6
    s = Space("ball", n)
    rng = np.random.default_rng(4)
    dirs = rng.standard_normal((15, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    thin = Workload.from_points(s, dirs * rng.uniform(0.80, 0.81, size=(15, 1)))
    thick = Workload.from_points(s, dirs * rng.uniform(0.0, 0.9, size=(15, 1)))
    p_thin = profile(thin, 0.05, 200, 0)
    p_thick = profile(thick, 0.05, 200, 0)
    assert p_thin.is_weakly_homogeneous
    assert p_thin.r_interval_width < p_thick.r_interval_width
    assert not p_thick.is_weakly_homogeneous


def test_nn_distance_concentrates_around_median_sphere20():
    space = SPHERE20
    wl = build_dataset_iid(space, 1000, 9)
    m_hat = estimate_median_nn(wl, 2000, 9)
    d, _ = nn_distances(wl, sample_queries(space, 2000, 9))
    c = default_levy_constants(space)
    for delta in (0.1, 0.2):
        frac = np.mean(np.abs(d - m_hat) >= delta)
        se = math.sqrt(frac * (1 - frac) / d.size)
        assert frac <= 2 * alpha_levy_upper(c, delta) + 4 * se


# ----------------------------------------------------------- serialisation


@pytest.mark.parametrize("kind", list(Kind))
def test_roundtrip(kind, tmp_path):
    wl = build_dataset_iid(Space(kind, 11), 37, 8)
    path = tmp_path / "wl.json"
    save_workload(wl, path)
    back = load_workload(path)
    assert back.space == wl.space
    assert back.points.dtype == wl.points.dtype
    assert np.array_equal(back.points, wl.points)
    assert back.seed == 8 and back.build_mode == wl.build_mode


def test_roundtrip_separated_metadata():
    wl = build_dataset_separated(Space("hamming", 9), 0.3, 1, max_rejections=100)
    back = loads_workload(dumps_workload(wl))
    assert back.build_mode.delta == 0.3 and back.metadata == wl.metadata


def test_loads_rejects_foreign_documents():
    with pytest.raises(ValueError):
        loads_workload('{"format": "other"}')
    doc = dumps_workload(build_dataset_iid(SPHERE20, 2, 0)).replace('"version": 1', '"version": 99')
    with pytest.raises(ValueError):
        loads_workload(doc)


def test_chunked_draws_independent_of_batch():
    # the first chunk of a larger draw equals a draw of exactly one chunk
    s = Space("torus", 3)
    big = build_dataset_iid(s, 3 * _rng.CHUNK, 5).points
    small = build_dataset_iid(s, _rng.CHUNK, 5).points
    assert np.array_equal(big[:_rng.CHUNK], small)
