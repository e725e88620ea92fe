"""Concentration of measure and the geometry of similarity search workloads."""

__version__ = "0.1.0"

from simconc.spaces import Kind, Space, ball_measure, diameter, distance, sample  # noqa: E402
from simconc.concentration import (  # noqa: E402
    LevyConstants,
    alpha_brute_force_hamming,
    alpha_extremal_hamming,
    alpha_levy_upper,
    alpha_witness_lower,
    default_levy_constants,
    lipschitz_concentration_check,
)
from simconc.workload import (  # noqa: E402
    Workload,
    build_dataset_iid,
    build_dataset_separated,
    estimate_median_nn,
    half_measure_radius,
    nn_distance,
    profile,
    range_count,
)
from simconc.analysis import (  # noqa: E402
    dimension_sweep,
    epsilon_radius_count,
    instability_fraction,
    stable_workload_check,
    verify_theorem,
)
