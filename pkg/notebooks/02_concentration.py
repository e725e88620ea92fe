# %% [markdown]
# # Concentration functions
#
# alpha(eps) is the largest mass that can stay outside the eps-fattening of a
# half-measure set. Tiny Hamming cubes admit exact enumeration. Larger spaces get a
# bracket: a witness set gives a lower estimate and the Levy bound an upper one.

# %%
from simconc.concentration import (
    alpha_brute_force_hamming,
    alpha_extremal_hamming,
    concentration_curve,
)
from simconc.spaces import Space

for eps in (0.2, 0.4, 0.7, 1.0):
    print(eps, alpha_brute_force_hamming(3, eps), alpha_extremal_hamming(3, eps))

# %%
for n in (10, 50, 200):
    curve = concentration_curve(Space("sphere-geodesic", n), [0.1, 0.2, 0.4], samples=50_000, seed=1)
    for row in curve.as_rows():
        print(n, row)

# %% [markdown]
# A 1-Lipschitz function concentrates around its median at the same rate.

# %%
import numpy as np

from simconc.concentration import distance_to_pole, lipschitz_concentration_check

space = Space("sphere-geodesic", 100)
pole = np.eye(101)[0]
print(lipschitz_concentration_check(space, distance_to_pole(space, pole), 0.2, 100_000, 0))
