# %% [markdown]
# # Spaces, samplers and ball measures
#
# Each space pairs a sampler for its uniform measure with a normalised metric.
# Here we sample a few points, compare distances and look at how the measure of
# a ball changes with its radius.

# %%
import numpy as np

from simconc.spaces import Kind, Space, ball_measure, pairwise_distances, sample

rng = np.random.default_rng(0)
for kind in Kind:
    space = Space(kind, 10)
    pts = sample(space, rng, 200)
    d = pairwise_distances(space, pts[:1], pts[1:])[0]
    print(f"{kind.value:17s} diameter={space.diameter:.3f} mean distance={d.mean():.3f} sd={d.std():.3f}")

# %% [markdown]
# The spread of the distances shrinks relative to the diameter as the
# dimension grows.

# %%
for n in (10, 100, 1000):
    space = Space("sphere-geodesic", n)
    pts = sample(space, rng, 500)
    d = pairwise_distances(space, pts[:1], pts[1:])[0]
    print(n, round(d.std(), 4))

# %% [markdown]
# Ball measures are exact on the sphere and the Hamming cube. The other kinds
# use a cached Monte Carlo reference sample and report a standard error.

# %%
sphere = Space("sphere-geodesic", 50)
pole = np.zeros(51)
pole[0] = 1.0
for r in (1.3, 1.5, np.pi / 2, 1.7):
    print(f"sphere r={r:.3f}: {ball_measure(sphere, pole, r).value:.4f}")

cube = Space("hypercube-l2", 20)
print(ball_measure(cube, np.full(20, 0.5), 0.3))
