# %% [markdown]
# # Workloads
#
# A workload is a finite dataset inside a space. We build one iid and one
# separated dataset, profile them and save one to disk.

# %%
from simconc.spaces import Space
from simconc.workload import (
    build_dataset_iid,
    build_dataset_separated,
    load_workload,
    profile,
    save_workload,
)

wl = build_dataset_iid(Space("sphere-geodesic", 30), 1000, seed=3)
prof = profile(wl, homogeneity_eps=0.05, num_queries=2000, seed=3)
print(prof.median_nn, prof.r_interval_width, prof.is_weakly_homogeneous)

# %% [markdown]
# A greedy separated build stops after a run of rejected candidates or at a
# point cap, whichever comes first.

# %%
sep = build_dataset_separated(Space("torus", 6), 0.3, seed=1, max_rejections=2000)
print(len(sep), sep.metadata)

# %%
import tempfile, os

path = os.path.join(tempfile.mkdtemp(), "torus.json")
save_workload(sep, path)
print((load_workload(path).points == sep.points).all())
