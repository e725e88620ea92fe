# %% [markdown]
# # Separated workloads
#
# When the data are well separated and every query is close to some point, the
# unstable queries cluster in small regions. On a low-dimensional sphere the
# greedy build reaches a maximal packing and the check passes.

# %%
from simconc.analysis import stable_workload_check
from simconc.spaces import Space

rep = stable_workload_check(Space("sphere-geodesic", 2), 0.3, 2000, 0, max_rejections=5000)
print(rep.as_dict())

# %% [markdown]
# On the 16-torus a maximal 0.1-packing would need an astronomical number of
# points, so the build stops at the point cap. Most queries are then far from
# the data, and the unstable centres spread out beyond the 8 delta bound.

# %%
rep = stable_workload_check(Space("torus", 16), 0.1, 2000, 0, max_points=2000)
print(rep.dataset_size, rep.build["stopped_by"], rep.max_unstable_distance, rep.containment_bound, rep.passed)
