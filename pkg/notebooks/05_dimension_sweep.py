# %% [markdown]
# # Dimension sweep
#
# Grow the dimension with the dataset size tied to it, then fit the growth of
# the median neighbour count. Rows whose median count already equals the dataset
# size carry no information about growth and are left out of the fit.

# %%
from simconc.analysis import dimension_sweep, exponential_size

res = dimension_sweep("sphere-geodesic", [32, 64, 96, 128], exponential_size(0.05), 0.5, 2000, 0)
for row in res.rows:
    print(row["dim"], row["N"], row["median_count_closed"], row["instability_fraction"])
print("slope", res.slope, "p", res.p_value, "rows used", res.rows_used)

# %% [markdown]
# Every row above saturates (median count equals N), so no slope is reported.

# %% [markdown]
# With a fixed size instead, the counts climb towards N as n grows.

# %%
res = dimension_sweep("hamming", [16, 32, 64, 128], 500, 0.3, 2000, 0)
for row in res.rows:
    print(row["dim"], row["median_count_closed"])
print(res.slope, res.p_value)
