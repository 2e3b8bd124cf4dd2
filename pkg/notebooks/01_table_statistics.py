# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Hourly count tables: camera vs model
#
# Two published days of hourly In/Out counts, 05:00 to 19:00, one series from the
# site's commercial counting camera and one from the helmet-aware model. We
# recompute the difference rows and the summary statistics from the raw rows.

# %%
import numpy as np

from ppe_edge.evaluation import format_report, load_fixture, report, sample_std

# %%
for name in ("table1", "table2"):
    fx = load_fixture(name)
    print(f"== {name}")
    print("hours      ", " ".join(f"{h[:2]:>3}" for h in fx.labels))
    for key in ("Dahua In", "AI&ML In", "Diff. In", "Dahua Out", "AI&ML Out", "Diff. Out"):
        print(f"{key:<11}", " ".join(f"{v:>3}" for v in fx.rows[key]), f"| {fx.totals[key]}")
    print()

# %% [markdown]
# Differences are camera minus model. The spread uses the n-1 (sample)
# formula; the population formula gives a visibly smaller number.

# %%
fx = load_fixture("table1")
d = np.subtract(fx.rows["Dahua In"], fx.rows["AI&ML In"])
print("sample std     ", round(sample_std(d), 3))
print("population std ", round(float(np.std(d)), 3))

# %%
for name in ("table1", "table2"):
    print(f"== {name}")
    print(format_report(*report(load_fixture(name))))

# %% [markdown]
# ## Out mean of the first day
#
# The Out difference row sums to 19 over 14 hours, so its mean is 19/14.
# Printed to two decimals that is 1.36, and a truncating printer gives 1.35.
# The acceptance check for this value uses a 0.005 tolerance around 1.35 and
# stays red; see notes/decisions.md.

# %%
out = np.asarray(load_fixture("table1").rows["Diff. Out"])
print(out.sum(), out.size, out.sum() / out.size)
