"""
How much do invisible deaths matter?
====================================

Deaths of people with no living sibling on the sampling frame are never
reported. If their death rate is K times the visible rate and they hold a
share p of exposure, the visible rate misses the total by a known amount.
"""

from sibhist.sensitivity import grid, rel_error_by_deaths, rel_error_by_exposure, sensitivity_surface

# Two worked cases: a tenth of deaths or of exposure invisible, with a 20% higher rate.
print("p_D = 0.1, K = 1.2:", round(float(rel_error_by_deaths(1.2, 0.1)), 5))
print("p_N = 0.1, K = 1.2:", round(float(rel_error_by_exposure(1.2, 0.1)), 5))

# %%
# The whole surface over K in [0.8, 1.2] and p in [0, 0.4], printed as percent.
ks = grid(0.8, 1.2, 0.05)
ps = grid(0.0, 0.4, 0.05)
rows = sensitivity_surface(ks, ps, "exposure")

print("K \\ p  " + " ".join(f"{p:6.2f}" for p in ps))
for i, k in enumerate(ks):
    row = rows[i * len(ps):(i + 1) * len(ps)]
    print(f"{k:5.2f}  " + " ".join(f"{100 * r[2] + 0.0:6.2f}" for r in row))

# %%
# Errors stay within a few percent unless the invisible population is both
# large and very different from the visible one.
