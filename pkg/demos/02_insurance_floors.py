# %% [markdown]
# # CPPI and TIPP floors
# The floor decides how much of the account may sit in stocks. CPPI keeps
# it fixed; TIPP ratchets it up with new highs.

# %%
import numpy as np

from insured_marl.insurance import InsuranceConfig, init_floor, project_action, risky_budget, update_floor

path = 100 * np.cumprod(np.r_[1.0, 1 + np.array([0.03, 0.04, 0.02, -0.05, -0.06, -0.04, 0.01, 0.02])])
path.round(1)

# %%
for kind in ("cppi", "tipp"):
    cfg = InsuranceConfig(kind, k=2.0, f0=0.8, phi=0.8)
    fl = init_floor(cfg, path[0])
    rows = []
    for a in path:
        fl = update_floor(fl, cfg, a)
        rows.append((round(float(fl.floor), 1), round(float(risky_budget(fl, cfg, a) / a), 3)))
    print(kind, rows)

# %% projection shrinks stock weights onto the cap and hands the rest to cash
a = np.array([0.5, 0.3, 0.2])
print(project_action(a, budget=40.0, a_t=100.0))

# %% feasible actions pass through untouched, and a zero budget means all cash
print(project_action(a, 100.0, 100.0), project_action(a, 0.0, 100.0))
