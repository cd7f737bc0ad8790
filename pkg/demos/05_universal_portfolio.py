# %% [markdown]
# # Cover's universal portfolio
# The weights are a wealth-weighted average of every constant-rebalanced
# portfolio on a grid, so the better performers pull the mixture their way.

# %%
import numpy as np

from insured_marl.baselines import UpConfig, candidate_portfolios, price_relatives, up_weights
from insured_marl.market_data import synth_gbm

prices = synth_gbm(2, 253, mu=[1.0, -0.5], sigma=0.2, seed=4).prices
cfg = UpConfig(mode="grid", resolution=21)

# %% with no returns yet the answer is uniform over the two stocks and cash
up_weights(prices[:1], cfg)

# %% weights drift toward the winner as history grows
for t in (5, 63, 126, 252):
    print(t, up_weights(prices[:t + 1], cfg).round(3))

# %% the mixture's wealth sits between the worst and best rebalanced portfolio
x = price_relatives(prices)
crp = np.prod(candidate_portfolios(3, cfg) @ x.T, axis=1)
print(f"worst {crp.min():.3f}  mixture {crp.mean():.3f}  best {crp.max():.3f}")
