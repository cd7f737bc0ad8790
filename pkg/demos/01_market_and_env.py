# %% [markdown]
# # Prices, accounts and one trading step
# A synthetic market, two agents with their own accounts, and what a single
# rebalance does to integer share holdings and cash.

# %%
import numpy as np

from insured_marl.env import EnvConfig, TradingEnv
from insured_marl.market_data import synth_gbm, inject_crash

series = synth_gbm(3, 30, mu=[0.3, 0.0, -0.1], sigma=0.25, s0=[50.0, 20.0, 80.0], seed=1)
series.asset_ids, series.prices.shape

# %% the last few closes
series.prices[-3:].round(2)

# %% a crash glides every asset down 30% over ten days
crashed = inject_crash(series, start=10, length=10, drop=0.3)
(crashed.prices[20] / series.prices[20]).round(3)

# %%
env = TradingEnv(series, EnvConfig(n_agents=2, initial_cash=10_000, cost_rate=0.001, reward_scale=1.0))
env.reset()
env.assets()

# %% weights are over the 3 assets plus a trailing cash slot
res = env.step([np.array([0.5, 0.2, 0.0, 0.3]), np.array([0.0, 0.0, 0.0, 1.0])])
for i, s in enumerate(res.next_states):
    print(f"agent {i}: shares {s.h}, cash {s.b:.2f}, reward {res.rewards[i]:+.2f}, cost {res.costs[i]:.2f}")

# %% what each agent sees: relative prices, holding weights, cash weight, risky cap
env.joint_observation([1.0, 1.0]).round(3)

# %% a None action holds the position with no cost
res = env.step([None, None])
res.costs
