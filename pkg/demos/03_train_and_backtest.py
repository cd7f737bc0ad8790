# %% [markdown]
# # Train insured MADDPG and compare with the baselines
# A short run on a synthetic market with one strong asset. The numbers
# are small on purpose so this finishes in well under a minute.

# %%
import numpy as np

from insured_marl.backtest import evaluate
from insured_marl.baselines import BuyAndHold, RandomPolicy, UpConfig, UpPolicy
from insured_marl.env import EnvConfig, TradingEnv
from insured_marl.insurance import InsuranceConfig
from insured_marl.market_data import split, split_index, synth_gbm
from insured_marl.marl import ActorPolicy, Streams, TrainConfig, build_agents, train
from insured_marl.metrics import BacktestReport

series = synth_gbm(4, 90, mu=[0.5, 0.0, 0.0, 0.0], sigma=0.15, seed=3)
train_s, test_s = split(series, split_index(series, 60))
env_cfg = EnvConfig(n_agents=2)

# %%
cfg = TrainConfig(episodes=25, batch_size=32, actor_hidden=(32, 32), critic_hidden=(64, 32), seed=0)
policies = {}
for name, kind in (("maddpg", "none"), ("cppi-maddpg", "cppi")):
    ins = InsuranceConfig(kind)
    streams = Streams.from_seed(cfg.seed)
    env = TradingEnv(train_s, env_cfg)
    agents = build_agents(2, env.obs_dim, env.n_assets, cfg, streams.init)
    result = train(env, agents, cfg, ins, streams)
    last = result.log[-1]
    print(f"{name}: {result.updates} updates, last-episode returns {np.round(last.returns, 0)}")
    policies[name] = ActorPolicy([a.actor for a in result.agents], ins)

# %%
policies.update({"up": UpPolicy(UpConfig()), "random": RandomPolicy(0),
                 "buyhold": BuyAndHold(np.full(5, 0.2))})
report = BacktestReport(test_s.asset_ids)
for name, pol in policies.items():
    report.results.append(evaluate(name, test_s, env_cfg, pol))
for row in report.table():
    print(f"{row['strategy']:>12}  AR {row['AR']:+.3f}  SR {row['SR']:+.2f}  MaxD {row['MaxD']:.3f}  "
          f"sparsity {row['sparsity']:.2f}")

# %% average weights the insured agents actually held over the test window
report.results[1].allocations.mean(axis=(0, 1)).round(3)
