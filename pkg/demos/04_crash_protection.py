# %% [markdown]
# # Gap risk: a 30% crash in the middle of the test window
# Same seed, same networks, with and without insurance.

# %%
from insured_marl.backtest import evaluate
from insured_marl.env import EnvConfig, TradingEnv
from insured_marl.insurance import InsuranceConfig
from insured_marl.market_data import inject_crash, split, split_index, synth_gbm
from insured_marl.marl import ActorPolicy, Streams, TrainConfig, build_agents, train
from insured_marl.metrics import max_drawdown

series = inject_crash(synth_gbm(5, 100, mu=0.1, sigma=0.2, seed=0), start=75, length=10, drop=0.3)
train_s, test_s = split(series, split_index(series, 60))
env_cfg = EnvConfig(n_agents=2)

# %%
for kind in ("none", "cppi", "tipp"):
    ins = InsuranceConfig(kind)
    cfg = TrainConfig(episodes=20, seed=0)
    streams = Streams.from_seed(0)
    agents = build_agents(2, TradingEnv(train_s, env_cfg).obs_dim, 5, cfg, streams.init)
    res = train(TradingEnv(train_s, env_cfg), agents, cfg, ins, streams)
    curve = evaluate(kind, test_s, env_cfg, ActorPolicy([a.actor for a in res.agents], ins)).curve
    print(f"{kind:>5}: MaxD {max_drawdown(curve):.3f}, final {curve.values[-1]:,.0f}")
