"""Roll a policy through a :class:`TradingEnv` and collect its equity curve."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .env import EnvConfig, TradingEnv
from .market_data import MarketSeries
from .metrics import EquityCurve, StrategyResult


class Policy(Protocol):
    def reset(self, env: TradingEnv) -> None: ...

    def __call__(self, env: TradingEnv) -> list: ...


@dataclass
class Rollout:
    dates: tuple[str, ...]
    assets: np.ndarray      # (T, N) total asset per agent
    weights: np.ndarray     # (T-1, N, D+1) executed weights
    costs: np.ndarray       # (T-1, N)

    @property
    def total(self) -> np.ndarray:
        return self.assets.sum(axis=1)


def rollout(env: TradingEnv, policy: Policy) -> Rollout:
    """One full pass over the env's price path.

    Executed weights are the action vectors the policy returned; for agents
    that hold (``None``), the realised post-trade weights are recorded.
    """
    env.reset()
    policy.reset(env)
    assets = [env.assets()]
    weights, costs = [], []
    while not env.done:
        actions = policy(env)
        res = env.step(actions)
        w = res.weights.copy()
        for i, a in enumerate(actions):
            if a is not None:
                w[i] = a
        weights.append(w)
        costs.append(res.costs)
        assets.append(env.assets())
    return Rollout(env.series.dates, np.array(assets), np.array(weights), np.array(costs))


def evaluate(name: str, series: MarketSeries, env_cfg: EnvConfig, policy: Policy) -> StrategyResult:
    """Roll ``policy`` on ``series``; the strategy's curve is the sum over agent accounts."""
    r = rollout(TradingEnv(series, env_cfg), policy)
    return StrategyResult(name, EquityCurve(r.dates, r.total), r.weights, float(r.costs.sum()))


