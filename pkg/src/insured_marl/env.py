"""Multi-agent trading environment over a shared price path.

Each agent owns an independent account (integer share holdings plus cash)
and submits a weight vector over the ``D`` assets plus a trailing cash slot.
Orders execute at the current close, the account is then marked to the next
close, and the reward is the resulting change in total asset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .market_data import MarketSeries

SIMPLEX_ATOL = 1e-9


@dataclass(frozen=True)
class EnvConfig:
    n_agents: int = 2
    initial_cash: float = 1e6
    cost_rate: float = 0.001
    reward_scale: float = 1e-4

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if not self.initial_cash > 0:
            raise ValueError("initial_cash must be > 0")
        if not 0 <= self.cost_rate < 1:
            raise ValueError("cost_rate must lie in [0, 1)")
        if not self.reward_scale > 0:
            raise ValueError("reward_scale must be > 0")


@dataclass(frozen=True)
class AgentState:
    p: np.ndarray
    h: np.ndarray
    b: float


@dataclass(frozen=True)
class StepResult:
    next_states: list[AgentState]
    rewards: np.ndarray
    done: bool
    costs: np.ndarray
    # executed weights per agent (post-trade, at the trade prices)
    weights: np.ndarray


def total_asset(s: AgentState) -> float:
    return float(s.b + np.dot(s.p, s.h))


def check_action(w, n_assets: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n_assets + 1,):
        raise ValueError(f"action must have length {n_assets + 1}, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("action weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"action weights must sum to 1, got {w.sum()!r}")
    return w


def rebalance(h: np.ndarray, b: float, p: np.ndarray, w: np.ndarray, cost_rate: float):
    """Trade holdings ``h`` towards weights ``w`` at prices ``p``.

    Returns ``(new_h, new_b, cost)``. Target shares are floored to integers.
    If buying the full order book would overdraw cash after costs, every
    buy order is scaled by one common factor (then floored) so that the
    balance stays non-negative.
    """
    asset = b + p @ h
    target = np.floor(w[:-1] * asset / p)
    delta = target - h
    sells = np.where(delta < 0, -delta, 0.0)
    buys = np.where(delta > 0, delta, 0.0)

    proceeds = sells @ p * (1.0 - cost_rate)
    spend = buys @ p * (1.0 + cost_rate)
    available = b + proceeds
    if spend > available:
        buys = np.floor(buys * (available / spend))
        while buys @ p * (1.0 + cost_rate) > available and buys.any():
            # float rounding at the boundary; drop one share of the largest order
            buys[np.argmax(buys * p)] -= 1.0
        spend = buys @ p * (1.0 + cost_rate)

    new_h = h - sells + buys
    cost = cost_rate * ((sells + buys) @ p)
    new_b = b + sells @ p - buys @ p - cost
    return new_h, max(new_b, 0.0), cost


class TradingEnv:
    """Independent accounts trading one shared :class:`MarketSeries`.

    ``reset`` returns the joint state (one :class:`AgentState` per agent);
    ``step`` takes one action per agent. An action of ``None`` holds the
    current position without trading.
    """

    def __init__(self, series: MarketSeries, cfg: EnvConfig):
        self.series = series
        self.cfg = cfg
        self.t = 0
        self._h = np.zeros((cfg.n_agents, series.n_assets))
        self._b = np.full(cfg.n_agents, float(cfg.initial_cash))
        self._done = False

    @property
    def n_agents(self) -> int:
        return self.cfg.n_agents

    @property
    def n_assets(self) -> int:
        return self.series.n_assets

    @property
    def done(self) -> bool:
        return self._done

    @property
    def prices(self) -> np.ndarray:
        return self.series.prices[self.t]

    def reset(self, seed: int | None = None) -> list[AgentState]:
        # the price path is fixed, so the seed only exists for API symmetry
        self.t = 0
        self._h = np.zeros((self.n_agents, self.n_assets))
        self._b = np.full(self.n_agents, float(self.cfg.initial_cash))
        self._done = False
        return self.states()

    def states(self) -> list[AgentState]:
        p = self.prices.copy()
        return [AgentState(p=p, h=self._h[i].copy(), b=float(self._b[i])) for i in range(self.n_agents)]

    def assets(self) -> np.ndarray:
        return self._b + self._h @ self.prices

    def observe(self, i: int, cap: float = 1.0) -> np.ndarray:
        """Own-account features for agent ``i``.

        Layout: prices relative to the first date (D), holding weights (D),
        cash weight (1), insurance risky cap (1).
        """
        p = self.prices
        a = self._b[i] + self._h[i] @ p
        return np.concatenate([p / self.series.prices[0], self._h[i] * p / a, [self._b[i] / a, cap]])

    def joint_observation(self, caps: Sequence[float] | None = None) -> np.ndarray:
        caps = caps if caps is not None else [1.0] * self.n_agents
        return np.stack([self.observe(i, caps[i]) for i in range(self.n_agents)])

    def shared_observation(self, caps: Sequence[float] | None = None) -> np.ndarray:
        """Full joint state: relative prices once, then every agent's account features."""
        own = self.joint_observation(caps)
        return np.concatenate([own[0, :self.n_assets], own[:, self.n_assets:].ravel()])

    @property
    def obs_dim(self) -> int:
        return 2 * self.n_assets + 2

    def step(self, joint_action: Sequence) -> StepResult:
        if self._done:
            raise RuntimeError("episode is finished; call reset()")
        if len(joint_action) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions, got {len(joint_action)}")

        p = self.prices
        before = self.assets()
        costs = np.zeros(self.n_agents)
        weights = np.empty((self.n_agents, self.n_assets + 1))
        for i, w in enumerate(joint_action):
            if w is not None:
                w = check_action(w, self.n_assets)
                self._h[i], self._b[i], costs[i] = rebalance(self._h[i], self._b[i], p, w, self.cfg.cost_rate)
            a = self._b[i] + self._h[i] @ p
            weights[i, :-1] = self._h[i] * p / a
            weights[i, -1] = self._b[i] / a

        self.t += 1
        after = self.assets()
        self._done = self.t == self.series.n_dates - 1
        rewards = self.cfg.reward_scale * (after - before)
        return StepResult(self.states(), rewards, self._done, costs, weights)
