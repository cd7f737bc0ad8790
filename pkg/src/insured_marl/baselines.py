"""Non-learning comparison strategies: Cover's universal portfolio, random, buy-and-hold.

All portfolios live on the ``(D + 1)``-simplex whose last coordinate is cash
(price relative 1 every period).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .env import TradingEnv
from .market_data import MarketSeries

GRID_MAX_COMPONENTS = 4


@dataclass(frozen=True)
class UpConfig:
    mode: str = "auto"          # grid | monte_carlo | auto
    resolution: int = 21        # grid points per axis, including both ends
    samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("grid", "monte_carlo", "auto"):
            raise ValueError(f"unknown UP mode {self.mode!r}")
        if self.resolution < 2 or self.samples < 1:
            raise ValueError("need resolution >= 2 and samples >= 1")


def simplex_grid(n_components: int, resolution: int) -> np.ndarray:
    """Every point of the simplex whose coordinates are multiples of ``1/(resolution-1)``."""
    n = resolution - 1
    m = n_components
    pts = np.empty((comb(n + m - 1, m - 1), m))
    for r, bars in enumerate(combinations(range(n + m - 1), m - 1)):
        edges = (-1,) + bars + (n + m - 1,)
        pts[r] = [edges[k + 1] - edges[k] - 1 for k in range(m)]
    return pts / n


def candidate_portfolios(n_components: int, cfg: UpConfig) -> np.ndarray:
    mode = cfg.mode
    if mode == "auto":
        mode = "grid" if n_components <= GRID_MAX_COMPONENTS else "monte_carlo"
    if mode == "grid":
        return simplex_grid(n_components, cfg.resolution)
    rng = np.random.default_rng(cfg.seed)
    return rng.dirichlet(np.ones(n_components), size=cfg.samples)


def price_relatives(prices: np.ndarray) -> np.ndarray:
    """``(T-1, D+1)`` per-period gross returns with a trailing cash column of ones."""
    prices = np.asarray(prices, dtype=float)
    x = prices[1:] / prices[:-1]
    return np.hstack([x, np.ones((len(x), 1))])


def _mixture(points: np.ndarray, log_wealth: np.ndarray) -> np.ndarray:
    w = np.exp(log_wealth - log_wealth.max())
    b = w @ points / w.sum()
    return b / b.sum()


def up_weights(history, cfg: UpConfig = UpConfig()) -> np.ndarray:
    """Wealth-weighted average of constant-rebalanced portfolios on ``history``.

    ``history`` is a :class:`MarketSeries` or a ``(T, D)`` price array; with
    a single row there are no returns yet and the result is uniform.
    """
    prices = history.prices if isinstance(history, MarketSeries) else np.atleast_2d(np.asarray(history, float))
    if prices.size == 0:
        raise ValueError("empty price history")
    m = prices.shape[1] + 1
    if prices.shape[0] == 1:
        return np.full(m, 1.0 / m)
    points = candidate_portfolios(m, cfg)
    log_wealth = np.log(points @ price_relatives(prices).T).sum(axis=1)
    return _mixture(points, log_wealth)


class UpPolicy:
    """Universal portfolio tracked incrementally along the environment's price path."""

    def __init__(self, cfg: UpConfig = UpConfig()):
        self.cfg = cfg

    def reset(self, env: TradingEnv) -> None:
        self.points = candidate_portfolios(env.n_assets + 1, self.cfg)
        self.log_wealth = np.zeros(len(self.points))
        self.t = 0

    def __call__(self, env: TradingEnv) -> list[np.ndarray]:
        prices = env.series.prices
        while self.t < env.t:
            x = np.append(prices[self.t + 1] / prices[self.t], 1.0)
            self.log_wealth += np.log(self.points @ x)
            self.t += 1
        w = _mixture(self.points, self.log_wealth)
        return [w.copy() for _ in range(env.n_agents)]


class RandomPolicy:
    """Fresh uniform Dirichlet weights for every agent at every step."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def sample(self, n_assets: int) -> np.ndarray:
        return self.rng.dirichlet(np.ones(n_assets + 1))

    def reset(self, env: TradingEnv) -> None:
        self.rng = np.random.default_rng(self.seed)

    def __call__(self, env: TradingEnv) -> list[np.ndarray]:
        return [self.sample(env.n_assets) for _ in range(env.n_agents)]


def random_policy(seed: int = 0) -> RandomPolicy:
    return RandomPolicy(seed)


class BuyAndHold:
    """Trade once to ``weights`` on the first step, then hold."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("buy-and-hold weights must lie on the simplex")
        self.weights = w
        self._first = True

    def reset(self, env: TradingEnv) -> None:
        if len(self.weights) != env.n_assets + 1:
            raise ValueError("weights do not match the number of assets")
        self._first = True

    def __call__(self, env: TradingEnv) -> list:
        if self._first:
            self._first = False
            return [self.weights.copy() for _ in range(env.n_agents)]
        return [None] * env.n_agents


def buy_and_hold(weights) -> BuyAndHold:
    return BuyAndHold(weights)
