"""MADDPG with insurance-constrained actions.

Every agent has a softmax actor over ``D + 1`` weights and a centralised
critic that sees the joint observation and all agents' actions. Actions are
pushed through the CPPI/TIPP projection before execution, and the critic
loss mixes the TD error with a penalty on pairwise action correlation.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import nn
from ..env import TradingEnv
from ..insurance import (FloorState, InsuranceConfig, init_floor, project_action, project_rows,
                         project_rows_vjp, risky_budget, risky_cap, update_floor)
from .buffer import Batch, Experience, ReplayBuffer

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 200
    gamma: float = 0.99
    lam: float = 0.9
    tau: float = 0.01
    batch_size: int = 64
    capacity: int = 100_000
    noise_sigma: float = 0.3
    noise_decay: float = 0.995
    update_every: int = 1
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    actor_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (128, 64)
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 <= self.lam <= 1:
            raise ValueError("lam must lie in [0, 1]")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.capacity < self.batch_size:
            raise ValueError("capacity must hold at least one batch")
        if self.episodes < 0 or self.update_every < 1:
            raise ValueError("episodes must be >= 0 and update_every >= 1")
        object.__setattr__(self, "actor_hidden", tuple(self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(self.critic_hidden))


@dataclass
class Streams:
    """Independent RNG streams so no consumer perturbs another."""

    init: np.random.Generator
    noise: np.random.Generator
    buffer: np.random.Generator
    env: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        return cls(*(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)))


@dataclass
class AgentNets:
    actor: nn.MlpParams
    critic: nn.MlpParams
    target_actor: nn.MlpParams
    target_critic: nn.MlpParams
    actor_opt: nn.AdamState
    critic_opt: nn.AdamState
    floor: FloorState | None = None


def build_agents(n_agents: int, obs_dim: int, n_assets: int, cfg: TrainConfig,
                 rng: np.random.Generator) -> list[AgentNets]:
    act_dim = n_assets + 1
    critic_in = n_agents * (obs_dim + act_dim)
    agents = []
    for _ in range(n_agents):
        actor = nn.init_mlp([obs_dim, *cfg.actor_hidden, act_dim],
                            ["relu"] * len(cfg.actor_hidden) + ["softmax"], rng)
        critic = nn.init_mlp([critic_in, *cfg.critic_hidden, 1],
                             ["relu"] * len(cfg.critic_hidden) + ["identity"], rng)
        agents.append(AgentNets(actor, critic, actor.copy(), critic.copy(),
                                nn.AdamState.zeros_like(actor, lr=cfg.actor_lr),
                                nn.AdamState.zeros_like(critic, lr=cfg.critic_lr)))
    return agents


def critic_input(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Flatten ``(K, N, obs)`` states and ``(K, N, D+1)`` actions into critic rows."""
    K = states.shape[0]
    return np.concatenate([states.reshape(K, -1), actions.reshape(K, -1)], axis=1)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def select_action(agent: AgentNets, obs: np.ndarray, noise_sigma: float, floor: FloorState,
                  cfg: InsuranceConfig, a_t: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Actor output, perturbed in logit space, then projected onto the insurance budget."""
    out, cache = nn.forward(agent.actor, obs)
    if noise_sigma > 0:
        out = _softmax(cache.logits + noise_sigma * rng.standard_normal(out.shape))
    if cfg.kind == "none":
        return out
    return project_action(out, risky_budget(floor, cfg, a_t), a_t)


def pairwise_corr(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise Pearson correlation of two ``(K, M)`` arrays; 0 where either row is constant."""
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    nx = np.sqrt((xc * xc).sum(axis=1))
    ny = np.sqrt((yc * yc).sum(axis=1))
    denom = nx * ny
    ok = denom > 1e-12
    return np.where(ok, (xc * yc).sum(axis=1) / np.where(ok, denom, 1.0), 0.0)


def _corr_sq_grad(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of ``corr(x_k, y_k)**2`` w.r.t. each row ``x_k``."""
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    nx = np.sqrt((xc * xc).sum(axis=1, keepdims=True))
    ny = np.sqrt((yc * yc).sum(axis=1, keepdims=True))
    ok = (nx * ny) > 1e-12
    nx_s, ny_s = np.where(ok, nx, 1.0), np.where(ok, ny, 1.0)
    r = (xc * yc).sum(axis=1, keepdims=True) / (nx_s * ny_s)
    g = 2.0 * r * (yc / (nx_s * ny_s) - r * xc / nx_s**2)
    return np.where(ok, g, 0.0)


def correlation_penalty(actions: np.ndarray, i: int) -> float:
    """``sum_{j != i} mean_k corr(a_i, a_j)**2`` over a ``(K, N, D+1)`` action batch."""
    N = actions.shape[1]
    return float(sum(np.mean(pairwise_corr(actions[:, i], actions[:, j]) ** 2)
                     for j in range(N) if j != i))


def target_actions(agents: list[AgentNets], batch: Batch) -> np.ndarray:
    """Target-actor actions at the next state, projected with the next-state caps."""
    acts = []
    for j, ag in enumerate(agents):
        raw = nn.predict(ag.target_actor, batch.next_state[:, j])
        acts.append(project_rows(raw, batch.next_caps[:, j]))
    return np.stack(acts, axis=1)


def td_targets(agents: list[AgentNets], batch: Batch, i: int, gamma: float) -> np.ndarray:
    q_next = nn.predict(agents[i].target_critic, critic_input(batch.next_state, target_actions(agents, batch)))[:, 0]
    return batch.rewards[:, i] + gamma * (1.0 - batch.done) * q_next


def critic_loss(agents: list[AgentNets], batch: Batch, i: int, cfg: TrainConfig) -> tuple[float, nn.MlpParams]:
    """Mixed TD / correlation loss for critic ``i`` and its gradient.

    ``lam * mean((Q - y)^2) + (1 - lam) * sum_{j != i} mean corr(a_i, a_j)^2``
    with ``y = r_i + gamma * (1 - done) * Q'_i(s', a')``. The correlation
    term is built from stored actions, so only the TD part has a gradient.
    """
    y = td_targets(agents, batch, i, cfg.gamma)
    q, cache = nn.forward(agents[i].critic, critic_input(batch.state, batch.actions))
    err = q[:, 0] - y
    K = len(batch)
    loss = cfg.lam * float(np.mean(err**2)) + (1.0 - cfg.lam) * correlation_penalty(batch.actions, i)
    upstream = (cfg.lam * 2.0 / K * err)[:, None]
    grads, _ = nn.backward(agents[i].critic, cache, upstream)
    return loss, grads


def actor_update(agents: list[AgentNets], batch: Batch, i: int, lam: float = 1.0) -> tuple[float, nn.MlpParams]:
    """Deterministic policy gradient for actor ``i``.

    Minimises ``lam * -mean Q_i(s, a_1..pi_i(s)..a_N) + (1 - lam) * sum_j mean corr(pi_i(s), a_j)^2``
    where ``pi_i(s)`` is the projected actor output and the other agents'
    actions come from the batch.
    """
    ag = agents[i]
    K, N = batch.actions.shape[:2]
    raw, a_cache = nn.forward(ag.actor, batch.state[:, i])
    caps = batch.caps[:, i]
    a_i = project_rows(raw, caps)
    actions = batch.actions.copy()
    actions[:, i] = a_i

    q, c_cache = nn.forward(ag.critic, critic_input(batch.state, actions))
    loss = -lam * float(np.mean(q))
    _, dx = nn.backward(ag.critic, c_cache, np.full((K, 1), -lam / K))
    act_dim = a_i.shape[1]
    start = batch.state.shape[2] * N + i * act_dim
    g_a = dx[:, start:start + act_dim]

    if lam < 1.0 and N > 1:
        for j in range(N):
            if j == i:
                continue
            loss += (1.0 - lam) * float(np.mean(pairwise_corr(a_i, actions[:, j]) ** 2))
            g_a = g_a + (1.0 - lam) / K * _corr_sq_grad(a_i, actions[:, j])

    g_raw = project_rows_vjp(raw, caps, g_a)
    grads, _ = nn.backward(ag.actor, a_cache, g_raw)
    return loss, grads


@dataclass
class EpisodeLog:
    episode: int
    returns: list[float]
    final_assets: list[float]
    costs: list[float]
    critic_loss: list[float]
    actor_loss: list[float]
    floors: list[float]
    sigma: float

    def row(self) -> dict:
        out = {"episode": self.episode, "sigma": repr(self.sigma)}
        for name in ("returns", "final_assets", "costs", "critic_loss", "actor_loss", "floors"):
            for k, v in enumerate(getattr(self, name)):
                out[f"{name}_{k}"] = repr(float(v))
        return out


@dataclass
class TrainResult:
    agents: list[AgentNets]
    log: list[EpisodeLog] = field(default_factory=list)
    updates: int = 0
    buffer: ReplayBuffer | None = None


def initial_floors(env: TradingEnv, cfg: InsuranceConfig) -> list[FloorState]:
    return [init_floor(cfg, a) for a in env.assets()]


def advance_floors(floors: list[FloorState], cfg: InsuranceConfig, assets: np.ndarray):
    """Ratchet every floor to the current asset and return ``(floors, caps)``."""
    floors = [update_floor(f, cfg, a) for f, a in zip(floors, assets)]
    caps = np.array([risky_cap(f, cfg, a) for f, a in zip(floors, assets)])
    return floors, caps


def _dump(agents, batch, i, what) -> dict:
    return {"agent": i, "stage": what,
            "critic_norm": [float(np.linalg.norm(a.critic.flat())) for a in agents],
            "actor_norm": [float(np.linalg.norm(a.actor.flat())) for a in agents],
            "batch_reward_range": [float(batch.rewards.min()), float(batch.rewards.max())]}


def update_agents(agents: list[AgentNets], batch: Batch, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """One critic step and one actor step per agent, then soft target updates."""
    N = len(agents)
    c_losses, a_losses = np.zeros(N), np.zeros(N)
    for i, ag in enumerate(agents):
        try:
            c_losses[i], g = critic_loss(agents, batch, i, cfg)
            if not np.isfinite(c_losses[i]):
                raise nn.DivergenceError("non-finite critic loss")
            ag.critic, ag.critic_opt = nn.adam_step(ag.critic, g, ag.critic_opt)
            a_losses[i], g = actor_update(agents, batch, i, cfg.lam)
            if not np.isfinite(a_losses[i]):
                raise nn.DivergenceError("non-finite actor loss")
            ag.actor, ag.actor_opt = nn.adam_step(ag.actor, g, ag.actor_opt)
        except nn.DivergenceError as exc:
            raise TrainingDiverged(f"agent {i}: {exc}", _dump(agents, batch, i, str(exc))) from exc
    for ag in agents:
        ag.target_critic = nn.soft_update(ag.target_critic, ag.critic, cfg.tau)
        ag.target_actor = nn.soft_update(ag.target_actor, ag.actor, cfg.tau)
    return c_losses, a_losses


def train(env: TradingEnv, agents: list[AgentNets], cfg: TrainConfig,
          insurance: InsuranceConfig = InsuranceConfig(), streams: Streams | None = None,
          on_update: Callable[[int, list[AgentNets]], None] | None = None) -> TrainResult:
    """Run the insured MADDPG loop for ``cfg.episodes`` passes over the env's price path.

    ``streams`` defaults to ``Streams.from_seed(cfg.seed)``; the ``init``
    stream is not touched here (build agents with it beforehand).
    ``on_update(n, agents)`` is called after every gradient update.
    """
    streams = streams or Streams.from_seed(cfg.seed)
    buffer = ReplayBuffer(cfg.capacity, streams.buffer)
    result = TrainResult(agents, buffer=buffer)
    sigma = cfg.noise_sigma
    steps = 0
    N = env.n_agents

    for episode in range(cfg.episodes):
        env.reset(seed=int(streams.env.integers(2**31)))
        start_assets = env.assets()
        floors, caps = advance_floors(initial_floors(env, insurance), insurance, start_assets)
        obs = env.joint_observation(caps)
        costs = np.zeros(N)
        c_hist, a_hist = [], []
        done = False
        while not done:
            assets = env.assets()
            actions = np.stack([select_action(agents[i], obs[i], sigma, floors[i], insurance, assets[i], streams.noise)
                                for i in range(N)])
            res = env.step(list(actions))
            costs += res.costs
            floors, next_caps = advance_floors(floors, insurance, env.assets())
            next_obs = env.joint_observation(next_caps)
            buffer.add(Experience(obs, actions, res.rewards, next_obs, res.done, caps, next_caps))
            obs, caps, done = next_obs, next_caps, res.done
            steps += 1
            if len(buffer) >= cfg.batch_size and steps % cfg.update_every == 0:
                c, a = update_agents(agents, buffer.sample(cfg.batch_size), cfg)
                c_hist.append(c)
                a_hist.append(a)
                result.updates += 1
                if on_update is not None:
                    on_update(result.updates, agents)

        for ag, fl in zip(agents, floors):
            ag.floor = fl
        final = env.assets()
        rec = EpisodeLog(
            episode=episode,
            returns=list(final - start_assets),
            final_assets=list(final),
            costs=list(costs),
            critic_loss=list(np.mean(c_hist, axis=0)) if c_hist else [float("nan")] * N,
            actor_loss=list(np.mean(a_hist, axis=0)) if a_hist else [float("nan")] * N,
            floors=[f.floor for f in floors],
            sigma=sigma,
        )
        result.log.append(rec)
        logger.debug("episode %d returns %s", episode, rec.returns)
        sigma *= cfg.noise_decay
    return result


def write_log(log: list, path) -> None:
    """Write per-episode records (anything with a ``row()`` dict) as CSV."""
    rows = [r.row() for r in log]
    with Path(path).open("w", newline="") as fh:
        if not rows:
            fh.write("episode\n")
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


class ActorPolicy:
    """Greedy (noise-free) execution of trained actors, insurance projection kept on."""

    def __init__(self, actors: list[nn.MlpParams], insurance: InsuranceConfig = InsuranceConfig()):
        self.actors = actors
        self.insurance = insurance
        self.floors: list[FloorState] = []
        self.caps = np.ones(len(actors))

    def reset(self, env: TradingEnv) -> None:
        if env.n_agents != len(self.actors):
            raise ValueError(f"policy has {len(self.actors)} actors but env has {env.n_agents} agents")
        if env.obs_dim != self.actors[0].sizes[0]:
            raise ValueError("actor input size does not match the environment observation size")
        self.floors = initial_floors(env, self.insurance)

    def __call__(self, env: TradingEnv) -> list[np.ndarray]:
        assets = env.assets()
        self.floors, self.caps = advance_floors(self.floors, self.insurance, assets)
        obs = env.joint_observation(self.caps)
        out = []
        for i, actor in enumerate(self.actors):
            a = nn.predict(actor, obs[i])
            if self.insurance.kind != "none":
                a = project_action(a, risky_budget(self.floors[i], self.insurance, assets[i]), assets[i])
            out.append(a)
        return out
