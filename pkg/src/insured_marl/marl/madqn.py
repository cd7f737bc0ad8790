"""Independent deep Q-learners over a discrete set of allocation templates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..env import TradingEnv
from ..insurance import InsuranceConfig, project_to_cap
from .buffer import Experience, ReplayBuffer
from .maddpg import Streams, TrainingDiverged, advance_floors, initial_floors


def default_templates(n_assets: int) -> np.ndarray:
    """``D + 2`` simplex corners: all-cash, uniform over stocks, one-hot per stock."""
    D = n_assets
    rows = [np.eye(D + 1)[D], np.append(np.full(D, 1.0 / D), 0.0)]
    rows += [np.eye(D + 1)[j] for j in range(D)]
    return np.array(rows)


@dataclass(frozen=True)
class DqnConfig:
    episodes: int = 200
    gamma: float = 0.99
    lr: float = 1e-3
    tau: float = 0.01
    batch_size: int = 64
    capacity: int = 100_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_episodes: int = 100
    update_every: int = 1
    hidden: tuple[int, ...] = (64, 64)
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise ValueError("epsilon values must lie in [0, 1]")
        if self.batch_size < 1 or self.capacity < self.batch_size:
            raise ValueError("capacity must hold at least one batch")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    def epsilon(self, episode: int) -> float:
        if self.eps_decay_episodes <= 0:
            return self.eps_end
        frac = min(episode / self.eps_decay_episodes, 1.0)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


@dataclass
class QAgent:
    q: nn.MlpParams
    target_q: nn.MlpParams
    opt: nn.AdamState


@dataclass
class DqnEpisodeLog:
    episode: int
    returns: list[float]
    final_assets: list[float]
    costs: list[float]
    loss: list[float]
    epsilon: float
    counts: np.ndarray  # (N, M) template selections this episode

    def row(self) -> dict:
        out = {"episode": self.episode, "epsilon": repr(self.epsilon)}
        for name in ("returns", "final_assets", "costs", "loss"):
            for k, v in enumerate(getattr(self, name)):
                out[f"{name}_{k}"] = repr(float(v))
        for i, row in enumerate(self.counts):
            for m, c in enumerate(row):
                out[f"count_{i}_{m}"] = int(c)
        return out


@dataclass
class DqnResult:
    agents: list[QAgent]
    templates: np.ndarray
    log: list[DqnEpisodeLog] = field(default_factory=list)


def build_q_agents(n_agents: int, obs_dim: int, n_templates: int, cfg: DqnConfig,
                   rng: np.random.Generator) -> list[QAgent]:
    out = []
    for _ in range(n_agents):
        q = nn.init_mlp([obs_dim, *cfg.hidden, n_templates], ["relu"] * len(cfg.hidden) + ["identity"], rng)
        out.append(QAgent(q, q.copy(), nn.AdamState.zeros_like(q, lr=cfg.lr)))
    return out


def _q_update(agent: QAgent, states, idx, rewards, next_states, done, gamma: float) -> float:
    q_next = nn.predict(agent.target_q, next_states).max(axis=1)
    y = rewards + gamma * (1.0 - done) * q_next
    q, cache = nn.forward(agent.q, states)
    rows = np.arange(len(idx))
    err = q[rows, idx] - y
    upstream = np.zeros_like(q)
    upstream[rows, idx] = 2.0 * err / len(idx)
    grads, _ = nn.backward(agent.q, cache, upstream)
    agent.q, agent.opt = nn.adam_step(agent.q, grads, agent.opt)
    return float(np.mean(err**2))


def madqn_train(env: TradingEnv, cfg: DqnConfig, insurance: InsuranceConfig = InsuranceConfig(),
                templates: np.ndarray | None = None) -> DqnResult:
    """Epsilon-greedy independent DQN per agent on the shared environment."""
    templates = default_templates(env.n_assets) if templates is None else np.asarray(templates, dtype=float)
    M, N = len(templates), env.n_agents
    streams = Streams.from_seed(cfg.seed)
    agents = build_q_agents(N, env.obs_dim, M, cfg, streams.init)
    buffer = ReplayBuffer(cfg.capacity, streams.buffer)
    result = DqnResult(agents, templates)
    steps = 0

    for episode in range(cfg.episodes):
        eps = cfg.epsilon(episode)
        env.reset(seed=int(streams.env.integers(2**31)))
        start = env.assets()
        floors, caps = advance_floors(initial_floors(env, insurance), insurance, start)
        obs = env.joint_observation(caps)
        counts = np.zeros((N, M), dtype=int)
        costs = np.zeros(N)
        losses = [[] for _ in range(N)]
        done = False
        while not done:
            idx = np.empty(N, dtype=int)
            for i, ag in enumerate(agents):
                if streams.noise.random() < eps:
                    idx[i] = streams.noise.integers(M)
                else:
                    idx[i] = int(np.argmax(nn.predict(ag.q, obs[i])))
            counts[np.arange(N), idx] += 1
            actions = [project_to_cap(templates[m], caps[i]) for i, m in enumerate(idx)]
            res = env.step(actions)
            costs += res.costs
            floors, next_caps = advance_floors(floors, insurance, env.assets())
            next_obs = env.joint_observation(next_caps)
            buffer.add(Experience(obs, idx, res.rewards, next_obs, res.done, caps, next_caps))
            obs, caps, done = next_obs, next_caps, res.done
            steps += 1
            if len(buffer) >= cfg.batch_size and steps % cfg.update_every == 0:
                b = buffer.sample(cfg.batch_size)
                for i, ag in enumerate(agents):
                    try:
                        losses[i].append(_q_update(ag, b.state[:, i], b.actions[:, i], b.rewards[:, i],
                                                   b.next_state[:, i], b.done, cfg.gamma))
                    except nn.DivergenceError as exc:
                        raise TrainingDiverged(f"q-agent {i}: {exc}", {"agent": i, "episode": episode}) from exc
                    ag.target_q = nn.soft_update(ag.target_q, ag.q, cfg.tau)

        final = env.assets()
        result.log.append(DqnEpisodeLog(
            episode=episode, returns=list(final - start), final_assets=list(final), costs=list(costs),
            loss=[float(np.mean(l)) if l else float("nan") for l in losses], epsilon=eps, counts=counts))
    return result


class DqnPolicy:
    """Greedy template choice per agent, insurance projection applied."""

    def __init__(self, qnets: list[nn.MlpParams], templates: np.ndarray,
                 insurance: InsuranceConfig = InsuranceConfig()):
        self.qnets = qnets
        self.templates = np.asarray(templates, dtype=float)
        self.insurance = insurance
        self.floors = []

    def reset(self, env: TradingEnv) -> None:
        if env.n_agents != len(self.qnets) or env.obs_dim != self.qnets[0].sizes[0]:
            raise ValueError("Q-networks do not match the environment dimensions")
        if self.templates.shape[1] != env.n_assets + 1:
            raise ValueError("templates do not match the number of assets")
        self.floors = initial_floors(env, self.insurance)

    def __call__(self, env: TradingEnv) -> list[np.ndarray]:
        self.floors, caps = advance_floors(self.floors, self.insurance, env.assets())
        obs = env.joint_observation(caps)
        return [project_to_cap(self.templates[int(np.argmax(nn.predict(q, obs[i])))], caps[i])
                for i, q in enumerate(self.qnets)]
