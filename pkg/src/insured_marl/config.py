"""Layered key-value run configuration (INI sections) and its typed view."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import UpConfig
from .env import EnvConfig
from .insurance import InsuranceConfig
from .market_data import (CsvSchema, MarketSeries, SplitSpec, inject_crash, load_csv, split, split_index,
                          synth_gbm)
from .marl import DqnConfig, TrainConfig

STRATEGIES = ("maddpg", "cppi-maddpg", "tipp-maddpg", "madqn", "up", "random", "buyhold")
LEARNED = ("maddpg", "cppi-maddpg", "tipp-maddpg", "madqn")
INSURANCE_OF = {"maddpg": "none", "cppi-maddpg": "cppi", "tipp-maddpg": "tipp"}


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, str]] = {
    "run": {"strategies": ",".join(STRATEGIES), "out": "runs/default", "seed": "0"},
    "data": {"source": "synth", "path": "", "date_col": "date", "asset_col": "asset", "close_col": "close"},
    "synth": {"n_assets": "5", "n_dates": "504", "mu": "0.1", "sigma": "0.2", "s0": "100.0", "seed": "0",
              "start": "2018-01-01", "crash_start": "0", "crash_length": "10", "crash_drop": "0.3"},
    "split": {"train_start": "", "train_end": "", "test_start": "", "test_end": "", "train_fraction": "0.75"},
    "env": {"n_agents": "2", "initial_cash": "1000000.0", "cost_rate": "0.001", "reward_scale": "0.0001"},
    "insurance": {"kind": "none", "k": "2.0", "f0": "0.8", "phi": "0.8"},
    "train": {"episodes": "200", "gamma": "0.99", "lambda": "0.9", "tau": "0.01", "batch_size": "64",
              "capacity": "100000", "noise_sigma": "0.3", "noise_decay": "0.995", "update_every": "1"},
    "agent": {"actor_hidden": "64,64", "critic_hidden": "128,64", "actor_lr": "0.0001", "critic_lr": "0.001"},
    "madqn": {"lr": "0.001", "hidden": "64,64", "eps_start": "1.0", "eps_end": "0.05", "eps_decay_episodes": "100"},
    "baseline": {"up_mode": "auto", "up_resolution": "21", "up_samples": "10000", "up_seed": "0",
                 "random_seed": "0", "buyhold_weights": "uniform"},
}


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def default_text() -> str:
    return dump_text(DEFAULTS)


def dump_text(sections: dict[str, dict[str, str]]) -> str:
    lines = []
    for sec, kv in sections.items():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {v}" for k, v in kv.items()]
        lines.append("")
    return "\n".join(lines)


@dataclass
class RunConfig:
    raw: dict[str, dict[str, str]]
    path: Path | None = None
    strategies: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        try:
            self.strategies = tuple(s.strip() for s in self.get("run", "strategies").split(",") if s.strip())
            bad = [s for s in self.strategies if s not in STRATEGIES]
            if bad:
                raise ConfigError(f"unknown strategies {bad}; choose from {list(STRATEGIES)}")
            if not self.strategies:
                raise ConfigError("no strategies configured")
            # build every typed view once so bad values fail at load time
            self.env, self.insurance, self.up
            self.train_config()
            self.dqn_config()
            if self.get("baseline", "buyhold_weights").strip() not in ("uniform", "cash", "stocks"):
                _floats(self.get("baseline", "buyhold_weights"))
            if self.get("data", "source") not in ("csv", "synth"):
                raise ConfigError("data.source must be 'csv' or 'synth'")
            if self.get("data", "source") == "csv":
                p = self.data_path
                if not p.is_file():
                    raise ConfigError(f"data file not found: {p}")
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path, overrides: dict[str, dict[str, str]] | None = None) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        raw = {sec: dict(kv) for sec, kv in DEFAULTS.items()}
        for sec in parser.sections():
            if sec == "manifest":
                continue
            if sec not in raw:
                raise ConfigError(f"{path}: unknown section [{sec}]")
            for k, v in parser.items(sec):
                if k not in raw[sec]:
                    raise ConfigError(f"{path}: unknown key {sec}.{k}")
                raw[sec][k] = v
        for sec, kv in (overrides or {}).items():
            raw[sec].update(kv)
        return cls(raw, path)

    def get(self, sec: str, key: str) -> str:
        return self.raw[sec][key]

    def text(self) -> str:
        return dump_text(self.raw)

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed"))

    @property
    def out(self) -> Path:
        return Path(self.get("run", "out"))

    @property
    def data_path(self) -> Path:
        p = Path(self.get("data", "path"))
        if not p.is_absolute() and self.path is not None and not p.exists():
            p = self.path.parent / p
        return p

    @property
    def env(self) -> EnvConfig:
        e = self.raw["env"]
        return EnvConfig(int(e["n_agents"]), float(e["initial_cash"]), float(e["cost_rate"]),
                         float(e["reward_scale"]))

    @property
    def insurance(self) -> InsuranceConfig:
        return self.insurance_for(self.get("insurance", "kind"))

    def insurance_for(self, kind: str) -> InsuranceConfig:
        i = self.raw["insurance"]
        return InsuranceConfig(kind, float(i["k"]), float(i["f0"]), float(i["phi"]))

    def strategy_insurance(self, strategy: str) -> InsuranceConfig:
        """MADDPG variants fix their own kind; ``insurance.kind`` applies to MADQN."""
        return self.insurance_for(INSURANCE_OF.get(strategy, self.get("insurance", "kind")))

    @property
    def up(self) -> UpConfig:
        b = self.raw["baseline"]
        return UpConfig(b["up_mode"], int(b["up_resolution"]), int(b["up_samples"]), int(b["up_seed"]))

    def train_config(self) -> TrainConfig:
        t, a = self.raw["train"], self.raw["agent"]
        return TrainConfig(
            episodes=int(t["episodes"]), gamma=float(t["gamma"]), lam=float(t["lambda"]), tau=float(t["tau"]),
            batch_size=int(t["batch_size"]), capacity=int(t["capacity"]), noise_sigma=float(t["noise_sigma"]),
            noise_decay=float(t["noise_decay"]), update_every=int(t["update_every"]),
            actor_lr=float(a["actor_lr"]), critic_lr=float(a["critic_lr"]),
            actor_hidden=_ints(a["actor_hidden"]), critic_hidden=_ints(a["critic_hidden"]), seed=self.seed)

    def dqn_config(self) -> DqnConfig:
        t, q = self.raw["train"], self.raw["madqn"]
        return DqnConfig(
            episodes=int(t["episodes"]), gamma=float(t["gamma"]), lr=float(q["lr"]), tau=float(t["tau"]),
            batch_size=int(t["batch_size"]), capacity=int(t["capacity"]), eps_start=float(q["eps_start"]),
            eps_end=float(q["eps_end"]), eps_decay_episodes=int(q["eps_decay_episodes"]),
            update_every=int(t["update_every"]), hidden=_ints(q["hidden"]), seed=self.seed)

    def buyhold_weights(self, n_assets: int) -> np.ndarray:
        spec = self.get("baseline", "buyhold_weights").strip()
        if spec == "uniform":
            return np.full(n_assets + 1, 1.0 / (n_assets + 1))
        if spec == "cash":
            return np.eye(n_assets + 1)[n_assets]
        if spec == "stocks":
            return np.append(np.full(n_assets, 1.0 / n_assets), 0.0)
        w = np.array(_floats(spec))
        if len(w) != n_assets + 1:
            raise ConfigError(f"baseline.buyhold_weights needs {n_assets + 1} values")
        return w

    def load_series(self) -> MarketSeries:
        if self.get("data", "source") == "csv":
            d = self.raw["data"]
            return load_csv(self.data_path, CsvSchema(d["date_col"], d["asset_col"], d["close_col"]))
        s = self.raw["synth"]
        D = int(s["n_assets"])
        series = synth_gbm(D, int(s["n_dates"]), _floats(s["mu"]) if "," in s["mu"] else float(s["mu"]),
                           _floats(s["sigma"]) if "," in s["sigma"] else float(s["sigma"]),
                           _floats(s["s0"]) if "," in s["s0"] else float(s["s0"]), int(s["seed"]), s["start"])
        if int(s["crash_start"]) > 0:
            series = inject_crash(series, int(s["crash_start"]), int(s["crash_length"]), float(s["crash_drop"]))
        return series

    def split_series(self, series: MarketSeries) -> tuple[MarketSeries, MarketSeries]:
        sp = self.raw["split"]
        if all(sp[k] for k in ("train_start", "train_end", "test_start", "test_end")):
            spec = SplitSpec(sp["train_start"], sp["train_end"], sp["test_start"], sp["test_end"])
        else:
            spec = split_index(series, int(round(float(sp["train_fraction"]) * series.n_dates)))
        return split(series, spec)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def series_digest(series: MarketSeries) -> str:
    h = hashlib.sha256()
    h.update("\n".join(series.asset_ids).encode())
    h.update("\n".join(series.dates).encode())
    h.update(np.ascontiguousarray(series.prices).tobytes())
    return h.hexdigest()
