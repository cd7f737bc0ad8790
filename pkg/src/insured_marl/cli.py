"""Command-line front end: ``init``, ``train``, ``backtest``, ``compare``.

Exit codes: 0 success, 2 configuration/validation error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import evaluate
from .baselines import BuyAndHold, RandomPolicy, UpPolicy
from .config import LEARNED, ConfigError, RunConfig, default_text, dump_text, series_digest, sha256_file
from .env import TradingEnv
from .marl import (ActorPolicy, DqnPolicy, Streams, TrainingDiverged, build_agents, madqn_train, train,
                   write_log)
from .metrics import BacktestReport, compare, read_metrics, write_comparison
from .nn import load_checkpoint, save_checkpoint

log = logging.getLogger("insured_marl")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _overrides(args) -> dict:
    o: dict[str, dict[str, str]] = {}
    if getattr(args, "seed", None) is not None:
        o.setdefault("run", {})["seed"] = str(args.seed)
    if getattr(args, "strategies", None):
        o.setdefault("run", {})["strategies"] = args.strategies
    if getattr(args, "out", None):
        o.setdefault("run", {})["out"] = str(args.out)
    if getattr(args, "data", None):
        o.setdefault("data", {}).update(source="csv", path=str(Path(args.data).resolve()))
    if getattr(args, "synth", False):
        o.setdefault("data", {})["source"] = "synth"
        if args.synth_params:
            p = Path(args.synth_params)
            if not p.is_file():
                raise ConfigError(f"synth params file not found: {p}")
            parser = configparser.ConfigParser(interpolation=None)
            parser.read(p)
            sec = parser["synth"] if parser.has_section("synth") else parser.defaults()
            o["synth"] = dict(sec)
    return o


def _load(args) -> RunConfig:
    return RunConfig.from_file(args.config, _overrides(args))


def _write_manifest(cfg: RunConfig, out: Path, command: str, series, extra: dict | None = None) -> None:
    info = {"version": __version__, "command": command, "seed": str(cfg.seed),
            "data_sha256": series_digest(series)}
    if cfg.get("data", "source") == "csv":
        info["data_file_sha256"] = sha256_file(cfg.data_path)
    info.update(extra or {})
    sections = {"manifest": info, **cfg.raw}
    (out / f"manifest_{command}.cfg").write_text(dump_text(sections))


def cmd_init(args) -> int:
    path = Path(args.out or "default.cfg")
    if path.is_dir() or path.suffix == "":
        path.mkdir(parents=True, exist_ok=True)
        path = path / "default.cfg"
    path.write_text(default_text())
    print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load(args)
    series = cfg.load_series()
    train_s, _ = cfg.split_series(series)
    out = cfg.out
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    env_cfg = cfg.env
    for strategy in (s for s in cfg.strategies if s in LEARNED):
        env = TradingEnv(train_s, env_cfg)
        ins = cfg.strategy_insurance(strategy)
        meta = {"strategy": strategy, "n_agents": env.n_agents, "n_assets": env.n_assets,
                "obs_dim": env.obs_dim, "insurance": vars(ins), "seed": cfg.seed}
        log.info("training %s on %d dates", strategy, train_s.n_dates)
        try:
            if strategy == "madqn":
                res = madqn_train(env, cfg.dqn_config(), ins)
                nets = {f"q{i}": a.q for i, a in enumerate(res.agents)}
                nets.update({f"target_q{i}": a.target_q for i, a in enumerate(res.agents)})
                optim = {f"q{i}": a.opt for i, a in enumerate(res.agents)}
                meta["templates"] = res.templates.tolist()
            else:
                tcfg = cfg.train_config()
                streams = Streams.from_seed(tcfg.seed)
                agents = build_agents(env.n_agents, env.obs_dim, env.n_assets, tcfg, streams.init)
                res = train(env, agents, tcfg, ins, streams)
                nets, optim = {}, {}
                for i, a in enumerate(res.agents):
                    nets.update({f"actor{i}": a.actor, f"critic{i}": a.critic,
                                 f"target_actor{i}": a.target_actor, f"target_critic{i}": a.target_critic})
                    optim.update({f"actor{i}": a.actor_opt, f"critic{i}": a.critic_opt})
                meta["rng"] = {k: getattr(streams, k).bit_generator.state for k in ("noise", "buffer", "env")}
        except TrainingDiverged as exc:
            dump = out / f"diverged_{strategy}.json"
            dump.write_text(json.dumps({"error": str(exc), **exc.dump}, indent=1, default=str))
            print(f"error: training {strategy} diverged ({exc}); diagnostics in {dump}", file=sys.stderr)
            return EXIT_DIVERGED
        save_checkpoint(out / "checkpoints" / f"{strategy}.ckpt", nets, optim, meta)
        write_log(res.log, out / "logs" / f"{strategy}_train.csv")
    _write_manifest(cfg, out, "train", series)
    return EXIT_OK


def _policy(strategy: str, cfg: RunConfig, ckpt_dir: Path, env: TradingEnv):
    if strategy == "up":
        return UpPolicy(cfg.up)
    if strategy == "random":
        return RandomPolicy(int(cfg.get("baseline", "random_seed")))
    if strategy == "buyhold":
        return BuyAndHold(cfg.buyhold_weights(env.n_assets))
    path = ckpt_dir / f"{strategy}.ckpt"
    if not path.is_file():
        raise ConfigError(f"missing checkpoint for {strategy}: {path}")
    nets, _, meta = load_checkpoint(path)
    if meta["n_assets"] != env.n_assets or meta["n_agents"] != env.n_agents or meta["obs_dim"] != env.obs_dim:
        raise ConfigError(f"checkpoint {path} was trained for n_agents={meta['n_agents']}, "
                          f"n_assets={meta['n_assets']}; config gives {env.n_agents}, {env.n_assets}")
    ins = cfg.strategy_insurance(strategy)
    if strategy == "madqn":
        return DqnPolicy([nets[f"q{i}"] for i in range(env.n_agents)], np.array(meta["templates"]), ins)
    return ActorPolicy([nets[f"actor{i}"] for i in range(env.n_agents)], ins)


def cmd_backtest(args) -> int:
    cfg = _load(args)
    series = cfg.load_series()
    _, test_s = cfg.split_series(series)
    ckpt_dir = Path(args.checkpoints) if args.checkpoints else cfg.out / "checkpoints"
    env_cfg = cfg.env
    report = BacktestReport(test_s.asset_ids)
    for strategy in cfg.strategies:
        policy = _policy(strategy, cfg, ckpt_dir, TradingEnv(test_s, env_cfg))
        report.results.append(evaluate(strategy, test_s, env_cfg, policy))
    out = cfg.out / "report"
    report.write(out)
    _write_manifest(cfg, cfg.out, "backtest", series, {"checkpoints": str(ckpt_dir)})
    for row in report.table():
        print(f"{row['strategy']:>12}  AR {row['AR']:+.4f}  SR {row['SR']:+.3f}  MaxD {row['MaxD']:.4f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    tables = {}
    for p in args.reports:
        path = Path(p)
        if path.is_dir():
            path = path / "metrics.csv" if (path / "metrics.csv").is_file() else path / "report" / "metrics.csv"
        if not path.is_file():
            raise ConfigError(f"no metrics table at {p}")
        tables[str(p)] = read_metrics(path)
    rows = compare(tables)
    out = Path(args.out) if args.out else Path("comparison.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_comparison(rows, out)
    for r in rows:
        flag = "*" if r["best"] else " "
        print(f"{r['metric']:>5} {r['rank']:>3} {flag} {r['strategy']:>12} {r['value']:.6g}  ({r['source']})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="insured-marl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="write a default.cfg with every default value")
    s.add_argument("--out", help="file or directory (default: ./default.cfg)")
    s.set_defaults(func=cmd_init)

    for name, func, helptext in (("train", cmd_train, "train the learning strategies"),
                                 ("backtest", cmd_backtest, "evaluate strategies on the test window")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--out", help="output directory (overrides run.out)")
        s.add_argument("--seed", type=int, help="overrides run.seed")
        s.add_argument("--strategies", help="comma list, overrides run.strategies")
        s.add_argument("--data", help="CSV price file (sets data.source=csv)")
        s.add_argument("--synth", action="store_true", help="use synthetic GBM data")
        s.add_argument("--synth-params", help="key-value file with a [synth] section")
        if name == "backtest":
            s.add_argument("--checkpoints", help="checkpoint directory (default: <out>/checkpoints)")
        s.set_defaults(func=func)

    s = sub.add_parser("compare", help="rank strategies across backtest reports")
    s.add_argument("reports", nargs="+", help="report directories or metrics.csv files")
    s.add_argument("--out", help="output CSV (default: ./comparison.csv)")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
