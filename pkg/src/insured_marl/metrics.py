"""Backtest statistics and report files.

Conventions: 252 trading days per year, daily simple returns, zero
risk-free rate, sample standard deviation for the Sharpe ratio.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

TRADING_DAYS = 252
SPARSITY_THRESHOLD = 0.01


@dataclass(frozen=True)
class EquityCurve:
    dates: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError("an equity curve needs at least two points")
        if len(self.dates) != len(v):
            raise ValueError("dates and values differ in length")
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("equity values must be finite and positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dates", tuple(self.dates))


def _values(curve) -> np.ndarray:
    if isinstance(curve, EquityCurve):
        return curve.values
    v = np.asarray(curve, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise ValueError("an equity curve needs at least two points")
    if np.any(v <= 0):
        raise ValueError("equity values must be positive")
    return v


def annual_return(curve, convention: str = "cagr") -> float:
    """Annualised return; ``"cagr"`` compounds, ``"simple"`` scales the total return linearly."""
    v = _values(curve)
    periods = len(v) - 1
    growth = v[-1] / v[0]
    if convention == "cagr":
        return float(growth ** (TRADING_DAYS / periods) - 1.0)
    if convention == "simple":
        return float((growth - 1.0) * TRADING_DAYS / periods)
    raise ValueError(f"unknown annual-return convention {convention!r}")


def sharpe_ratio(curve) -> float:
    """Annualised Sharpe ratio of daily simple returns; NaN when volatility vanishes."""
    v = _values(curve)
    if len(v) < 3:
        raise ValueError("the Sharpe ratio needs at least three points")
    r = v[1:] / v[:-1] - 1.0
    mu = r.mean()
    sd = r.std(ddof=1)
    # float noise on a constant-return series is far below this level
    if sd <= 1e-12 * max(1.0, abs(mu)):
        return math.nan
    return float(mu / sd * math.sqrt(TRADING_DAYS))


def max_drawdown(curve) -> float:
    v = _values(curve)
    peak = np.maximum.accumulate(v)
    return float(np.max((peak - v) / peak))


def allocation_matrix(actions: Sequence) -> np.ndarray:
    """Stack per-step weight vectors into a ``time x (D + 1)`` matrix."""
    m = np.array([np.asarray(a, dtype=float) for a in actions])
    if m.ndim != 2:
        raise ValueError("all weight vectors must have the same length")
    return m


def sparsity(matrix: np.ndarray, threshold: float = SPARSITY_THRESHOLD, risky_only: bool = True) -> float:
    """Fraction of entries below ``threshold`` (risky columns only by default)."""
    m = np.asarray(matrix, dtype=float)
    block = m[..., :-1] if risky_only else m
    return float(np.mean(block < threshold))


@dataclass
class StrategyResult:
    name: str
    curve: EquityCurve
    # (T-1, N, D+1) executed weights per step and agent
    allocations: np.ndarray
    costs: float = 0.0

    def metrics(self, convention: str = "cagr") -> dict[str, float]:
        return {"AR": annual_return(self.curve, convention), "SR": sharpe_ratio(self.curve),
                "MaxD": max_drawdown(self.curve)}


@dataclass
class BacktestReport:
    asset_ids: tuple[str, ...]
    results: list[StrategyResult] = field(default_factory=list)
    convention: str = "cagr"

    def table(self) -> list[dict]:
        rows = []
        for r in self.results:
            m = r.metrics(self.convention)
            rows.append({"strategy": r.name, **m, "sparsity": sparsity(r.allocations)})
        return rows

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "metrics.csv", out / "equity.csv"]
        with paths[0].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["strategy", "AR", "SR", "MaxD", "sparsity"])
            for row in self.table():
                w.writerow([row["strategy"]] + [repr(float(row[k])) for k in ("AR", "SR", "MaxD", "sparsity")])
        if self.results:
            dates = self.results[0].curve.dates
            with paths[1].open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["date"] + [r.name for r in self.results])
                for t, d in enumerate(dates):
                    w.writerow([d] + [repr(float(r.curve.values[t])) for r in self.results])
            for r in self.results:
                p = out / f"allocations_{r.name}.csv"
                with p.open("w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["date", "agent", *self.asset_ids, "cash"])
                    for t in range(r.allocations.shape[0]):
                        for i in range(r.allocations.shape[1]):
                            w.writerow([dates[t], i] + [repr(float(x)) for x in r.allocations[t, i]])
                paths.append(p)
        return paths


def read_metrics(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("strategy", "AR", "SR", "MaxD"):
            if col not in header:
                raise ValueError(f"{path}: not a metrics table (missing column {col!r})")
        return [{"strategy": r["strategy"], "AR": float(r["AR"]), "SR": float(r["SR"]),
                 "MaxD": float(r["MaxD"])} for r in reader]


# metric -> True when larger is better
RANKING = {"AR": True, "SR": True, "MaxD": False}


def compare(tables: dict[str, list[dict]]) -> list[dict]:
    """Rank strategies from several metric tables, one block per metric.

    ``tables`` maps a source label to its rows. Returns long-format rows
    ``(metric, rank, strategy, source, value, best)``; AR and SR rank
    descending, MaxD ascending. NaN values rank last and are never best.
    """
    if not tables:
        raise ValueError("need at least one report")
    entries = [(src, row) for src, rows in tables.items() for row in rows]
    out = []
    for metric, larger in RANKING.items():
        def key(e):
            v = e[1][metric]
            return (math.isnan(v), -v if larger else v)
        ranked = sorted(entries, key=key)
        best = None if not ranked or math.isnan(ranked[0][1][metric]) else ranked[0][1][metric]
        for rank, (src, row) in enumerate(ranked, 1):
            out.append({"metric": metric, "rank": rank, "strategy": row["strategy"], "source": src,
                        "value": row[metric], "best": best is not None and row[metric] == best})
    return out


def write_comparison(rows: list[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "rank", "strategy", "source", "value", "best"])
        for r in rows:
            w.writerow([r["metric"], r["rank"], r["strategy"], r["source"], repr(float(r["value"])),
                        int(r["best"])])
