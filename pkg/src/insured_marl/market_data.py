"""Price series loading, synthesis and train/test windowing."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

TRADING_DAYS = 252


@dataclass(frozen=True)
class MarketSeries:
    """Aligned close prices: ``prices[t, d]`` is asset ``asset_ids[d]`` on ``dates[t]``."""

    asset_ids: tuple[str, ...]
    dates: tuple[str, ...]
    prices: np.ndarray = field(repr=False)

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2:
            raise ValueError("prices must be a T x D matrix")
        T, D = prices.shape
        if D < 1 or T < 2:
            raise ValueError(f"need at least one asset and two dates, got T={T}, D={D}")
        if len(self.asset_ids) != D or len(self.dates) != T:
            raise ValueError("asset_ids/dates do not match the price matrix shape")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError("prices must be finite and strictly positive")
        if any(a >= b for a, b in zip(self.dates[:-1], self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def n_dates(self) -> int:
        return self.prices.shape[0]

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    def window(self, start: int, stop: int) -> "MarketSeries":
        """Row slice ``[start, stop)`` as a new series."""
        return MarketSeries(self.asset_ids, self.dates[start:stop], self.prices[start:stop])


@dataclass(frozen=True)
class CsvSchema:
    date: str = "date"
    asset: str = "asset"
    close: str = "close"


@dataclass(frozen=True)
class SplitSpec:
    train_start: str
    train_end: str
    test_start: str
    test_end: str

    def __post_init__(self):
        if self.train_start > self.train_end or self.test_start > self.test_end:
            raise ValueError("window start must not come after its end")
        if self.train_end >= self.test_start:
            raise ValueError("train window must precede and not overlap the test window")


def load_csv(path, schema: CsvSchema = CsvSchema(), assets: Sequence[str] | None = None) -> MarketSeries:
    """Read long-format ``(date, asset, close)`` rows and inner-join on dates.

    Only dates on which every requested asset (all assets in the file when
    ``assets`` is None) has a price are kept. Asset order follows first
    appearance in the file unless ``assets`` fixes it.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")

    quotes: dict[str, dict[str, float]] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (schema.date, schema.asset, schema.close):
            if col not in header:
                raise ValueError(f"{path}: missing column {col!r} (header: {header})")
        for row in reader:
            line = reader.line_num
            try:
                date = np.datetime64(row[schema.date].strip(), "D")
                asset = row[schema.asset].strip()
                price = float(row[schema.close])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: unparsable row at line {line}: {exc}") from None
            if not asset:
                raise ValueError(f"{path}: empty asset id at line {line}")
            if not np.isfinite(price) or price <= 0:
                raise ValueError(f"{path}: non-positive price at line {line}")
            quotes.setdefault(asset, {})[str(date)] = price

    ids = list(assets) if assets is not None else list(quotes)
    missing = [a for a in ids if a not in quotes]
    if missing:
        raise ValueError(f"{path}: assets not present in file: {missing}")
    if not ids:
        raise ValueError(f"{path}: file has no rows")

    common = set(quotes[ids[0]])
    for a in ids[1:]:
        common &= set(quotes[a])
    if not common:
        raise ValueError(f"{path}: empty intersection of dates across assets")
    dates = sorted(common)
    prices = np.array([[quotes[a][d] for a in ids] for d in dates])
    return MarketSeries(tuple(ids), tuple(dates), prices)


def save_csv(series: MarketSeries, path, schema: CsvSchema = CsvSchema()) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([schema.date, schema.asset, schema.close])
        for t, d in enumerate(series.dates):
            for j, a in enumerate(series.asset_ids):
                w.writerow([d, a, repr(float(series.prices[t, j]))])


def business_days(start: str, n: int) -> tuple[str, ...]:
    """``n`` consecutive weekdays from ``start`` (rolled forward) as ISO strings."""
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return tuple(str(d) for d in days)


def synth_gbm(D: int, T: int, mu=0.0, sigma=0.2, s0=100.0, seed: int = 0,
              start: str = "2018-01-01") -> MarketSeries:
    """Independent geometric Brownian motion paths, daily step ``dt = 1/252``.

    ``mu``, ``sigma`` and ``s0`` are scalars or length-``D`` vectors (annual
    drift, annual volatility, initial price). Row 0 equals ``s0``.
    """
    if D < 1 or T < 2:
        raise ValueError("need D >= 1 and T >= 2")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (D,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (D,))
    s0 = np.broadcast_to(np.asarray(s0, dtype=float), (D,))
    if np.any(s0 <= 0):
        raise ValueError("s0 must be strictly positive")
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")

    dt = 1.0 / TRADING_DAYS
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((T - 1, D))
    log_steps = (mu - 0.5 * sigma**2) * dt + sigma * np.sqrt(dt) * z
    log_path = np.vstack([np.zeros((1, D)), np.cumsum(log_steps, axis=0)])
    prices = s0 * np.exp(log_path)
    ids = tuple(f"A{j:03d}" for j in range(D))
    return MarketSeries(ids, business_days(start, T), prices)


def inject_crash(series: MarketSeries, start: int, length: int, drop: float) -> MarketSeries:
    """Multiply every asset by a geometric glide reaching ``1 - drop`` over ``length`` days.

    Prices from ``start + length`` onwards stay scaled by ``1 - drop``.
    """
    if not 0 < drop < 1:
        raise ValueError("drop must be in (0, 1)")
    if start < 1 or length < 1 or start + length > series.n_dates:
        raise ValueError("crash window must lie inside the series after the first date")
    T = series.n_dates
    factor = np.ones(T)
    daily = (1.0 - drop) ** (1.0 / length)
    for t in range(start, T):
        factor[t] = daily ** min(t - start + 1, length)
    return MarketSeries(series.asset_ids, series.dates, series.prices * factor[:, None])


def split(series: MarketSeries, spec: SplitSpec) -> tuple[MarketSeries, MarketSeries]:
    """Cut ``series`` into the inclusive train and test date windows of ``spec``."""
    dates = np.array(series.dates)
    train = (dates >= spec.train_start) & (dates <= spec.train_end)
    test = (dates >= spec.test_start) & (dates <= spec.test_end)
    if not train.any():
        raise ValueError("empty train window")
    if not test.any():
        raise ValueError("empty test window")
    i_tr, i_te = np.flatnonzero(train), np.flatnonzero(test)
    return (series.window(i_tr[0], i_tr[-1] + 1), series.window(i_te[0], i_te[-1] + 1))


def split_index(series: MarketSeries, n_train: int) -> SplitSpec:
    """SplitSpec putting the first ``n_train`` dates in train and the rest in test."""
    if not 0 < n_train < series.n_dates:
        raise ValueError("n_train must leave at least one date on each side")
    d = series.dates
    return SplitSpec(d[0], d[n_train - 1], d[n_train], d[-1])
