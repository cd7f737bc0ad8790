"""CPPI / TIPP floor accounting and the risky-mass projection applied to actions.

Both strategies split total asset ``A`` into a floor ``F`` and a cushion
``A - F``; the risky exposure is ``k`` times the cushion. CPPI keeps the
floor fixed at its initial value, TIPP ratchets it to ``max(phi * A, F)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("none", "cppi", "tipp")


@dataclass(frozen=True)
class InsuranceConfig:
    kind: str = "none"
    k: float = 2.0
    f0: float = 0.8
    phi: float = 0.8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"insurance kind must be one of {KINDS}, got {self.kind!r}")
        if not self.k > 0:
            raise ValueError("risk multiplier k must be > 0")
        for name in ("f0", "phi"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


@dataclass(frozen=True)
class FloorState:
    floor: float
    last_asset: float


def init_floor(cfg: InsuranceConfig, a0: float) -> FloorState:
    if not a0 > 0:
        raise ValueError("initial asset must be positive")
    if cfg.kind == "cppi":
        floor = cfg.f0 * a0
    elif cfg.kind == "tipp":
        floor = cfg.phi * a0
    else:
        floor = 0.0
    return FloorState(floor=floor, last_asset=a0)


def update_floor(state: FloorState, cfg: InsuranceConfig, a_t: float) -> FloorState:
    """Ratchet the TIPP floor; CPPI and ``none`` floors never move."""
    if a_t < 0:
        raise ValueError("asset value cannot be negative")
    if cfg.kind == "tipp":
        return FloorState(floor=max(cfg.phi * a_t, state.floor), last_asset=a_t)
    return FloorState(floor=state.floor, last_asset=a_t)


def risky_budget(state: FloorState, cfg: InsuranceConfig, a_t: float) -> float:
    """Currency amount allowed in risky assets: ``k * (A - F)`` clamped to ``[0, A]``.

    With ``kind='none'`` the whole asset is available.
    """
    if a_t < 0:
        raise ValueError("asset value cannot be negative")
    if cfg.kind == "none":
        return float(a_t)
    return float(min(max(cfg.k * (a_t - state.floor), 0.0), a_t))


def risky_cap(state: FloorState, cfg: InsuranceConfig, a_t: float) -> float:
    """Budget as a fraction of total asset, i.e. the maximum risky weight mass."""
    if not a_t > 0:
        return 0.0
    return min(risky_budget(state, cfg, a_t) / a_t, 1.0)


def project_action(a, budget: float, a_t: float) -> np.ndarray:
    """Shrink the risky weights of ``a`` (last slot is cash) onto a risky-mass cap.

    The cap is ``budget / a_t``. Feasible actions come back unchanged; otherwise
    every risky weight is scaled by the same factor and the released mass
    moves to cash. The scaled risky mass never exceeds the cap, so projecting
    twice gives the same vector.
    """
    if not a_t > 0:
        raise ValueError("total asset must be positive to project an action")
    return project_to_cap(a, budget / a_t)


def project_to_cap(a, cap: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    risky = a[:-1]
    mass = risky.sum()
    if mass <= cap:
        return a.copy()
    out = np.empty_like(a)
    if cap <= 0:
        out[:-1] = 0.0
        out[-1] = 1.0
        return out
    scale = cap / mass
    scaled = risky * scale
    # rounding can leave the scaled mass a few ulps above the cap
    while scaled.sum() > cap:
        scale = np.nextafter(scale, 0.0)
        scaled = risky * scale
    out[:-1] = scaled
    out[-1] = 1.0 - scaled.sum()
    return out


def project_vjp(a, cap: float, upstream) -> np.ndarray:
    """Vector-Jacobian product of :func:`project_to_cap` at ``a``.

    Returns ``upstream @ d(project)/d(a)``. When the cap binds, the output
    cash weight is the constant ``1 - cap`` and risky outputs are
    ``cap * a_r / sum(a_r)``.
    """
    a = np.asarray(a, dtype=float)
    g = np.asarray(upstream, dtype=float)
    mass = a[:-1].sum()
    if mass <= cap:
        return g.copy()
    out = np.zeros_like(a)
    if cap <= 0:
        return out
    g_r = g[:-1]
    out[:-1] = cap / mass * (g_r - g_r @ a[:-1] / mass)
    return out


def project_rows(actions: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Batched :func:`project_to_cap` for learning updates (no ulp correction)."""
    actions = np.asarray(actions, dtype=float)
    caps = np.asarray(caps, dtype=float)
    mass = actions[:, :-1].sum(axis=1)
    active = mass > caps
    if not active.any():
        return actions.copy()
    scale = np.where(active, caps / np.where(mass > 0, mass, 1.0), 1.0)
    out = actions.copy()
    out[:, :-1] *= scale[:, None]
    out[active, -1] = 1.0 - caps[active]
    return out


def project_rows_vjp(actions: np.ndarray, caps: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Row-wise :func:`project_vjp`."""
    actions = np.asarray(actions, dtype=float)
    g = np.asarray(upstream, dtype=float)
    caps = np.asarray(caps, dtype=float)
    mass = actions[:, :-1].sum(axis=1)
    active = mass > caps
    if not active.any():
        return g.copy()
    out = g.copy()
    safe = np.where(mass > 0, mass, 1.0)
    g_r = g[:, :-1]
    inner = (g_r * actions[:, :-1]).sum(axis=1) / safe
    scaled = (np.clip(caps, 0.0, None) / safe)[:, None] * (g_r - inner[:, None])
    out[active, :-1] = scaled[active]
    out[active, -1] = 0.0
    return out
