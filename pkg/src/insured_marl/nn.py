"""Small dense networks in plain numpy: forward, exact backprop, Adam, target mixing.

Weights are stored ``(fan_in, fan_out)`` so a batch ``x`` of shape
``(B, fan_in)`` maps to ``x @ W + b``. All routines accept a single vector
as well as a batch.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "softmax", "identity")


class DivergenceError(FloatingPointError):
    """Raised when a gradient or parameter update is NaN or infinite."""


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...]

    def __post_init__(self):
        self.activations = tuple(self.activations)
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have equal length")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"layer {l}: weight {W.shape} incompatible with bias {b.shape}")
            if l and W.shape[0] != self.weights[l - 1].shape[1]:
                raise ValueError(f"layer {l}: input dim {W.shape[0]} != previous output dim")

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.activations)

    def map(self, fn: Callable[..., np.ndarray], *others: "MlpParams") -> "MlpParams":
        """Apply ``fn`` arraywise across this and ``others`` (same shapes)."""
        ws = [fn(*a) for a in zip(self.weights, *(o.weights for o in others))]
        bs = [fn(*a) for a in zip(self.biases, *(o.biases for o in others))]
        return MlpParams(ws, bs, self.activations)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "MlpParams":
        vec = np.asarray(vec, dtype=float)
        out, i = self.copy(), 0
        for a in out.arrays():
            a[...] = vec[i:i + a.size].reshape(a.shape)
            i += a.size
        if i != vec.size:
            raise ValueError("flat vector length does not match parameter count")
        return out


def init_mlp(sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> MlpParams:
    """Uniform ``+-1/sqrt(fan_in)`` initialisation for weights and biases."""
    if len(sizes) != len(activations) + 1:
        raise ValueError("need one activation per layer")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpParams(weights, biases, tuple(activations))


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    if act == "softmax":
        e = np.exp(z - z.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    return z


def _activate_backward(z: np.ndarray, y: np.ndarray, g: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return g * (z > 0)
    if act == "tanh":
        return g * (1.0 - y * y)
    if act == "softmax":
        return y * (g - (g * y).sum(axis=-1, keepdims=True))
    return g


@dataclass
class ForwardCache:
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)
    single: bool = False

    @property
    def logits(self) -> np.ndarray:
        """Pre-activation of the last layer."""
        z = self.pre[-1]
        return z[0] if self.single else z


def forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[-1] != params.weights[0].shape[0]:
        raise ValueError(f"input dim {h.shape[-1]} != network input dim {params.weights[0].shape[0]}")
    cache = ForwardCache(single=single)
    for W, b, act in zip(params.weights, params.biases, params.activations):
        z = h @ W + b
        cache.inputs.append(h)
        cache.pre.append(z)
        h = _activate(z, act)
        cache.post.append(h)
    return (h[0] if single else h), cache


def predict(params: MlpParams, x) -> np.ndarray:
    return forward(params, x)[0]


def backward(params: MlpParams, cache: ForwardCache, upstream) -> tuple[MlpParams, np.ndarray]:
    """Gradients of ``sum(upstream * output)`` w.r.t. parameters and input.

    For a batch, parameter gradients are summed over rows; scale
    ``upstream`` by ``1/B`` for a batch mean.
    """
    g = np.asarray(upstream, dtype=float)
    if cache.single:
        g = g[None, :]
    if g.shape != cache.post[-1].shape:
        raise ValueError(f"upstream shape {g.shape} does not match output {cache.post[-1].shape}")
    n = len(params.weights)
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for l in range(n - 1, -1, -1):
        g = _activate_backward(cache.pre[l], cache.post[l], g, params.activations[l])
        gw[l] = cache.inputs[l].T @ g
        gb[l] = g.sum(axis=0)
        g = g @ params.weights[l].T
    dx = g[0] if cache.single else g
    return MlpParams(gw, gb, params.activations), dx


def numerical_gradient(f: Callable[[MlpParams], float], params: MlpParams, h: float = 1e-5) -> MlpParams:
    """Central-difference gradient of scalar ``f`` at ``params``."""
    base = params.flat()
    grad = np.empty_like(base)
    for k in range(base.size):
        e = base.copy()
        e[k] = base[k] + h
        up = f(params.with_flat(e))
        e[k] = base[k] - h
        down = f(params.with_flat(e))
        grad[k] = (up - down) / (2 * h)
    return params.with_flat(grad)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams, lr: float = 1e-3, **kw) -> "AdamState":
        zero = params.map(np.zeros_like)
        return cls(m=zero, v=zero.copy(), lr=lr, **kw)


def _check_finite(p: MlpParams, what: str) -> None:
    for a in p.arrays():
        if not np.all(np.isfinite(a)):
            raise DivergenceError(f"non-finite values in {what}")


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState) -> tuple[MlpParams, AdamState]:
    _check_finite(grads, "gradients")
    if [a.shape for a in grads.arrays()] != [a.shape for a in params.arrays()]:
        raise ValueError("gradient shapes do not match parameters")
    b1, b2 = state.beta1, state.beta2
    t = state.t + 1
    m = state.m.map(lambda m_, g: b1 * m_ + (1 - b1) * g, grads)
    v = state.v.map(lambda v_, g: b2 * v_ + (1 - b2) * g * g, grads)
    c1, c2 = 1 - b1**t, 1 - b2**t
    new = params.map(lambda p, m_, v_: p - state.lr * (m_ / c1) / (np.sqrt(v_ / c2) + state.eps), m, v)
    _check_finite(new, "parameters after Adam step")
    return new, AdamState(m, v, t, state.lr, b1, b2, state.eps)


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """``tau * online + (1 - tau) * target``, arraywise."""
    if not 0 <= tau <= 1:
        raise ValueError("tau must lie in [0, 1]")
    if [a.shape for a in target.arrays()] != [a.shape for a in online.arrays()]:
        raise ValueError("target and online networks differ in shape")
    return target.map(lambda tg, on: tau * on + (1.0 - tau) * tg, online)


# -- checkpoint container ---------------------------------------------------

_EPOCH = (1980, 1, 1, 0, 0, 0)


def _put(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, data)


def _npy_bytes(a: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(a), allow_pickle=False)
    return buf.getvalue()


def save_checkpoint(path, nets: dict[str, MlpParams], optim: dict[str, AdamState] | None = None,
                    meta: dict | None = None) -> None:
    """Write networks, optimiser moments and JSON metadata into one zip file.

    The layout is ``meta.json`` plus one ``.npy`` member per array. Entry
    timestamps are fixed so identical inputs give identical bytes.
    """
    optim = optim or {}
    header = {"meta": meta or {}, "nets": {}, "optim": {}}
    arrays: dict[str, np.ndarray] = {}
    for name, p in nets.items():
        header["nets"][name] = {"sizes": p.sizes, "activations": list(p.activations)}
        for k, a in enumerate(p.arrays()):
            arrays[f"nets/{name}/{k}"] = a
    for name, st in optim.items():
        header["optim"][name] = {"t": st.t, "lr": st.lr, "beta1": st.beta1, "beta2": st.beta2,
                                 "eps": st.eps, "activations": list(st.m.activations)}
        for k, (am, av) in enumerate(zip(st.m.arrays(), st.v.arrays())):
            arrays[f"optim/{name}/m/{k}"] = am
            arrays[f"optim/{name}/v/{k}"] = av
    with zipfile.ZipFile(Path(path), "w") as zf:
        _put(zf, "meta.json", json.dumps(header, sort_keys=True, indent=1).encode())
        for key in sorted(arrays):
            _put(zf, key + ".npy", _npy_bytes(arrays[key]))


def _rebuild(read, prefix: str, activations) -> MlpParams:
    n = len(activations)
    arrs = [read(f"{prefix}/{k}") for k in range(2 * n)]
    return MlpParams(arrs[0::2], arrs[1::2], tuple(activations))


def load_checkpoint(path) -> tuple[dict[str, MlpParams], dict[str, AdamState], dict]:
    with zipfile.ZipFile(Path(path)) as zf:
        header = json.loads(zf.read("meta.json"))

        def read(key):
            return np.lib.format.read_array(io.BytesIO(zf.read(key + ".npy")), allow_pickle=False)

        nets = {name: _rebuild(read, f"nets/{name}", info["activations"])
                for name, info in header["nets"].items()}
        optim = {}
        for name, info in header["optim"].items():
            acts = info["activations"]
            optim[name] = AdamState(m=_rebuild(read, f"optim/{name}/m", acts),
                                    v=_rebuild(read, f"optim/{name}/v", acts),
                                    t=info["t"], lr=info["lr"], beta1=info["beta1"],
                                    beta2=info["beta2"], eps=info["eps"])
    return nets, optim, header["meta"]
