"""Truncated fully connected ReLU score networks.

The network maps ``(x, t)`` in R^(d+1) to R^d through ``depth`` hidden ReLU
layers of ``width`` units.  The raw output is passed coordinate-wise through
the truncation ``tau(z; rho) = sign(z) * min(|z|, rho)`` with the
time-dependent threshold ``rho(t) = trunc_B * sqrt(log(W*L)) / sigma_t``.

Exact reverse-mode gradients are provided by the kernel backend; the
truncation backpropagates as identity strictly inside the clip and zero
outside, and the ReLU subgradient at the kink is 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, FormatError, NumericError
from .schedule import NoiseSchedule, m_sigma

_CKPT_FORMAT = "scorelab-checkpoint-v1"


@dataclass
class ScoreNetwork:
    width: int
    depth: int
    input_dim: int
    output_dim: int
    trunc_B: float
    schedule: NoiseSchedule
    As: list[np.ndarray] = field(default_factory=list)
    bs: list[np.ndarray] = field(default_factory=list)

    @property
    def log_wl(self) -> float:
        return max(np.log(self.width * self.depth), 0.0)

    def rho(self, t) -> np.ndarray:
        """Per-sample truncation threshold B * sigma_t^-1 * sqrt(log(WL))."""
        _, sigma = m_sigma(self.schedule, t)
        return self.trunc_B * np.sqrt(self.log_wl) / np.asarray(sigma)

    def parameter_count(self) -> int:
        return sum(a.size for a in self.As) + sum(b.size for b in self.bs)

    def copy(self) -> "ScoreNetwork":
        return ScoreNetwork(
            width=self.width,
            depth=self.depth,
            input_dim=self.input_dim,
            output_dim=self.output_dim,
            trunc_B=self.trunc_B,
            schedule=self.schedule,
            As=[a.copy() for a in self.As],
            bs=[b.copy() for b in self.bs],
        )


@dataclass
class Gradient:
    """Parameter-shaped gradient with an accumulation counter."""

    dAs: list[np.ndarray]
    dbs: list[np.ndarray]
    count: int = 1


def init(
    width: int,
    depth: int,
    input_dim: int,
    output_dim: int,
    trunc_B: float,
    seed: int,
    schedule: NoiseSchedule,
) -> ScoreNetwork:
    """He-style initialization: weight variance 2/fan_in, zero biases."""
    if width < 1 or depth < 1:
        raise DomainError("width and depth must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [input_dim] + [width] * depth + [output_dim]
    As, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        As.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return ScoreNetwork(
        width=width,
        depth=depth,
        input_dim=input_dim,
        output_dim=output_dim,
        trunc_B=trunc_B,
        schedule=schedule,
        As=As,
        bs=bs,
    )


def _stack_inputs(net: ScoreNetwork, x, t):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != net.output_dim:
        raise DomainError(f"expected points of dimension {net.output_dim}")
    t_arr = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
    xt = np.concatenate([x, t_arr[:, None]], axis=1)
    rho = np.broadcast_to(net.rho(t_arr), (x.shape[0],)).astype(float)
    return np.ascontiguousarray(xt), np.ascontiguousarray(rho)


def forward(net: ScoreNetwork, x, t):
    """Truncated network output at (x, t); batch (N,d) or single point (d,)."""
    for a in net.As:
        if not np.all(np.isfinite(a)):
            raise NumericError("network weights contain non-finite values")
    single = np.asarray(x).ndim == 1
    xt, rho = _stack_inputs(net, x, t)
    out = kernels.forward(net.As, net.bs, xt, rho)
    return out[0] if single else out


def backward(net: ScoreNetwork, x, t, target, sample_weight=None) -> tuple[float, Gradient]:
    """(Weighted) mean squared-norm loss over the batch and its exact gradient."""
    xt, rho = _stack_inputs(net, x, t)
    target = np.ascontiguousarray(np.atleast_2d(np.asarray(target, dtype=float)))
    if target.shape != (xt.shape[0], net.output_dim):
        raise DomainError("target shape does not match the batch")
    if sample_weight is None:
        sample_weight = np.ones(xt.shape[0])
    weights = np.ascontiguousarray(np.asarray(sample_weight, dtype=float))
    loss, gA, gb = kernels.loss_grad(net.As, net.bs, xt, rho, target, weights)
    return loss, Gradient(dAs=gA, dbs=gb)


def as_score_fn(net: ScoreNetwork):
    """(X, t) -> (N, d) adapter for samplers and metrics."""

    def fn(x, t):
        return np.atleast_2d(forward(net, x, t))

    return fn


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(net: ScoreNetwork, path, metadata: dict | None = None) -> None:
    """Versioned npz checkpoint; float64 arrays round-trip bit-exactly."""
    meta = {
        "format": _CKPT_FORMAT,
        "width": net.width,
        "depth": net.depth,
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "trunc_B": net.trunc_B,
        "schedule": {
            "kind": net.schedule.kind,
            "params": list(net.schedule.params),
            "horizon": net.schedule.horizon,
            "c2": net.schedule.c2,
        },
        "extra": metadata or {},
    }
    arrays = {f"A{i}": a for i, a in enumerate(net.As)}
    arrays.update({f"b{i}": b for i, b in enumerate(net.bs)})
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_checkpoint(path) -> tuple[ScoreNetwork, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != _CKPT_FORMAT:
            raise FormatError(f"not a {_CKPT_FORMAT} file: {path}")
        n_layers = meta["depth"] + 1
        As = [np.ascontiguousarray(data[f"A{i}"]) for i in range(n_layers)]
        bs = [np.ascontiguousarray(data[f"b{i}"]) for i in range(n_layers)]
    sched = meta["schedule"]
    net = ScoreNetwork(
        width=meta["width"],
        depth=meta["depth"],
        input_dim=meta["input_dim"],
        output_dim=meta["output_dim"],
        trunc_B=meta["trunc_B"],
        schedule=NoiseSchedule(
            kind=sched["kind"],
            params=tuple(sched["params"]),
            horizon=sched["horizon"],
            c2=sched["c2"],
        ),
        As=As,
        bs=bs,
    )
    return net, meta["extra"]
