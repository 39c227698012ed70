"""Denoising score matching: the Monte Carlo loss and the trainers.

The population objective regresses the network onto the conditional score
``-(X_t - m_t X_0)/sigma_t^2`` with t uniform on a window.  The exact
minimizer is out of reach, so training uses minibatch Adam with fresh noise
per step, stratified time draws (equal-count strata, shuffled assignment so
the pairing stays unbiased), a held-out validation split, and returns the
best validation snapshot.

The piecewise trainer fits one independent network per dyadic time interval
and assembles them with a dispatch that assigns a boundary time t_j to
interval j.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import net as netmod
from .errors import DomainError, TrainingError
from .net import ScoreNetwork, as_score_fn
from .schedule import NoiseSchedule, TimeWindow, conditional_score, m_sigma


# ---------------------------------------------------------------------------
# plans and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainPlan:
    n: int
    width: int
    depth: int
    trunc_B: float
    window: TimeWindow
    steps: int
    seed: int
    batch_size: int = 128
    mc_time_draws: int = 1
    step_size: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    val_fraction: float = 0.1
    val_time_draws: int = 4
    eval_every: int = 0  # 0 -> steps//20
    time_sampling: str = "importance"  # or "uniform"
    lr_decay: str = "cosine"  # or "none"

    def __post_init__(self):
        if self.n < 1 or self.steps < 0 or self.batch_size < 1:
            raise DomainError("invalid plan sizes")
        if self.time_sampling not in ("importance", "uniform"):
            raise DomainError(f"unknown time_sampling {self.time_sampling!r}")
        if self.lr_decay not in ("cosine", "none"):
            raise DomainError(f"unknown lr_decay {self.lr_decay!r}")


def split_wl(wl: float) -> tuple[int, int]:
    """Split a W*L budget into (width, depth); shallow for tiny budgets."""
    wl = max(wl, 1.0)
    depth = 1 if wl <= 12 else (2 if wl <= 256 else 3)
    width = max(1, int(round(wl / depth)))
    return width, depth


def wl_budget(n: int, beta: float, dstar: int, scale: float = 1.0) -> float:
    """Network-size rule WL = scale * n^(dstar / (2(2 beta + dstar)))."""
    return scale * float(n) ** (dstar / (2.0 * (2.0 * beta + dstar)))


def window_from_budget(
    wl: float, kappa_lo: float = 6.0, kappa_hi: float = 1.0
) -> TimeWindow:
    """Time window (WL)^-kappa_lo .. kappa_hi * log(WL)."""
    t_lo, t_hi = wl**-kappa_lo, kappa_hi * math.log(max(wl, 1.0))
    if t_hi <= t_lo:
        raise DomainError(
            f"WL budget {wl:g} too small for window exponents "
            f"(kappa_lo={kappa_lo}, kappa_hi={kappa_hi})"
        )
    return TimeWindow(t_lo=t_lo, t_hi=t_hi)


def plan_from_scaling(
    n: int,
    beta: float,
    dstar: int,
    seed: int,
    steps: int,
    trunc_B: float = 10.0,
    wl_scale: float = 1.0,
    kappa_lo: float = 6.0,
    kappa_hi: float = 1.0,
    **kwargs,
) -> TrainPlan:
    """TrainPlan with W, L, t_lo, t_hi tied to n by the rate-study scaling."""
    wl = wl_budget(n, beta, dstar, wl_scale)
    width, depth = split_wl(wl)
    window = window_from_budget(wl, kappa_lo, kappa_hi)
    return TrainPlan(
        n=n,
        width=width,
        depth=depth,
        trunc_B=trunc_B,
        window=window,
        steps=steps,
        seed=seed,
        **kwargs,
    )


@dataclass(frozen=True)
class TimeGrid:
    """Dyadic interval boundaries with one TrainPlan per interval."""

    boundaries: tuple[float, ...]
    plans: tuple[TrainPlan, ...]
    declared_P: int = 0

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 2 or any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise DomainError("boundaries must be strictly increasing")
        if len(self.plans) != len(b) - 1:
            raise DomainError("need one plan per interval")

    @property
    def intervals(self) -> int:
        return len(self.boundaries) - 1


def grid_from_scaling(
    n: int,
    d: int,
    beta: float,
    dstar: int,
    seed: int,
    steps: int,
    trunc_B: float = 10.0,
    wl_scale: float = 1.0,
    kappa_lo: float = 6.0,
    kappa_hi: float = 1.0,
    **kwargs,
) -> TimeGrid:
    """Dyadic grid: t_1 = n^(-2 dstar/(d(2 beta + dstar))), t_{j+1} = 2 t_j ^ T.

    The per-interval budget follows W_j L_j = wl_scale * t_j^(-d/4) with t_j
    the interval's right endpoint, so interval 1 matches the global WL rule.
    The nominal interval count floor(log2(T/t_lo)) + 1 is recorded as
    ``declared_P``; the constructive doubling rule caps at the terminal time
    first, so the effective count is smaller.
    """
    t1 = float(n) ** (-2.0 * dstar / (d * (2.0 * beta + dstar)))
    w1l1 = wl_scale * t1 ** (-d / 4.0)
    window = window_from_budget(w1l1, kappa_lo, kappa_hi)
    t_lo, t_hi = window.t_lo, window.t_hi
    if not (t_lo < t1 < t_hi):
        raise DomainError(f"t_1={t1:g} outside the window ({t_lo:g}, {t_hi:g})")
    bounds = [t_lo, t1]
    while bounds[-1] < t_hi:
        bounds.append(min(2.0 * bounds[-1], t_hi))
    declared = int(math.floor(math.log2(t_hi / t_lo))) + 1
    plans = []
    for j in range(1, len(bounds)):
        wj = wl_scale * bounds[j] ** (-d / 4.0)
        width, depth = split_wl(wj)
        plans.append(
            TrainPlan(
                n=n,
                width=width,
                depth=depth,
                trunc_B=trunc_B,
                window=TimeWindow(bounds[j - 1], bounds[j]),
                steps=steps,
                seed=seed + j,
                **kwargs,
            )
        )
    return TimeGrid(boundaries=tuple(bounds), plans=tuple(plans), declared_P=declared)


# ---------------------------------------------------------------------------
# the loss
# ---------------------------------------------------------------------------

def _stratified_times(window: TimeWindow, count: int, rng: np.random.Generator):
    # one uniform draw per equal-width stratum, order shuffled
    idx = rng.permutation(count)
    u = rng.random(count)
    return window.t_lo + (window.t_hi - window.t_lo) * (idx + u) / count


class ImportanceTimeSampler:
    """Importance-sampled time draws for the lambda == 1 objective.

    The per-time loss magnitude scales like 1/sigma_t^2 (the conditional
    target's second moment), so plain uniform draws put almost all gradient
    variance into rare tiny-t samples.  This sampler draws t from a
    piecewise-uniform proposal with cell mass proportional to 1/sigma_t^2 on
    a log grid and returns the exact inverse-density weights, giving an
    unbiased, variance-reduced estimate of the same uniform-time loss.
    """

    def __init__(self, window: TimeWindow, schedule: NoiseSchedule, knots: int = 1024):
        self.window = window
        ts = np.geomspace(window.t_lo, window.t_hi, knots + 1)
        _, sig = m_sigma(schedule, ts)
        dens = 1.0 / (sig * sig)
        self.edges = ts
        self.lens = np.diff(ts)
        self.masses = 0.5 * (dens[:-1] + dens[1:]) * self.lens
        self.cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        self.total = float(self.cum[-1])

    def draw(self, count: int, rng: np.random.Generator):
        """(t, weights): stratified in proposal mass, assignment shuffled."""
        idx = rng.permutation(count)
        u = (idx + rng.random(count)) / count * self.total
        cell = np.clip(np.searchsorted(self.cum, u, side="right") - 1, 0, len(self.lens) - 1)
        frac = (u - self.cum[cell]) / self.masses[cell]
        t = self.edges[cell] + frac * self.lens[cell]
        span = self.window.t_hi - self.window.t_lo
        pdf = self.masses[cell] / (self.lens[cell] * self.total)
        return t, 1.0 / (span * pdf)


def _score_callable(s):
    return as_score_fn(s) if isinstance(s, ScoreNetwork) else s


def sm_terms(
    score,
    data: np.ndarray,
    window: TimeWindow,
    schedule: NoiseSchedule,
    time_draws: int,
    rng: np.random.Generator,
    return_draws: bool = False,
):
    """Per-draw squared residuals of the denoising regression (flat array).

    With ``return_draws`` the (x0, x_t, t) triples are also returned so tests
    can audit the regression target against the conditional score.
    """
    fn = _score_callable(score)
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    total = n * time_draws
    t = _stratified_times(window, total, rng)
    x0 = np.repeat(data, time_draws, axis=0)
    m, sigma = m_sigma(schedule, t)
    z = rng.standard_normal((total, d))
    xt = m[:, None] * x0 + sigma[:, None] * z
    target = conditional_score(schedule, xt, x0, t)
    diff = fn(xt, t) - target
    terms = np.sum(diff * diff, axis=1)
    if return_draws:
        return terms, (x0, xt, t)
    return terms


def sm_loss(
    score,
    data: np.ndarray,
    window: TimeWindow,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    time_draws: int = 1,
) -> float:
    """Monte Carlo estimate of the denoising score-matching loss."""
    return float(sm_terms(score, data, window, schedule, time_draws, rng).mean())


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, network: ScoreNetwork, step_size, beta1, beta2, eps):
        self.net = network
        self.lr = step_size
        self.b1 = beta1
        self.b2 = beta2
        self.eps = eps
        self.t = 0
        self.lr_scale = 1.0
        self.mA = [np.zeros_like(a) for a in network.As]
        self.vA = [np.zeros_like(a) for a in network.As]
        self.mb = [np.zeros_like(b) for b in network.bs]
        self.vb = [np.zeros_like(b) for b in network.bs]

    def step(self, grad: netmod.Gradient):
        self.t += 1
        lr = self.lr * self.lr_scale
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.net.As, grad.dAs, self.mA, self.vA):
            m += (1.0 - self.b1) * (g - m)
            v += (1.0 - self.b2) * (g * g - v)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        for p, g, m, v in zip(self.net.bs, grad.dbs, self.mb, self.vb):
            m += (1.0 - self.b1) * (g - m)
            v += (1.0 - self.b2) * (g * g - v)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# trainers
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    net: ScoreNetwork
    log: list[tuple[int, float, float, float]] = field(default_factory=list)
    step_losses: np.ndarray = field(default_factory=lambda: np.empty(0))
    best_step: int = 0
    best_val: float = float("inf")


def monotone_decrease_flag(step_losses: np.ndarray, window: int = 10) -> bool:
    """Weak monotonicity check over the first half of the budget: the
    ``window``-step moving average never rises more than 50% above its
    running minimum (SGD noise allowance) and ends below 95% of its starting
    value.  Returns True when the run looks healthy."""
    losses = np.asarray(step_losses, dtype=float)
    half = losses[: max(len(losses) // 2, window)]
    if half.size < 2 * window:
        return True
    kernel = np.ones(window) / window
    avg = np.convolve(half, kernel, mode="valid")
    running_min = np.minimum.accumulate(avg)
    return bool(np.all(avg <= 1.5 * running_min) and avg[-1] < 0.95 * avg[0])


def train(plan: TrainPlan, data: np.ndarray, schedule: NoiseSchedule) -> TrainResult:
    """Minibatch Adam on the denoising loss; returns the best-validation
    snapshot.  Fully deterministic given the plan (seed included)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if n != plan.n:
        raise DomainError(f"plan.n={plan.n} but data has {n} rows")
    rng = np.random.default_rng(plan.seed)
    perm = rng.permutation(n)
    n_val = int(round(plan.val_fraction * n))
    val, trainset = data[perm[:n_val]], data[perm[n_val:]]

    network = netmod.init(
        plan.width, plan.depth, d + 1, d, plan.trunc_B, plan.seed, schedule
    )
    result = TrainResult(net=network.copy())
    if plan.steps == 0:
        result.best_val = math.nan
        return result

    sampler = (
        ImportanceTimeSampler(plan.window, schedule)
        if plan.time_sampling == "importance"
        else None
    )

    def draw_times(count: int):
        if sampler is not None:
            return sampler.draw(count, rng)
        return _stratified_times(plan.window, count, rng), np.ones(count)

    # frozen validation draws so snapshots are comparable
    if n_val > 0:
        k = plan.val_time_draws
        t_val, w_val = draw_times(n_val * k)
        x0_val = np.repeat(val, k, axis=0)
        m_v, s_v = m_sigma(schedule, t_val)
        z_val = rng.standard_normal((n_val * k, d))
        xt_val = m_v[:, None] * x0_val + s_v[:, None] * z_val
        tgt_val = conditional_score(schedule, xt_val, x0_val, t_val)

    def val_loss(network: ScoreNetwork) -> float:
        if n_val == 0:
            return math.nan
        diff = netmod.forward(network, xt_val, t_val) - tgt_val
        return float((w_val * np.sum(diff * diff, axis=1)).mean())

    opt = Adam(network, plan.step_size, plan.beta1, plan.beta2, plan.eps)
    eval_every = plan.eval_every or max(1, plan.steps // 20)
    n_train = trainset.shape[0]
    t_start = time.perf_counter()
    step_losses = np.empty(plan.steps)

    for step in range(1, plan.steps + 1):
        idx = rng.integers(0, n_train, size=plan.batch_size)
        x0 = trainset[idx]
        t, w = draw_times(plan.batch_size * plan.mc_time_draws)
        x0 = np.repeat(x0, plan.mc_time_draws, axis=0)
        m, sigma = m_sigma(schedule, t)
        z = rng.standard_normal((t.size, d))
        xt = m[:, None] * x0 + sigma[:, None] * z
        target = conditional_score(schedule, xt, x0, t)
        loss, grad = netmod.backward(network, xt, t, target, sample_weight=w)
        if not math.isfinite(loss):
            raise TrainingError(f"training loss diverged at step {step}", step=step)
        step_losses[step - 1] = loss
        if plan.lr_decay == "cosine":
            opt.lr_scale = 0.05 + 0.95 * 0.5 * (1.0 + math.cos(math.pi * step / plan.steps))
        opt.step(grad)
        if step % eval_every == 0 or step == plan.steps:
            v = val_loss(network)
            wall = (time.perf_counter() - t_start) * 1e3
            result.log.append((step, loss, v, wall))
            if n_val == 0 or v <= result.best_val or math.isnan(v):
                result.best_val = v if n_val else math.nan
                result.best_step = step
                result.net = network.copy()
    result.step_losses = step_losses
    return result


@dataclass
class PiecewiseScore:
    """Per-interval networks with right-endpoint dispatch (t_j -> interval j)."""

    boundaries: tuple[float, ...]
    nets: tuple[ScoreNetwork, ...]

    def interval_of(self, t: float) -> int:
        j = int(np.searchsorted(np.asarray(self.boundaries), t, side="left"))
        return min(max(j, 1), len(self.nets))

    def __call__(self, x, t):
        return np.atleast_2d(netmod.forward(self.nets[self.interval_of(float(t)) - 1], x, t))


@dataclass
class PiecewiseResult:
    score: PiecewiseScore
    results: tuple[TrainResult, ...]


def train_piecewise(
    grid: TimeGrid, data: np.ndarray, schedule: NoiseSchedule
) -> PiecewiseResult:
    """Independent per-interval trainings (Algorithm-2 style).

    A one-interval grid reproduces :func:`train` exactly: the same plan runs
    through the same code path with the same rng stream.
    """
    results = tuple(train(plan, data, schedule) for plan in grid.plans)
    score = PiecewiseScore(
        boundaries=grid.boundaries, nets=tuple(r.net for r in results)
    )
    return PiecewiseResult(score=score, results=results)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def write_training_log(path, log) -> None:
    with open(path, "w") as fh:
        fh.write("step,train_loss,val_loss,wall_ms\n")
        for step, tr, vl, wall in log:
            fh.write(f"{step},{tr:.10g},{vl:.10g},{wall:.3f}\n")


def save_piecewise(result: PiecewiseResult, out_dir, prefix: str = "interval") -> str:
    """Persist boundaries + per-interval checkpoints under a manifest."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for j, res in enumerate(result.results, start=1):
        name = f"{prefix}_{j:02d}.npz"
        netmod.save_checkpoint(
            res.net,
            os.path.join(out_dir, name),
            metadata={"best_step": res.best_step, "best_val": res.best_val},
        )
        entries.append(name)
    manifest = {
        "format": "scorelab-piecewise-v1",
        "boundaries": [float(b) for b in result.score.boundaries],
        "checkpoints": entries,
    }
    path = os.path.join(out_dir, "manifest.yaml")
    with open(path, "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    return path


def load_piecewise(manifest_path) -> PiecewiseScore:
    import os

    from .errors import FormatError

    with open(manifest_path) as fh:
        manifest = yaml.safe_load(fh)
    if manifest.get("format") != "scorelab-piecewise-v1":
        raise FormatError(f"not a piecewise manifest: {manifest_path}")
    base = os.path.dirname(manifest_path)
    nets = tuple(
        netmod.load_checkpoint(os.path.join(base, name))[0]
        for name in manifest["checkpoints"]
    )
    return PiecewiseScore(boundaries=tuple(manifest["boundaries"]), nets=nets)
