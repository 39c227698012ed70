"""End-to-end benchmark orchestration.

A run is: draw data from the target -> fit the score network (or plug the
oracle score) -> integrate the reverse SDE -> measure distances against the
target.  Each run is summarized by one RateRecord row in an append-only,
schema-versioned CSV.  Config hash + seed determine every numeric output
(wall times excepted).

Studies:

- rate study: rerun over a geometric n-list with the network budget and time
  window rescaled per the WL = n^(dstar/(2(2 beta + dstar))) rule, then fit
  the log-log slope of error vs n.
- adaptivity study: fixed n, growing ambient dimension with padded uniform
  coordinates; reports the active-coordinate marginal TV against the d=1
  value (the curse-of-dimensionality probe).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from . import net as netmod
from .density import (
    InteractionDensity,
    density_hash,
    load_density,
    marginal_1d,
    sample as density_sample,
    save_samples,
)
from .errors import DomainError, FormatError, StudyError
from .metrics import (
    HistogramSpec,
    density_pdf,
    tv_samples_vs_density,
    w1_1d_exact,
    w1_sliced,
)
from .oracle import (
    quadrature_oracle,
    safe_score_fn as oracle_score_fn,
    score_l2_error,
    uniform_oracle,
)
from .presets import PRESETS, padded_density
from .sampler import SamplerConfig, clip_to_cube, outside_fraction, reverse_sample
from .schedule import NoiseSchedule, TimeWindow, m_sigma
from .training import (
    TimeGrid,
    TrainPlan,
    grid_from_scaling,
    plan_from_scaling,
    split_wl,
    train,
    train_piecewise,
    wl_budget,
    window_from_budget,
    write_training_log,
)

__version_tag__ = "scorelab-0.1.0"
SCHEMA_VERSION = 1

log = logging.getLogger("scorelab.bench")


@dataclass(frozen=True)
class RunConfig:
    density: str  # "preset:<name>", "padded:<d>", or a density yaml path
    seed: int = 0
    schedule_kind: str = "constant"
    schedule_params: tuple[float, ...] = (1.0,)
    n: int = 1 << 14
    beta: float = 1.0
    dstar: int = 1
    # network / window; zeros mean "derive from the scaling rule"
    width: int = 0
    depth: int = 0
    t_lo: float = 0.0
    t_hi: float = 0.0
    trunc_B: float = 10.0
    wl_scale: float = 1.0
    kappa_lo: float = 6.0
    kappa_hi: float = 1.0
    # training
    steps: int = 3000
    steps_exponent: float = 0.5  # rate studies scale steps by (n/n0)^this
    batch_size: int = 128
    step_size: float = 3e-3
    mc_time_draws: int = 1
    piecewise: bool = False
    oracle_score: bool = False
    # sampling
    sampler_steps: int = 500
    sampler_grid: str = "geometric"
    chains: int = 0  # 0 -> n
    # metrics
    tv_bins: int = 0  # 0 -> n^(1/(d+2)) rule; fixed count for rate studies
    w1_projections: int = 64
    score_l2_sigmas: tuple[float, ...] = (0.25, 0.5, 0.75)
    score_l2_mc: int = 4096
    out_dir: str = "runs"


def config_hash(config: RunConfig) -> str:
    doc = json.dumps(asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    alias = {"linear-in-t": "linear", "custom-smooth": "poly"}
    if "schedule_kind" in doc:
        doc["schedule_kind"] = alias.get(doc["schedule_kind"], doc["schedule_kind"])
    for key in ("schedule_params", "score_l2_sigmas"):
        if key in doc:
            doc[key] = tuple(doc[key])
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise FormatError(f"bad run config {path}: {exc}") from exc


def resolve_density(spec: str) -> InteractionDensity:
    if spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        if name not in PRESETS:
            raise DomainError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
        return PRESETS[name]()
    if spec.startswith("padded:"):
        return padded_density(int(spec.split(":", 1)[1]))
    return load_density(spec)


def build_schedule(config: RunConfig) -> NoiseSchedule:
    return NoiseSchedule(kind=config.schedule_kind, params=config.schedule_params)


def resolve_plan(config: RunConfig) -> TrainPlan:
    """TrainPlan from explicit fields, falling back to the scaling rule; the
    scaling assertions are logged either way."""
    wl = wl_budget(config.n, config.beta, config.dstar, config.wl_scale)
    width, depth = (config.width, config.depth) if config.width else split_wl(wl)
    if config.t_lo:
        window = TimeWindow(config.t_lo, config.t_hi)
    else:
        window = window_from_budget(wl, config.kappa_lo, config.kappa_hi)
    log.info(
        "scaling check: W*L=%d vs n^(d*/(2(2b+d*)))=%.3f; window=(%.3g, %.3g)",
        width * depth,
        wl,
        window.t_lo,
        window.t_hi,
    )
    return TrainPlan(
        n=config.n,
        width=width,
        depth=depth,
        trunc_B=config.trunc_B,
        window=window,
        steps=config.steps,
        seed=config.seed + 1,
        batch_size=config.batch_size,
        mc_time_draws=config.mc_time_draws,
        step_size=config.step_size,
    )


def resolve_grid(config: RunConfig, d: int) -> TimeGrid:
    grid = grid_from_scaling(
        n=config.n,
        d=d,
        beta=config.beta,
        dstar=config.dstar,
        seed=config.seed + 1,
        steps=config.steps,
        trunc_B=config.trunc_B,
        wl_scale=config.wl_scale,
        kappa_lo=config.kappa_lo,
        kappa_hi=config.kappa_hi,
        batch_size=config.batch_size,
        mc_time_draws=config.mc_time_draws,
        step_size=config.step_size,
    )
    t1 = float(config.n) ** (-2.0 * config.dstar / (d * (2.0 * config.beta + config.dstar)))
    log.info(
        "piecewise grid: %d intervals (declared P=%d), t_1=%.4g (rule %.4g), "
        "boundaries double and cap at %.4g",
        grid.intervals,
        grid.declared_P,
        grid.boundaries[1],
        t1,
        grid.boundaries[-1],
    )
    return grid


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

RATE_COLUMNS = [
    "schema_version",
    "code_version",
    "config_hash",
    "density_hash",
    "seed",
    "d",
    "dstar",
    "beta",
    "n",
    "width",
    "depth",
    "trunc_B",
    "t_lo",
    "t_hi",
    "sampler_steps",
    "chains",
    "piecewise",
    "oracle_score",
    "tv_hist",
    "tv_hist_clipped",
    "tv_method",
    "marginal_tv",
    "w1_value",
    "w1_stderr",
    "w1_method",
    "score_l2_lo",
    "score_l2_mid",
    "score_l2_hi",
    "train_loss_final",
    "val_loss_best",
    "outside_frac",
    "wall_train_ms",
    "wall_sample_ms",
]


@dataclass
class RateRecord:
    config_hash: str
    density_hash: str
    seed: int
    d: int
    dstar: int
    beta: float
    n: int
    width: int
    depth: int
    trunc_B: float
    t_lo: float
    t_hi: float
    sampler_steps: int
    chains: int
    piecewise: bool
    oracle_score: bool
    tv_hist: float = math.nan
    tv_hist_clipped: float = math.nan
    tv_method: str = "histogram"
    marginal_tv: float = math.nan
    w1_value: float = math.nan
    w1_stderr: float = math.nan
    w1_method: str = ""
    score_l2_lo: float = math.nan
    score_l2_mid: float = math.nan
    score_l2_hi: float = math.nan
    train_loss_final: float = math.nan
    val_loss_best: float = math.nan
    outside_frac: float = math.nan
    wall_train_ms: float = 0.0
    wall_sample_ms: float = 0.0
    schema_version: int = SCHEMA_VERSION
    code_version: str = __version_tag__

    def to_row(self) -> list[str]:
        data = asdict(self)
        return [str(data[c]) for c in RATE_COLUMNS]


def write_records(path, records, append: bool = True) -> None:
    new = not (append and os.path.exists(path))
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if new or mode == "w":
            writer.writerow(RATE_COLUMNS)
        for rec in records:
            writer.writerow(rec.to_row())


def read_records(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RATE_COLUMNS:
            raise FormatError(
                f"CSV schema mismatch in {path}: {reader.fieldnames}"
            )
        return list(reader)


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------

def _marginal_pdf_fn(density: InteractionDensity, coordinate: int):
    grid = np.linspace(-1.0, 1.0, 513)
    vals = marginal_1d(density, coordinate, grid)

    def pdf(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)[:, 0]
        return np.interp(x, grid, vals, left=0.0, right=0.0)

    return pdf


def _oracle_for(density: InteractionDensity, schedule: NoiseSchedule):
    if all(np.allclose(f.coefs, 0.0) for f in density.components):
        return uniform_oracle(density.d, schedule)
    if density.d <= 3:
        return quadrature_oracle(density, schedule)
    raise DomainError("no score oracle available for this density (d > 3)")


def run_end_to_end(config: RunConfig, persist: bool = True) -> RateRecord:
    """Execute sample -> train -> reverse-sample -> metrics for one config."""
    record, _ = run_with_artifacts(config, persist=persist)
    return record


def run_with_artifacts(
    config: RunConfig, persist: bool = True
) -> tuple[RateRecord, np.ndarray]:
    """As :func:`run_end_to_end` but also returns the generated samples."""
    out_dir = os.environ.get("SCORELAB_OUT", config.out_dir)
    density = resolve_density(config.density)
    schedule = build_schedule(config)
    d = density.d
    chains = config.chains or config.n
    chash = config_hash(config)
    dhash = density_hash(density)
    tag = f"{chash}_s{config.seed}"

    data = density_sample(density, config.n, config.seed)

    piecewise_used = config.piecewise and not config.oracle_score
    if piecewise_used:
        grid = resolve_grid(config, d)
        window = TimeWindow(grid.boundaries[0], grid.boundaries[-1])
        plan = grid.plans[0]
    else:
        plan = resolve_plan(config)
        window = plan.window

    record = RateRecord(
        config_hash=chash,
        density_hash=dhash,
        seed=config.seed,
        d=d,
        dstar=config.dstar,
        beta=config.beta,
        n=config.n,
        width=plan.width,
        depth=plan.depth,
        trunc_B=config.trunc_B,
        t_lo=window.t_lo,
        t_hi=window.t_hi,
        sampler_steps=config.sampler_steps,
        chains=chains,
        piecewise=piecewise_used,
        oracle_score=config.oracle_score,
    )

    t0 = time.perf_counter()
    trained_net = None
    if config.oracle_score:
        score_fn = oracle_score_fn(_oracle_for(density, schedule))
    elif piecewise_used:
        presult = train_piecewise(grid, data, schedule)
        score_fn = presult.score
        record.train_loss_final = presult.results[-1].log[-1][1] if presult.results[-1].log else math.nan
        record.val_loss_best = float(np.nansum([r.best_val for r in presult.results]))
        if persist:
            os.makedirs(out_dir, exist_ok=True)
            from .training import save_piecewise

            save_piecewise(presult, os.path.join(out_dir, f"{tag}_piecewise"))
        trained_net = presult.score.nets[0]
    else:
        result = train(plan, data, schedule)
        score_fn = netmod.as_score_fn(result.net)
        trained_net = result.net
        record.train_loss_final = result.log[-1][1] if result.log else math.nan
        record.val_loss_best = result.best_val
        if persist:
            os.makedirs(out_dir, exist_ok=True)
            netmod.save_checkpoint(
                result.net,
                os.path.join(out_dir, f"{tag}_ckpt.npz"),
                metadata={"config_hash": chash, "seed": config.seed},
            )
            write_training_log(os.path.join(out_dir, f"{tag}_train.csv"), result.log)
    record.wall_train_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    sconfig = SamplerConfig(
        steps=config.sampler_steps,
        window=window,
        chains=chains,
        seed=config.seed + 2,
        grid=config.sampler_grid,
    )
    samples = reverse_sample(score_fn, schedule, sconfig, d)
    record.wall_sample_ms = (time.perf_counter() - t0) * 1e3
    record.outside_frac = outside_fraction(samples)

    pdf = density_pdf(density)
    hspec = HistogramSpec(lo=(-1.0,) * d, hi=(1.0,) * d, bins=config.tv_bins)
    record.tv_hist = tv_samples_vs_density(samples, pdf, hspec).value
    record.tv_hist_clipped = tv_samples_vs_density(clip_to_cube(samples), pdf, hspec).value
    record.marginal_tv = tv_samples_vs_density(
        samples[:, [0]],
        _marginal_pdf_fn(density, 0),
        HistogramSpec(lo=(-1.0,), hi=(1.0,), bins=config.tv_bins),
    ).value

    ref = density_sample(density, chains, config.seed + 3)
    if d == 1:
        w1 = w1_1d_exact(samples[:, 0], ref[:, 0])
    else:
        w1 = w1_sliced(samples, ref, config.w1_projections, np.random.default_rng(config.seed + 4))
    record.w1_value, record.w1_stderr, record.w1_method = w1.value, w1.error_estimate, w1.method

    if trained_net is not None and d <= 3:
        oracle = _oracle_for(density, schedule)
        vals = []
        for s in config.score_l2_sigmas:
            t_ref = -0.5 * math.log(max(1.0 - s * s, 1e-12)) / float(schedule.beta(0.0)) if schedule.kind == "constant" else None
            if t_ref is None or not (window.t_lo <= t_ref <= window.t_hi):
                vals.append(math.nan)
                continue
            err = score_l2_error(
                score_fn, oracle, t_ref, config.score_l2_mc,
                np.random.default_rng(config.seed + 5),
            )
            vals.append(err.value)
        record.score_l2_lo, record.score_l2_mid, record.score_l2_hi = vals[:3]

    if persist:
        os.makedirs(out_dir, exist_ok=True)
        save_samples(os.path.join(out_dir, f"{tag}_samples.csv"), samples, sconfig.seed, dhash)
        write_records(os.path.join(out_dir, "rate.csv"), [record])
    return record, samples


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def fit_slope(ns, errors) -> tuple[float, float]:
    """Least-squares slope of log(error) vs log(n) with standard error."""
    from .decomposition import fit_loglog_slope

    return fit_loglog_slope(ns, errors)


@dataclass
class RateStudyReport:
    metric: str
    ns: list[int]
    medians: list[float]
    slope: float
    slope_stderr: float
    target_slope: float
    target_in_ci: bool
    monotone: bool
    records: list[RateRecord] = field(repr=False, default_factory=list)

    def summary(self) -> str:
        lines = [
            f"rate study on {self.metric}: slope {self.slope:.4f} "
            f"+- {self.slope_stderr:.4f} (target {self.target_slope:.4f}, "
            f"in 95% CI: {self.target_in_ci})",
            f"medians strictly decreasing: {self.monotone}",
        ]
        for n, m in zip(self.ns, self.medians):
            lines.append(f"  n={n:>8d}  {self.metric}={m:.5f}")
        return "\n".join(lines)


def run_rate_study(
    base: RunConfig,
    n_list,
    seeds,
    metric: str = "tv_hist",
    persist: bool = True,
) -> RateStudyReport:
    """Geometric-n rate study with per-n rescaled hyperparameters."""
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 2:
        raise StudyError("need at least 2 n values")
    records: list[RateRecord] = []
    medians = []
    for n in n_list:
        steps = max(1, int(round(base.steps * (n / n_list[0]) ** base.steps_exponent)))
        vals = []
        for s in seeds:
            cfg = replace(
                base, n=int(n), seed=int(s), steps=steps,
                width=0, depth=0, t_lo=0.0, t_hi=0.0,
            )
            rec = run_end_to_end(cfg, persist=persist)
            records.append(rec)
            vals.append(getattr(rec, metric))
        if sum(math.isfinite(v) for v in vals) < max(1, len(list(seeds)) - 1):
            raise StudyError(f"too few successful runs at n={n}")
        medians.append(float(np.median(vals)))
    slope, se = fit_slope(n_list, medians)
    target = -base.beta / (2.0 * base.beta + base.dstar)
    in_ci = abs(slope - target) <= 1.96 * se if se > 0 else math.isclose(slope, target, abs_tol=1e-9)
    monotone = all(medians[i + 1] < medians[i] for i in range(len(medians) - 1))
    return RateStudyReport(
        metric=metric,
        ns=n_list,
        medians=medians,
        slope=slope,
        slope_stderr=se,
        target_slope=target,
        target_in_ci=in_ci,
        monotone=monotone,
        records=records,
    )


@dataclass
class AdaptivityReport:
    ds: list[int]
    medians: list[float]  # active-coordinate marginal TV per d
    padded_ks: list[float]  # worst padded-coordinate KS per d
    max_factor: float  # max median / d=1 median
    records: list[RateRecord] = field(repr=False, default_factory=list)

    def summary(self) -> str:
        lines = [f"adaptivity study: max error factor vs d=1: {self.max_factor:.3f}"]
        for d, m, k in zip(self.ds, self.medians, self.padded_ks):
            lines.append(f"  d={d}  marginal_tv={m:.5f}  padded_ks={k:.4f}")
        return "\n".join(lines)


def _uniform_ks(samples_1d: np.ndarray) -> float:
    x = np.sort(samples_1d)
    n = x.size
    cdf = np.clip((x + 1.0) / 2.0, 0.0, 1.0)
    upper = np.max(np.abs(cdf - np.arange(1, n + 1) / n))
    lower = np.max(np.abs(cdf - np.arange(0, n) / n))
    return float(max(upper, lower))


def run_adaptivity_study(
    base: RunConfig,
    d_list,
    seeds,
    persist: bool = True,
) -> AdaptivityReport:
    """Fixed n, growing ambient d with padded uniform coordinates."""
    ds = sorted(int(d) for d in d_list)
    records: list[RateRecord] = []
    medians, padded = [], []
    for d in ds:
        vals, ks_vals = [], []
        for s in seeds:
            cfg = replace(base, density=f"padded:{d}", seed=int(s))
            rec, samples = run_with_artifacts(cfg, persist=persist)
            records.append(rec)
            vals.append(rec.marginal_tv)
            for coord in range(1, d):
                ks_vals.append(_uniform_ks(np.clip(samples[:, coord], -1.0, 1.0)))
        medians.append(float(np.median(vals)))
        padded.append(float(np.max(ks_vals)) if ks_vals else math.nan)
    base_val = medians[ds.index(1)] if 1 in ds else medians[0]
    max_factor = max(m / base_val for m in medians)
    return AdaptivityReport(
        ds=ds, medians=medians, padded_ks=padded, max_factor=max_factor, records=records
    )


def emit_report(records, csv_path, summary_path=None) -> str:
    """Write the record CSV (header-only when empty) and a text summary."""
    write_records(csv_path, records, append=False)
    by_n: dict[int, list[float]] = {}
    for rec in records:
        by_n.setdefault(rec.n, []).append(rec.tv_hist)
    lines = [f"{len(records)} records"]
    if len(by_n) >= 3 and all(math.isfinite(v) for vs in by_n.values() for v in vs):
        ns = sorted(by_n)
        meds = [float(np.median(by_n[n])) for n in ns]
        slope, se = fit_slope(ns, meds)
        lines.append(f"tv_hist slope: {slope:.4f} +- {se:.4f}")
    text = "\n".join(lines)
    if summary_path:
        with open(summary_path, "w") as fh:
            fh.write(text + "\n")
    return text
