"""Statistical distances: total variation and 1-Wasserstein.

TV follows the integral convention without the 1/2 factor, so values range
over [0, 2] (disjoint supports give 2).  The sample-based TV is a histogram
surrogate and lower-bounds the true TV; its method tag and bias note travel
with the estimate so downstream fits can account for it.

W1 routes: exact sorted-sample formula in 1-D, random-projection (sliced)
surrogate in d >= 2 (a lower bound on true W1), and exact small-n optimal
assignment for cross-checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, UnsupportedError


@dataclass(frozen=True)
class TvEstimate:
    value: float
    method: str  # "grid-quadrature" | "histogram"
    resolution: int
    error_estimate: float
    note: str = ""


@dataclass(frozen=True)
class W1Estimate:
    value: float
    method: str  # "exact-1d" | "sliced" | "small-n-assignment"
    detail: int = 0  # projections or sample size
    error_estimate: float = 0.0


# ---------------------------------------------------------------------------
# total variation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    start: int = 64
    max_nodes: int = 4096
    rel_tol: float = 1e-4


def density_pdf(density):
    """Adapter: InteractionDensity -> callable that is 0 outside the cube."""

    def pdf(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        inside = np.all(np.abs(x) <= 1.0, axis=1)
        out = np.zeros(x.shape[0])
        if np.any(inside):
            out[inside] = np.exp(density.interaction_sum(x[inside]) - density.logZ)
        return out

    return pdf


def _midpoint_tv(p, q, lo, hi, nodes):
    d = lo.size
    axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(nodes) + 0.5) / nodes for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    cell = np.prod((hi - lo) / nodes)
    return float(np.sum(np.abs(p(pts) - q(pts))) * cell)


def tv_density_vs_density(p, q, grid_spec: GridSpec) -> TvEstimate:
    """Midpoint-grid quadrature of int |p - q| with doubling refinement.

    The midpoint rule is used deliberately: |p - q| has kinks at crossings,
    where high-order rules lose their advantage.  Refinement stops when two
    consecutive estimates agree to ``rel_tol`` (of max(value, 1e-4)).
    """
    lo = np.asarray(grid_spec.lo, dtype=float)
    hi = np.asarray(grid_spec.hi, dtype=float)
    d = lo.size
    if d > 3:
        raise UnsupportedError("grid TV supported only for d <= 3")
    cap_by_dim = {1: grid_spec.max_nodes, 2: 512, 3: 128}
    cap = min(grid_spec.max_nodes, cap_by_dim[d])
    nodes = min(grid_spec.start, cap)
    prev = _midpoint_tv(p, q, lo, hi, nodes)
    err = np.inf
    while nodes < cap:
        nodes *= 2
        cur = _midpoint_tv(p, q, lo, hi, nodes)
        err = abs(cur - prev)
        prev = cur
        if err <= grid_spec.rel_tol * max(abs(cur), 1e-4):
            break
    return TvEstimate(
        value=prev, method="grid-quadrature", resolution=nodes, error_estimate=err
    )


@dataclass(frozen=True)
class HistogramSpec:
    lo: tuple[float, ...] = (-1.0,)
    hi: tuple[float, ...] = (1.0,)
    bins: int = 0  # 0 -> n^(1/(d+2)) rule
    p_subnodes: int = 4  # midpoint points per axis per cell for the p masses


def histogram_bins(n: int, d: int) -> int:
    return max(4, int(round(n ** (1.0 / (d + 2)))))


def tv_samples_vs_density(
    samples: np.ndarray, p, spec: HistogramSpec | None = None
) -> TvEstimate:
    """Histogram TV between an empirical sample and a density.

    Cells partition the box; sample mass falling outside the box is compared
    against zero density mass there, so escaping samples are charged fully.
    The estimate lower-bounds the true TV (piecewise-constant projection).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = samples.shape
    if n == 0:
        raise DomainError("empty sample set")
    if d > 4:
        raise UnsupportedError("histogram TV supported only for d <= 4")
    spec = spec or HistogramSpec(lo=(-1.0,) * d, hi=(1.0,) * d)
    lo = np.asarray(spec.lo, dtype=float)
    hi = np.asarray(spec.hi, dtype=float)
    bins = spec.bins or histogram_bins(n, d)

    counts, _ = np.histogramdd(
        samples, bins=[bins] * d, range=[(lo[i], hi[i]) for i in range(d)]
    )
    inside = np.all((samples >= lo) & (samples <= hi), axis=1)
    outside_mass = float(np.sum(~inside)) / n

    # cell-averaged density masses via a midpoint subgrid
    sub = spec.p_subnodes
    axes = [
        lo[i] + (hi[i] - lo[i]) * (np.arange(bins * sub) + 0.5) / (bins * sub)
        for i in range(d)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    cellvol = np.prod((hi - lo) / (bins * sub))
    fine = np.asarray(p(pts)).reshape([bins * sub] * d) * cellvol
    # pool the sub-blocks: (bins, sub, bins, sub, ...) summed over every sub axis
    fine = fine.reshape([bins, sub] * d)
    masses = fine.sum(axis=tuple(range(1, 2 * d, 2)))

    value = float(np.sum(np.abs(counts / n - masses))) + outside_mass
    stat_err = float(np.sum(np.sqrt(2.0 * np.maximum(masses, 0.0) / (np.pi * n))))
    return TvEstimate(
        value=value,
        method="histogram",
        resolution=bins,
        error_estimate=stat_err,
        note="histogram TV lower-bounds true TV",
    )


# ---------------------------------------------------------------------------
# Wasserstein-1
# ---------------------------------------------------------------------------

def w1_1d_exact(samples_a, samples_b) -> W1Estimate:
    """1-D optimal transport between empirical measures.

    Equal sizes: mean absolute difference of the sorted samples.  Unequal
    sizes: the CDF-difference integral (the same transport cost, computed on
    the merged support).
    """
    a = np.sort(np.asarray(samples_a, dtype=float).reshape(-1))
    b = np.sort(np.asarray(samples_b, dtype=float).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise DomainError("empty sample set")
    if a.size == b.size:
        value = float(np.mean(np.abs(a - b)))
    else:
        grid = np.sort(np.concatenate([a, b]))
        fa = np.searchsorted(a, grid[:-1], side="right") / a.size
        fb = np.searchsorted(b, grid[:-1], side="right") / b.size
        value = float(np.sum(np.abs(fa - fb) * np.diff(grid)))
    return W1Estimate(value=value, method="exact-1d", detail=a.size)


def w1_sliced(
    samples_a, samples_b, n_projections: int, rng: np.random.Generator
) -> W1Estimate:
    """Mean 1-D W1 over random unit projections (lower bound on true W1)."""
    a = np.atleast_2d(np.asarray(samples_a, dtype=float))
    b = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if a.shape[1] < 2:
        raise DomainError("sliced W1 is for d >= 2; use w1_1d_exact")
    if a.shape[1] != b.shape[1]:
        raise DomainError("dimension mismatch")
    g = rng.standard_normal((n_projections, a.shape[1]))
    thetas = g / np.linalg.norm(g, axis=1, keepdims=True)
    vals = np.array(
        [w1_1d_exact(a @ th, b @ th).value for th in thetas]
    )
    stderr = float(vals.std(ddof=1) / np.sqrt(n_projections)) if n_projections > 1 else 0.0
    return W1Estimate(
        value=float(vals.mean()),
        method="sliced",
        detail=n_projections,
        error_estimate=stderr,
    )


def w1_assignment_exact(samples_a, samples_b) -> W1Estimate:
    """Exact W1 between equal-size empirical measures (optimal assignment)."""
    a = np.atleast_2d(np.asarray(samples_a, dtype=float))
    b = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if a.shape != b.shape:
        raise DomainError("assignment W1 needs equal-size, equal-dim samples")
    if a.shape[0] > 256:
        raise UnsupportedError("assignment W1 capped at n <= 256")
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return W1Estimate(
        value=float(cost[rows, cols].sum() / a.shape[0]),
        method="small-n-assignment",
        detail=a.shape[0],
    )


def w1_brute_force(samples_a, samples_b) -> float:
    """Permutation-enumeration oracle for tiny n (test reference)."""
    a = np.atleast_2d(np.asarray(samples_a, dtype=float))
    b = np.atleast_2d(np.asarray(samples_b, dtype=float))
    n = a.shape[0]
    if n > 8:
        raise UnsupportedError("brute force capped at n <= 8")
    perms = np.array(list(itertools.permutations(range(n))))
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    return float(totals.min() / n)


# ---------------------------------------------------------------------------
# score-matching identity check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityCheckReport:
    values: tuple[float, ...]  # D_k = E||s-score||^2 - E||s-cond||^2 per net
    stderrs: tuple[float, ...]
    max_pairwise_sigma: float  # max |D_i - D_j| / SE(D_i - D_j)
    oracle_value: float | None  # D for the oracle score itself, if requested
    mc_n: int

    @property
    def constant_within(self) -> float:
        return self.max_pairwise_sigma


def score_identity_check(
    scores,
    oracle,
    t: float,
    mc_n: int,
    rng: np.random.Generator,
    include_oracle: bool = False,
) -> IdentityCheckReport:
    """Check that the denoising substitution shifts the objective by a
    constant: per candidate score s, estimate

        D(s) = E||s(X_t) - grad log p_t||^2 - E||s(X_t) - grad log p_{t|0}||^2

    on shared draws.  The identity makes D independent of s, so all pairwise
    differences must vanish within Monte Carlo error; at s = true score the
    value is -E||grad log p_t - grad log p_{t|0}||^2 <= 0.
    """
    from .oracle import _draw_p0, diffused_score
    from .schedule import conditional_score, forward_perturb

    x0 = _draw_p0(oracle, mc_n, rng)
    xt = forward_perturb(oracle.schedule, x0, t, rng)
    truth = np.atleast_2d(diffused_score(oracle, xt, t))
    cond = conditional_score(oracle.schedule, xt, x0, t)

    def terms(fn):
        s = np.atleast_2d(fn(xt, t))
        return np.sum((s - truth) ** 2, axis=1) - np.sum((s - cond) ** 2, axis=1)

    gs = [terms(fn) for fn in scores]
    values = tuple(float(g.mean()) for g in gs)
    stderrs = tuple(float(g.std(ddof=1) / np.sqrt(mc_n)) for g in gs)
    worst = 0.0
    for i in range(len(gs)):
        for j in range(i + 1, len(gs)):
            diff = gs[i] - gs[j]
            se = float(diff.std(ddof=1) / np.sqrt(mc_n))
            if se > 0:
                worst = max(worst, abs(float(diff.mean())) / se)
    oracle_value = None
    if include_oracle:
        oracle_value = float(
            (np.zeros(mc_n) - np.sum((truth - cond) ** 2, axis=1)).mean()
        )
    return IdentityCheckReport(
        values=values,
        stderrs=stderrs,
        max_pairwise_sigma=worst,
        oracle_value=oracle_value,
        mc_n=mc_n,
    )
