"""Numerical verification of the diffused-density decomposition machinery.

For a product target ``p0(x) = prod_{(i,j) in S} f_{i,j}(x_i, x_j)`` (pairs
with i <= j; a pair (i,i) is a univariate factor) and the OU flow with mean
decay m_t and noise scale sigma_t, the diffused density satisfies

    p_t(x) = m_t^-d * sum_{A subset S} G_{S\\A}(x,t) * Delta_A(x,t)

where G is the product of unshifted factors at x/m_t and Delta_A integrates
the product of shift residuals against the Gaussian kernel.  This module
evaluates both sides numerically, checks the smallness |Delta_A| <~
sigma_t^|A|, and verifies the two refactorizations of Delta_A (the signed
subset sum over partial convolutions, and the first-order Taylor split with
gradient products and monomial-weighted residual integrals).

Components are globally defined analytic formulas, so arguments
``(x + sigma_t y)/m_t`` outside the cube are well-defined.  Integration over
y uses Gauss-Hermite for smooth components and split Gauss-Legendre (with
the Gaussian weight folded in) when a component declares kink loci; splits
land exactly on the kink pre-images.  All probes live in the analyzed region
``x in [-m_t, m_t]^d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UnsupportedError
from .quadrature import gauss_hermite_prob, gauss_legendre, gaussian_rule_1d
from .schedule import NoiseSchedule, m_sigma

_E_ABS_NORMAL = math.sqrt(2.0 / math.pi)  # E|Z|
_E_CHI2 = math.sqrt(math.pi / 2.0)  # E sqrt(Z1^2 + Z2^2)


# ---------------------------------------------------------------------------
# component families
# ---------------------------------------------------------------------------

class PairComponent:
    """Interface: bivariate factor with certificates and optional gradients."""

    univariate: bool = False

    def value(self, u, v):
        raise NotImplementedError

    def grad(self, u, v):
        raise UnsupportedError(f"{type(self).__name__} has no certified gradient")

    def lipschitz(self) -> float:
        raise NotImplementedError

    def kinks_u(self) -> tuple[float, ...]:
        return ()

    def kinks_v(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class CosinePair(PairComponent):
    """f(u,v) = c0 + sum_k a_k cos(p_k u + q_k v + phi_k); smooth everywhere."""

    c0: float
    amps: tuple[float, ...]
    freq_u: tuple[float, ...]
    freq_v: tuple[float, ...]
    phases: tuple[float, ...]

    @property
    def univariate(self) -> bool:
        return all(q == 0.0 for q in self.freq_v)

    def value(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        out = np.full(u.shape, self.c0)
        for a, p, q, ph in zip(self.amps, self.freq_u, self.freq_v, self.phases):
            out = out + a * np.cos(p * u + q * v + ph)
        return out

    def grad(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        gu = np.zeros(u.shape)
        gv = np.zeros(u.shape)
        for a, p, q, ph in zip(self.amps, self.freq_u, self.freq_v, self.phases):
            s = -a * np.sin(p * u + q * v + ph)
            gu = gu + p * s
            gv = gv + q * s
        return gu, gv

    def lipschitz(self) -> float:
        return float(
            sum(
                abs(a) * math.hypot(p, q)
                for a, p, q in zip(self.amps, self.freq_u, self.freq_v)
            )
        )


@dataclass(frozen=True)
class AbsKink(PairComponent):
    """f(u,v) = c0 + a|u - u0| + b|v - v0|; Lipschitz with kinks."""

    c0: float
    a: float
    u0: float = 0.0
    b: float = 0.0
    v0: float = 0.0

    @property
    def univariate(self) -> bool:
        return self.b == 0.0

    def value(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        return self.c0 + self.a * np.abs(u - self.u0) + self.b * np.abs(v - self.v0)

    def lipschitz(self) -> float:
        return math.hypot(self.a, self.b)

    def kinks_u(self) -> tuple[float, ...]:
        return (self.u0,) if self.a else ()

    def kinks_v(self) -> tuple[float, ...]:
        return (self.v0,) if self.b else ()


@dataclass(frozen=True)
class PolyPair(PairComponent):
    """f(u,v) = sum c_{ij} u^i v^j; Lipschitz certified on |u|,|v| <= radius."""

    coeffs: tuple[tuple[int, int, float], ...]  # (i, j, c)
    radius: float = 20.0

    @property
    def univariate(self) -> bool:
        return all(j == 0 for _, j, _ in self.coeffs)

    def value(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        out = np.zeros(u.shape)
        for i, j, c in self.coeffs:
            out = out + c * u**i * v**j
        return out

    def grad(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        gu = np.zeros(u.shape)
        gv = np.zeros(u.shape)
        for i, j, c in self.coeffs:
            if i:
                gu = gu + c * i * u ** (i - 1) * v**j
            if j:
                gv = gv + c * u**i * j * v ** (j - 1)
        return gu, gv

    def lipschitz(self) -> float:
        r = self.radius
        bu = sum(abs(c) * i * r ** max(i - 1, 0) * r**j for i, j, c in self.coeffs if i)
        bv = sum(abs(c) * r**i * j * r ** max(j - 1, 0) for i, j, c in self.coeffs if j)
        return math.hypot(bu, bv)


@dataclass(frozen=True)
class ProductDensitySpec:
    """d, the pair list (i <= j), and one component per pair."""

    d: int
    pairs: tuple[tuple[int, int], ...]
    comps: tuple[PairComponent, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.pairs) != len(self.comps):
            raise DomainError("one component per pair required")
        for (i, j), comp in zip(self.pairs, self.comps):
            if not (0 <= i <= j < self.d):
                raise DomainError(f"pair ({i},{j}) invalid for d={self.d}")
            if i == j and not comp.univariate:
                raise DomainError(f"diagonal pair ({i},{i}) needs a univariate factor")

    def p0(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.ones(x.shape[0])
        for (i, j), comp in zip(self.pairs, self.comps):
            out = out * comp.value(x[:, i], x[:, j])
        return out


# ---------------------------------------------------------------------------
# integration setup
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationSpec:
    nodes: int = 40
    nodes_alt: int = 56  # independent rule for cross-checks
    ylim: float = 8.0
    method: str = "auto"  # "auto" | "hermite" | "legendre"


def _flow(schedule: NoiseSchedule, t: float) -> tuple[float, float]:
    m, sigma = m_sigma(schedule, float(t))
    if sigma == 0.0:
        raise DomainError("decomposition quantities need t > 0")
    return m, sigma


def _check_region(x: np.ndarray, m: float):
    if np.any(np.abs(x) > m + 1e-12):
        raise DomainError(f"probe outside the region [-m_t, m_t]^d (m_t={m:.6g})")


def _active_coords(pairs) -> list[int]:
    seen: list[int] = []
    for i, j in pairs:
        for c in (i, j):
            if c not in seen:
                seen.append(c)
    return sorted(seen)


def _coord_splits(pairs, comps, coord, x, m, sigma):
    # kink pre-images in y for the given coordinate
    splits = []
    for (i, j), comp in zip(pairs, comps):
        if i == coord:
            splits.extend((u0 * m - x[i]) / sigma for u0 in comp.kinks_u())
        if j == coord and not comp.univariate:
            splits.extend((v0 * m - x[j]) / sigma for v0 in comp.kinks_v())
    return tuple(splits)


def _y_rule(pairs, comps, coords, x, m, sigma, ispec: IntegrationSpec, nodes: int):
    """Per-active-coordinate Gaussian rules, tensorized."""
    any_kinks = any(c.kinks_u() or c.kinks_v() for c in comps)
    use_hermite = ispec.method == "hermite" or (ispec.method == "auto" and not any_kinks)
    grids, weights = [], []
    for c in coords:
        if use_hermite:
            xnd, wnd = gauss_hermite_prob(nodes)
        else:
            xnd, wnd = gaussian_rule_1d(
                nodes, ispec.ylim, _coord_splits(pairs, comps, c, x, m, sigma)
            )
        grids.append(xnd)
        weights.append(wnd)
    mesh = np.meshgrid(*grids, indexing="ij")
    cols = {c: g.reshape(-1) for c, g in zip(coords, mesh)}
    w = weights[0]
    for wi in weights[1:]:
        w = np.multiply.outer(w, wi)
    return cols, w.reshape(-1)


# ---------------------------------------------------------------------------
# the decomposition terms
# ---------------------------------------------------------------------------

def eval_G(subset, x, t: float, spec: ProductDensitySpec, schedule: NoiseSchedule) -> float:
    """prod over the subset of f(x_i/m_t, x_j/m_t); empty subset -> 1."""
    m, _ = _flow(schedule, t)
    x = np.asarray(x, dtype=float)
    _check_region(x, m)
    out = 1.0
    for idx in subset:
        i, j = spec.pairs[idx]
        out *= float(spec.comps[idx].value(x[i] / m, x[j] / m))
    return out


def _delta_factors(subset, x, t, spec, schedule, cols, m, sigma):
    """Shift residuals Delta_{i,j} evaluated on the tensor nodes."""
    factors = []
    for idx in subset:
        i, j = spec.pairs[idx]
        comp = spec.comps[idx]
        yi = cols[i]
        yj = cols[j]
        shifted = comp.value((x[i] + sigma * yi) / m, (x[j] + sigma * yj) / m)
        base = comp.value(x[i] / m, x[j] / m)
        factors.append(shifted - base)
    return factors


def eval_Delta(
    subset,
    x,
    t: float,
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    ispec: IntegrationSpec = IntegrationSpec(),
    nodes: int | None = None,
) -> float:
    """int prod_{(i,j) in subset} Delta_{i,j} K(y) dy; empty subset -> 1."""
    if not subset:
        return 1.0
    m, sigma = _flow(schedule, t)
    x = np.asarray(x, dtype=float)
    _check_region(x, m)
    pairs = [spec.pairs[k] for k in subset]
    comps = [spec.comps[k] for k in subset]
    coords = _active_coords(pairs)
    if len(coords) > 4:
        raise UnsupportedError("more than 4 active coordinates in one Delta term")
    cols, w = _y_rule(pairs, comps, coords, x, m, sigma, ispec, nodes or ispec.nodes)
    prod = np.ones_like(w)
    for f in _delta_factors(subset, x, t, spec, schedule, cols, m, sigma):
        prod = prod * f
    return float(np.dot(prod, w))


def eval_partial_convolution(
    subset,
    x,
    t: float,
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    ispec: IntegrationSpec = IntegrationSpec(),
    nodes: int | None = None,
) -> float:
    """p_{t,B}(x): int prod_{(i,j) in subset} f(shifted args) K(y) dy."""
    if not subset:
        return 1.0
    m, sigma = _flow(schedule, t)
    x = np.asarray(x, dtype=float)
    _check_region(x, m)
    pairs = [spec.pairs[k] for k in subset]
    comps = [spec.comps[k] for k in subset]
    coords = _active_coords(pairs)
    cols, w = _y_rule(pairs, comps, coords, x, m, sigma, ispec, nodes or ispec.nodes)
    prod = np.ones_like(w)
    for (i, j), comp in zip(pairs, comps):
        prod = prod * comp.value((x[i] + sigma * cols[i]) / m, (x[j] + sigma * cols[j]) / m)
    return float(np.dot(prod, w))


def direct_diffused_density(
    x,
    t: float,
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    nodes: int = 64,
) -> float:
    """Independent oracle for p_t(x): Gauss-Legendre convolution in u-space.

    Integrates ``N(x; m_t u, sigma_t^2 I) p0(u)`` over a per-coordinate box
    ``x_i/m_t +- 8 sigma_t/m_t`` (split at component kink loci), which is a
    different variable and rule than the y-space decomposition terms use.
    """
    m, sigma = _flow(schedule, t)
    x = np.asarray(x, dtype=float)
    d = spec.d
    rules = []
    for i in range(d):
        lo = (x[i] - 8.0 * sigma) / m
        hi = (x[i] + 8.0 * sigma) / m
        cuts = set()
        for (a, b), comp in zip(spec.pairs, spec.comps):
            if a == i:
                cuts.update(comp.kinks_u())
            if b == i and not comp.univariate:
                cuts.update(comp.kinks_v())
        edges = [lo, *sorted(c for c in cuts if lo < c < hi), hi]
        xs, ws = [], []
        for aa, bb in zip(edges[:-1], edges[1:]):
            xn, wn = gauss_legendre(aa, bb, nodes)
            xs.append(xn)
            ws.append(wn)
        rules.append((np.concatenate(xs), np.concatenate(ws)))
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    us = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    w = rules[0][1]
    for _, wi in rules[1:]:
        w = np.multiply.outer(w, wi)
    w = w.reshape(-1)
    diff = x[None, :] - m * us
    kernel = np.exp(-0.5 * np.sum(diff * diff, axis=1) / sigma**2) / (
        sigma**d * (2.0 * np.pi) ** (d / 2)
    )
    return float(np.dot(spec.p0(us) * kernel, w))


# ---------------------------------------------------------------------------
# verifiers
# ---------------------------------------------------------------------------

def _subsets(n: int):
    for mask in range(1 << n):
        yield tuple(k for k in range(n) if mask >> k & 1)


def t_for_sigma(schedule: NoiseSchedule, sigma: float) -> float:
    """Invert sigma_t = sigma by bisection."""
    from scipy.optimize import brentq

    def f(t):
        return m_sigma(schedule, t)[1] - sigma

    return float(brentq(f, 1e-12, schedule.horizon))


def probe_points(d: int, per_axis: int = 5, fill: float = 0.9) -> np.ndarray:
    """Probe fractions in [-fill, fill]^d (scaled by m_t at use time);
    includes the origin when per_axis is odd."""
    axis = np.linspace(-fill, fill, per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=-1)


@dataclass(frozen=True)
class IdentityRow:
    t: float
    sigma: float
    x: tuple[float, ...]
    direct: float
    decomposed: float
    rel_residual: float


@dataclass(frozen=True)
class IdentityReport:
    spec_name: str
    max_rel_residual: float
    rows: tuple[IdentityRow, ...] = field(repr=False, default=())


def verify_identity(
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    probes: np.ndarray,
    t_grid,
    ispec: IntegrationSpec = IntegrationSpec(),
) -> IdentityReport:
    """Compare m^-d sum_A G_{S\\A} Delta_A against the direct convolution."""
    n_pairs = len(spec.pairs)
    if spec.d > 3 or n_pairs > 3:
        raise UnsupportedError("identity check supports d <= 3 and |S| <= 3")
    all_idx = tuple(range(n_pairs))
    rows = []
    worst = 0.0
    for t in t_grid:
        m, sigma = _flow(schedule, float(t))
        for frac in np.atleast_2d(probes):
            x = frac * m
            lhs = direct_diffused_density(x, t, spec, schedule)
            rhs = 0.0
            for a_set in _subsets(n_pairs):
                g_set = tuple(k for k in all_idx if k not in a_set)
                rhs += eval_G(g_set, x, t, spec, schedule) * eval_Delta(
                    a_set, x, t, spec, schedule, ispec
                )
            rhs *= m ** (-spec.d)
            rel = abs(rhs - lhs) / max(abs(lhs), 1e-300)
            rows.append(
                IdentityRow(float(t), sigma, tuple(x), lhs, rhs, rel)
            )
            worst = max(worst, rel)
    return IdentityReport(spec.name, worst, tuple(rows))


@dataclass(frozen=True)
class SmallnessReport:
    spec_name: str
    subset: tuple[int, ...]
    sigmas: tuple[float, ...]
    max_abs_delta: tuple[float, ...]
    ratios: tuple[float, ...]  # max|Delta_A| / sigma^|A|
    certificate_bounds: tuple[float, ...]
    slope: float
    slope_stderr: float

    @property
    def fitted_constant(self) -> float:
        return max(self.ratios)


def _certificate_bound(spec, subset, m: float) -> float:
    """Certified bound on |Delta_A|/sigma^|A| from Lipschitz constants.

    Single pair: L * E|moment| / m with the exact first absolute moment
    (E|Z| univariate, E||(Z1,Z2)|| bivariate).  Larger subsets: product of
    Cauchy-Schwarz factors L * sqrt(E||.||^2) / m.
    """
    bound = 1.0
    for idx in subset:
        comp = spec.comps[idx]
        lip = comp.lipschitz()
        if len(subset) == 1:
            moment = _E_ABS_NORMAL if comp.univariate else _E_CHI2
        else:
            moment = 1.0 if comp.univariate else math.sqrt(2.0)
        bound *= lip * moment / m
    return bound


def fit_loglog_slope(xs, ys) -> tuple[float, float]:
    """Least-squares slope of log(y) vs log(x) with its standard error.
    Nonpositive y values are dropped; fewer than two points give (nan, nan)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = ys > 0.0
    if keep.sum() < 2:
        return math.nan, math.nan
    lx = np.log(xs[keep])
    ly = np.log(ys[keep])
    n = lx.size
    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    resid = ly - (my + slope * (lx - mx))
    if n > 2:
        se = float(np.sqrt(np.sum(resid**2) / (n - 2) / sxx))
    else:
        se = 0.0
    return slope, se


def verify_smallness(
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    subset,
    probes: np.ndarray,
    sigma_grid,
    ispec: IntegrationSpec = IntegrationSpec(),
) -> SmallnessReport:
    """max_x |Delta_A| per sigma, its ratio to sigma^|A|, certificate bounds,
    and the fitted log-log slope (expected |A| for kink-at-probe specs)."""
    subset = tuple(subset)
    sigmas, maxima, ratios, bounds = [], [], [], []
    for s in sigma_grid:
        t = t_for_sigma(schedule, float(s))
        m, sigma = _flow(schedule, t)
        worst = 0.0
        for frac in np.atleast_2d(probes):
            worst = max(worst, abs(eval_Delta(subset, frac * m, t, spec, schedule, ispec)))
        sigmas.append(sigma)
        maxima.append(worst)
        ratios.append(worst / sigma ** len(subset))
        bounds.append(_certificate_bound(spec, subset, m))
    slope, se = fit_loglog_slope(sigmas, maxima)
    return SmallnessReport(
        spec_name=spec.name,
        subset=subset,
        sigmas=tuple(sigmas),
        max_abs_delta=tuple(maxima),
        ratios=tuple(ratios),
        certificate_bounds=tuple(bounds),
        slope=slope,
        slope_stderr=se,
    )


@dataclass(frozen=True)
class RefactorReport:
    spec_name: str
    subset: tuple[int, ...]
    max_residual: float
    max_rel_residual: float


def verify_delta_refactor(
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    subset,
    probes: np.ndarray,
    t_grid,
    ispec: IntegrationSpec = IntegrationSpec(),
) -> RefactorReport:
    """Check Delta_A = sum_{B subset A} (-1)^{|A\\B|} G_{A\\B} p_{t,B}.

    The two sides use different node counts, so agreement measures real
    quadrature convergence rather than shared-rule cancellation.
    """
    subset = tuple(subset)
    worst = worst_rel = 0.0
    for t in t_grid:
        m, _ = _flow(schedule, float(t))
        for frac in np.atleast_2d(probes):
            x = frac * m
            lhs = eval_Delta(subset, x, t, spec, schedule, ispec)
            rhs = 0.0
            for b_set in _subsets(len(subset)):
                b_idx = tuple(subset[k] for k in b_set)
                g_idx = tuple(k for k in subset if k not in b_idx)
                sign = (-1.0) ** len(g_idx)
                rhs += (
                    sign
                    * eval_G(g_idx, x, t, spec, schedule)
                    * eval_partial_convolution(
                        b_idx, x, t, spec, schedule, ispec, nodes=ispec.nodes_alt
                    )
                )
            resid = abs(rhs - lhs)
            worst = max(worst, resid)
            worst_rel = max(worst_rel, resid / max(abs(lhs), 1e-12))
    return RefactorReport(spec.name, subset, worst, worst_rel)


def _taylor_residual_factors(subset, x, t, spec, schedule, cols, m, sigma):
    """Delta^(1)_{i,j} on the tensor nodes plus the gradient values at x~."""
    sig_tilde = sigma / m
    d1_vals, d2_vals, resid = {}, {}, {}
    for idx in subset:
        i, j = spec.pairs[idx]
        comp = spec.comps[idx]
        xt_i, xt_j = x[i] / m, x[j] / m
        g1, g2 = comp.grad(xt_i, xt_j)
        d1_vals[idx] = float(g1)
        d2_vals[idx] = float(g2)
        yi, yj = cols[i], cols[j]
        delta = comp.value((x[i] + sigma * yi) / m, (x[j] + sigma * yj) / m) - comp.value(
            xt_i, xt_j
        )
        lin = yi * float(g1) + (0.0 if comp.univariate else yj * float(g2))
        resid[idx] = delta / sig_tilde - lin
    return d1_vals, d2_vals, resid


def verify_taylor_refactor(
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    subset,
    probes: np.ndarray,
    t_grid,
    ispec: IntegrationSpec = IntegrationSpec(),
) -> RefactorReport:
    """Check the first-order Taylor split of Delta_A:

        Delta_A = sig~^|A| sum_{C subset B subset A}
                  G1_{B\\C,2} * G1_{A\\B,1} * Delta1_C

    where Delta1_C integrates the scaled Taylor residuals times the monomials
    y_i (pairs in A\\B) and y_j (pairs in B\\C).  Components must expose
    gradients; |A| <= 2.
    """
    subset = tuple(subset)
    if len(subset) > 2:
        raise UnsupportedError("Taylor refactor implemented for |A| <= 2")
    worst = worst_rel = 0.0
    for t in t_grid:
        m, sigma = _flow(schedule, float(t))
        sig_tilde = sigma / m
        for frac in np.atleast_2d(probes):
            x = frac * m
            lhs = eval_Delta(subset, x, t, spec, schedule, ispec)
            pairs = [spec.pairs[k] for k in subset]
            comps = [spec.comps[k] for k in subset]
            coords = _active_coords(pairs)
            cols, w = _y_rule(
                pairs, comps, coords, x, m, sigma, ispec, ispec.nodes_alt
            )
            d1, d2, resid = _taylor_residual_factors(
                subset, x, t, spec, schedule, cols, m, sigma
            )
            rhs = 0.0
            for b_rel in _subsets(len(subset)):
                b_idx = tuple(subset[k] for k in b_rel)
                a_minus_b = tuple(k for k in subset if k not in b_idx)
                for c_rel in _subsets(len(b_idx)):
                    c_idx = tuple(b_idx[k] for k in c_rel)
                    b_minus_c = tuple(k for k in b_idx if k not in c_idx)
                    g_prod = 1.0
                    for k in b_minus_c:
                        g_prod *= d2[k]
                    for k in a_minus_b:
                        g_prod *= d1[k]
                    integrand = np.ones_like(w)
                    for k in c_idx:
                        integrand = integrand * resid[k]
                    for k in a_minus_b:
                        integrand = integrand * cols[spec.pairs[k][0]]
                    for k in b_minus_c:
                        integrand = integrand * cols[spec.pairs[k][1]]
                    rhs += g_prod * float(np.dot(integrand, w))
            rhs *= sig_tilde ** len(subset)
            residual = abs(rhs - lhs)
            worst = max(worst, residual)
            worst_rel = max(worst_rel, residual / max(abs(lhs), 1e-12))
    return RefactorReport(spec.name, subset, worst, worst_rel)


def taylor_residual_integral(
    spec: ProductDensitySpec,
    schedule: NoiseSchedule,
    subset,
    x,
    t: float,
    ispec: IntegrationSpec = IntegrationSpec(),
) -> float:
    """Delta1_C with C = subset and no monomial factors (decay diagnostic)."""
    subset = tuple(subset)
    m, sigma = _flow(schedule, float(t))
    x = np.asarray(x, dtype=float)
    pairs = [spec.pairs[k] for k in subset]
    comps = [spec.comps[k] for k in subset]
    coords = _active_coords(pairs)
    cols, w = _y_rule(pairs, comps, coords, x, m, sigma, ispec, ispec.nodes)
    _, _, resid = _taylor_residual_factors(subset, x, t, spec, schedule, cols, m, sigma)
    integrand = np.ones_like(w)
    for k in subset:
        integrand = integrand * resid[k]
    return float(np.dot(integrand, w))


# ---------------------------------------------------------------------------
# shipped verification specs
# ---------------------------------------------------------------------------

def spec_cosine_single() -> ProductDensitySpec:
    """d=2, one smooth bivariate factor (|S|=1 identity benchmark)."""
    return ProductDensitySpec(
        d=2,
        pairs=((0, 1),),
        comps=(
            CosinePair(
                c0=1.0,
                amps=(0.25, 0.15),
                freq_u=(1.0, 0.7),
                freq_v=(0.8, -1.1),
                phases=(0.3, 1.1),
            ),
        ),
        name="cosine-single",
    )


def spec_cosine_two() -> ProductDensitySpec:
    """d=2, univariate + bivariate smooth factors (|S|=2 identity benchmark)."""
    return ProductDensitySpec(
        d=2,
        pairs=((0, 0), (0, 1)),
        comps=(
            CosinePair(c0=1.0, amps=(0.2,), freq_u=(1.3,), freq_v=(0.0,), phases=(0.4,)),
            CosinePair(
                c0=1.0, amps=(0.22,), freq_u=(0.9,), freq_v=(1.2,), phases=(-0.5,)
            ),
        ),
        name="cosine-two",
    )


def spec_kink_pair() -> ProductDensitySpec:
    """d=2, two univariate |.| factors: Delta_A scales like sigma^|A| exactly
    at the origin probe (the smallness benchmark)."""
    return ProductDensitySpec(
        d=2,
        pairs=((0, 0), (1, 1)),
        comps=(AbsKink(c0=1.0, a=0.3), AbsKink(c0=1.0, a=0.25)),
        name="kink-pair",
    )


def spec_kink_bivariate() -> ProductDensitySpec:
    """d=2, one bivariate kink factor (Lipschitz identity benchmark)."""
    return ProductDensitySpec(
        d=2,
        pairs=((0, 1),),
        comps=(AbsKink(c0=1.0, a=0.3, b=0.2),),
        name="kink-bivariate",
    )


def spec_linear() -> ProductDensitySpec:
    """d=2, affine factor: all Taylor residuals vanish identically."""
    return ProductDensitySpec(
        d=2,
        pairs=((0, 1),),
        comps=(PolyPair(coeffs=((0, 0, 1.0), (1, 0, 0.1), (0, 1, 0.08)), radius=6.0),),
        name="linear",
    )


def spec_quadratic() -> ProductDensitySpec:
    """d=2, f = 1 + u^2 on coordinate 0: hand-computable Taylor residual."""
    return ProductDensitySpec(
        d=2,
        pairs=((0, 0),),
        comps=(PolyPair(coeffs=((0, 0, 1.0), (2, 0, 1.0)), radius=6.0),),
        name="quadratic",
    )


def spec_smooth_taylor() -> ProductDensitySpec:
    """d=2, |S|=2 smooth factors with gradients for the Taylor identity."""
    return ProductDensitySpec(
        d=2,
        pairs=((0, 0), (0, 1)),
        comps=(
            CosinePair(c0=1.0, amps=(0.18,), freq_u=(1.1,), freq_v=(0.0,), phases=(0.2,)),
            CosinePair(c0=1.0, amps=(0.2,), freq_u=(0.8,), freq_v=(1.0,), phases=(0.9,)),
        ),
        name="smooth-taylor",
    )


SHIPPED_SPECS = {
    "cosine-single": spec_cosine_single,
    "cosine-two": spec_cosine_two,
    "kink-pair": spec_kink_pair,
    "kink-bivariate": spec_kink_bivariate,
    "linear": spec_linear,
    "quadratic": spec_quadratic,
    "smooth-taylor": spec_smooth_taylor,
}

SIGMA_GRID_DEFAULT = (0.001, 0.003, 0.01, 0.03, 0.1, 0.3)
SIGMA_GRID_SMALLNESS = (0.001, 0.003, 0.01, 0.03, 0.1)
