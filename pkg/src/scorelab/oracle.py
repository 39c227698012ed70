"""Ground-truth diffused densities p_t and scores grad log p_t.

Three evaluation routes:

- ``uniform``: closed form for the uniform cube density (products of Gaussian
  CDF differences), any dimension.
- ``mixture``: closed form for an auxiliary Gaussian-mixture family (outside
  the interaction model class; used purely as a cross-check oracle).
- ``quadrature``: tensor Gauss-Legendre convolution against an
  InteractionDensity, d <= 3.  The integration box per coordinate is the
  intersection of the cube with x_i/m_t +- 8 sigma_t/m_t, so the rule stays
  sharp when the Gaussian kernel is a spike.

Score evaluation refuses regions where p_t underflows (below 1e-280).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .density import InteractionDensity
from .errors import DomainError, RegionError, UnsupportedError
from .quadrature import gauss_legendre
from .schedule import NoiseSchedule, forward_perturb, m_sigma

_LOG_FLOOR = 1e-280
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


@dataclass(frozen=True)
class GaussianMixture:
    """Isotropic Gaussian mixture sum_k w_k N(mu_k, v_k I) on R^d."""

    weights: np.ndarray
    means: np.ndarray  # (K, d)
    variances: np.ndarray  # (K,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        v = np.asarray(self.variances, dtype=float)
        if not np.isclose(w.sum(), 1.0) or np.any(w <= 0) or np.any(v <= 0):
            raise DomainError("mixture weights must be positive and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", v)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        ks = rng.choice(self.weights.size, size=n, p=self.weights)
        z = rng.standard_normal((n, self.d))
        return self.means[ks] + np.sqrt(self.variances[ks])[:, None] * z


@dataclass(frozen=True)
class DiffusedOracle:
    """Evaluator for p_t and its score along a given noise schedule."""

    schedule: NoiseSchedule
    method: str  # "uniform" | "mixture" | "quadrature" | "separable"
    d: int
    density: InteractionDensity | None = None
    mixture: GaussianMixture | None = None
    quad_nodes: int = 64
    coord_logz: np.ndarray | None = None  # separable: per-coordinate log Z_i


def uniform_oracle(d: int, schedule: NoiseSchedule) -> DiffusedOracle:
    return DiffusedOracle(schedule=schedule, method="uniform", d=d)


def mixture_oracle(mix: GaussianMixture, schedule: NoiseSchedule) -> DiffusedOracle:
    return DiffusedOracle(schedule=schedule, method="mixture", d=mix.d, mixture=mix)


def quadrature_oracle(
    density: InteractionDensity, schedule: NoiseSchedule, quad_nodes: int = 64
) -> DiffusedOracle:
    """Quadrature route; fully factorized targets (all cliques singletons)
    take a per-coordinate 1-D convolution fast path."""
    separable = all(len(j) == 1 for j in density.cliques.cliques)
    if separable:
        x, w = gauss_legendre(-1.0, 1.0, 256)
        logz = np.zeros(density.d)
        for j, comp in zip(density.cliques.cliques, density.components):
            logz[j[0]] = np.log(np.dot(np.exp(comp(x[:, None])), w))
        # coordinates without a component are uniform: Z_i = 2
        for i in range(density.d):
            if not any(j[0] == i for j in density.cliques.cliques):
                logz[i] = np.log(2.0)
        return DiffusedOracle(
            schedule=schedule,
            method="separable",
            d=density.d,
            density=density,
            quad_nodes=quad_nodes,
            coord_logz=logz,
        )
    if density.d > 3:
        raise UnsupportedError("quadrature oracle supports d <= 3")
    return DiffusedOracle(
        schedule=schedule,
        method="quadrature",
        d=density.d,
        density=density,
        quad_nodes=quad_nodes,
    )


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _uniform_1d_density(x, m, sigma):
    return (ndtr((x + m) / sigma) - ndtr((x - m) / sigma)) / (2.0 * m)


def _uniform_1d_score(x, m, sigma):
    num = _phi((x + m) / sigma) - _phi((x - m) / sigma)
    den = sigma * (ndtr((x + m) / sigma) - ndtr((x - m) / sigma))
    return num / den


def uniform_diffused_cdf(x, m: float, sigma: float):
    """CDF of the 1-D diffused uniform: closed form via psi(z)=z*Phi(z)+phi(z)."""
    def psi(z):
        return z * ndtr(z) + _phi(z)

    x = np.asarray(x, dtype=float)
    return (sigma * psi((x + m) / sigma) - sigma * psi((x - m) / sigma)) / (2.0 * m)


def _mixture_log_terms(mix: GaussianMixture, x: np.ndarray, m, sigma):
    # log of w_k * N(x; m*mu_k, (m^2 v_k + sigma^2) I), shape (N, K);
    # m and sigma may be scalars or per-row arrays
    m_col = np.reshape(m, (-1, 1)) if np.ndim(m) else m
    s_col = np.reshape(sigma, (-1, 1)) if np.ndim(sigma) else sigma
    var_t = m_col**2 * mix.variances[None, :] if np.ndim(m) else m * m * mix.variances
    var_t = var_t + (s_col**2 if np.ndim(sigma) else sigma * sigma)  # (N,K) or (K,)
    mu = mix.means[None, :, :]
    diff = x[:, None, :] - (np.reshape(m, (-1, 1, 1)) if np.ndim(m) else m) * mu
    sq = np.sum(diff * diff, axis=2)
    var_b = var_t if var_t.ndim == 2 else var_t[None, :]
    d = mix.d
    return (
        np.log(mix.weights)[None, :] - 0.5 * sq / var_b - 0.5 * d * np.log(2.0 * np.pi * var_b),
        diff,
        var_b,
    )


# ---------------------------------------------------------------------------
# public evaluation
# ---------------------------------------------------------------------------

def _flow_params(oracle: DiffusedOracle, pts: np.ndarray, t):
    t_arr = np.asarray(t, dtype=float)
    m, sigma = m_sigma(oracle.schedule, t_arr)
    if np.any(np.asarray(sigma) == 0.0):
        raise DomainError("diffused quantities need t > 0")
    if t_arr.ndim == 1 and t_arr.size != pts.shape[0]:
        raise DomainError("per-sample t must match the batch size")
    if t_arr.ndim == 0:
        return float(m), float(sigma)
    return m, sigma


def diffused_density(oracle: DiffusedOracle, x, t):
    """p_t(x); x of shape (d,) or (N, d); t scalar or per-sample array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    m, sigma = _flow_params(oracle, pts, t)
    m_col = np.reshape(m, (-1, 1)) if np.ndim(m) else m
    s_col = np.reshape(sigma, (-1, 1)) if np.ndim(sigma) else sigma
    if oracle.method == "uniform":
        out = np.prod(_uniform_1d_density(pts, m_col, s_col), axis=1)
    elif oracle.method == "mixture":
        log_terms, _, _ = _mixture_log_terms(oracle.mixture, pts, m, sigma)
        shift = log_terms.max(axis=1, keepdims=True)
        out = np.exp(shift[:, 0]) * np.exp(log_terms - shift).sum(axis=1)
    elif oracle.method == "separable":
        out, _, _ = _separable_batch(oracle, pts, m, sigma)
    else:
        out, _ = _quad_batch(oracle, pts, m, sigma)
    return float(out[0]) if single else out


def diffused_score(oracle: DiffusedOracle, x, t):
    """grad_x log p_t(x); raises RegionError where p_t underflows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    m, sigma = _flow_params(oracle, pts, t)
    m_col = np.reshape(m, (-1, 1)) if np.ndim(m) else m
    s_col = np.reshape(sigma, (-1, 1)) if np.ndim(sigma) else sigma
    if oracle.method == "uniform":
        dens = _uniform_1d_density(pts, m_col, s_col)
        if np.any(dens < _LOG_FLOOR):
            raise RegionError("p_t underflow; score evaluation refused")
        out = _uniform_1d_score(pts, m_col, s_col)
    elif oracle.method == "mixture":
        log_terms, diff, var_t = _mixture_log_terms(oracle.mixture, pts, m, sigma)
        shift = log_terms.max(axis=1, keepdims=True)
        resp = np.exp(log_terms - shift)
        resp /= resp.sum(axis=1, keepdims=True)
        out = -np.sum(resp[:, :, None] * diff / var_t[:, :, None], axis=1)
    elif oracle.method == "separable":
        _, out, q_i = _separable_batch(oracle, pts, m, sigma)
        if np.any(q_i < _LOG_FLOOR):
            raise RegionError("p_t underflow; score evaluation refused")
    else:
        dens, grad = _quad_batch(oracle, pts, m, sigma)
        if np.any(dens < _LOG_FLOOR):
            raise RegionError("p_t underflow; score evaluation refused")
        out = grad / dens[:, None]
    return out[0] if single else out


def _separable_batch(oracle: DiffusedOracle, x: np.ndarray, m, sigma):
    """Per-coordinate 1-D convolutions for fully factorized targets."""
    density = oracle.density
    d = density.d
    n = x.shape[0]
    m_arr = np.broadcast_to(np.asarray(m, dtype=float), (n,))
    s_arr = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    comp_of = {j[0]: f for j, f in zip(density.cliques.cliques, density.components)}
    ref_x, ref_w = np.polynomial.legendre.leggauss(oracle.quad_nodes)
    q = np.ones(n)
    grad = np.zeros((n, d))
    q_i_all = np.empty((n, d))
    for i in range(d):
        lo = np.maximum(-1.0, (x[:, i] - 8.0 * s_arr) / m_arr)
        hi = np.minimum(1.0, (x[:, i] + 8.0 * s_arr) / m_arr)
        width = np.maximum(hi - lo, 0.0)
        half = 0.5 * width
        mid = 0.5 * (lo + hi)
        u = mid[:, None] + half[:, None] * ref_x[None, :]  # (n, k)
        w = half[:, None] * ref_w[None, :]
        comp = comp_of.get(i)
        f_vals = comp(u.reshape(-1, 1)).reshape(u.shape) if comp is not None else 0.0
        p0_i = np.exp(f_vals - oracle.coord_logz[i])
        diff = x[:, i : i + 1] - m_arr[:, None] * u
        s2 = (s_arr**2)[:, None]
        kern = np.exp(-0.5 * diff * diff / s2) / np.sqrt(2.0 * np.pi * s2)
        common = w * p0_i * kern
        q_i = common.sum(axis=1)
        g_i = -(common * diff / s2).sum(axis=1)
        q_i_all[:, i] = q_i
        grad[:, i] = g_i
        q = q * q_i
    # score_i = g_i / q_i (valid where every marginal factor is positive)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(q_i_all > 0.0, grad / q_i_all, np.inf)
    return q, score, q_i_all


def _quad_batch(oracle: DiffusedOracle, x: np.ndarray, m, sigma):
    """Vectorized convolution quadrature: (N,) densities and (N,d) gradients.

    Each point gets its own per-coordinate integration box (the +-8 sigma
    window intersected with the cube), realized by affine-mapping one
    reference Gauss-Legendre rule; points whose box is empty get density 0.
    ``m``/``sigma`` may be scalars or per-row arrays.
    """
    density = oracle.density
    d = density.d
    n = x.shape[0]
    m_arr = np.broadcast_to(np.asarray(m, dtype=float), (n,))
    s_arr = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    ref_x, ref_w = np.polynomial.legendre.leggauss(oracle.quad_nodes)
    lo = np.maximum(-1.0, (x - 8.0 * s_arr[:, None]) / m_arr[:, None])  # (N, d)
    hi = np.minimum(1.0, (x + 8.0 * s_arr[:, None]) / m_arr[:, None])
    width = np.maximum(hi - lo, 0.0)
    p_out = np.zeros(n)
    g_out = np.zeros((n, d))
    valid = np.all(width > 0.0, axis=1)
    if not np.any(valid):
        return p_out, g_out
    idx = np.flatnonzero(valid)
    k = oracle.quad_nodes
    chunk = max(1, int(2_000_000 // k**d))
    mesh = np.meshgrid(*([np.arange(k)] * d), indexing="ij")
    node_sel = np.stack([g.reshape(-1) for g in mesh], axis=-1)  # (k^d, d)
    w_ref = ref_w[node_sel].prod(axis=1)  # (k^d,)
    for start in range(0, idx.size, chunk):
        rows = idx[start : start + chunk]
        xi = x[rows]
        m_r = m_arr[rows][:, None]
        s2_r = (s_arr[rows] ** 2)[:, None]
        half = 0.5 * width[rows]  # (c, d)
        mid = 0.5 * (lo[rows] + hi[rows])
        # ys: (c, k^d, d)
        ys = mid[:, None, :] + half[:, None, :] * ref_x[node_sel][None, :, :]
        wts = w_ref[None, :] * half.prod(axis=1)[:, None]  # (c, k^d)
        flat = ys.reshape(-1, d)
        p0 = np.exp(density.interaction_sum(flat) - density.logZ).reshape(ys.shape[:2])
        diff = xi[:, None, :] - m_r[:, :, None] * ys
        kernel = np.exp(-0.5 * np.sum(diff * diff, axis=2) / s2_r) / (
            s2_r ** (d / 2) * (2.0 * np.pi) ** (d / 2)
        )
        common = wts * p0 * kernel
        p_out[rows] = common.sum(axis=1)
        g_out[rows] = -(common[:, :, None] * diff / s2_r[:, :, None]).sum(axis=1)
    return p_out, g_out


def as_score_fn(oracle: DiffusedOracle):
    """Vectorized (X, t) -> score adapter for the reverse sampler."""

    def fn(x: np.ndarray, t: float) -> np.ndarray:
        return np.atleast_2d(diffused_score(oracle, x, t))

    return fn


def safe_score_fn(oracle: DiffusedOracle, envelope: float = 6.0):
    """Sampler-safe oracle score: states beyond the m_t + envelope*sigma_t
    box (where p_t underflows and the score is numerically undefined) are
    evaluated at the clamped state, whose score points firmly inward."""

    def fn(x: np.ndarray, t: float) -> np.ndarray:
        m, sigma = m_sigma(oracle.schedule, float(t))
        lim = m + envelope * sigma
        return np.atleast_2d(
            diffused_score(oracle, np.clip(np.atleast_2d(x), -lim, lim), t)
        )

    return fn


@dataclass(frozen=True)
class ScoreL2:
    value: float
    stderr: float
    mc_n: int


def _draw_p0(oracle: DiffusedOracle, n: int, rng: np.random.Generator) -> np.ndarray:
    from .density import sample as density_sample

    if oracle.method == "uniform":
        return rng.uniform(-1.0, 1.0, size=(n, oracle.d))
    if oracle.method == "mixture":
        return oracle.mixture.sample(n, rng)
    return density_sample(oracle.density, n, int(rng.integers(2**63)))


def score_l2_error(
    candidate_score,
    oracle: DiffusedOracle,
    t: float,
    mc_n: int,
    rng: np.random.Generator,
) -> ScoreL2:
    """Root integrated squared score error under p_t, by Monte Carlo.

    Draws fresh p0 samples, pushes them through the forward perturbation and
    averages ``||candidate - oracle||^2``; the returned stderr is the delta-
    method error of the square root.
    """
    x0 = _draw_p0(oracle, mc_n, rng)
    x = forward_perturb(oracle.schedule, x0, t, rng)
    diff = np.atleast_2d(candidate_score(x, t)) - np.atleast_2d(
        diffused_score(oracle, x, t)
    )
    sq = np.sum(diff * diff, axis=1)
    mean = float(sq.mean())
    se_mean = float(sq.std(ddof=1) / np.sqrt(mc_n)) if mc_n > 1 else 0.0
    value = float(np.sqrt(mean))
    stderr = se_mean / (2.0 * value) if value > 0 else se_mean
    return ScoreL2(value=value, stderr=stderr, mc_n=mc_n)
