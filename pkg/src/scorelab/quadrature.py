"""Shared quadrature rules.

Thin wrappers around numpy's Gauss rules plus the tensor-product helpers used
across the density, oracle and decomposition modules.  Conventions:

- Gauss-Legendre rules are returned already mapped to the target interval.
- The Gaussian-weighted rules integrate against the standard normal density,
  i.e. ``sum(w * g(x)) ~ E[g(Z)]`` for ``Z ~ N(0,1)``.
- ``split`` points let a rule resolve integrands with known kinks: the
  interval is partitioned at the splits and a full rule is laid on each piece.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError

_SQRT2 = np.sqrt(2.0)
_NORM_CONST = 1.0 / np.sqrt(2.0 * np.pi)


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def gauss_hermite_prob(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point rule for integrals against the standard normal density."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return x * _SQRT2, w / np.sqrt(np.pi)


def gaussian_rule_1d(
    n: int,
    ylim: float = 8.0,
    splits: tuple[float, ...] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``E[g(Z)]`` built from Gauss-Legendre pieces on [-ylim, ylim].

    Unlike Gauss-Hermite this stays accurate for integrands with kinks,
    provided the kink locations are passed as ``splits``.  Splits outside
    (-ylim, ylim) are ignored.  The truncation error of cutting the Gaussian
    at ``ylim=8`` is below 1e-15 relative.
    """
    cuts = sorted({s for s in splits if -ylim < s < ylim})
    edges = [-ylim, *cuts, ylim]
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(lo, hi, n)
        nodes.append(x)
        weights.append(w * _NORM_CONST * np.exp(-0.5 * x * x))
    return np.concatenate(nodes), np.concatenate(weights)


def tensor_nodes(
    rules: list[tuple[np.ndarray, np.ndarray]],
) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product of 1-D rules.

    Returns ``(points, weights)`` with ``points`` of shape ``(N, k)`` where
    ``k = len(rules)`` and ``N`` the product of the rule sizes.
    """
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    w = rules[0][1]
    for _, wi in rules[1:]:
        w = np.multiply.outer(w, wi)
    return pts, w.reshape(-1)


def integrate_box(
    f,
    lo: np.ndarray,
    hi: np.ndarray,
    n_per_axis: int,
    splits: list[tuple[float, ...]] | None = None,
) -> float:
    """Tensor Gauss-Legendre integral of ``f`` over the box [lo, hi].

    ``f`` maps an ``(N, k)`` array of points to ``(N,)`` values.  ``splits``
    optionally gives per-axis interior breakpoints (kink loci).
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    rules = []
    for ax in range(lo.size):
        cuts = () if splits is None else tuple(
            s for s in splits[ax] if lo[ax] < s < hi[ax]
        )
        edges = [lo[ax], *sorted(set(cuts)), hi[ax]]
        xs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(a, b, n_per_axis)
            xs.append(x)
            ws.append(w)
        rules.append((np.concatenate(xs), np.concatenate(ws)))
    pts, w = tensor_nodes(rules)
    return float(np.dot(np.asarray(f(pts), dtype=float), w))


def adaptive_tensor_integral(
    f,
    lo: np.ndarray,
    hi: np.ndarray,
    rel_tol: float = 1e-6,
    start_nodes: int = 8,
    max_nodes: int = 128,
    splits: list[tuple[float, ...]] | None = None,
) -> tuple[float, float]:
    """Nested-refinement tensor quadrature with a relative-change stop rule.

    Doubles the per-axis node count until two consecutive estimates agree to
    ``rel_tol`` (relative), returning ``(value, error_estimate)``.

    Raises
    ------
    NumericError
        If the estimates still disagree at ``max_nodes`` per axis.
    """
    prev = integrate_box(f, lo, hi, start_nodes, splits)
    n = start_nodes * 2
    while n <= max_nodes:
        cur = integrate_box(f, lo, hi, n, splits)
        err = abs(cur - prev)
        scale = max(abs(cur), 1e-300)
        if err / scale <= rel_tol:
            return cur, err
        prev = cur
        n *= 2
    raise NumericError(
        f"tensor quadrature did not converge to rel_tol={rel_tol:g} "
        f"by {max_nodes} nodes per axis (last change {err:.3g})"
    )
