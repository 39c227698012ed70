"""Shipped benchmark densities.

Fixed coefficient sets (not seed-generated) so benchmark targets are stable
across versions.  The 1-D target is visibly non-uniform (density ratio ~8
across the cube) while keeping a beta=1 certificate.
"""

from __future__ import annotations

import numpy as np

from .density import (
    CliqueSet,
    InteractionDensity,
    QuadSpec,
    SmoothComponent,
    normalize,
    zero_component,
)


def _active_component() -> SmoothComponent:
    return SmoothComponent(
        arity=1,
        freqs=np.array([[1], [2]]),
        coefs=np.array([0.7, 0.35]),
        holder_beta=1.0,
        holder_C=2.2,
    )


def _second_component() -> SmoothComponent:
    return SmoothComponent(
        arity=1,
        freqs=np.array([[1], [3]]),
        coefs=np.array([-0.55, 0.15]),
        holder_beta=1.0,
        holder_C=1.6,
    )


def benchmark_density_1d() -> InteractionDensity:
    """d=1, dstar=1, beta=1 rate-study target."""
    cs = CliqueSet(d=1, dstar=1, cliques=((0,),))
    return normalize(cs, (_active_component(),), QuadSpec())


def padded_density(d: int) -> InteractionDensity:
    """The 1-D target embedded in ambient dimension d; coordinates 1..d-1
    carry no interaction terms and are exactly uniform."""
    cs = CliqueSet(d=d, dstar=1, cliques=((0,),))
    return normalize(cs, (_active_component(),), QuadSpec())


def benchmark_density_2d() -> InteractionDensity:
    """d=2, dstar=1 product target for the piecewise (W1) benchmark."""
    cs = CliqueSet(d=2, dstar=1, cliques=((0,), (1,)))
    return normalize(cs, (_active_component(), _second_component()), QuadSpec())


def chain_density_4d() -> InteractionDensity:
    """d=4, dstar=2 Markov-chain structure over cliques {01, 12, 23}."""
    from .density import make_component

    cs = CliqueSet(d=4, dstar=2, cliques=((0, 1), (1, 2), (2, 3)))
    comps = tuple(make_component(2, 1.0, 0.8, seed=11 + k) for k in range(3))
    return normalize(cs, comps, QuadSpec())


def uniform_density(d: int) -> InteractionDensity:
    cs = CliqueSet(d=d, dstar=1, cliques=((0,),))
    return normalize(cs, (zero_component(1),), QuadSpec())


PRESETS = {
    "bench1d": benchmark_density_1d,
    "bench2d": benchmark_density_2d,
    "chain4d": chain_density_4d,
    "uniform1d": lambda: uniform_density(1),
    "uniform2d": lambda: uniform_density(2),
    "uniform3d": lambda: uniform_density(3),
}


def padded_preset(d: int) -> InteractionDensity:
    return padded_density(d)
