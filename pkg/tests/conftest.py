import numpy as np
import pytest

from scorelab.density import CliqueSet, QuadSpec, SmoothComponent, normalize, zero_component
from scorelab.schedule import NoiseSchedule


@pytest.fixture(scope="session")
def const_schedule():
    return NoiseSchedule()


@pytest.fixture(scope="session")
def uniform_1d():
    cs = CliqueSet(d=1, dstar=1, cliques=((0,),))
    return normalize(cs, (zero_component(1),), QuadSpec())


@pytest.fixture(scope="session")
def uniform_2d():
    cs = CliqueSet(d=2, dstar=1, cliques=((0,),))
    return normalize(cs, (zero_component(1),), QuadSpec())


def linear_component_1d():
    """f(x) = x on [-1,1] (pure linear term, certified Lipschitz 1)."""
    return SmoothComponent(
        arity=1,
        freqs=np.zeros((1, 1), dtype=np.int64),
        coefs=np.zeros(1),
        linear=np.ones(1),
        holder_beta=1.0,
        holder_C=1.0,
    )


@pytest.fixture(scope="session")
def exp_x_density():
    """p0 proportional to e^x on [-1,1]: logZ = log(e - 1/e)."""
    cs = CliqueSet(d=1, dstar=1, cliques=((0,),))
    return normalize(cs, (linear_component_1d(),), QuadSpec())


@pytest.fixture(scope="session")
def bench_1d():
    from scorelab.presets import benchmark_density_1d

    return benchmark_density_1d()


@pytest.fixture(scope="session")
def chain_4d():
    from scorelab.presets import chain_density_4d

    return chain_density_4d()
