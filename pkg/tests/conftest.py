import os
import sys

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from threeterm.info import JointPmf  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_pmf(rng: np.random.Generator, shape, names=None, zeros: float = 0.0) -> JointPmf:
    names = names or [f"X{i + 1}" for i in range(len(shape))]
    m = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    if zeros:
        m = np.where(rng.random(shape) < zeros, 0.0, m)
        if m.sum() == 0:
            m.flat[0] = 1.0
    return JointPmf.from_array(m, names, normalize=True)


def random_kernel(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])


@st.composite
def pmfs(draw, max_vars: int = 3, max_size: int = 3, zeros: bool = True):
    k = draw(st.integers(1, max_vars))
    shape = tuple(draw(st.integers(1, max_size)) for _ in range(k))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    frac = draw(st.sampled_from([0.0, 0.3])) if zeros else 0.0
    return random_pmf(np.random.default_rng(seed), shape, zeros=frac)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
