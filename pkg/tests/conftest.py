import textwrap

import numpy as np
import pytest

from krl.instances import GridSpec, PLaplaceSpec, build_matrix_operator, build_plaplace_operator
from krl.solver import ContinuationConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sym2():
    return build_matrix_operator([[2.0, 1.0], [1.0, 2.0]])


@pytest.fixture
def identity2():
    return build_matrix_operator(np.eye(2), label="identity")


@pytest.fixture
def tight():
    """Continuation settings for checks at the 1e-8 level (eps bias ~ eps_min)."""
    return ContinuationConfig(eps_min=1e-12)


@pytest.fixture
def small_grid():
    return GridSpec(n=49)


@pytest.fixture
def plaplace3(small_grid):
    return build_plaplace_operator(PLaplaceSpec(p=3.0, grid=small_grid))


@pytest.fixture
def write_config(tmp_path):
    def write(text, name="run.toml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
        return path

    return write


@pytest.fixture
def positive_matrix(rng):
    def make(n, low=0.1):
        return low + rng.random((n, n))

    return make
