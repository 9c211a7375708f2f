import numpy as np
import pytest

from fairtime.instance import Instance, alpha_filter, gen_random


@pytest.fixture
def toy():
    """Two stakeholders, two decisions, each decision favours one of them."""
    return alpha_filter(Instance(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 1.0])))


def random_filtered(seed, n, k, resolution=None):
    return alpha_filter(gen_random(n, k, seed=seed, alpha=1e-3, resolution=resolution))
