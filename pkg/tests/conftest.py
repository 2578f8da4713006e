import numpy as np
import pytest

from semsplat.render import RenderSettings
from semsplat.synthetic import (make_embedding_fixture, make_training_fixture,
                                make_true_scene, random_scene)

# Smooth surface for finite-difference comparisons: the alpha skip and the
# transmittance stop are step functions of the parameters.
SMOOTH = RenderSettings(alpha_skip=0.0, transmittance_min=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def embedding_fixture():
    """(EmbeddingTable, query lookup dict, entry list) with hand-built geometry."""
    return make_embedding_fixture()


@pytest.fixture(scope="session")
def true_fixture():
    """The noise-free three-cluster scene and per-Gaussian class ids."""
    return make_true_scene(seed=7)


@pytest.fixture(scope="session")
def training_fixture():
    """(dataset, init_scene, true_scene, classes) at the benchmark size."""
    return make_training_fixture(seed=7)


@pytest.fixture(scope="session")
def small_fixture():
    """Cheaper variant of the training fixture for smoke tests."""
    return make_training_fixture(seed=7, num_views=4, size=40)


@pytest.fixture
def small_scene(rng):
    """A random renderable scene with its camera."""
    return random_scene(rng, num_gaussians=40, sh_degree=1)
