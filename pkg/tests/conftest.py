import numpy as np
import pytest

from cardioreg.phantom import PhantomSpec, generate
from cardioreg.transforms import SimilarityTransform, rotation_about


def random_rigid(rng):
    axis = rng.normal(size=3)
    return rotation_about(axis, rng.uniform(1.0, 179.0)), rng.uniform(-40.0, 40.0, 3)


@pytest.fixture(scope="session")
def default_phantom():
    """Identity-pose noiseless phantom shared by read-only tests."""
    return generate(PhantomSpec(seed=0))


@pytest.fixture(scope="session")
def transformed_phantom():
    truth = SimilarityTransform(
        scale=1.12,
        rotation=rotation_about([0.3, 1.0, 0.4], 24.0),
        translation=np.array([11.0, -7.0, 4.0]),
    )
    return generate(PhantomSpec(seed=2, truth_transform=truth, noise_sigma=0.3))
