import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture
def unit_disk():
    from neumannlab.geometry import DomainGeometry
    return DomainGeometry.exterior_disks([[0.0, 0.0]], [1.0])


@pytest.fixture
def upper_half():
    """{x2 > 0}, outward normal (0, -1)."""
    from neumannlab.geometry import DomainGeometry
    return DomainGeometry.half_space([0.0, -1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
