import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from phasefield.assembly import ModelParams, assemble_operators
from phasefield.geometry import MeshSpec, build_nested_rect_mesh

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return ModelParams(k_omega=1.0, k_wall=0.5, latent_l=1.0, tau=0.005, xi=0.03, lambda_bc=10.0, t_end=0.2)


@pytest.fixture(scope="session")
def small_mesh():
    return build_nested_rect_mesh(MeshSpec(1.0, 1.0, 0.25, 0.125))


@pytest.fixture(scope="session")
def small_ops(small_mesh, params):
    return assemble_operators(small_mesh, params)


@pytest.fixture(scope="session")
def box_mesh():
    # ~1k nodes with a wall
    return build_nested_rect_mesh(MeshSpec(1.2, 1.2, 0.1, 0.04))


@pytest.fixture(scope="session")
def box_ops(box_mesh, params):
    return assemble_operators(box_mesh, params)


def zero_g(x, y, t):
    return np.zeros(np.shape(x))
