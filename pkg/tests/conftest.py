"""
* Shared Test Fixtures
"""
# Third Party Imports
import numpy as np
import pytest

# Local Imports
from mfvscheme.utils.generators import gen_uniform_squares, gen_uniform_triangles
from mfvscheme.utils.mesh import Mesh
from mfvscheme.utils.problem import ProblemCase, case_isotropic, case_lepotier, case_patch_affine
from mfvscheme.utils.scheme import PenalizationPolicy


def pytest_addoption(parser):
    parser.addoption('--run-slow', action='store_true', default=False, help='Run published-table reproductions.')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--run-slow'):
        return
    skip = pytest.mark.skip(reason='needs --run-slow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


def conservativity_floor(mesh: Mesh, policy: PenalizationPolicy, traces: np.ndarray) -> float:
    """Bound on the flux continuity residual of a double precision solve.

    On cells with more than three edges the fluxes carry Π(u_σ)/(ν_K m(K)), so
    F_{K,σ} + F_{L,σ} cannot resolve below about eps·|u_σ| / (ν_K m(K)).
    Triangles have no such part and keep the plain 1e-10 bound.
    """
    nu = policy.values(mesh, check=False)
    weight = float(np.min(nu * mesh.cell_areas))
    if mesh.is_simplicial or weight <= 0.0:
        return 1e-10
    scale = max(1.0, float(np.max(np.abs(traces))))
    return max(1e-10, 1e2 * np.finfo(float).eps * scale / weight)


@pytest.fixture
def squares2() -> Mesh:
    return gen_uniform_squares(2)


@pytest.fixture
def squares3() -> Mesh:
    return gen_uniform_squares(3)


@pytest.fixture
def triangles4() -> Mesh:
    return gen_uniform_triangles(4)


@pytest.fixture
def isotropic() -> ProblemCase:
    return case_isotropic()


@pytest.fixture
def lepotier() -> ProblemCase:
    return case_lepotier()


@pytest.fixture
def patch() -> ProblemCase:
    return case_patch_affine()


@pytest.fixture
def moderate() -> PenalizationPolicy:
    """Penalization small enough for consistency, large enough for tight roundoff."""
    return PenalizationPolicy(mode='fixed', nu0=1e-4)
