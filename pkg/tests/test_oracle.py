"""
* Tests: Saddle-point Oracle
"""
# Third Party Imports
import numpy as np
import pytest

# Local Imports
from mfvscheme._errors import OracleSizeError
from mfvscheme.utils.generators import (
    Distortion,
    gen_distorted_quads,
    gen_refined_nonconforming,
    gen_uniform_squares,
    gen_uniform_triangles)
from mfvscheme.utils.problem import compute_cell_data
from mfvscheme.utils.scheme import (
    PenalizationPolicy,
    assemble_saddle_oracle,
    dirichlet_traces,
    saddle_oracle_size,
    solve_mfv,
    solve_saddle_oracle)


ORACLE_MESHES = [
    gen_uniform_squares(3),
    gen_refined_nonconforming(4, [((0.0, 0.0, 0.5, 0.5), 2)]),
    gen_distorted_quads(5, Distortion(kind='jitter', amplitude=0.2, seed=11)),
    gen_uniform_triangles(2)
]
ORACLE_IDS = ['squares', 'nonconforming', 'distorted', 'triangles']


def relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def dense_bound(mesh, policy: PenalizationPolicy) -> float:
    """Agreement both dense and hybrid solves can reach in double precision.

    The saddle-point matrix of a mesh with cells of more than three edges has
    a condition number of order 1/min(ν_K m(K)), which caps the dense solve.
    """
    if mesh.is_simplicial:
        return 1e-8
    weight = float(np.min(policy.values(mesh, check=False) * mesh.cell_areas))
    return max(1e-8, 1e2 * np.finfo(float).eps / weight)


def test_oracle_meshes():
    assert [m.n_cells for m in ORACLE_MESHES] == [9, 28, 25, 8]
    assert all(saddle_oracle_size(m) <= 500 for m in ORACLE_MESHES)


def test_oracle_size(squares2, isotropic):
    # 3 unknowns per cell and one flux per incidence
    assert saddle_oracle_size(squares2) == 12 + 16
    system = assemble_saddle_oracle(squares2, compute_cell_data(squares2, isotropic), PenalizationPolicy())
    assert system.matrix.shape == (28, 28)
    assert system.size == 28


def test_oracle_rejects_large_meshes(isotropic):
    mesh = gen_uniform_squares(8)
    with pytest.raises(OracleSizeError):
        assemble_saddle_oracle(mesh, compute_cell_data(mesh, isotropic), PenalizationPolicy())


@pytest.mark.parametrize('mesh', ORACLE_MESHES, ids=ORACLE_IDS)
@pytest.mark.parametrize('name', ['isotropic', 'lepotier'])
def test_hybrid_solution_matches_oracle(mesh, name, request, moderate):
    case = request.getfixturevalue(name)
    data = compute_cell_data(mesh, case)
    oracle = solve_saddle_oracle(mesh, data, moderate, dirichlet_traces(mesh, case))
    hybrid = solve_mfv(mesh, case, moderate)
    assert relative_gap(hybrid.u, oracle.u) <= 1e-8
    assert relative_gap(hybrid.v, oracle.v) <= 1e-8
    assert relative_gap(hybrid.flux, oracle.flux) <= 1e-8
    assert relative_gap(hybrid.traces, oracle.traces) <= 1e-8


@pytest.mark.parametrize('mesh', ORACLE_MESHES, ids=ORACLE_IDS)
@pytest.mark.parametrize('name', ['isotropic', 'lepotier'])
def test_hybrid_solution_matches_oracle_default_penalization(mesh, name, request):
    case = request.getfixturevalue(name)
    policy = PenalizationPolicy()
    data = compute_cell_data(mesh, case)
    oracle = solve_saddle_oracle(mesh, data, policy, dirichlet_traces(mesh, case))
    hybrid = solve_mfv(mesh, case, policy)
    bound = dense_bound(mesh, policy)
    assert bound <= 2.3e-5
    assert relative_gap(hybrid.u, oracle.u) <= bound
    assert relative_gap(hybrid.v, oracle.v) <= bound
    assert relative_gap(hybrid.flux, oracle.flux) <= bound
    assert relative_gap(hybrid.traces, oracle.traces) <= bound


def test_oracle_with_affine_boundary_data(patch, moderate):
    mesh = gen_uniform_squares(3)
    data = compute_cell_data(mesh, patch)
    oracle = solve_saddle_oracle(mesh, data, moderate, dirichlet_traces(mesh, patch))
    hybrid = solve_mfv(mesh, patch, moderate)
    assert relative_gap(hybrid.u, oracle.u) <= 1e-8
    assert relative_gap(hybrid.flux, oracle.flux) <= 1e-8


def test_oracle_zero_penalization_on_triangles(triangles4, isotropic):
    policy = PenalizationPolicy(mode='zero')
    data = compute_cell_data(triangles4, isotropic)
    oracle = solve_saddle_oracle(triangles4, data, policy)
    hybrid = solve_mfv(triangles4, isotropic, policy)
    assert relative_gap(hybrid.u, oracle.u) <= 1e-8


def test_oracle_singular_without_penalization_on_squares(isotropic):
    mesh = gen_uniform_squares(3)
    data = compute_cell_data(mesh, isotropic)
    system = assemble_saddle_oracle(mesh, data, PenalizationPolicy(mode='zero'))
    assert np.linalg.matrix_rank(system.matrix) < system.size
