"""
* Tests: Mixed Finite Volume Scheme
"""
# Third Party Imports
import numpy as np
import pytest

# Local Imports
from conftest import conservativity_floor
from mfvscheme._errors import ConfigError, LocalSystemError
from mfvscheme.utils.analysis import error_report
from mfvscheme.utils.generators import (
    Distortion,
    gen_distorted_quads,
    gen_refined_nonconforming,
    gen_uniform_squares,
    gen_uniform_triangles)
from mfvscheme.utils.mesh import build_mesh
from mfvscheme.utils.problem import compute_cell_data
from mfvscheme.utils.scheme import (
    PenalizationPolicy,
    Solution,
    assemble_hybrid,
    back_substitute,
    dirichlet_traces,
    local_system,
    scheme_residuals,
    solve_mfv)


def cell_system(mesh, case, k: int, nu: float):
    cell = mesh.cells[k]
    data = compute_cell_data(mesh, case)
    return local_system(cell, data[k], nu, mesh.edge_centers[list(cell.edge_ids)], index=k)


def exact_fluxes(mesh, case) -> np.ndarray:
    """m(σ) Λ∇ū·n_{K,σ} for an affine solution and a constant tensor."""
    x = mesh.cell_points[mesh.incidence_cell]
    lam_grad = np.einsum('kij,kj->ki', case.tensor(x), case.exact.gradient(x))
    lengths = mesh.edge_lengths[mesh.incidence_edge]
    return lengths * np.einsum('ij,ij->i', lam_grad, mesh.incidence_normals)


"""
* Penalization
"""


class TestPenalization:

    def test_parse_number(self):
        policy = PenalizationPolicy.parse('1e-4')
        assert policy.mode == 'fixed-over-measure'
        assert policy.nu0 == pytest.approx(1e-4)

    def test_parse_aliases(self):
        assert PenalizationPolicy.parse('fixed').mode == 'fixed-over-measure'
        power = PenalizationPolicy.parse('power', nu0=2e-3, beta=-0.5)
        assert power.mode == 'power-of-diameter'
        assert power.beta == pytest.approx(-0.5)
        assert PenalizationPolicy.parse('zero').mode == 'zero'

    def test_rejects_bad_values(self):
        with pytest.raises(ConfigError):
            PenalizationPolicy(mode='quadratic')
        with pytest.raises(ConfigError):
            PenalizationPolicy(nu0=0.0)
        with pytest.raises(ConfigError):
            PenalizationPolicy(mode='power', beta=float('nan'))

    def test_values(self, squares2):
        assert np.allclose(PenalizationPolicy().values(squares2), 1e-9 / 0.25)
        power = PenalizationPolicy(mode='power', nu0=1e-3, beta=-1.0)
        assert np.allclose(power.values(squares2), 1e-3 / (np.sqrt(2) / 2))

    def test_zero_requires_simplicial_mesh(self, squares2, triangles4):
        policy = PenalizationPolicy(mode='zero')
        with pytest.raises(LocalSystemError) as e:
            policy.values(squares2)
        assert 'penalization zero requires simplicial mesh' in str(e.value)
        assert np.array_equal(policy.values(triangles4), np.zeros(triangles4.n_cells))

    def test_describe(self):
        assert PenalizationPolicy().describe() == '1e-09/m(K)'
        assert PenalizationPolicy(mode='zero').describe() == 'zero'


"""
* Local Systems
"""


class TestLocalSystem:

    def test_unit_square_matrix(self, isotropic):
        mesh = gen_uniform_squares(1)
        s = cell_system(mesh, isotropic, 0, 1e-9)
        # Opposite edges couple with −1/4, neighbouring edges do not couple
        cosines = s.offsets @ s.offsets.T / 0.25
        expected = 0.25 * cosines + 1e-9 * np.eye(4)
        assert np.allclose(s.matrix, expected, rtol=0.0, atol=1e-15)
        assert set(np.round(cosines.ravel()).astype(int)) == {-1, 0, 1}
        assert np.allclose(np.diag(s.matrix), 0.25 + 1e-9, rtol=0.0, atol=1e-15)

    def test_load_sums_to_one(self, lepotier):
        mesh = gen_distorted_quads(4, Distortion(kind='jitter', amplitude=0.2, seed=1))
        for k in range(mesh.n_cells):
            s = cell_system(mesh, lepotier, k, 1e-9 / mesh.cell_areas[k])
            assert s.load.sum() == pytest.approx(1.0)
            assert np.allclose(s.element_matrix, s.element_matrix.T)
            assert np.allclose(s.b_coeffs / s.b_k, s.load, rtol=1e-6)

    @pytest.mark.parametrize('nu0', [1e-2, 1e-4])
    def test_element_matrix_matches_bordered_system(self, nu0, lepotier):
        mesh = gen_refined_nonconforming(4, [((0.0, 0.0, 0.5, 0.5), 2)])
        assert set(mesh.cell_edge_counts) == {4, 5}
        for k in range(mesh.n_cells):
            s = cell_system(mesh, lepotier, k, nu0 / mesh.cell_areas[k])
            n = s.size
            bordered = np.ones((n + 1, n + 1))
            bordered[:n, :n] = s.matrix
            bordered[n, n] = 0.0
            inverse = np.linalg.inv(bordered)
            scale = np.abs(inverse[:n, :n]).max()
            assert np.allclose(s.element_matrix, inverse[:n, :n], rtol=0.0, atol=1e-10 * scale)
            assert np.allclose(s.load, inverse[:n, n], rtol=0.0, atol=1e-10)

    def test_projector_part(self, lepotier):
        mesh = gen_refined_nonconforming(4, [((0.0, 0.0, 0.5, 0.5), 2)])
        for k in range(mesh.n_cells):
            s = cell_system(mesh, lepotier, k, 1e-9 / mesh.cell_areas[k])
            assert np.linalg.matrix_rank(s.stiff, tol=1e-10) == s.size - 3
            assert np.allclose(s.stiff @ np.ones(s.size), 0.0, atol=1e-14)
            assert np.allclose(s.offsets.T @ s.stiff, 0.0, atol=1e-14)
        triangle = build_mesh([((0, 0), (1, 0), (0.2, 0.9))])
        assert cell_system(triangle, lepotier, 0, 1e-9).stiff is None

    def test_recover_satisfies_cell_relations(self, patch):
        mesh = gen_distorted_quads(4, Distortion(kind='jitter', amplitude=0.2, seed=1))
        data = compute_cell_data(mesh, patch)
        for k in range(mesh.n_cells):
            s = cell_system(mesh, patch, k, 1e-9 / mesh.cell_areas[k])
            traces = patch.exact.value(mesh.edge_centers[list(s.edge_ids)])
            f_k = 0.3 * s.area
            u, v, fluxes = s.recover(traces, f_k)
            assert abs(fluxes.sum() + f_k) <= 1e-13 * (f_k + np.abs(fluxes).max())
            moment = s.offsets.T @ fluxes
            gap = np.linalg.norm(s.area * data.lambda_k[k] @ v - moment)
            assert gap <= 1e-12 * s.area * np.linalg.norm(data.lambda_k[k], 2) * np.linalg.norm(v)
            trace = s.offsets @ v + s.weight * fluxes - (traces - u)
            assert np.abs(trace).max() <= 1e-11 * np.abs(traces).max()

    def test_square_without_penalization_is_singular(self, isotropic):
        mesh = gen_uniform_squares(1)
        s = cell_system(mesh, isotropic, 0, 1e-9)
        assert np.linalg.matrix_rank(s.matrix - 1e-9 * np.eye(4)) == 2
        with pytest.raises(LocalSystemError):
            cell_system(mesh, isotropic, 0, 0.0)

    def test_triangle_without_penalization(self, isotropic):
        mesh = build_mesh([((0, 0), (1, 0), (0, 1))])
        s = cell_system(mesh, isotropic, 0, 0.0)
        assert np.linalg.matrix_rank(s.matrix) == 2
        assert s.stiff is None
        assert s.b_k is None and s.b_coeffs is None
        assert s.load.sum() == pytest.approx(1.0)
        assert np.allclose(s.element_matrix @ np.ones(3), 0.0, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(s.element_matrix) >= -1e-12)

    def test_negative_penalization(self, isotropic):
        with pytest.raises(LocalSystemError):
            cell_system(gen_uniform_squares(1), isotropic, 0, -1.0)

    def test_recover_constant_traces(self, isotropic):
        mesh = build_mesh([((0, 0), (1, 0), (0.2, 0.9))])
        s = cell_system(mesh, isotropic, 0, 1e-3)
        u, v, fluxes = s.recover(np.full(3, 2.0), 0.0)
        assert u == pytest.approx(2.0)
        assert np.allclose(v, 0.0, atol=1e-12)
        assert np.allclose(fluxes, 0.0, atol=1e-12)


"""
* Hybrid System
"""


class TestHybridSystem:

    def test_single_cell_has_no_unknowns(self, isotropic):
        mesh = gen_uniform_squares(1)
        solution = solve_mfv(mesh, isotropic)
        assert solution.diagnostics['solver']['unknowns'] == 0
        assert np.all(np.isfinite(solution.u))
        assert solution.u[0] > 0.0

    def test_two_by_two_matrix(self, squares2, isotropic):
        system = assemble_hybrid(
            squares2, compute_cell_data(squares2, isotropic), PenalizationPolicy(),
            dirichlet_traces(squares2, isotropic))
        dense = system.matrix.matrix.toarray()
        assert dense.shape == (4, 4)
        assert np.allclose(dense, dense.T, rtol=0.0, atol=1e-14 * np.abs(dense).max())
        assert np.all(np.linalg.eigvalsh(dense) > 0.0)

    def test_source_scales_rhs_only(self, squares3, lepotier, moderate):
        a = assemble_hybrid(squares3, compute_cell_data(squares3, lepotier), moderate)
        b = assemble_hybrid(squares3, compute_cell_data(squares3, lepotier.scaled(3.0)), moderate)
        assert np.allclose(b.rhs, 3.0 * a.rhs)
        assert np.array_equal(a.matrix.matrix.toarray(), b.matrix.matrix.toarray())

    @pytest.mark.parametrize('mesh', [
        gen_uniform_squares(3),
        gen_uniform_triangles(3),
        gen_distorted_quads(5, Distortion(kind='jitter', amplitude=0.2, seed=11)),
        gen_refined_nonconforming(4, [((0.0, 0.0, 0.5, 0.5), 2)])
    ], ids=['squares', 'triangles', 'distorted', 'nonconforming'])
    def test_zero_source_gives_zero_solution(self, mesh, isotropic):
        solution = solve_mfv(mesh, isotropic.with_source(lambda x: np.zeros(len(x))))
        assert np.abs(solution.u).max() <= 1e-12
        assert np.abs(solution.v).max() <= 1e-12
        assert np.abs(solution.flux).max() <= 1e-12

    def test_defect_matches_assembled_residual(self, lepotier, moderate):
        mesh = gen_distorted_quads(5, Distortion(kind='jitter', amplitude=0.2, seed=11))
        system = assemble_hybrid(
            mesh, compute_cell_data(mesh, lepotier), moderate, dirichlet_traces(mesh, lepotier))
        x = np.random.default_rng(3).normal(size=system.n)
        expected = system.rhs - system.matrix.matrix @ x
        assert np.allclose(system.defect(x), expected, rtol=0.0, atol=1e-10 * np.abs(expected).max())

    def test_solve_refines_against_defect(self, squares3, lepotier):
        solution = solve_mfv(squares3, lepotier)
        assert solution.diagnostics['solver']['refinements'] == 1

    def test_back_substitution_matches_solve(self, squares3, lepotier, moderate):
        solution = solve_mfv(squares3, lepotier, moderate)
        again = back_substitute(squares3, compute_cell_data(squares3, lepotier), moderate, solution.traces)
        assert np.allclose(again.u, solution.u)
        assert np.allclose(again.flux, solution.flux)


"""
* Patch Test
"""


@pytest.mark.parametrize('mesh', [
    gen_uniform_squares(6),
    gen_distorted_quads(8, Distortion(kind='jitter', amplitude=0.2, seed=7)),
    gen_refined_nonconforming(4, [((0.5, 0.5, 1.0, 1.0), 2)]),
    gen_uniform_triangles(5, pattern='crisscross')
], ids=['squares', 'distorted', 'nonconforming', 'triangles'])
def test_affine_solution_is_reproduced(mesh, patch):
    solution = solve_mfv(mesh, patch)
    report = error_report(mesh, solution, patch)
    assert report['e2_u'] <= 1e-6
    assert report['e2_grad'] <= 1e-6
    assert np.allclose(solution.flux, exact_fluxes(mesh, patch), rtol=0.0, atol=1e-5)
    edges = mesh.edge_centers
    assert np.allclose(solution.traces, patch.exact.value(edges), rtol=0.0, atol=1e-6)


"""
* Solution Properties
"""


def test_linearity(squares3, isotropic, moderate):
    def bump(x):
        return np.sin(3.0 * x[:, 0]) * x[:, 1]

    a = solve_mfv(squares3, isotropic, moderate)
    b = solve_mfv(squares3, isotropic.with_source(bump), moderate)
    c = solve_mfv(squares3, isotropic.with_source(lambda x: 2.0 * isotropic.source(x) + bump(x)), moderate)
    assert np.allclose(c.u, 2.0 * a.u + b.u, rtol=1e-10, atol=1e-14)
    assert np.allclose(c.flux, 2.0 * a.flux + b.flux, rtol=1e-8, atol=1e-12)


def test_pcg_initial_guess_does_not_matter(lepotier, moderate):
    mesh = gen_uniform_squares(8)
    options = {'method': 'pcg', 'tol': 1e-13, 'max_iter': 50000}
    cold = solve_mfv(mesh, lepotier, moderate, options)
    guess = np.random.default_rng(9).normal(size=len(mesh.interior_edges))
    warm = solve_mfv(mesh, lepotier, moderate, options, initial_traces=guess)
    assert cold.diagnostics['solver']['method'] == 'pcg'
    assert np.allclose(warm.u, cold.u, rtol=1e-7, atol=1e-12)


def test_zero_penalization_on_triangles(triangles4, isotropic):
    plain = error_report(triangles4, solve_mfv(triangles4, isotropic, PenalizationPolicy(mode='zero')), isotropic)
    penalized = error_report(triangles4, solve_mfv(triangles4, isotropic), isotropic)
    assert penalized['e2_u'] == pytest.approx(plain['e2_u'], rel=1e-6)
    assert penalized['e2_grad'] == pytest.approx(plain['e2_grad'], rel=1e-6)


def test_zero_penalization_on_squares_fails(squares2, isotropic):
    with pytest.raises(LocalSystemError):
        solve_mfv(squares2, isotropic, PenalizationPolicy(mode='zero'))


"""
* Scheme Residuals
"""


class TestResiduals:

    @pytest.mark.parametrize('mesh', [
        gen_uniform_squares(5),
        gen_refined_nonconforming(4, [((0.0, 0.0, 0.5, 0.5), 2)]),
        gen_uniform_triangles(4, pattern='crisscross')
    ], ids=['squares', 'nonconforming', 'triangles'])
    def test_structural_residuals_moderate(self, mesh, lepotier, moderate):
        residuals = solve_mfv(mesh, lepotier, moderate).diagnostics['residuals']
        assert residuals['conservativity'] <= 1e-10
        assert residuals['balance'] <= 1e-10
        assert residuals['gradient'] <= 1e-12
        assert residuals['trace'] <= 1e-10

    @pytest.mark.parametrize('mesh', [
        gen_distorted_quads(8, Distortion(kind='jitter', amplitude=0.2, seed=4)),
        gen_refined_nonconforming(4, [((0.0, 0.0, 0.5, 0.5), 2)]),
        gen_uniform_triangles(8)
    ], ids=['distorted', 'nonconforming', 'triangles'])
    def test_structural_residuals_default(self, mesh, lepotier):
        policy = PenalizationPolicy()
        solution = solve_mfv(mesh, lepotier, policy)
        residuals = solution.diagnostics['residuals']
        assert residuals['balance'] <= 1e-10
        assert residuals['gradient'] <= 1e-12
        assert residuals['trace'] <= 1e-10
        assert residuals['conservativity'] <= conservativity_floor(mesh, policy, solution.traces)

    def test_conservativity_floor_only_applies_off_simplices(self, triangles4, squares3):
        policy = PenalizationPolicy()
        traces = np.ones(squares3.n_edges)
        assert conservativity_floor(triangles4, policy, np.ones(triangles4.n_edges)) == 1e-10
        assert conservativity_floor(squares3, PenalizationPolicy(mode='fixed', nu0=1e-4), traces) == 1e-10
        assert conservativity_floor(squares3, policy, traces) < 1e-4

    def test_residuals_detect_broken_fluxes(self, squares3, isotropic, moderate):
        solution = solve_mfv(squares3, isotropic, moderate)
        broken = solution.flux.copy()
        broken[0] += 0.1
        data = compute_cell_data(squares3, isotropic)
        residuals = scheme_residuals(
            squares3, data, moderate,
            Solution(u=solution.u, v=solution.v, flux=broken, traces=solution.traces))
        assert residuals['balance'] > 1e-3
