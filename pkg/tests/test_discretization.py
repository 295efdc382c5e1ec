import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokesmg.discretization import (MeshLevel, TargetData, assemble,
                                     build_hierarchy, evaluate_q2,
                                     l2_error_pressure, l2_project_pressure,
                                     l2_project_velocity, reference_basis)
from stokesmg.errors import ConfigurationError
from stokesmg.targets import pressure_target, velocity_target


def test_hierarchy_counts():
    (mesh,) = build_hierarchy(2, 2)
    assert mesh.h == 0.25
    assert mesh.n_q2 == 81 and mesh.n_q1 == 25
    assert MeshLevel(8).n_q2 == 513**2


def test_hierarchy_nested():
    coarse, fine = build_hierarchy(2, 3)
    assert fine.n_elements == 4 * coarse.n_elements
    fine_pts = {tuple(p) for p in np.round(fine.q2_coords, 12)}
    assert all(tuple(p) in fine_pts for p in np.round(coarse.q2_coords, 12))


@pytest.mark.parametrize("bad", [(0, 2), (3, 2), (2, 9)])
def test_hierarchy_rejects_bad_range(bad):
    with pytest.raises(ConfigurationError):
        build_hierarchy(*bad)


def test_boundary_flags():
    mesh = MeshLevel(2)
    xy = mesh.q2_coords
    on_edge = np.any((xy == 0.0) | (xy == 1.0), axis=1)
    assert np.array_equal(on_edge, mesh.q2_boundary)


def test_reference_basis_partition_of_unity():
    t = np.linspace(0, 1, 7)
    for degree in (1, 2):
        vals = reference_basis(degree, t, t[::-1])[0]
        assert np.allclose(vals.sum(axis=1), 1.0)


def test_mass_partition_of_unity(cache):
    fe = cache.fe(2)
    assert fe.M_p.sum() == pytest.approx(1.0, abs=1e-14)
    assert fe.M_f.sum() == pytest.approx(2.0, abs=1e-14)
    assert fe.mean_vector.sum() == pytest.approx(1.0, abs=1e-14)


def test_matrices_symmetric_and_definite(cache):
    fe = cache.fe(2)
    for mat in (fe.A, fe.M_f, fe.M_u, fe.M_p):
        assert abs(mat - mat.T).max() < 1e-15
        assert np.linalg.eigvalsh(mat.toarray()).min() > 0


def test_stiffness_smallest_eigenvalue(cache):
    # the Dirichlet Laplacian has smallest eigenvalue 2 pi^2 per component
    fe = cache.fe(2)
    lam = np.linalg.eigvals(np.linalg.solve(fe.M_u.toarray(), fe.A.toarray()))
    assert lam.real.min() == pytest.approx(2 * np.pi**2, rel=0.05)


def test_mass_submatrix_structure(cache):
    fe = cache.fe(2)
    rows = np.searchsorted(fe.control, fe.interior)
    assert abs(fe.M_uf - fe.M_f[rows]).max() == 0
    assert abs(fe.M_u - fe.M_f[rows][:, rows]).max() == 0


def test_quadrature_exactness():
    a = assemble(MeshLevel(2), quadrature=3)
    b = assemble(MeshLevel(2), quadrature=4)
    for name in ("A", "B", "M_f", "M_p"):
        diff = abs(getattr(a, name) - getattr(b, name)).max()
        assert diff <= 1e-13 * abs(getattr(a, name)).max()


def test_discrete_velocities_in_kernel_of_divergence(cache):
    fe = cache.fe(3)
    sys = cache.system(3)
    u = sys.apply_U(np.random.default_rng(0).standard_normal(fe.p))
    assert np.abs(fe.B @ u).max() < 1e-11 * np.abs(u).max()


def test_projection_of_zero_and_of_discrete_functions(cache):
    fe = cache.fe(2)
    zero = l2_project_velocity(fe, lambda x, y: (0 * x, 0 * y))
    assert np.all(zero == 0)
    # biquadratic fields are reproduced exactly
    quad = lambda x, y: (x**2 * y - y**2, x * y**2 + 1.0)  # noqa: E731
    coeffs = l2_project_velocity(fe, quad)
    nodal = np.column_stack(quad(*fe.mesh.q2_coords.T)).ravel()
    assert np.abs(coeffs - nodal).max() < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 * 81 - 1))
def test_projection_fixes_basis_functions(i):
    fe = assemble(MeshLevel(2))
    e = np.zeros(2 * fe.mesh.n_q2)
    e[i] = 1.0
    load = (fe.mass_q2 @ e.reshape(-1, 2)).ravel()
    again = fe._mass_v_lu.solve(load.reshape(-1, 2)).ravel()
    assert np.abs(again - e).max() < 1e-12


def test_pressure_projection_second_order(cache):
    errs = []
    for level in (3, 4, 5):
        fe = cache.fe(level)
        q = l2_project_pressure(fe, pressure_target)
        assert abs(fe.mean_vector @ q) < 1e-14
        errs.append(l2_error_pressure(fe.mesh, q, pressure_target))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.9)


def test_target_data_loads_match_projection(cache):
    fe = cache.fe(3)
    tg = TargetData.project(fe, velocity_target, pressure_target)
    assert np.allclose(tg.u_load, fe.M_uf @ tg.u_full[fe.control], atol=1e-15)
    again = TargetData.from_coefficients(fe, tg.u_full, tg.p)
    assert np.allclose(again.u_load, tg.u_load, atol=1e-15)
    assert np.allclose(again.p, tg.p)


def test_target_velocity_is_divergence_free_with_zero_trace():
    rng = np.random.default_rng(3)
    x, y = rng.random(50), rng.random(50)
    eps = 1e-6
    du = (velocity_target(x + eps, y)[0] - velocity_target(x - eps, y)[0]) / (2 * eps)
    dv = (velocity_target(x, y + eps)[1] - velocity_target(x, y - eps)[1]) / (2 * eps)
    assert np.abs(du + dv).max() < 1e-9
    for edge in (velocity_target(0 * x, y), velocity_target(0 * x + 1, y),
                 velocity_target(x, 0 * y), velocity_target(x, 0 * y + 1)):
        assert np.abs(edge).max() < 1e-12


def test_interior_control_space():
    fe = assemble(MeshLevel(2), control_space="interior")
    assert fe.p == fe.n
    with pytest.raises(ConfigurationError):
        assemble(MeshLevel(2), control_space="boundary")


def test_export_matrix_market(tmp_path, cache):
    import scipy.io
    fe = cache.fe(2)
    fe.export("M_p", tmp_path / "mp.mtx")
    back = scipy.io.mmread(tmp_path / "mp.mtx")
    assert abs(back - fe.M_p).max() < 1e-16


def test_evaluate_q2_of_nodal_interpolant(cache):
    fe = cache.fe(2)
    lin = lambda x, y: (2 * x + y, x - 3 * y)  # noqa: E731
    coeffs = np.column_stack(lin(*fe.mesh.q2_coords.T)).ravel()
    pts, _ = fe.mesh.quadrature_points(3)
    vals = evaluate_q2(fe.mesh, coeffs, 3)
    expect = np.stack(lin(pts[..., 0], pts[..., 1]), axis=-1)
    assert np.abs(vals - expect).max() < 1e-13
