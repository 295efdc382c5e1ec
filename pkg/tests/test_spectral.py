import numpy as np
import pytest

from stokesmg.errors import ConfigurationError, SolverBreakdown
from stokesmg.hessian import ControlParams
from stokesmg.spectral import (SpectralReport, filtered_distance,
                               form_two_grid_dense, joint_spectrum,
                               spectral_radius_check, spectrum_table,
                               symmetry_bases, two_grid_form,
                               two_grid_spectrum)

VEL = ControlParams(1.0, 1.0, 0.0)
PRES = ControlParams(1.0, 0.0, 1.0)


def _report(lam):
    lam = np.sort(np.asarray(lam, float))
    d = float(np.abs(np.log(lam)).max())
    return SpectralReport(level=0, params=VEL, eigenvalues=lam, d_h=d, d_tilde=d)


def test_filtered_distance():
    rep = _report([0.5, 0.99, 1.0, 1.02, 3.0])
    assert filtered_distance(rep, 0) == rep.d_h
    assert filtered_distance(rep, 1) == pytest.approx(np.log(2))
    assert filtered_distance(rep, 2) == pytest.approx(np.log(1.02))
    with pytest.raises(ConfigurationError):
        filtered_distance(rep, 5)


def test_identical_pencil(rng):
    a = rng.standard_normal((12, 12))
    B = a @ a.T + 12 * np.eye(12)
    lam = joint_spectrum(B, B)
    assert np.allclose(lam, 1.0, atol=1e-14)


def test_same_grid_degenerate_case(cache):
    # with the identity as transfer the two-grid form is the Hessian itself
    terms = cache.dense_terms(2)
    B_H = terms.combine(VEL)
    B_T = two_grid_form(terms.gauss_newton(VEL), np.eye(B_H.shape[0]),
                        terms.mass, VEL.beta)
    lam = joint_spectrum(B_H, B_T)
    assert np.abs(np.log(lam)).max() < 1e-12


def test_indefinite_detected(rng):
    with pytest.raises(SolverBreakdown):
        joint_spectrum(np.eye(3), -np.eye(3))


def test_forms_symmetric_and_eigen_residuals(cache):
    B_H, B_T, diff = form_two_grid_dense(3, VEL, cache)
    assert np.abs(B_T - B_T.T).max() <= 1e-11 * np.abs(B_T).max()
    assert np.abs(B_H - B_H.T).max() <= 1e-11 * np.abs(B_H).max()
    lam, X = joint_spectrum(B_H, B_T, return_vectors=True)
    res = B_H @ X - (B_T @ X) * lam
    scale = np.linalg.norm(B_H, 2) * np.linalg.norm(X, axis=0)
    assert np.all(np.linalg.norm(res, axis=0) <= 1e-9 * scale)
    assert np.all(lam > 0)


def test_level_one_rejected(cache):
    with pytest.raises(ConfigurationError):
        form_two_grid_dense(1, VEL, cache)


def test_symmetry_bases_orthonormal(cache):
    fe = cache.fe(3)
    V = np.hstack([b.toarray() for b in symmetry_bases(fe)])
    assert V.shape == (fe.p, fe.p)
    assert np.abs(V.T @ V - np.eye(fe.p)).max() < 1e-14
    blocks = symmetry_bases(fe)
    cross = blocks[0].T @ fe.M_f @ blocks[3]
    assert abs(cross).max() < 1e-15


@pytest.mark.parametrize("params", [VEL, PRES, ControlParams(1e-3, 1.0, 1e-2)])
def test_symmetry_reduction_is_exact(cache, params):
    a = two_grid_spectrum(3, params, cache, use_symmetry=True)
    b = two_grid_spectrum(3, params, cache, use_symmetry=False)
    assert np.allclose(a.eigenvalues, b.eigenvalues, rtol=0, atol=1e-12)


def test_pinned_rejects_symmetry(pinned_cache):
    with pytest.raises(ConfigurationError):
        two_grid_spectrum(3, PRES, pinned_cache, use_symmetry=True)


def test_table_values(cache):
    assert two_grid_spectrum(2, VEL, cache).d_h == pytest.approx(1.0274e-4, rel=0.1)
    assert two_grid_spectrum(3, PRES, cache).d_h == pytest.approx(5.6686e-3, rel=0.1)


def test_rates(cache):
    vel = spectrum_table([2, 3, 4], VEL, cache)
    pres = spectrum_table([2, 3, 4], PRES, cache)
    assert vel[0].ratio_to_previous is None
    assert all(7 <= r.ratio_to_previous <= 10 for r in vel[1:])
    assert all(r.ratio_to_previous >= 2 for r in pres[1:])


def test_beta_monotone(cache):
    d = [two_grid_spectrum(3, ControlParams(b, 1.0, 1e-2), cache).d_h
         for b in (1e-3, 2e-3, 4e-3, 8e-3)]
    assert all(b <= a for a, b in zip(d, d[1:]))


def test_zero_mean_has_no_outliers(cache):
    rep = two_grid_spectrum(3, PRES, cache, outliers=2)
    assert abs(rep.d_tilde - rep.d_h) < 0.2 * rep.d_h


def test_pinned_has_two_outliers(pinned_cache):
    rep = two_grid_spectrum(3, PRES, pinned_cache, outliers=2)
    big = np.abs(np.log(rep.eigenvalues)) > 0.1
    assert big.sum() == 2
    assert rep.d_h > 100 * rep.d_tilde


@pytest.mark.parametrize("params", [VEL, PRES, ControlParams(1e-3, 1.0, 1e-2)])
def test_spectral_radius_bound(cache, params):
    rho, bound, delta = spectral_radius_check(3, params, cache)
    assert rho <= bound * (1 + 1e-10)
