"""Kernel matrix values, tie rules, invariances, and the degeneracy sweep."""

from math import gamma, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icmiv import (
    KernelScalingError,
    KernelSpec,
    esc6_constant,
    kernel_matrix,
    kernel_sd_mc,
    kernel_sd_report,
    wmd_lambda,
)
from icmiv.kernels import _wmd_base_density


def _random_orthonormal(p, rng):
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))


def test_mmd_zero_distance_entry():
    Z = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    K = kernel_matrix(Z, KernelSpec("mmd"))
    assert K.values[0, 1] == 0.0
    assert np.all(np.diag(K.values) == 0.0)
    assert np.all(K.values <= 0.0)


def test_dl_two_point_hand_case():
    K = kernel_matrix(np.array([[0.0], [1.0]]), KernelSpec("dl"))
    assert np.allclose(K.values, [[1.0, 0.5], [0.5, 0.5]])


def test_esc6_all_coincide_tie():
    Z = np.zeros((3, 2)) + 1.5
    # constant rows: every (i, j, l) triple coincides, so every angle term
    # takes the all-equal value 2*pi
    K = kernel_matrix(Z, KernelSpec("esc6"))
    expected = esc6_constant(2) * 2.0 * pi
    assert np.allclose(K.values, expected)


def test_esc6_two_coincide_tie():
    Z = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    K = kernel_matrix(Z, KernelSpec("esc6"))
    c = esc6_constant(2)
    # entry (0, 1): l=0 and l=1 coincide with both i and j -> 2*pi each;
    # l=2 sees Z_i = Z_j distinct from Z_l -> pi
    assert K.values[0, 1] == pytest.approx(c / 3 * (2 * pi + 2 * pi + pi))
    # entry (0, 2): l=0 coincides with i only -> pi; l=1 same point as i -> pi;
    # l=2 coincides with j -> pi
    assert K.values[0, 2] == pytest.approx(c / 3 * (pi + pi + pi))


def test_esc6_right_angle():
    Z = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    K = kernel_matrix(Z, KernelSpec("esc6"))
    # at l = 2 the two difference vectors are orthogonal: |pi - pi/2| = pi/2
    expected01 = esc6_constant(2) / 3 * (pi + pi + pi / 2)
    assert K.values[0, 1] == pytest.approx(expected01, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    n=st.integers(4, 25),
    p_z=st.integers(1, 4),
    kernel=st.sampled_from(["mmd", "iiv", "dl", "esc6", "wmd"]),
)
def test_symmetry_and_range_properties(seed, n, p_z, kernel):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p_z))
    aux = rng.standard_normal((n, 2)) if kernel == "wmd" else None
    K = kernel_matrix(Z, KernelSpec(kernel), aux=aux)
    V = K.values
    assert np.array_equal(V, V.T)
    if kernel == "mmd":
        assert np.all(V <= 0.0) and np.all(np.diag(V) == 0.0)
    elif kernel == "iiv":
        assert np.all(V > 0.0) and np.all(V <= 1.0)
        assert np.allclose(np.diag(V), 1.0)
    elif kernel == "dl":
        assert np.all(V >= 0.0) and np.all(V <= 1.0)
    elif kernel == "esc6":
        bound = 2.0 * pi * pi ** (p_z / 2.0 - 1.0) / gamma(p_z / 2.0 + 1.0)
        assert np.all(V >= 0.0) and np.all(V <= bound + 1e-12)


def test_mmd_scales_under_rigid_motion():
    rng = np.random.default_rng(5)
    n, p = 30, 3
    Z = rng.standard_normal((n, p))
    Q = _random_orthonormal(p, rng)
    c, q = rng.standard_normal(p), -2.5
    K1 = kernel_matrix(Z, KernelSpec("mmd")).values
    K2 = kernel_matrix(c + q * Z @ Q, KernelSpec("mmd")).values
    assert np.allclose(K2, abs(q) * K1, atol=1e-10)


def test_esc6_invariant_under_rigid_motion():
    rng = np.random.default_rng(6)
    n, p = 25, 3
    Z = rng.standard_normal((n, p))
    Q = _random_orthonormal(p, rng)
    c, q = 3.0 * rng.standard_normal(p), 1.7
    K1 = kernel_matrix(Z, KernelSpec("esc6")).values
    K2 = kernel_matrix(c + q * Z @ Q, KernelSpec("esc6")).values
    assert np.max(np.abs(K1 - K2)) < 1e-10


def test_iiv_invariant_under_affine_map():
    rng = np.random.default_rng(7)
    n, p = 40, 3
    Z = rng.standard_normal((n, p))
    A = rng.standard_normal((p, p)) + 2.0 * np.eye(p)
    c = rng.standard_normal(p)
    K1 = kernel_matrix(Z, KernelSpec("iiv")).values
    K2 = kernel_matrix(c + Z @ A, KernelSpec("iiv")).values
    assert np.max(np.abs(K1 - K2)) < 1e-8


def test_iiv_singular_covariance_raises():
    rng = np.random.default_rng(8)
    z = rng.standard_normal(12)
    Z = np.column_stack([z, 2.0 * z])  # collinear columns
    with pytest.raises(KernelScalingError, match="collinear"):
        kernel_matrix(Z, KernelSpec("iiv"))


def test_wmd_requires_aux():
    Z = np.random.default_rng(9).standard_normal((10, 2))
    with pytest.raises(ValueError, match="aux"):
        kernel_matrix(Z, KernelSpec("wmd"))


def test_wmd_lambda_zero_matrix():
    aux = np.random.default_rng(10).standard_normal((6, 3))
    assert wmd_lambda(aux, np.zeros((6, 6))) == 0.0


def test_wmd_lambda_matches_characteristic_polynomial():
    rng = np.random.default_rng(11)
    aux = rng.standard_normal((3, 3))
    Z = rng.standard_normal((3, 2))
    kt = _wmd_base_density(Z, 1.0)
    n = 3
    M = aux.T @ aux / n
    N = aux.T @ kt @ aux / n**2
    P = np.linalg.solve(M, N)
    # cubic characteristic polynomial assembled from trace, 2x2 principal
    # minors, and the determinant; roots found independently of eigvals
    tr = np.trace(P)
    minors = (
        P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
        + P[0, 0] * P[2, 2] - P[0, 2] * P[2, 0]
        + P[1, 1] * P[2, 2] - P[1, 2] * P[2, 1]
    )
    det = np.linalg.det(P)
    roots = np.roots([1.0, -tr, minors, -det])
    real_roots = roots[np.abs(roots.imag) < 1e-8 * np.abs(roots.real) + 1e-12].real
    assert wmd_lambda(aux, kt) == pytest.approx(real_roots.min(), rel=1e-8)


def test_wmd_lambda_scale_invariant_in_aux():
    rng = np.random.default_rng(12)
    aux = rng.standard_normal((8, 3))
    Z = rng.standard_normal((8, 2))
    kt = _wmd_base_density(Z, 1.0)
    assert wmd_lambda(aux, kt) == pytest.approx(wmd_lambda(4.2 * aux, kt), rel=1e-10)


def test_wmd_diagonal_carries_negative_lambda():
    rng = np.random.default_rng(13)
    Z = rng.standard_normal((9, 2))
    aux = rng.standard_normal((9, 3))
    K = kernel_matrix(Z, KernelSpec("wmd"), aux=aux)
    lam = K.meta["lambda"]
    assert np.allclose(np.diag(K.values), -lam)


def test_kernel_sd_mc_seed_consistency():
    spec = KernelSpec("mmd")
    sd1, se1 = kernel_sd_report(spec, 5, 20000, 1)
    sd2, se2 = kernel_sd_report(spec, 5, 20000, 2)
    assert abs(sd1 - sd2) < 3.0 * sqrt(se1**2 + se2**2)


def test_kernel_sd_mc_monotone_degeneracy():
    grid = (2, 8, 18, 32)
    iiv = [kernel_sd_mc(KernelSpec("iiv"), p, 20000, 3) for p in grid]
    mmd = [kernel_sd_mc(KernelSpec("mmd"), p, 20000, 3) for p in grid]
    assert all(a > b for a, b in zip(iiv, iiv[1:]))
    assert all(0.9 <= v <= 1.1 for v in mmd)


def test_kernel_sd_mc_validates_inputs():
    with pytest.raises(ValueError):
        kernel_sd_mc(KernelSpec("mmd"), 0, 20000, 0)
    with pytest.raises(ValueError):
        kernel_sd_mc(KernelSpec("mmd"), 3, 10, 0)


def test_kernel_spec_aliases_and_validation():
    assert KernelSpec("IIV_GAUSS").id == "iiv"
    assert KernelSpec("MMD").id == "mmd"
    with pytest.raises(ValueError):
        KernelSpec("nope")
    with pytest.raises(ValueError):
        KernelSpec("wmd", bandwidth=0.0)
    assert KernelSpec("dl").data_dependent
    assert not KernelSpec("mmd").data_dependent
