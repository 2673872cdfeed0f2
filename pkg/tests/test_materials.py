import numpy as np
import pytest

from errors import InvalidArgumentError, InvalidMaterialError
from materials import (
    IsoStack,
    OrthoSpec,
    eff_youngs,
    iso_voigt,
    ortho_voigt,
    rotated_ortho_C,
    rotated_voigt,
    simp_voigt,
    voigt_is_psd,
)
from polytope import build_regular_polygon_with_apex

STACK = IsoStack((1e-6, 1.0, 3.0, 5.0), nu=0.3, p=3.0)
SPEC = OrthoSpec(E_x=5.0, E_y=0.5, nu_xy=0.3, p=4)


def _voigt_to_tensor(Q):
    C = np.zeros((2, 2, 2, 2))
    pairs = {0: (0, 0), 1: (1, 1), 2: (0, 1)}
    for I, (i, j) in pairs.items():
        for J, (k, l) in pairs.items():
            for a, b in {(i, j), (j, i)}:
                for c, d in {(k, l), (l, k)}:
                    C[a, b, c, d] = Q[I, J]
    return C


def _rotate_voigt_oracle(Q, theta):
    """四阶张量旋转 C'_ijkl = R_ia R_jb R_kc R_ld C_abcd"""
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    C = np.einsum("ia,jb,kc,ld,abcd->ijkl", R, R, R, R, _voigt_to_tensor(Q))
    pairs = [(0, 0), (1, 1), (0, 1)]
    return np.array([[C[i, j, k, l] for (k, l) in pairs] for (i, j) in pairs])


# ----------------------------------------------------------------------
# 多材料 SIMP
# ----------------------------------------------------------------------
def test_pure_phases_recover_moduli():
    for j, E in enumerate(STACK.E):
        value, _ = eff_youngs(STACK, np.eye(4)[j])
        assert value == pytest.approx(E, rel=1e-14)
    value, _ = eff_youngs(STACK, [1.0, 0.0, 0.0, 0.0])
    assert value == 1e-6


def test_eff_youngs_derivative_matches_finite_differences(rng):
    x = rng.uniform(0.05, 0.5, size=(10, 4))
    E, dE = eff_youngs(STACK, x)
    assert E.shape == (10,) and dE.shape == (10, 4)
    step = 1e-6
    fd = np.zeros_like(dE)
    for i in range(4):
        e = np.zeros(4)
        e[i] = step
        fd[:, i] = (eff_youngs(STACK, x + e)[0] - eff_youngs(STACK, x - e)[0]) / (2 * step)
    np.testing.assert_allclose(dE, fd, rtol=1e-5, atol=1e-8)


def test_eff_youngs_clips_overshoot():
    E, dE = eff_youngs(STACK, [-0.1, 1.2, 0.0, 0.0])
    assert E == pytest.approx(1.0)
    assert dE[0] == 0.0 and dE[1] == 0.0
    # 0/0 := 0：全零输入停留在第一相
    E0, dE0 = eff_youngs(STACK, np.zeros(4))
    assert E0 == 1e-6
    assert np.all(np.isfinite(dE0))


def test_eff_youngs_phase_count_checked():
    with pytest.raises(InvalidArgumentError):
        eff_youngs(STACK, [0.5, 0.5])


def test_iso_stack_validation():
    with pytest.raises(InvalidMaterialError):
        IsoStack((0.0, 1.0))
    with pytest.raises(InvalidMaterialError):
        IsoStack((1e-6, 1.0), p=0.5)
    with pytest.raises(InvalidMaterialError):
        IsoStack((1e-6, 1.0), nu=1.0)
    assert STACK.phase_count == 4


def test_simp_voigt_is_scaled_isotropic_matrix(rng):
    x = rng.uniform(0.0, 1.0, size=(3, 4))
    C, dC = simp_voigt(STACK, x)
    E, dE = eff_youngs(STACK, x)
    np.testing.assert_allclose(C, E[:, None, None] * iso_voigt(1.0, 0.3))
    np.testing.assert_allclose(dC[:, 2], dE[:, 2, None, None] * iso_voigt(1.0, 0.3))


# ----------------------------------------------------------------------
# 本构矩阵
# ----------------------------------------------------------------------
def test_iso_voigt():
    np.testing.assert_allclose(iso_voigt(1.0, 0.0), np.diag([1.0, 1.0, 0.5]), atol=1e-15)
    with pytest.raises(InvalidArgumentError):
        iso_voigt(1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        iso_voigt(0.0, 0.3)


def test_ortho_voigt_isotropic_limit():
    np.testing.assert_allclose(ortho_voigt(OrthoSpec(2.0, 2.0, 0.25)), iso_voigt(2.0, 0.25), atol=1e-12)


def test_ortho_spec_derived_constants():
    assert SPEC.nu_yx == pytest.approx(0.03, rel=1e-14)
    assert SPEC.G_xy == pytest.approx(np.sqrt(2.5) / (2 * (1 + np.sqrt(0.009))), rel=1e-14)
    with pytest.raises(InvalidMaterialError):
        OrthoSpec(5.0, 0.5, 0.3, p=3)
    with pytest.raises(InvalidMaterialError):
        OrthoSpec(-1.0, 0.5, 0.3)
    with pytest.raises(InvalidMaterialError):
        OrthoSpec(1.0, 4.0, 0.6)   # ν_xy·ν_yx = 1.44


# ----------------------------------------------------------------------
# 旋转正交各向异性插值
# ----------------------------------------------------------------------
def test_rotated_voigt_matches_tensor_rotation(rng):
    Q = ortho_voigt(SPEC)
    for theta in rng.uniform(0.0, np.pi, size=5):
        np.testing.assert_allclose(rotated_voigt(SPEC, theta), _rotate_voigt_oracle(Q, theta), atol=1e-12)


def test_rotation_is_pi_periodic(rng):
    Q = ortho_voigt(SPEC)
    for theta in rng.uniform(0.0, np.pi, size=3):
        np.testing.assert_allclose(_rotate_voigt_oracle(Q, theta), _rotate_voigt_oracle(Q, theta + np.pi),
                                   atol=1e-12)
        np.testing.assert_allclose(rotated_voigt(SPEC, theta), rotated_voigt(SPEC, theta + np.pi), atol=1e-12)


def test_rotated_ortho_c_at_vertices():
    C_iso = iso_voigt(1e-6, 0.3)
    C, *_ = rotated_ortho_C(SPEC, 0.0, 0.0, 1.0, C_iso)
    np.testing.assert_array_equal(C, C_iso)

    C, *_ = rotated_ortho_C(SPEC, 1.0, 0.0, 0.0, C_iso)
    np.testing.assert_allclose(C, ortho_voigt(SPEC), atol=1e-12)

    C, *_ = rotated_ortho_C(SPEC, -1.0, 0.0, 0.0, C_iso)
    np.testing.assert_allclose(C, _rotate_voigt_oracle(ortho_voigt(SPEC), np.pi / 2), atol=1e-12)
    assert C[0, 0] == pytest.approx(ortho_voigt(SPEC)[1, 1])
    assert C[1, 1] == pytest.approx(ortho_voigt(SPEC)[0, 0])


def test_rotated_ortho_c_interior_point():
    theta, r, s = 0.7, 0.6, 0.3
    a, b = r * np.cos(2 * theta), r * np.sin(2 * theta)
    C_iso = iso_voigt(1e-6, 0.3)
    C, *_ = rotated_ortho_C(SPEC, a, b, s, C_iso)
    np.testing.assert_allclose(C, s ** 4 * C_iso + r ** 4 * rotated_voigt(SPEC, theta), atol=1e-12)


@pytest.mark.parametrize("p", [2, 4, 6])
def test_rotated_ortho_c_derivatives(rng, p):
    spec = OrthoSpec(5.0, 0.5, 0.3, p=p)
    C_iso = iso_voigt(1.0, 0.3)
    P = build_regular_polygon_with_apex(8, apex_axis=0)
    points = P.map_points(rng.normal(size=(6, 3)))
    s, a, b = points[:, 0], points[:, 1], points[:, 2]
    _, dC_da, dC_db, dC_ds = rotated_ortho_C(spec, a, b, s, C_iso)
    step = 1e-6

    def fd(da=0.0, db=0.0, ds=0.0):
        plus = rotated_ortho_C(spec, a + da, b + db, s + ds, C_iso)[0]
        minus = rotated_ortho_C(spec, a - da, b - db, s - ds, C_iso)[0]
        return (plus - minus) / (2 * step)

    np.testing.assert_allclose(dC_da, fd(da=step), rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(dC_db, fd(db=step), rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(dC_ds, fd(ds=step), rtol=1e-5, atol=1e-8)


def test_rotated_ortho_c_flat_at_axis():
    _, dC_da, dC_db, dC_ds = rotated_ortho_C(SPEC, 0.0, 0.0, 0.5, iso_voigt(1.0, 0.3))
    np.testing.assert_array_equal(dC_da, 0.0)
    np.testing.assert_array_equal(dC_db, 0.0)
    assert np.abs(dC_ds).max() > 0


def test_rotated_ortho_c_is_psd(rng):
    P = build_regular_polygon_with_apex(8, apex_axis=0)
    points = P.map_points(rng.normal(scale=3.0, size=(200, 3)))
    C, *_ = rotated_ortho_C(SPEC, points[:, 1], points[:, 2], points[:, 0], iso_voigt(1e-6, 0.3))
    assert C.shape == (200, 3, 3)
    assert voigt_is_psd(C)
    np.testing.assert_allclose(C, np.swapaxes(C, -1, -2), atol=1e-14)
