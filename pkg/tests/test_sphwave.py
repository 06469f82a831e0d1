import math

import numpy as np
import pytest

from gsmant import sphwave as sw
from gsmant.constants import ETA0


def test_lmax_rule_values():
    # ceil(kr + 7 (kr)^(1/3) + 3)
    assert sw.lmax_for_radius(1.0, 1.0) == 11
    assert sw.lmax_for_radius(2.0, 0.5) == 11
    assert sw.lmax_for_radius(8.0, 1.0) == 25
    with pytest.raises(ValueError):
        sw.lmax_for_radius(0.0, 1.0)


def test_mode_count_and_ordering():
    b = sw.SphericalBasis(1.0, 4)
    assert b.J == sw.num_modes(4) == 48
    for a, mode in enumerate(b.modes):
        assert b.index(mode.tau, mode.sigma, mode.l, mode.m) == a
    # lexicographic in (l, m, sigma, tau)
    keys = list(zip(b.l, b.m, b.sigma, b.tau))
    assert keys == sorted(keys)
    assert np.all(b.tau[b.bar] != b.tau) and np.all(b.l[b.bar] == b.l)
    with pytest.raises(ValueError):
        b.index(1, 1, 2, 0)


def test_scalar_harmonics_orthonormal():
    b = sw.SphericalBasis(1.0, 6)
    T, P, W = sw.sphere_quadrature(16, 32)
    Y = sw.harmonics(b, T.ravel(), P.ravel()).Y
    sel = b.tau == 1
    G = (Y[sel] * W.ravel()) @ Y[sel].T
    assert np.allclose(G, np.eye(sel.sum()), atol=1e-12)


def test_vector_harmonics_orthonormal():
    b = sw.SphericalBasis(1.0, 5)
    T, P, W = sw.sphere_quadrature(14, 28)
    A = sw.harmonics(b, T.ravel(), P.ravel()).A(b.tau)
    G = np.einsum("anc,bnc,n->ab", A, A, W.ravel())
    assert np.allclose(G, np.eye(b.J), atol=1e-12)


def test_radial_functions_small_argument():
    l = np.arange(1, 5)
    z, zx, xzp = sw.radial_functions(l[:, None], np.array([0.0, 1e-8]), sw.REGULAR)
    assert np.allclose(z[:, 0], z[:, 1], atol=1e-8)
    assert np.allclose(zx[:, 0], zx[:, 1], atol=1e-8)
    assert np.allclose(xzp[:, 0], xzp[:, 1], atol=1e-8)
    with pytest.raises(ZeroDivisionError):
        sw.radial_functions(l, np.array([0.0]), sw.OUTGOING)


@pytest.mark.parametrize("kind", [sw.REGULAR, sw.OUTGOING])
def test_curl_partner_is_scaled_curl(kind):
    # (1/k) curl u_alpha = u_alpha_bar, checked by central differences
    b = sw.SphericalBasis(1.7, 3)
    r = np.array([0.4, -0.7, 0.9])
    h = 1e-5
    for alpha in (0, 3, 9, 20):
        J = np.zeros((3, 3), dtype=complex)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            J[:, i] = (sw.eval_wave(b, alpha, kind, r + e) - sw.eval_wave(b, alpha, kind, r - e)) / (2 * h)
        curl = np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]]) / b.k
        assert np.allclose(curl, sw.eval_curl_partner(b, alpha, kind, r), atol=1e-7)


def test_plane_wave_expansion_reconstructs_field():
    k = 2.0
    b = sw.SphericalBasis.for_radius(k, 1.0)
    E0 = np.array([0.3, 1.0 - 0.5j, 0.0])
    k_hat = np.array([0.0, 0.0, 1.0])
    g = sw.plane_wave_coefficients(b, E0, k_hat)
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((50, 3))
    pts *= (rng.random(50) / np.linalg.norm(pts, axis=1))[:, None]
    E, H = sw.field(b, pts, regular=g)
    Eref = E0 * np.exp(-1j * k * pts @ k_hat)[:, None]
    Href = np.cross(k_hat, E0) / ETA0 * np.exp(-1j * k * pts @ k_hat)[:, None]
    assert np.abs(E - Eref).max() < 1e-6 * np.linalg.norm(E0)
    assert np.abs(H - Href).max() < 1e-6 * np.linalg.norm(E0) / ETA0


def test_plane_wave_rejects_longitudinal_polarization():
    b = sw.SphericalBasis(1.0, 3)
    with pytest.raises(ValueError):
        sw.plane_wave_coefficients(b, [0, 0, 1], [0, 0, 1])
    with pytest.raises(ValueError):
        sw.plane_wave_coefficients(b, [1, 0, 0], [0, 0, 2])


def test_farfield_matches_large_radius_field():
    k = 3.0
    b = sw.SphericalBasis(k, 4)
    rng = np.random.default_rng(2)
    h = rng.standard_normal(b.J) + 1j * rng.standard_normal(b.J)
    theta, phi = 1.1, 0.4
    rhat = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    R = 2.0e4
    E, _ = sw.field(b, R * rhat[None], outgoing=h)
    F = sw.FarField(b, h).vector(np.array([theta]), np.array([phi]))[0]
    assert np.allclose(R * np.exp(1j * k * R) * E[0], F, rtol=0, atol=1e-3 * np.abs(F).max())


def test_radiated_power_equals_flux():
    k = 1.5
    b = sw.SphericalBasis(k, 3)
    rng = np.random.default_rng(3)
    h = rng.standard_normal(b.J) + 1j * rng.standard_normal(b.J)
    ff = sw.FarField(b, h)
    T, P, W = sw.sphere_quadrature(12, 24)
    flux = np.sum(W.ravel() * ff.intensity(T.ravel(), P.ravel()))
    assert flux == pytest.approx(ff.radiated_power(), rel=1e-12)


def test_translation_addition_theorem():
    # outgoing waves about the origin re-expand as regular waves about d
    k = 2.0
    src, tgt = sw.SphericalBasis(k, 2), sw.SphericalBasis(k, 24)
    d = np.array([0.3, -0.4, 1.1])
    Y = sw.translation_matrix(src, tgt, d)
    pts = d + 0.1 * np.random.default_rng(0).standard_normal((6, 3))
    uo = sw.waves(src, pts, sw.OUTGOING)
    ur = sw.waves(tgt, pts, sw.REGULAR, origin=d)
    rebuilt = np.einsum("ba,bnc->anc", Y, ur)
    assert np.abs(rebuilt - uo).max() < 1e-6 * np.abs(uo).max()


def test_translation_parity_and_operator():
    k = 1.0
    b = sw.SphericalBasis(k, 4)
    d = np.array([0.0, 2.0, 1.0])
    Y = sw.translation_matrix(b, b, d)
    flip = (b.tau[:, None] != b.tau[None, :]).astype(int)
    sign = (-1.0) ** (b.l[:, None] + b.l[None, :] + flip)
    assert np.abs(sw.translation_matrix(b, b, -d) - sign * Y).max() < 1e-12 * np.abs(Y).max()
    op = sw.translation_operator(b, b, d)
    x = np.ones(b.J)
    assert np.allclose(op @ x, 0.5 * Y @ x)
    with pytest.raises(ZeroDivisionError):
        sw.translation_matrix(b, b, np.zeros(3))
