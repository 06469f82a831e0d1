import math

import numpy as np
import pytest

from gsmant import gsm as G
from gsmant.errors import ValidationError
from gsmant.sphwave import SphericalBasis, sphere_quadrature


def _random_unitary_symmetric(n, seed=0):
    # S = U U^t is unitary and symmetric for unitary U
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    U, _ = np.linalg.qr(A)
    return U @ U.T


def test_invariants_of_solved_dipole(small_dipole):
    rep = G.check_invariants(small_dipole.gsm_M)
    assert all(rep.passed().values()), rep
    assert rep.unitarity < 1e-8


def test_block_shapes_validated(small_dipole):
    g = small_dipole.gsm_M
    with pytest.raises(ValidationError):
        G.Gsm(g.frequency, g.k, g.port_labels, g.basis, g.Gamma, g.R[:, :-1], g.T, g.S)
    assert np.array_equal(G.Gsm.from_full(g.full, frequency=g.frequency, k=g.k, port_labels=g.port_labels,
                                          basis=g.basis).full, g.full)


def test_gain_integrates_to_four_pi(small_dipole):
    g = small_dipole.gsm_M
    T, P, W = sphere_quadrature(40, 80)
    gain = G.gain_pattern(g, [1.0], T, P)
    assert np.sum(W * gain) == pytest.approx(4 * math.pi, rel=1e-6)
    # half-wave dipole class: about 2.15 dBi broadside, null on axis
    peak = 10 * math.log10(G.gain_pattern(g, [1.0], math.pi / 2, 0.0))
    assert 1.9 < peak < 2.4
    assert G.gain_pattern(g, [1.0], 0.0, 0.0) < 1e-6
    realized = G.gain_pattern(g, [1.0], math.pi / 2, 0.0, realized=True)
    assert realized <= 10 ** (peak / 10) + 1e-12
    with pytest.raises(ValidationError):
        G.gain_pattern(g, [1.0, 0.0], 0.0, 0.0)


def test_retained_count_rule():
    t = np.array([1.0, 0.5, 1e-3, 1e-6])
    assert G.retained_count(t, 1e-4) == 3
    assert G.retained_count(t, 0.99) == 1
    assert G.retained_count(t, 1.0) == 1  # the leading mode is always kept


def test_compression_exact_at_full_rank():
    S = _random_unitary_symmetric(30)
    cg = G.compress(S, 1e-15)
    assert cg.N == 30 and cg.kind == G.EIGEN
    assert np.allclose(cg.reconstruct(), S, atol=1e-12)
    assert G.reconstruction_error(S, cg) < 1e-12
    # lossless eigenvalues lie on |t + 1/2| = 1/2
    assert np.max(np.abs(np.abs(cg.values + 0.5) - 0.5)) < 1e-12


def test_memory_saving_formula():
    S = _random_unitary_symmetric(40, 1)
    cg = G.compress(S, 0.5)
    d = 40
    assert cg.memory_saving == pytest.approx(1 - cg.N * (d + 1) / d ** 2)
    sv = G.compress(S, 0.5, G.SINGULAR)
    assert sv.memory_saving == pytest.approx(1 - sv.N * (2 * d + 1) / d ** 2)


def test_lossy_matrix_falls_back_to_svd():
    S = 0.8 * _random_unitary_symmetric(20, 2)
    cg = G.compress(S, 1e-12)
    assert cg.kind == G.SINGULAR
    assert np.allclose(cg.reconstruct(), S, atol=1e-12)


def test_matvec_and_seeded_error(small_dipole):
    g = small_dipole.gsm_M
    cg = G.compress(g)
    x = np.random.default_rng(5).standard_normal(g.dim)
    assert np.allclose(cg.matvec(x), cg.reconstruct() @ x)
    assert G.reconstruction_error(g, cg, seed=3) == G.reconstruction_error(g, cg, seed=3)
    assert 0.9 < cg.memory_saving < 1.0
    with pytest.raises(ValidationError):
        G.compress(g, 0.0)
    with pytest.raises(ValidationError):
        G.compress(g, 1e-3, "qr")


def test_characteristic_link(small_dipole):
    rep = G.characteristic_check(small_dipole.system_E, small_dipole.gsm_E)
    assert rep.max_mismatch < 1e-3
    assert rep.circle_defect < 1e-6
    with pytest.raises(ValidationError):
        G.characteristic_check(small_dipole.system_M)


def test_rcs_requires_polarization(small_dipole):
    with pytest.raises(ValidationError):
        G.rcs_bistatic(small_dipole.gsm_M, [0, 0, 1], [0, 0, 0], 0.0, 0.0)
    sig = G.rcs_bistatic(small_dipole.gsm_M, [1, 0, 0], [0, 0, 1], np.linspace(0, np.pi, 5), 0.0)
    assert sig.shape == (5,) and np.all(sig >= 0)


def test_reciprocity_defect_detects_flip(small_dipole):
    g = small_dipole.gsm_M
    T = g.T.copy()
    i = np.argmax(np.abs(T[:, 0]))
    T[i, 0] *= -1
    bad = G.Gsm(g.frequency, g.k, g.port_labels, g.basis, g.Gamma, g.R, T, g.S)
    assert G.reciprocity_defect(bad) > 1e-3
