import numpy as np
import pytest

from gsmant import array as A
from gsmant.errors import DivergenceError, LayoutError, ValidationError
from gsmant.gsm import compress
from gsmant.sphwave import translation_matrix


@pytest.fixture(scope="module")
def pair(small_dipole):
    g = small_dipole.gsm_M
    layout = A.ArrayLayout.from_gsm(g, [[0, 0, 0], [0, 0, 0.1]])
    return g, A.build_system(layout)


def test_single_element_returns_element_gamma(small_dipole):
    g = small_dipole.gsm_M
    s = A.build_system(A.ArrayLayout.from_gsm(g, [[0.0, 0.0, 0.0]]))
    assert np.allclose(A.compose_direct(s), g.Gamma)
    assert np.allclose(A.compose_iterative(s, np.eye(1)).w, g.Gamma)


def test_overlap_lists_every_pair(small_dipole):
    g = small_dipole.gsm_M
    with pytest.raises(LayoutError) as exc:
        A.ArrayLayout.from_gsm(g, [[0, 0, 0], [0.05, 0, 0], [0.1, 0, 0]])
    msg = str(exc.value)
    assert "(0, 1)" in msg and "(1, 2)" in msg and "(0, 2)" not in msg


def test_coupling_blocks(pair):
    g, s = pair
    d = s.layout.elements[0].center - s.layout.elements[1].center
    assert np.allclose(s.G_block(0, 1), 0.5 * translation_matrix(g.basis, g.basis, d))
    # the lower block comes from the parity identity; compare with a direct build
    assert np.allclose(s.G_block(1, 0), 0.5 * translation_matrix(g.basis, g.basis, -d),
                       atol=1e-12 * np.abs(s.G).max())
    assert not np.any(s.G_block(0, 0))


def test_iterative_matches_direct(pair):
    _, s = pair
    D = A.compose_direct(s)
    res = A.compose_iterative(s, np.eye(s.n_ports), tol=1e-12)
    assert np.abs(res.w - D).max() < 1e-10
    assert res.iterations < 30
    col = A.compose_sparams_column(s, 1, tol=1e-12)
    assert np.allclose(col, D[:, 1], atol=1e-10)
    # reciprocal and passive
    assert np.abs(D - D.T).max() < 1e-12
    assert np.linalg.svd(D, compute_uv=False).max() <= 1 + 1e-9


def test_coupling_decays_with_distance(small_dipole):
    g = small_dipole.gsm_M
    s12 = []
    for z in (0.08, 0.16, 0.32):
        s = A.build_system(A.ArrayLayout.from_gsm(g, [[0, 0, 0], [z, 0, 0]]))
        s12.append(abs(A.compose_direct(s)[0, 1]))
    assert s12[0] > s12[1] > s12[2]


def test_compressed_elements(small_dipole):
    g = small_dipole.gsm_M
    cg = compress(g)
    centers = [[0, 0, 0], [0.09, 0, 0]]
    full = A.compose_direct(A.build_system(A.ArrayLayout.from_gsm(g, centers)))
    sys_c = A.build_system(A.ArrayLayout.from_gsm(cg, centers, radius=g.radius))
    assert np.abs(A.compose_iterative(sys_c, np.eye(2), 1e-12).w - full).max() < 1e-4
    assert np.abs(A.compose_direct(sys_c) - full).max() < 1e-4


def test_moved_and_validation(pair):
    g, s = pair
    lay = s.layout.moved([[0, 0, 0], [0, 0, 0.2]])
    assert np.allclose(lay.elements[1].center, [0, 0, 0.2])
    with pytest.raises(ValidationError):
        s.layout.moved([[0, 0, 0]])
    with pytest.raises(ValidationError):
        A.compose_iterative(s, np.ones(5))
    with pytest.raises(ValidationError):
        A.compose_sparams_column(s, 2)
    with pytest.raises(DivergenceError):
        A.compose_iterative(s, np.eye(2), tol=1e-30, max_iter=2)
    with pytest.raises(ValidationError):
        A.ArrayElement(g, [0, 0, 0], 0.0)
