import numpy as np
import pytest

from gsmant import shapes
from gsmant.errors import MeshError
from gsmant.mesh import TriangleMesh, build_rwg, load_mesh, parse_region, read_off, write_gmsh, write_off


def test_region_names():
    assert parse_region("antenna") == 0
    assert parse_region("port1") == parse_region("port:1") == parse_region("port_1") == 1
    with pytest.raises(MeshError):
        parse_region("port0")
    with pytest.raises(MeshError):
        parse_region("feed")


def test_closed_sphere_counts():
    m = shapes.icosphere(1.0, 3)
    rwg = build_rwg(m)
    # closed surface: every edge interior, E = 3T/2, V - E + T = 2
    assert rwg.n_basis == 3 * m.n_triangles // 2
    assert len(m.vertices) - rwg.n_basis + m.n_triangles == 2
    assert rwg.n_magnetic == 0


def test_rwg_divergence_integrates_to_zero():
    rwg = build_rwg(shapes.icosphere(1.0, 2))
    div = rwg.divergence() * rwg.mesh.areas[:, None]
    total = np.zeros(rwg.n_basis)
    ok = rwg.side_basis >= 0
    np.add.at(total, rwg.side_basis[ok], div[ok])
    assert np.abs(total).max() < 1e-12


def test_rwg_normal_continuity():
    # the normal component across the shared edge is continuous
    m = shapes.plate(1.0, 1.0, 3, 3)
    rwg = build_rwg(m)
    for n in range(rwg.n_basis):
        a, b = rwg.edges[n]
        mid = 0.5 * (m.vertices[a] + m.vertices[b])
        edge = m.vertices[b] - m.vertices[a]
        vals = []
        for t in (rwg.tri_plus[n], rwg.tri_minus[n]):
            ids, v = rwg.evaluate(t, mid[None])
            u = np.cross(edge, m.normals[t])
            vals.append(np.dot(v[list(ids).index(n), 0], u / np.linalg.norm(u)))
        assert abs(vals[0] + vals[1]) < 1e-12 or abs(vals[0] - vals[1]) < 1e-12
        assert abs(abs(vals[0]) - 1.0) < 1e-12


def test_validation_errors():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]], float)
    with pytest.raises(MeshError):
        TriangleMesh(v, np.array([[0, 1, 9]]))
    with pytest.raises(MeshError):
        TriangleMesh(v, np.array([[0, 1, 1]]))
    with pytest.raises(MeshError):
        TriangleMesh(v, np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]]))  # non-manifold
    with pytest.raises(MeshError):
        TriangleMesh(v, np.array([[0, 1, 2], [0, 1, 3]]))  # inconsistent winding
    with pytest.raises(MeshError):
        TriangleMesh(v[:3], np.array([[0, 1, 2]]), np.array([0, 0]))


def test_port_must_be_planar():
    m = shapes.icosphere(1.0, 2)
    region = np.zeros(m.n_triangles, int)
    region[:6] = 1
    with pytest.raises(MeshError):
        TriangleMesh(m.vertices, m.triangles, region)


def test_coarse_port_rejected():
    # tetrahedron whose single-triangle port has no interior edge
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    m = TriangleMesh(v, np.array([[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]), np.array([1, 0, 0, 0]))
    with pytest.raises(MeshError):
        build_rwg(m)


@pytest.mark.parametrize("fmt", ["off", "msh"])
def test_round_trip(tmp_path, fmt):
    m = shapes.CoaxDipole().mesh()
    path = tmp_path / f"d.{fmt}"
    (write_off if fmt == "off" else write_gmsh)(m, path)
    back = load_mesh(path)
    assert np.allclose(back.vertices, m.vertices, rtol=0, atol=1e-15)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.region, m.region)
    assert back.port_ids == [1]


def test_off_errors(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n")
    with pytest.raises(MeshError):
        read_off(p)
    p.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n")
    with pytest.raises(MeshError):
        read_off(p)
    with pytest.raises(MeshError):
        load_mesh(tmp_path / "missing.off")


def test_translation_and_bounding_sphere():
    m = shapes.icosphere(2.0, 2)
    c, r = m.bounding_sphere(np.zeros(3))
    assert r == pytest.approx(2.0)
    t = m.translated([1.0, 2.0, 3.0])
    c2, r2 = t.bounding_sphere([1.0, 2.0, 3.0])
    assert r2 == pytest.approx(r)
