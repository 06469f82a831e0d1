import math

import numpy as np
import pytest

from gsmant import shapes
from gsmant.mesh import build_rwg


def test_icosphere_area_converges():
    errs = [abs(shapes.icosphere(1.0, f).areas.sum() / (4 * math.pi) - 1.0) for f in (2, 4, 8)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3


def test_icosphere_equal_volume():
    m = shapes.icosphere(1.0, 4, equal_volume=True)
    # divergence theorem: V = 1/3 sum(area * n . centroid)
    vol = np.sum(m.areas * np.sum(m.normals * m.centroids, 1)) / 3.0
    assert vol == pytest.approx(4.0 * math.pi / 3.0, rel=1e-12)


def test_plate_and_box():
    p = shapes.plate(2.0, 1.0, 4, 2)
    assert p.n_triangles == 16 and p.areas.sum() == pytest.approx(2.0)
    b = shapes.box((1.0, 2.0, 3.0), (2, 2, 2), port_face="+z")
    assert b.areas.sum() == pytest.approx(22.0)
    assert b.port_ids == [1]
    assert np.allclose(b.port_normal(1), [0, 0, 1])


def test_coax_dipole_geometry():
    d = shapes.CoaxDipole(n_phi=8, feed_segment=0.15e-3)
    m = d.mesh()
    assert m.port_ids == [1]
    assert np.allclose(m.port_normal(1), [0, 0, 1])
    # annular port area (polygonal)
    n = d.n_phi
    poly = 0.5 * n * math.sin(2 * math.pi / n) * (d.r_outer ** 2 - d.r_inner ** 2)
    assert m.areas[m.port_triangles(1)].sum() == pytest.approx(poly, rel=1e-12)
    # graded arm: first segment next to the feed has the requested length
    z = np.unique(np.round(m.vertices[:, 2], 12))
    above = z[z > 0]
    assert above[0] == pytest.approx(0.15e-3, rel=1e-9)
    rwg = build_rwg(m)
    assert rwg.n_magnetic > 0


def test_refined_and_merged():
    d = shapes.CoaxDipole(feed_segment=0.2e-3)
    r = d.refined()
    assert r.n_phi == 2 * d.n_phi and r.feed_segment == pytest.approx(0.1e-3)
    a, b = d.mesh(), d.mesh((0.1, 0, 0))
    mm = shapes.merge([a, b])
    assert mm.port_ids == [1, 2]
    assert mm.n_triangles == 2 * a.n_triangles
