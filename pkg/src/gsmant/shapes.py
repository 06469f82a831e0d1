"""Parametric fixture meshes: spheres, plates, boxes and coax-fed dipoles.

These are convenience builders for tests and example runs; they are not a
general mesh generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .mesh import TriangleMesh


def plate(width: float = 1.0, height: float = 1.0, nx: int = 1, ny: int = 1,
          region: int = 0) -> TriangleMesh:
    """Flat rectangular plate in the xy-plane centred on the origin."""
    x = np.linspace(-width / 2, width / 2, nx + 1)
    y = np.linspace(-height / 2, height / 2, ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], 1)
    idx = np.arange(X.size).reshape(nx + 1, ny + 1)
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(tris), np.full(len(tris), region))


def icosphere(radius: float = 1.0, subdivisions: int = 1, equal_volume: bool = False,
              center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Sphere from an icosahedron with each face split into ``subdivisions**2``.

    With ``equal_volume`` the polyhedron is scaled to enclose the same
    volume as the sphere of ``radius``.
    """
    f = int(subdivisions)
    if f < 1:
        raise ValueError("subdivisions must be >= 1")
    p = (1.0 + math.sqrt(5.0)) / 2.0
    base = np.array([[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
                     [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
                     [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], dtype=float)
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    key_to_id: dict[tuple, int] = {}
    verts: list[np.ndarray] = []

    def vid(face, i, j):
        # barycentric lattice point (f-i-j, i, j) of the face; shared points
        # on edges and corners get one id through an exact integer key
        a, b, c = face
        w = {a: f - i - j, b: i, c: j}
        key = tuple(sorted((v, n) for v, n in w.items() if n))
        if key not in key_to_id:
            key_to_id[key] = len(verts)
            verts.append(sum(base[v] * n for v, n in w.items()) / f)
        return key_to_id[key]

    tris = []
    for face in faces:
        for i in range(f):
            for j in range(f - i):
                tris.append((vid(face, i, j), vid(face, i + 1, j), vid(face, i, j + 1)))
                if i + j < f - 1:
                    tris.append((vid(face, i + 1, j), vid(face, i + 1, j + 1), vid(face, i, j + 1)))
    v = np.array(verts)
    v /= np.linalg.norm(v, axis=1)[:, None]
    t = np.array(tris)
    if equal_volume:
        c = v[t]
        vol = np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0
        v *= (4.0 * math.pi / 3.0 / vol) ** (1.0 / 3.0)
    return TriangleMesh(v * radius + np.asarray(center, dtype=float), t)


def box(size=(1.0, 1.0, 1.0), n=(1, 1, 1), port_face: str | None = None) -> TriangleMesh:
    """Closed axis-aligned box centred on the origin with outward winding.

    ``port_face`` (e.g. ``"+z"``) tags that face as port 1.
    """
    sx, sy, sz = (float(s) / 2 for s in size)
    nx, ny, nz = n
    verts: dict[tuple, int] = {}
    coords: list[tuple] = []
    tris, region = [], []

    def vid(p):
        key = tuple(np.round(p, 12))
        if key not in verts:
            verts[key] = len(coords)
            coords.append(tuple(p))
        return verts[key]

    faces = {
        "+x": (np.array([sx, 0, 0]), np.array([0, sy, 0]), np.array([0, 0, sz]), ny, nz),
        "-x": (np.array([-sx, 0, 0]), np.array([0, 0, sz]), np.array([0, sy, 0]), nz, ny),
        "+y": (np.array([0, sy, 0]), np.array([0, 0, sz]), np.array([sx, 0, 0]), nz, nx),
        "-y": (np.array([0, -sy, 0]), np.array([sx, 0, 0]), np.array([0, 0, sz]), nx, nz),
        "+z": (np.array([0, 0, sz]), np.array([sx, 0, 0]), np.array([0, sy, 0]), nx, ny),
        "-z": (np.array([0, 0, -sz]), np.array([0, sy, 0]), np.array([sx, 0, 0]), ny, nx),
    }
    for name, (c, u, w, nu, nw) in faces.items():
        tag = 1 if name == port_face else 0
        for i in range(nu):
            for j in range(nw):
                def P(a, b):
                    return c + u * (2.0 * a / nu - 1.0) + w * (2.0 * b / nw - 1.0)
                a, b = vid(P(i, j)), vid(P(i + 1, j))
                cc, d = vid(P(i + 1, j + 1)), vid(P(i, j + 1))
                tris += [(a, b, cc), (a, cc, d)]
                region += [tag, tag]
    return TriangleMesh(np.array(coords), np.array(tris), np.array(region))


def revolve(profile, n_phi: int, phi0: float = 0.0) -> TriangleMesh:
    """Closed body of revolution about ``z``.

    Parameters
    ----------
    profile : list of (rho, z, region)
        Polyline from the top axis point to the bottom axis point; the
        region of entry ``i`` applies to the band between points ``i`` and
        ``i + 1``.  The first and last points must lie on the axis.
    n_phi : int
        Azimuthal segments.
    """
    pts = np.array([(p[0], p[1]) for p in profile], dtype=float)
    tags = [int(p[2]) for p in profile]
    if pts[0, 0] != 0.0 or pts[-1, 0] != 0.0:
        raise ValueError("profile must start and end on the axis")
    if np.any(pts[1:-1, 0] <= 0.0):
        raise ValueError("interior profile points must lie off the axis")
    phi = phi0 + 2.0 * math.pi * np.arange(n_phi) / n_phi
    n = len(pts)
    verts = [(0.0, 0.0, pts[0, 1])]
    ring = {}
    for i in range(1, n - 1):
        ring[i] = len(verts) + np.arange(n_phi)
        verts += [(pts[i, 0] * math.cos(p), pts[i, 0] * math.sin(p), pts[i, 1]) for p in phi]
    bottom = len(verts)
    verts.append((0.0, 0.0, pts[-1, 1]))
    tris, region = [], []
    for i in range(n - 1):
        for j in range(n_phi):
            jn = (j + 1) % n_phi
            if i == 0:
                tris.append((0, ring[1][j], ring[1][jn]))
                region.append(tags[i])
            elif i == n - 2:
                tris.append((ring[i][j], bottom, ring[i][jn]))
                region.append(tags[i])
            else:
                a, b = ring[i][j], ring[i + 1][j]
                c, d = ring[i + 1][jn], ring[i][jn]
                tris += [(a, b, c), (a, c, d)]
                region += [tags[i], tags[i]]
    return TriangleMesh(np.array(verts), np.array(tris), np.array(region))


def _segment(p0, p1, count: int, region: int, first: float | None = None, reverse: bool = False):
    """Points ``p0`` .. (excluding) ``p1`` split into ``count`` pieces.

    With ``first`` the pieces grow geometrically from length ``first`` at
    ``p0`` (or at ``p1`` when ``reverse``).
    """
    s = _fractions(count, first / math.dist(p0, p1) if first else None)
    if reverse:
        s = 1.0 - s[::-1]
    s = s[:-1]
    return [((1 - t) * p0[0] + t * p1[0], (1 - t) * p0[1] + t * p1[1], region) for t in s]


def _fractions(count: int, first: float | None) -> np.ndarray:
    """Break points ``0 .. 1`` of ``count`` pieces, the first of relative length ``first``."""
    if first is None or first * count >= 1.0:
        return np.linspace(0.0, 1.0, count + 1)
    # ratio q with first * (q^n - 1)/(q - 1) = 1
    q = brentq(lambda q: first * (q ** count - 1.0) / (q - 1.0) - 1.0, 1.0 + 1e-12, 1e3)
    s = np.concatenate([[0.0], np.cumsum(first * q ** np.arange(count))])
    return s / s[-1]


@dataclass(frozen=True)
class CoaxDipole:
    """Dipole fed by a coaxial line along ``-z``.

    The inner conductor continues above the feed plane ``z = 0`` as the upper
    arm; the outer conductor forms the lower arm.  The annulus between the
    two radii at ``z = 0`` is the waveport (port 1).  ``feed_segment`` sets
    the length of the arm segments next to the feed; the others grow
    geometrically towards the tips (uniform when ``None``).
    """

    arm_length: float = 0.035
    r_inner: float = 0.25e-3
    r_outer: float = 0.575e-3
    n_phi: int = 6
    n_arm: int = 12
    n_port: int = 2
    n_cap: int = 1
    feed_segment: float | None = None

    def profile(self):
        h, a, b = self.arm_length, self.r_inner, self.r_outer
        prof = []
        prof += _segment((0.0, h), (a, h), self.n_cap, 0)
        fs = self.feed_segment
        prof += _segment((a, h), (a, 0.0), self.n_arm, 0, fs, reverse=True)
        prof += _segment((a, 0.0), (b, 0.0), self.n_port, 1)
        prof += _segment((b, 0.0), (b, -h), self.n_arm, 0, fs)
        prof += _segment((b, -h), (0.0, -h), self.n_cap, 0)
        prof.append((0.0, -h, 0))
        return prof

    def mesh(self, offset=(0.0, 0.0, 0.0)) -> TriangleMesh:
        m = revolve(self.profile(), self.n_phi)
        return m.translated(offset) if np.any(offset) else m

    def refined(self) -> "CoaxDipole":
        fs = None if self.feed_segment is None else self.feed_segment / 2
        return CoaxDipole(self.arm_length, self.r_inner, self.r_outer, 2 * self.n_phi,
                          2 * self.n_arm, 2 * self.n_port, 2 * self.n_cap, fs)


def merge(meshes) -> TriangleMesh:
    """Concatenate meshes; port ids of mesh ``i`` are shifted so they stay unique."""
    verts, tris, regions = [], [], []
    nv, shift = 0, 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + nv)
        regions.append(np.where(m.region > 0, m.region + shift, 0))
        nv += len(m.vertices)
        shift += max(m.port_ids, default=0)
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris), np.concatenate(regions))
