"""Triangle meshes with antenna/port region tags and RWG bases.

Region names are ``antenna`` or ``port<id>`` (``port1``, ``port:2`` and
``port_3`` are all accepted).  The surface A plus all port surfaces P must form
one triangulation; port triangles share their rim vertices with the antenna.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import MeshError

ANTENNA = "antenna"
_PORT_RE = re.compile(r"^port[:_]?(\d+)$")


def parse_region(name: str) -> int:
    """Return ``0`` for the antenna or the (positive) port id."""
    name = name.strip()
    if name == ANTENNA:
        return 0
    m = _PORT_RE.match(name)
    if m is None or int(m.group(1)) < 1:
        raise MeshError(f"unknown region name {name!r}")
    return int(m.group(1))


def region_name(region: int) -> str:
    return ANTENNA if region == 0 else f"port{region}"


@dataclass(frozen=True)
class TriangleMesh:
    """Validated triangle mesh.

    ``region[t]`` is 0 for antenna triangles and the port id otherwise.
    Triangle winding defines the normal, which must point into the exterior
    (free-space) region on port surfaces.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray = field(default=None)
    planarity_tol: float = 1e-6

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        r = np.zeros(len(t), dtype=np.int64) if self.region is None else \
            np.ascontiguousarray(self.region, dtype=np.int64)
        for a in (v, t, r):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "region", r)
        self._validate()

    # -- geometry -----------------------------------------------------------
    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def corners(self) -> np.ndarray:
        return self.vertices[self.triangles]

    @cached_property
    def _cross(self) -> np.ndarray:
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        return self._cross / (2.0 * self.areas[:, None])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        c = self.corners
        return np.max(np.linalg.norm(c - np.roll(c, 1, axis=1), axis=2), axis=1)

    @property
    def port_ids(self) -> list[int]:
        return sorted(int(p) for p in np.unique(self.region) if p > 0)

    def port_triangles(self, port: int) -> np.ndarray:
        return np.flatnonzero(self.region == port)

    def port_normal(self, port: int) -> np.ndarray:
        tri = self.port_triangles(port)
        n = np.sum(self.normals[tri] * self.areas[tri, None], axis=0)
        return n / np.linalg.norm(n)

    def port_center(self, port: int) -> np.ndarray:
        tri = self.port_triangles(port)
        return np.sum(self.centroids[tri] * self.areas[tri, None], axis=0) / self.areas[tri].sum()

    def bounding_sphere(self, center=None) -> tuple[np.ndarray, float]:
        """Enclosing sphere about ``center`` (default: bounding-box centre)."""
        if center is None:
            center = 0.5 * (self.vertices.min(0) + self.vertices.max(0))
        center = np.asarray(center, dtype=float)
        return center, float(np.max(np.linalg.norm(self.vertices - center, axis=1)))

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=float),
                            self.triangles, self.region, self.planarity_tol)

    # -- validation ---------------------------------------------------------
    @cached_property
    def _edge_table(self):
        """Unique undirected edges and, per triangle side, the edge id."""
        t = self.triangles
        # side a is opposite vertex a
        directed = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        und = np.sort(directed, axis=2).reshape(-1, 2)
        edges, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1, 3), counts, directed

    def _validate(self) -> None:
        v, t, r = self.vertices, self.triangles, self.region
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must be an (n, 3) array")
        if len(r) != len(t):
            raise MeshError(f"{len(r)} region tags for {len(t)} triangles")
        bad = np.flatnonzero((t < 0).any(1) | (t >= len(v)).any(1))
        if bad.size:
            raise MeshError(f"triangle {bad[0]} references a missing vertex: {t[bad[0]].tolist()}")
        if np.any(r < 0):
            raise MeshError("negative region id")
        rep = np.flatnonzero((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2]))
        if rep.size:
            raise MeshError(f"triangle {rep[0]} repeats a vertex")
        scale = np.ptp(v, axis=0).max() if len(v) else 1.0
        tiny = np.flatnonzero(self.areas <= 1e-14 * scale * scale)
        if tiny.size:
            raise MeshError(f"triangle {tiny[0]} is degenerate (zero area)")
        edges, side_edge, counts, directed = self._edge_table
        over = np.flatnonzero(counts > 2)
        if over.size:
            e = edges[over[0]]
            raise MeshError(f"non-manifold edge ({e[0]}, {e[1]}) shared by {counts[over[0]]} triangles")
        # winding: a shared edge must be traversed in opposite directions
        flat_edge = side_edge.ravel()
        first = directed.reshape(-1, 2)[:, 0]
        order = np.argsort(flat_edge, kind="stable")
        fe = flat_edge[order]
        pair = np.flatnonzero(fe[1:] == fe[:-1])
        s1, s2 = order[pair], order[pair + 1]
        tri1, tri2 = s1 // 3, s2 // 3
        same_region = r[tri1] == r[tri2]
        clash = same_region & (first[s1] == first[s2])
        if np.any(clash):
            i = np.flatnonzero(clash)[0]
            raise MeshError(f"inconsistent winding between triangles {tri1[i]} and {tri2[i]} "
                            f"in region {region_name(int(r[tri1[i]]))!r}")
        for p in self.port_ids:
            self._check_port(p, tri1, tri2)

    def _check_port(self, port: int, tri1: np.ndarray, tri2: np.ndarray) -> None:
        tri = self.port_triangles(port)
        pts = self.vertices[np.unique(self.triangles[tri])]
        n = self.port_normal(port)
        diam = float(np.max(np.linalg.norm(pts - pts.mean(0), axis=1))) * 2.0
        off = np.abs((pts - pts[0]) @ n)
        if off.max() > self.planarity_tol * diam:
            raise MeshError(f"port {port} is not planar (deviation {off.max():.3e} m)")
        # connectivity through shared edges
        inside = (self.region[tri1] == port) & (self.region[tri2] == port)
        parent = {int(x): int(x) for x in tri}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in zip(tri1[inside], tri2[inside]):
            parent[find(int(a))] = find(int(b))
        roots = {find(int(x)) for x in tri}
        if len(roots) != 1:
            raise MeshError(f"port {port} consists of {len(roots)} disconnected pieces")


@dataclass(frozen=True)
class RwgBasisSet:
    """RWG functions on all interior edges of a mesh.

    On triangle ``t`` the function of its side ``a`` (opposite local vertex
    ``a``) is ``sign * length / (2 area) * (r - vertex_a)``, with ``sign``
    +1 on the plus and -1 on the minus triangle.
    """

    mesh: TriangleMesh
    edges: np.ndarray
    tri_plus: np.ndarray
    tri_minus: np.ndarray
    lengths: np.ndarray
    side_basis: np.ndarray
    side_sign: np.ndarray
    electric_index: np.ndarray
    magnetic_index: np.ndarray
    magnetic_port: np.ndarray

    @property
    def n_basis(self) -> int:
        return len(self.edges)

    @property
    def n_electric(self) -> int:
        return len(self.electric_index)

    @property
    def n_magnetic(self) -> int:
        return len(self.magnetic_index)

    def magnetic_for_port(self, port: int) -> np.ndarray:
        return self.magnetic_index[self.magnetic_port == port]

    def side_coefficients(self) -> np.ndarray:
        """``sign * length / (2 area)`` per triangle side (0 for boundary sides)."""
        area = self.mesh.areas[:, None]
        ok = self.side_basis >= 0
        length = np.where(ok, self.lengths[np.where(ok, self.side_basis, 0)], 0.0)
        return self.side_sign * length / (2.0 * area)

    def divergence(self) -> np.ndarray:
        """Surface divergence ``sign * length / area`` per triangle side."""
        return 2.0 * self.side_coefficients()

    def evaluate(self, tri: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values of the (up to three) functions supported on ``tri``.

        Returns basis ids ``(3,)`` (``-1`` for boundary sides) and values
        ``(3, n, 3)``.
        """
        coef = self.side_coefficients()[tri]
        corners = self.mesh.corners[tri]
        vals = coef[:, None, None] * (np.asarray(points)[None, :, :] - corners[:, None, :])
        return self.side_basis[tri], vals


def build_rwg(mesh: TriangleMesh) -> RwgBasisSet:
    """Enumerate RWG functions in sorted-edge order."""
    edges, side_edge, counts, _ = mesh._edge_table
    interior = np.flatnonzero(counts == 2)
    basis_of_edge = -np.ones(len(edges), dtype=np.int64)
    basis_of_edge[interior] = np.arange(len(interior))
    side_basis = basis_of_edge[side_edge]
    flat = side_basis.ravel()
    order = np.argsort(flat, kind="stable")
    fb = flat[order]
    keep = fb >= 0
    order, fb = order[keep], fb[keep]
    first, second = order[0::2], order[1::2]
    if not np.array_equal(fb[0::2], fb[1::2]):
        raise MeshError("internal edge bookkeeping failed")
    # plus side: the lower triangle index, so ordering is stable on round trips
    tri_plus, tri_minus = first // 3, second // 3
    side_sign = np.zeros(side_basis.shape)
    side_sign.ravel()[first] = 1.0
    side_sign.ravel()[second] = -1.0
    e = edges[interior]
    lengths = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    rp, rm = mesh.region[tri_plus], mesh.region[tri_minus]
    is_mag = (rp == rm) & (rp > 0)
    magnetic_index = np.flatnonzero(is_mag)
    for p in mesh.port_ids:
        if not np.any(rp[magnetic_index] == p):
            raise MeshError(f"port {p} has no interior edges; the port mesh is too coarse")
    for name, arr in (("edges", e), ("lengths", lengths)):
        arr.setflags(write=False)
    return RwgBasisSet(mesh=mesh, edges=e, tri_plus=tri_plus, tri_minus=tri_minus,
                       lengths=lengths, side_basis=side_basis, side_sign=side_sign,
                       electric_index=np.arange(len(interior)),
                       magnetic_index=magnetic_index, magnetic_port=rp[magnetic_index])


# ----------------------------------------------------------------------------
# file formats

def _tags_path(path: Path) -> Path:
    return path.with_suffix(".tags")


def read_off(path, tags_path=None) -> TriangleMesh:
    """Read an OFF file plus its ``.tags`` sidecar (one region per triangle)."""
    path = Path(path)
    lines = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, 1):
            s = raw.split("#", 1)[0].strip()
            if s:
                lines.append((lineno, s))
    if not lines or not lines[0][1].startswith("OFF"):
        raise MeshError(f"{path}: missing OFF header")
    head = lines[0][1][3:].split()
    body = lines[1:]
    if not head:
        if not body:
            raise MeshError(f"{path}: missing element counts")
        head = body[0][1].split()
        body = body[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise MeshError(f"{path}: malformed element counts") from None
    if len(body) < nv + nf:
        raise MeshError(f"{path}: expected {nv} vertices and {nf} faces, file is truncated")
    verts = np.empty((nv, 3))
    for i, (lineno, s) in enumerate(body[:nv]):
        try:
            verts[i] = [float(x) for x in s.split()[:3]]
        except ValueError:
            raise MeshError(f"{path}:{lineno}: malformed vertex") from None
    tris = np.empty((nf, 3), dtype=np.int64)
    for i, (lineno, s) in enumerate(body[nv:nv + nf]):
        tok = s.split()
        try:
            ids = [int(x) for x in tok]
        except ValueError:
            raise MeshError(f"{path}:{lineno}: malformed face") from None
        if ids[0] != 3 or len(ids) < 4:
            raise MeshError(f"{path}:{lineno}: only triangular faces are supported")
        if min(ids[1:4]) < 0 or max(ids[1:4]) >= nv:
            raise MeshError(f"{path}:{lineno}: face references missing vertex {ids[1:4]}")
        tris[i] = ids[1:4]
    tags_path = _tags_path(path) if tags_path is None else Path(tags_path)
    if tags_path.exists():
        names = [s.strip() for s in tags_path.read_text(encoding="ascii").splitlines() if s.strip()]
        if len(names) != nf:
            raise MeshError(f"{tags_path}: {len(names)} tags for {nf} triangles")
        region = []
        for i, nm in enumerate(names):
            try:
                region.append(parse_region(nm))
            except MeshError as exc:
                raise MeshError(f"{tags_path}:{i + 1}: {exc}") from None
    else:
        region = np.zeros(nf, dtype=np.int64)
    return TriangleMesh(verts, tris, np.asarray(region))


def write_off(mesh: TriangleMesh, path) -> None:
    """Write OFF and ``.tags`` files with round-trip exact coordinates."""
    path = Path(path)
    out = [f"OFF\n{len(mesh.vertices)} {mesh.n_triangles} 0\n"]
    out += [f"{x!r} {y!r} {z!r}\n" for x, y, z in mesh.vertices.tolist()]
    out += [f"3 {a} {b} {c}\n" for a, b, c in mesh.triangles.tolist()]
    path.write_text("".join(out), encoding="ascii")
    _tags_path(path).write_text("".join(region_name(int(r)) + "\n" for r in mesh.region),
                                encoding="ascii")


def read_gmsh(path) -> TriangleMesh:
    """Read the ASCII gmsh v2 subset: physical names, nodes and triangles."""
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh]
    sections: dict[str, tuple[int, list[str]]] = {}
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln.startswith("$") and not ln.startswith("$End"):
            name = ln[1:]
            j = i + 1
            while j < len(lines) and lines[j] != f"$End{name}":
                j += 1
            if j == len(lines):
                raise MeshError(f"{path}:{i + 1}: unterminated section ${name}")
            sections[name] = (i + 2, lines[i + 1:j])
            i = j
        i += 1
    if "MeshFormat" not in sections or not sections["MeshFormat"][1][0].startswith("2"):
        raise MeshError(f"{path}: only gmsh format version 2 is supported")
    names: dict[int, str] = {}
    if "PhysicalNames" in sections:
        start, body = sections["PhysicalNames"]
        for k, ln in enumerate(body[1:]):
            tok = ln.split(maxsplit=2)
            names[int(tok[1])] = tok[2].strip().strip('"')
    start, body = sections.get("Nodes", (0, []))
    node_ids, coords = [], []
    for k, ln in enumerate(body[1:]):
        tok = ln.split()
        try:
            node_ids.append(int(tok[0]))
            coords.append([float(x) for x in tok[1:4]])
        except (ValueError, IndexError):
            raise MeshError(f"{path}:{start + 1 + k}: malformed node") from None
    index = {nid: n for n, nid in enumerate(node_ids)}
    start, body = sections.get("Elements", (0, []))
    tris, region = [], []
    for k, ln in enumerate(body[1:]):
        lineno = start + 1 + k
        tok = [int(x) for x in ln.split()]
        if tok[1] != 2:
            continue
        ntags = tok[2]
        phys = tok[3] if ntags > 0 else 0
        nodes = tok[3 + ntags:6 + ntags]
        try:
            tris.append([index[n] for n in nodes])
        except KeyError as exc:
            raise MeshError(f"{path}:{lineno}: element references missing node {exc.args[0]}") from None
        name = names.get(phys, ANTENNA if phys == 0 else None)
        if name is None:
            raise MeshError(f"{path}:{lineno}: physical group {phys} has no name")
        try:
            region.append(parse_region(name))
        except MeshError as exc:
            raise MeshError(f"{path}:{lineno}: {exc}") from None
    if not tris:
        raise MeshError(f"{path}: no triangle elements")
    return TriangleMesh(np.array(coords), np.array(tris), np.array(region))


def write_gmsh(mesh: TriangleMesh, path) -> None:
    regions = sorted({int(r) for r in mesh.region})
    phys = {r: k + 1 for k, r in enumerate(regions)}
    out = ["$MeshFormat\n2.2 0 8\n$EndMeshFormat\n",
           f"$PhysicalNames\n{len(regions)}\n"]
    out += [f'2 {phys[r]} "{region_name(r)}"\n' for r in regions]
    out.append("$EndPhysicalNames\n")
    out.append(f"$Nodes\n{len(mesh.vertices)}\n")
    out += [f"{i + 1} {x!r} {y!r} {z!r}\n" for i, (x, y, z) in enumerate(mesh.vertices.tolist())]
    out.append("$EndNodes\n")
    out.append(f"$Elements\n{mesh.n_triangles}\n")
    out += [f"{i + 1} 2 2 {phys[int(r)]} {phys[int(r)]} {a + 1} {b + 1} {c + 1}\n"
            for i, ((a, b, c), r) in enumerate(zip(mesh.triangles.tolist(), mesh.region))]
    out.append("$EndElements\n")
    Path(path).write_text("".join(out), encoding="ascii")


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    """Load an OFF (+ ``.tags``) or gmsh v2 ASCII mesh."""
    path = Path(path)
    if not path.exists():
        raise MeshError(f"{path}: no such file")
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "off":
        return read_off(path)
    if fmt in ("msh", "gmsh", "gmsh-v2"):
        return read_gmsh(path)
    raise MeshError(f"unsupported mesh format {fmt!r}")
