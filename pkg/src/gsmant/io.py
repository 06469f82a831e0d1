"""File formats: GSM containers, Touchstone, far-field CSV, run and layout configs.

GSM container layout (all integers and floats little-endian)::

    b"GSMANT\\x00\\x01"          8-byte magic
    uint32                       header length in bytes
    header                       UTF-8 JSON, keys sorted
    blocks                       complex128, column-major, in header order

The header names every block with its shape, so readers need no other
schema.  Output is byte-identical for identical inputs.
"""

from __future__ import annotations

import configparser
import csv
import glob
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .gsm import CompressedGsm, Gsm
from .mesh import load_mesh
from .sphwave import SphericalBasis
from .waveguide import WaveguideSpec

MAGIC = b"GSMANT\x00\x01"
MODE_ORDER = "lexicographic (l, m, sigma, tau); sigma 0 = even, tau 1 = TE"
FORMAT_VERSION = 1


# ----------------------------------------------------------------------------
# GSM container

def _write_container(path, header: dict, blocks: list[tuple[str, np.ndarray]]) -> None:
    header = dict(header, format_version=FORMAT_VERSION,
                  blocks=[[name, list(a.shape)] for name, a in blocks])
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(text)))
        fh.write(text)
        for _, a in blocks:
            fh.write(np.asarray(a, dtype="<c16").tobytes(order="F"))


def _read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValidationError(f"{path}: not a GSM container (bad magic)")
    (n,) = struct.unpack("<I", data[8:12])
    try:
        header = json.loads(data[12:12 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: corrupt header ({exc})") from exc
    pos = 12 + n
    blocks = {}
    for name, shape in header["blocks"]:
        count = int(np.prod(shape))
        end = pos + 16 * count
        if end > len(data):
            raise ValidationError(f"{path}: truncated block {name}")
        blocks[name] = np.frombuffer(data[pos:end], dtype="<c16").reshape(shape, order="F").astype(complex)
        pos = end
    if pos != len(data):
        raise ValidationError(f"{path}: {len(data) - pos} trailing bytes")
    return header, blocks


def _basis_header(basis: SphericalBasis) -> dict:
    return {"k": basis.k, "l_max": basis.l_max, "J": basis.J, "mode_order": MODE_ORDER}


def write_gsm(gsm: Gsm, path, extra: dict | None = None) -> None:
    header = {"kind": "full", "frequency": gsm.frequency, "port_labels": list(gsm.port_labels),
              "formulation": gsm.formulation, "center": [float(c) for c in gsm.center],
              "radius": gsm.radius, **_basis_header(gsm.basis)}
    if extra:
        header["info"] = extra
    _write_container(path, header, [("Gamma", gsm.Gamma), ("R", gsm.R), ("T", gsm.T), ("S", gsm.S)])


def write_compressed(cg: CompressedGsm, path, extra: dict | None = None) -> None:
    header = {"kind": "compressed", "mode_kind": cg.kind, "frequency": cg.frequency, "k": cg.k,
              "l_max": cg.l_max, "J": cg.dim - cg.n_ports, "mode_order": MODE_ORDER,
              "port_labels": list(cg.port_labels), "iota": cg.iota, "N": cg.N}
    if extra:
        header["info"] = extra
    blocks = [("values", cg.values), ("vectors", cg.vectors)]
    if cg.right is not None:
        blocks.append(("right", cg.right))
    _write_container(path, header, blocks)


def read_gsm(path) -> Gsm | CompressedGsm:
    """Read a full or compressed GSM container."""
    h, b = _read_container(path)
    try:
        if h["kind"] == "full":
            basis = SphericalBasis(h["k"], h["l_max"])
            return Gsm(frequency=h["frequency"], k=h["k"], port_labels=tuple(h["port_labels"]),
                       basis=basis, Gamma=b["Gamma"], R=b["R"], T=b["T"], S=b["S"],
                       formulation=h["formulation"], center=np.array(h["center"], dtype=float),
                       radius=h["radius"])
        if h["kind"] == "compressed":
            return CompressedGsm(h["mode_kind"], b["values"], b["vectors"], b.get("right"), h["iota"],
                                 len(h["port_labels"]), h["frequency"], h["k"],
                                 tuple(h["port_labels"]), h["l_max"])
    except KeyError as exc:
        raise ValidationError(f"{path}: header lacks field {exc}") from exc
    raise ValidationError(f"{path}: unknown container kind {h.get('kind')!r}")


def read_header(path) -> dict:
    return _read_container(path)[0]


# ----------------------------------------------------------------------------
# Touchstone v1

def _ma(row) -> str:
    return " ".join(f"{abs(x):.12e} {math.degrees(np.angle(x)):.12e}" for x in row)


def write_touchstone(path, frequencies, matrices, labels=(), z0: float = 50.0) -> None:
    """Magnitude/angle Touchstone v1 file, one block per frequency."""
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    mats = [np.atleast_2d(np.asarray(m, dtype=complex)) for m in matrices]
    if len(mats) != len(freqs):
        raise ValidationError("one S-matrix per frequency is required")
    n = mats[0].shape[0]
    lines = [f"! {n}-port S-parameters, magnitude/angle (deg)"]
    lines += [f"! port {i + 1}: {lab}" for i, lab in enumerate(labels)]
    lines.append(f"# HZ S MA R {z0:g}")
    for f, S in zip(freqs, mats):
        if S.shape != (n, n):
            raise ValidationError("all S-matrices must have the same size")
        if n <= 2:
            # two-port data are listed column-major
            lines.append(f"{f:.12e} " + _ma(S.T.ravel()))
            continue
        rows = [S[i, j:j + 4] for i in range(n) for j in range(0, n, 4)]
        lines.append(f"{f:.12e} " + _ma(rows[0]))
        lines += ["  " + _ma(r) for r in rows[1:]]
    Path(path).write_text("\n".join(lines) + "\n")


def read_touchstone(path) -> tuple[np.ndarray, list[np.ndarray]]:
    """Read a Touchstone v1 file written in MA, DB or RI format."""
    path = Path(path)
    n = _ports_from_suffix(path)
    fmt, scale = "MA", 1.0
    values: list[float] = []
    for raw in path.read_text().splitlines():
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            tok = line[1:].upper().split()
            units = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
            for t in tok:
                if t in units:
                    scale = units[t]
                if t in ("MA", "DB", "RI"):
                    fmt = t
            continue
        values += [float(x) for x in line.split()]
    per = 1 + 2 * n * n
    if len(values) % per:
        raise ValidationError(f"{path}: data count is not a multiple of {per}")
    data = np.array(values).reshape(-1, per)
    freqs = data[:, 0] * scale
    a, b = data[:, 1::2], data[:, 2::2]
    if fmt == "RI":
        z = a + 1j * b
    else:
        mag = 10 ** (a / 20) if fmt == "DB" else a
        z = mag * np.exp(1j * np.radians(b))
    mats = [zz.reshape(n, n).T if n == 2 else zz.reshape(n, n) for zz in z]
    return freqs, mats


def _ports_from_suffix(path: Path) -> int:
    suf = path.suffix.lower()
    if not (suf.startswith(".s") and suf.endswith("p") and suf[2:-1].isdigit()):
        raise ValidationError(f"{path}: expected a .sNp extension")
    return int(suf[2:-1])


# ----------------------------------------------------------------------------
# far-field CSV

def write_farfield_csv(path, theta, phi, E, gain) -> None:
    """Columns: theta_deg, phi_deg, Re/Im E_theta, Re/Im E_phi, gain_dBi."""
    E = np.asarray(E, dtype=complex)
    g = np.asarray(gain, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_deg", "phi_deg", "re_E_theta", "im_E_theta", "re_E_phi", "im_E_phi", "gain_dBi"])
        for t, p, e, gg in zip(np.ravel(theta), np.ravel(phi), E.reshape(-1, 2), g.ravel()):
            db = 10.0 * math.log10(gg) if gg > 0 else -math.inf
            w.writerow([f"{math.degrees(t):.6f}", f"{math.degrees(p):.6f}", f"{e[0].real:.12e}",
                        f"{e[0].imag:.12e}", f"{e[1].real:.12e}", f"{e[1].imag:.12e}", f"{db:.6f}"])


# ----------------------------------------------------------------------------
# configs

def _floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse {what} {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ValidationError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


@dataclass
class PortConfig:
    port: int
    spec: WaveguideSpec
    modes: int | None = None


@dataclass
class RunConfig:
    """Batch solve configuration (INI-style sections)."""

    mesh_path: Path
    mesh_format: str | None
    ports: list[PortConfig]
    start: float
    stop: float
    count: int
    formulation: str = "magnetic"
    l_max: int | None = None
    center: np.ndarray | None = None
    iota: float = 1.53e-5
    seed: int = 0
    output_dir: Path = Path("out")
    prefix: str = "gsm"
    rule_degree: int = 4
    source_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.count)


def _section(cp, name):
    if not cp.has_section(name):
        raise ValidationError(f"config lacks section [{name}]")
    return cp[name]


def load_config(path) -> RunConfig:
    path = Path(path)
    raw = path.read_bytes()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(raw.decode("utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    base = path.parent
    m = _section(cp, "mesh")
    if "path" not in m:
        raise ValidationError("[mesh] needs a path")
    ports = []
    for name in cp.sections():
        if not name.lower().startswith("port"):
            continue
        try:
            pid = int(name.split()[-1])
        except ValueError as exc:
            raise ValidationError(f"bad port section name [{name}]; use [port <id>]") from exc
        s = cp[name]
        spec = WaveguideSpec(
            kind=s.get("kind", "rectangular"),
            dims=tuple(_floats(s.get("dims", ""), 2, f"[{name}] dims")),
            eps_r=s.getfloat("eps_r", 1.0), mu_r=s.getfloat("mu_r", 1.0),
            origin=tuple(_floats(s.get("origin", "0 0 0"), 3, f"[{name}] origin")),
            normal=tuple(_floats(s.get("normal", "0 0 1"), 3, f"[{name}] normal")),
            u_axis=tuple(_floats(s["u_axis"], 3, f"[{name}] u_axis")) if "u_axis" in s else None)
        ports.append(PortConfig(pid, spec, s.getint("modes") if "modes" in s else None))
    sw = _section(cp, "sweep")
    start = sw.getfloat("start")
    stop = sw.getfloat("stop", start)
    count = sw.getint("count", 1)
    if count < 1:
        raise ValidationError("sweep count must be >= 1")
    if not start or start <= 0 or stop < start:
        raise ValidationError("sweep needs 0 < start <= stop")
    sv = cp["solver"] if cp.has_section("solver") else {}
    form = sv.get("formulation", "magnetic")
    if form not in ("magnetic", "electric"):
        raise ValidationError(f"unknown formulation {form!r}")
    lm = sv.get("l_max", "auto")
    l_max = None if lm == "auto" else int(lm)
    cen = sv.get("center", "auto")
    center = None if cen == "auto" else np.array(_floats(cen, 3, "[solver] center"))
    iota = float(sv.get("iota", 1.53e-5))
    if not 0.0 < iota < 1.0:
        raise ValidationError("iota must lie in (0, 1)")
    out = cp["output"] if cp.has_section("output") else {}
    return RunConfig(
        mesh_path=(base / m["path"]).resolve(), mesh_format=m.get("format"), ports=ports,
        start=start, stop=stop, count=count, formulation=form, l_max=l_max, center=center,
        iota=iota, seed=int(sv.get("seed", 0)), output_dir=(base / out.get("directory", "out")),
        prefix=out.get("prefix", path.stem), rule_degree=int(sv.get("rule_degree", 4)),
        source_hash=hashlib.sha256(raw).hexdigest()[:16])


def load_config_mesh(config: RunConfig):
    return load_mesh(config.mesh_path, config.mesh_format)


@dataclass
class LayoutEntry:
    name: str
    files: list[Path]
    center: np.ndarray
    radius: float | None


@dataclass
class LayoutConfig:
    elements: list[LayoutEntry]
    method: str = "direct"
    tol: float = 1e-8
    max_iter: int = 100


def load_layout(path) -> LayoutConfig:
    """Layout file: ``[element <id>]`` sections with ``gsm`` (file or glob) and ``center``."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    els = []
    for name in cp.sections():
        if not name.lower().startswith("element"):
            continue
        s = cp[name]
        if "gsm" not in s or "center" not in s:
            raise ValidationError(f"[{name}] needs gsm and center")
        pattern = str(path.parent / s["gsm"])
        files = sorted(Path(p) for p in glob.glob(pattern))
        if not files:
            raise ValidationError(f"[{name}] no GSM files match {s['gsm']!r}")
        els.append(LayoutEntry(name.split(None, 1)[-1], files, np.array(_floats(s["center"], 3, f"[{name}] center")),
                               s.getfloat("radius") if "radius" in s else None))
    if not els:
        raise ValidationError(f"{path}: no [element <id>] sections")
    counts = {len(e.files) for e in els}
    if len(counts) != 1:
        raise ValidationError("all elements need the same number of frequency points")
    a = cp["array"] if cp.has_section("array") else {}
    method = a.get("method", "direct")
    if method not in ("direct", "iterative"):
        raise ValidationError(f"unknown composition method {method!r}")
    return LayoutConfig(els, method, float(a.get("tol", 1e-8)), int(a.get("max_iter", 100)))
