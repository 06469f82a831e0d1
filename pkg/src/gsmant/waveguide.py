"""Analytic modes of rectangular and coaxial waveguide ports.

A port frame is ``(origin, u, v, n)`` with ``u x v = n`` and ``n`` pointing
out of the guide into the exterior region; the incoming wave travels along
``+n``.  Transverse mode fields ``e`` are real and orthonormal over the
cross-section.  Propagation constants follow the ``exp(+j w t)`` convention:
``beta`` is real for propagating modes and ``-j * alpha`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, jvp, yv, yvp

from .constants import ETA0
from .errors import ValidationError

RECTANGULAR = "rectangular"
COAXIAL = "coaxial"


@dataclass(frozen=True)
class WaveguideSpec:
    """Cross-section, filling and port frame of a waveguide port.

    ``dims`` is ``(a, b)`` with ``a > b`` for rectangular guides (``a`` along
    ``u``) and ``(r_inner, r_outer)`` for coaxial lines.
    """

    kind: str
    dims: tuple[float, float]
    eps_r: float = 1.0
    mu_r: float = 1.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    u_axis: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.kind not in (RECTANGULAR, COAXIAL):
            raise ValidationError(f"unknown waveguide kind {self.kind!r}")
        p, q = (float(x) for x in self.dims)
        if self.kind == RECTANGULAR and not (p >= q > 0):
            raise ValidationError(f"rectangular guide needs a >= b > 0, got {self.dims}")
        if self.kind == COAXIAL and not (q > p > 0):
            raise ValidationError(f"coaxial line needs r_outer > r_inner > 0, got {self.dims}")
        if not (self.eps_r > 0 and self.mu_r > 0):
            raise ValidationError("fill parameters must be positive")
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValidationError("port normal must be a unit vector")
        if self.u_axis is not None and abs(np.dot(self.u_axis, n)) > 1e-9:
            raise ValidationError("port u axis must be perpendicular to the normal")

    @property
    def frame(self) -> np.ndarray:
        """Rows ``u, v, n``."""
        n = np.asarray(self.normal, dtype=float)
        if self.u_axis is None:
            trial = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
            u = trial - np.dot(trial, n) * n
        else:
            u = np.asarray(self.u_axis, dtype=float)
        u = u / np.linalg.norm(u)
        return np.stack([u, np.cross(n, u), n])

    @property
    def eta(self) -> float:
        return ETA0 * math.sqrt(self.mu_r / self.eps_r)

    def fill_wavenumber(self, k: float) -> float:
        return k * math.sqrt(self.eps_r * self.mu_r)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float) - np.asarray(self.origin, dtype=float)
        return p @ self.frame[:2].T

    def contains(self, local: np.ndarray, tol: float = 0.0) -> np.ndarray:
        p, q = self.dims
        if self.kind == RECTANGULAR:
            return ((np.abs(local[..., 0]) <= p / 2 * (1 + tol))
                    & (np.abs(local[..., 1]) <= q / 2 * (1 + tol)))
        rho = np.hypot(local[..., 0], local[..., 1])
        return (rho >= p * (1 - tol)) & (rho <= q * (1 + tol))


@dataclass(frozen=True)
class WaveguideMode:
    """One transverse mode; ``field_local`` maps local (u, v) points to ``e``."""

    label: str
    kc: float
    kind: str
    indices: tuple[int, int, int]
    field_local: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    spec: WaveguideSpec = field(repr=False, compare=False)

    def beta(self, k: float) -> complex:
        kf = self.spec.fill_wavenumber(k)
        d = kf * kf - self.kc * self.kc
        return complex(math.sqrt(d)) if d > 0 else -1j * math.sqrt(-d)

    def eta(self, k: float) -> complex:
        kf = self.spec.fill_wavenumber(k)
        b = self.beta(k)
        if self.kind == "TE":
            return kf * self.spec.eta / b
        if self.kind == "TM":
            return b * self.spec.eta / kf
        return complex(self.spec.eta)

    def propagating(self, k: float) -> bool:
        return self.spec.fill_wavenumber(k) > self.kc

    def field(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Cartesian transverse field at points in the port plane."""
        local = self.spec.to_local(points)
        if not np.all(self.spec.contains(local, tol)):
            raise ValidationError(f"point outside the {self.spec.kind} cross-section")
        e = self.field_local(local)
        return e @ self.spec.frame[:2]


def mode_field(mode: WaveguideMode, point, tol: float = 1e-9) -> np.ndarray:
    """Transverse field ``(e_u, e_v)`` at a point of the port plane."""
    p = np.atleast_2d(np.asarray(point, dtype=float))
    local = mode.spec.to_local(p) if p.shape[-1] == 3 else p
    if not np.all(mode.spec.contains(local, tol)):
        raise ValidationError(f"point outside the {mode.spec.kind} cross-section")
    out = mode.field_local(local)
    return out[0] if np.ndim(point) == 1 else out


@dataclass(frozen=True)
class ModeSet:
    """Modes of one port sorted by cutoff, evaluated at wavenumber ``k``."""

    spec: WaveguideSpec
    k: float
    modes: tuple[WaveguideMode, ...]

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.modes]

    @property
    def eta(self) -> np.ndarray:
        return np.array([m.eta(self.k) for m in self.modes])

    @property
    def beta(self) -> np.ndarray:
        return np.array([m.beta(self.k) for m in self.modes])

    @property
    def propagating(self) -> np.ndarray:
        return np.array([m.propagating(self.k) for m in self.modes], dtype=bool)

    @property
    def n_propagating(self) -> int:
        return int(self.propagating.sum())


# ----------------------------------------------------------------------------
# rectangular guide

def _rect_modes(spec: WaveguideSpec, kc_max: float, count_min: int):
    a, b = spec.dims
    top = 4
    while True:
        # every mode with kc below this bound has m, n <= top
        bound = math.pi * (top + 1) / a
        cand = []
        for m in range(top + 1):
            for n in range(top + 1):
                kc = math.pi * math.hypot(m / a, n / b)
                if kc >= bound:
                    continue
                if m or n:
                    cand.append((kc, "TE", m, n))
                if m and n:
                    cand.append((kc, "TM", m, n))
        if len(cand) >= count_min and bound > kc_max:
            break
        top *= 2
    cand.sort(key=lambda c: (c[0], c[1] == "TM", c[2], c[3]))
    keep = [c for i, c in enumerate(cand) if c[0] <= kc_max or i < count_min]
    return [_rect_mode(spec, kind, m, n, kc) for kc, kind, m, n in keep]


def _rect_mode(spec: WaveguideSpec, kind: str, m: int, n: int, kc: float) -> WaveguideMode:
    a, b = spec.dims
    cx = a if m == 0 else a / 2
    sx = 0.0 if m == 0 else a / 2
    cy = b if n == 0 else b / 2
    sy = 0.0 if n == 0 else b / 2
    if kind == "TE":
        fx, fy = n / b, -m / a
    else:
        fx, fy = m / a, n / b
    norm = 1.0 / math.sqrt(fx * fx * cx * sy + fy * fy * sx * cy)

    def e(local):
        x = local[..., 0] + a / 2
        y = local[..., 1] + b / 2
        ex = fx * np.cos(m * math.pi * x / a) * np.sin(n * math.pi * y / b)
        ey = fy * np.sin(m * math.pi * x / a) * np.cos(n * math.pi * y / b)
        return norm * np.stack([ex, ey], axis=-1)

    return WaveguideMode(f"{kind}{m}{n}", kc, kind, (m, n, 0), e, spec)


# ----------------------------------------------------------------------------
# coaxial line

def _cross_roots(n: int, c: float, derivative: bool, x_max: float) -> list[float]:
    """Roots ``x = kc * r_inner`` below ``x_max`` of the coaxial cutoff equation."""
    if derivative:
        def f(x):
            return jvp(n, x) * yvp(n, c * x) - yvp(n, x) * jvp(n, c * x)
    else:
        def f(x):
            return jv(n, x) * yv(n, c * x) - yv(n, x) * jv(n, c * x)
    # roots are spaced by about pi / (c - 1); the first TE root sits near 2n/(1+c)
    step = min(0.02 * math.pi / (c - 1.0), 0.05 / (1.0 + c))
    grid = np.arange(step, x_max + step, step)
    with np.errstate(all="ignore"):
        vals = f(grid)
    roots = []
    for i in range(len(grid) - 1):
        f0, f1 = vals[i], vals[i + 1]
        if np.isfinite(f0) and np.isfinite(f1) and f0 * f1 < 0.0:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return [r for r in roots if r <= x_max]


def _coax_modes(spec: WaveguideSpec, kc_max: float, count_min: int):
    a, b = spec.dims
    c = b / a
    tem_norm = 1.0 / math.sqrt(2.0 * math.pi * math.log(c))

    def tem(local):
        rho2 = np.sum(local * local, axis=-1)
        return tem_norm * local / rho2[..., None]

    x_lim = max(kc_max * a, 2.0 / (1.0 + c), math.pi / (c - 1.0)) * 1.01
    while True:
        cand = []
        for n in range(0, 400):
            # lowest root of order n exceeds n / c, the turning point at rho = b
            if n / c > x_lim:
                break
            for kind, deriv in (("TE", True), ("TM", False)):
                for p, x in enumerate(_cross_roots(n, c, deriv, x_lim), 1):
                    for par in ((0,) if n == 0 else (0, 1)):
                        cand.append((x / a, kind, n, p, par, x))
        if len(cand) + 1 >= count_min:
            break
        x_lim *= 2.0
    cand.sort(key=lambda t: (t[0], t[1] == "TM", t[2], t[3], t[4]))
    modes = [WaveguideMode("TEM", 0.0, "TEM", (0, 0, 0), tem, spec)]
    for i, (kc, kind, n, p, par, x) in enumerate(cand):
        if kc > kc_max and i + 1 >= count_min:
            break
        modes.append(_coax_mode(spec, kind, n, p, x, par))
    return modes


def _coax_mode(spec: WaveguideSpec, kind: str, n: int, p: int, x: float, parity: int):
    a, b = spec.dims
    kc = x / a
    # radial function R(rho) vanishing (TM) or with vanishing slope (TE) at rho = a
    if kind == "TM":
        A, B = yv(n, x), -jv(n, x)
    else:
        A, B = yvp(n, x), -jvp(n, x)

    def R(rho):
        return A * jv(n, kc * rho) + B * yv(n, kc * rho)

    def dR(rho):
        return kc * (A * jvp(n, kc * rho) + B * yvp(n, kc * rho))

    # norm: int |grad psi|^2 dA = kc^2 int psi^2 dA for Dirichlet/Neumann problems
    xs, ws = np.polynomial.legendre.leggauss(80)
    rho = 0.5 * (b - a) * xs + 0.5 * (b + a)
    w = 0.5 * (b - a) * ws
    ang = 2.0 * math.pi if n == 0 else math.pi
    nrm2 = ang * np.sum(w * rho * (dR(rho) ** 2 + (n * R(rho) / rho) ** 2))
    scale = 1.0 / math.sqrt(nrm2)

    def e(local):
        rho = np.hypot(local[..., 0], local[..., 1])
        phi = np.arctan2(local[..., 1], local[..., 0])
        if parity == 0:
            th, dth = np.cos(n * phi), -n * np.sin(n * phi)
        else:
            th, dth = np.sin(n * phi), n * np.cos(n * phi)
        g_rho = dR(rho) * th
        g_phi = R(rho) * dth / rho
        if kind == "TM":
            er, ep = g_rho, g_phi
        else:
            er, ep = g_phi, -g_rho
        c, s = np.cos(phi), np.sin(phi)
        return scale * np.stack([er * c - ep * s, er * s + ep * c], axis=-1)

    tag = "" if n == 0 else "eo"[parity]
    return WaveguideMode(f"{kind}{n}{p}{tag}", kc, kind, (n, p, parity), e, spec)


# ----------------------------------------------------------------------------

def enumerate_modes(spec: WaveguideSpec, k: float, count: int | None = None) -> ModeSet:
    """First ``count`` modes by ascending cutoff.

    The default count keeps every mode with cutoff below ``2 k`` and at least
    three evanescent modes beyond the propagating set.
    """
    if not k > 0:
        raise ValidationError("k must be positive")
    kf = spec.fill_wavenumber(k)
    gen = _rect_modes if spec.kind == RECTANGULAR else _coax_modes
    n_prop = sum(1 for m in gen(spec, kf, 1) if m.kc < kf)
    if count is None:
        modes = gen(spec, 2.0 * kf, n_prop + 3)
    else:
        if count < n_prop:
            raise ValidationError(f"{count} modes requested but {n_prop} propagate at k={k:.6g}")
        modes = gen(spec, 0.0, count)[:count]
    return ModeSet(spec, float(k), tuple(modes))
