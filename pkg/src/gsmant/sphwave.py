"""Real-valued vector spherical wavefunctions.

Modes are indexed by ``alpha -> (tau, sigma, l, m)`` with ``tau`` 1 (TE) or
2 (TM), ``sigma`` even/odd parity of the azimuthal factor, ``1 <= l <= l_max``
and ``0 <= m <= l``.  The basis is ordered lexicographically in
``(l, m, sigma, tau)``.

Conventions
-----------
* time dependence ``exp(+j w t)``; the outgoing radial function is the
  spherical Hankel function of the second kind.
* ``u1 = j_l(kr) A1``, ``u2 = (1/k) curl u1``, so that ``(1/k) curl`` swaps
  TE and TM waves.
* the angular harmonics ``Y`` are orthonormal on the unit sphere, which makes
  the free-space dyadic Green's function expand with coefficient ``-jk``.
* fields are ``E = k sqrt(eta0) sum(g u1 + h u4)`` and
  ``H = j k / sqrt(eta0) sum(g u1bar + h u4bar)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import spherical_jn, spherical_yn, eval_legendre

from .constants import ETA0

REGULAR, INCOMING, OUTGOING = 1, 3, 4
EVEN, ODD = 0, 1


@dataclass(frozen=True)
class ModeIndex:
    tau: int
    sigma: int
    l: int
    m: int
    alpha: int

    @property
    def label(self) -> str:
        return f"{'TE' if self.tau == 1 else 'TM'}{'eo'[self.sigma]}{self.l},{self.m}"


def lmax_for_radius(k: float, r_min: float) -> int:
    """Truncation degree for a sphere of radius ``r_min`` at wavenumber ``k``."""
    if not (k > 0 and r_min > 0):
        raise ValueError(f"k and r_min must be positive, got k={k}, r_min={r_min}")
    kr = k * r_min
    # guard against ceil of values like 11.000000000000002
    return int(math.ceil(kr + 7.0 * np.cbrt(kr) + 3.0 - 1e-12))


def num_modes(l_max: int) -> int:
    return 2 * l_max * (l_max + 2)


@dataclass(frozen=True)
class SphericalBasis:
    """Ordered set of vector spherical wave modes at wavenumber ``k``."""

    k: float
    l_max: int
    tau: np.ndarray = field(init=False, repr=False, compare=False)
    sigma: np.ndarray = field(init=False, repr=False, compare=False)
    l: np.ndarray = field(init=False, repr=False, compare=False)
    m: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")
        if not self.k > 0:
            raise ValueError("k must be positive")
        rows = [(tau, sigma, l, m)
                for l in range(1, self.l_max + 1)
                for m in range(l + 1)
                for sigma in (EVEN, ODD) if not (sigma == ODD and m == 0)
                for tau in (1, 2)]
        arr = np.array(rows, dtype=int)
        for i, name in enumerate(("tau", "sigma", "l", "m")):
            a = arr[:, i].copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def for_radius(cls, k: float, r_min: float) -> "SphericalBasis":
        return cls(k, lmax_for_radius(k, r_min))

    @property
    def J(self) -> int:
        return len(self.tau)

    def __len__(self) -> int:
        return self.J

    @property
    def modes(self) -> list[ModeIndex]:
        return [ModeIndex(int(t), int(s), int(l), int(m), a) for a, (t, s, l, m)
                in enumerate(zip(self.tau, self.sigma, self.l, self.m))]

    def index(self, tau: int, sigma: int, l: int, m: int) -> int:
        if not (tau in (1, 2) and sigma in (EVEN, ODD) and 1 <= l <= self.l_max
                and 0 <= m <= l) or (sigma == ODD and m == 0):
            raise ValueError(f"no mode (tau={tau}, sigma={sigma}, l={l}, m={m})")
        # modes of degree < l occupy 2 * sum(2l'+1) = 2(l^2 - 1) slots
        pos = 2 * (l * l - 1)
        pos += 0 if m == 0 else 2 + 4 * (m - 1)
        pos += 2 * sigma
        return pos + tau - 1

    @cached_property
    def bar(self) -> np.ndarray:
        """Permutation ``alpha -> alpha_bar`` swapping TE and TM."""
        idx = np.arange(self.J)
        return np.where(self.tau == 1, idx + 1, idx - 1)

    @cached_property
    def scalar_index(self) -> np.ndarray:
        """Position of each mode's ``(sigma, l, m)`` harmonic in the scalar table."""
        return (self.l * self.l - 1) + np.where(self.m == 0, 0, 2 * self.m - 1 + self.sigma)

    @property
    def header(self) -> list[list[int]]:
        return np.stack([self.tau, self.sigma, self.l, self.m], axis=1).tolist()


# ----------------------------------------------------------------------------
# special functions

def _legendre_tables(l_max: int, x: np.ndarray):
    """Normalized associated Legendre functions (no Condon-Shortley phase).

    Returns ``P[l, m]``, ``Q[l, m] = P[l, m] / sin(theta)`` (``m >= 1``) and
    ``dP[l, m] = dP/dtheta``.  ``Q`` and ``dP`` are finite at the poles.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    shape = (l_max + 1, l_max + 1) + x.shape
    P = np.zeros(shape)
    Q = np.zeros(shape)
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, l_max + 1):
        c = math.sqrt((2 * m + 1) / (2.0 * m))
        if m == 1:
            Q[1, 1] = c * P[0, 0]
        else:
            Q[m, m] = c * s * Q[m - 1, m - 1]
        P[m, m] = s * Q[m, m]
    for m in range(0, l_max):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
        Q[m + 1, m] = math.sqrt(2 * m + 3) * x * Q[m, m]
    for m in range(0, l_max + 1):
        for l in range(m + 2, l_max + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
            Q[l, m] = a * (x * Q[l - 1, m] - b * Q[l - 2, m])
    Q[:, 0] = 0.0
    dP = np.zeros(shape)
    for l in range(1, l_max + 1):
        dP[l, 0] = -math.sqrt(l * (l + 1.0)) * P[l, 1]
        for m in range(1, l + 1):
            c = math.sqrt((2 * l + 1.0) / (2 * l - 1.0) * (l * l - m * m))
            dP[l, m] = l * x * Q[l, m] - c * Q[l - 1, m]
    return P, Q, dP


def _angles(directions: np.ndarray):
    v = np.asarray(directions, dtype=float)
    rho = np.hypot(v[..., 0], v[..., 1])
    theta = np.arctan2(rho, v[..., 2])
    phi = np.arctan2(v[..., 1], v[..., 0])
    return theta, phi


def _unit_vectors(theta, phi):
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    rhat = np.stack([st * cp, st * sp, ct], axis=-1)
    that = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phat = np.stack([-sp, cp, np.zeros_like(ct)], axis=-1)
    return rhat, that, phat


@dataclass
class Harmonics:
    """Angular functions of every basis mode at a set of directions.

    ``Y`` has shape ``(J, N)``; ``A1``, ``A2`` and ``rhat`` are Cartesian with
    shape ``(J, N, 3)`` / ``(N, 3)``.  ``Y`` and ``A1``/``A2`` are indexed by
    mode, so TE and TM partners carry identical rows.
    """

    Y: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    rhat: np.ndarray

    def A(self, tau: np.ndarray) -> np.ndarray:
        """Vector harmonic ``A_{tau alpha}`` using each mode's own ``tau``."""
        return np.where((np.asarray(tau) == 1)[:, None, None], self.A1, self.A2)


def harmonics(basis: SphericalBasis, theta, phi) -> Harmonics:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta, phi = np.broadcast_arrays(theta, phi)
    theta, phi = theta.ravel(), phi.ravel()
    L = basis.l_max
    P, Q, dP = _legendre_tables(L, np.cos(theta))
    rhat, that, phat = _unit_vectors(theta, phi)
    l, m, sig = basis.l, basis.m, basis.sigma
    mphi = m[:, None] * phi[None, :]
    cos_m, sin_m = np.cos(mphi), np.sin(mphi)
    norm = np.where(m == 0, 1.0, math.sqrt(2.0))[:, None]
    even = (sig == EVEN)[:, None]
    trig = np.where(even, cos_m, sin_m)
    dtrig = np.where(even, -sin_m, cos_m) * m[:, None]
    Y = norm * P[l, m] * trig
    dY_theta = norm * dP[l, m] * trig
    dY_phi_over_s = norm * Q[l, m] * dtrig
    inv = 1.0 / np.sqrt(l * (l + 1.0))[:, None, None]
    A1 = inv * (dY_phi_over_s[..., None] * that - dY_theta[..., None] * phat)
    A2 = inv * (dY_theta[..., None] * that + dY_phi_over_s[..., None] * phat)
    return Harmonics(Y, A1, A2, rhat)


def harmonics_at(basis: SphericalBasis, directions: np.ndarray) -> Harmonics:
    theta, phi = _angles(np.atleast_2d(directions))
    return harmonics(basis, theta, phi)


def radial_functions(l: np.ndarray, x: np.ndarray, kind: int):
    """Return ``z_l(x)``, ``z_l(x)/x`` and ``(x z_l)'/x`` broadcast over l, x.

    ``kind`` 1 gives ``j_l``, 3 gives ``h_l^(1)`` and 4 gives ``h_l^(2)``.
    """
    l = np.asarray(l)
    x = np.asarray(x, dtype=float)
    if kind not in (REGULAR, INCOMING, OUTGOING):
        raise ValueError(f"unknown wave kind {kind}")
    small = x == 0.0
    if kind != REGULAR and np.any(small):
        raise ZeroDivisionError("singular wave evaluated at the origin")
    xs = np.where(small, 1.0, x)
    z = spherical_jn(l, xs)
    dz = spherical_jn(l, xs, derivative=True)
    if kind != REGULAR:
        sign = -1.0 if kind == OUTGOING else 1.0
        z = z + sign * 1j * spherical_yn(l, xs)
        dz = dz + sign * 1j * spherical_yn(l, xs, derivative=True)
    z_over_x = z / xs
    xz_prime = z_over_x + dz
    if kind == REGULAR and np.any(small):
        l_b = np.broadcast_to(l, z.shape)
        small_b = np.broadcast_to(small, z.shape)
        z = np.where(small_b, (l_b == 0).astype(float), z)
        z_over_x = np.where(small_b, np.where(l_b == 1, 1.0 / 3.0, 0.0), z_over_x)
        xz_prime = np.where(small_b, np.where(l_b == 1, 2.0 / 3.0, 0.0), xz_prime)
    return z, z_over_x, xz_prime


# ----------------------------------------------------------------------------
# wave evaluation

def waves(basis: SphericalBasis, points: np.ndarray, kind: int = REGULAR,
          origin=None, modes=None) -> np.ndarray:
    """Evaluate ``u_alpha^(kind)(k (r - origin))`` for all (or selected) modes.

    Returns an array of shape ``(J_sel, N, 3)``; real for regular waves.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if origin is not None:
        pts = pts - np.asarray(origin, dtype=float)
    r = np.linalg.norm(pts, axis=-1)
    if kind != REGULAR and np.any(r == 0.0):
        raise ZeroDivisionError("singular wave evaluated at its expansion origin")
    # any direction works at r = 0: only l = 1 TM waves survive and are constant
    dirs = np.where((r == 0.0)[:, None], np.array([0.3, 0.2, 0.9]), pts)
    theta, phi = _angles(dirs)
    h = harmonics(basis, theta, phi)
    sel = slice(None) if modes is None else np.asarray(modes)
    l = basis.l[sel]
    tau = basis.tau[sel]
    z, z_x, xz_x = radial_functions(l[:, None], (basis.k * r)[None, :], kind)
    A1, A2, Y = h.A1[sel], h.A2[sel], h.Y[sel]
    te = z[..., None] * A1
    tm = (xz_x[..., None] * A2
          + (np.sqrt(l * (l + 1.0))[:, None] * z_x * Y)[..., None] * h.rhat)
    return np.where((tau == 1)[:, None, None], te, tm)


def eval_wave(basis: SphericalBasis, alpha: int, kind: int, r) -> np.ndarray:
    """Single wave ``u_alpha^(kind)(k r)`` at one point or an array of points."""
    if not 0 <= alpha < basis.J:
        raise IndexError(f"mode {alpha} outside basis of size {basis.J}")
    pts = np.asarray(r, dtype=float)
    out = waves(basis, pts.reshape(-1, 3), kind, modes=[alpha])[0]
    return out.reshape(pts.shape)


def eval_curl_partner(basis: SphericalBasis, alpha: int, kind: int, r) -> np.ndarray:
    """``u_{alpha_bar}^(kind)``, equal to ``(1/k) curl u_alpha^(kind)``."""
    return eval_wave(basis, int(basis.bar[alpha]), kind, r)


def field(basis: SphericalBasis, points, regular=None, outgoing=None, origin=None):
    """E and H from regular/outgoing coefficient vectors (``g`` and ``h``)."""
    k = basis.k
    pts = np.atleast_2d(points)
    E = np.zeros(pts.shape, dtype=complex)
    H = np.zeros(pts.shape, dtype=complex)
    for coef, kind in ((regular, REGULAR), (outgoing, OUTGOING)):
        if coef is None:
            continue
        u = waves(basis, pts, kind, origin)
        E += k * math.sqrt(ETA0) * np.einsum("a,anc->nc", coef, u)
        H += 1j * k / math.sqrt(ETA0) * np.einsum("a,anc->nc", coef, u[basis.bar])
    return E, H


def _incidence_phase(basis: SphericalBasis) -> np.ndarray:
    """``j^-l`` for TE and ``-j^-(l+1)`` for TM modes."""
    l = basis.l
    return np.where(basis.tau == 1, (-1j) ** l, -((-1j) ** (l + 1)))


def plane_wave_coefficients(basis: SphericalBasis, E0, k_hat, tol: float = 1e-9) -> np.ndarray:
    """Regular-wave coefficients ``g`` of ``E0 exp(-j k k_hat . r)``.

    The incoming-wave vector of the scattering formalism is ``a = g / 2``.
    """
    E0 = np.asarray(E0, dtype=complex)
    k_hat = np.asarray(k_hat, dtype=float)
    if abs(np.linalg.norm(k_hat) - 1.0) > tol:
        raise ValueError("k_hat must be a unit vector")
    scale = max(np.linalg.norm(E0), 1.0)
    if abs(np.dot(E0, k_hat)) > tol * scale:
        raise ValueError("plane wave amplitude must be transverse to k_hat")
    h = harmonics_at(basis, k_hat[None, :])
    A = h.A(basis.tau)[:, 0, :]
    return 4.0 * math.pi / (basis.k * math.sqrt(ETA0)) * _incidence_phase(basis) * (A @ E0)


# ----------------------------------------------------------------------------
# far field

class FarField:
    """Radiated far field of outgoing coefficients ``h``.

    Calling the object returns ``(E_theta, E_phi)`` of ``r exp(jkr) E`` with
    shape ``(N, 2)``.
    """

    def __init__(self, basis: SphericalBasis, h):
        h = np.asarray(h, dtype=complex)
        if h.shape != (basis.J,):
            raise ValueError(f"expected {basis.J} coefficients, got shape {h.shape}")
        self.basis = basis
        self.h = h
        l = basis.l
        self._phase = np.where(basis.tau == 1, 1j ** (l + 1), 1j ** l)

    def vector(self, theta, phi) -> np.ndarray:
        hm = harmonics(self.basis, theta, phi)
        A = hm.A(self.basis.tau)
        return math.sqrt(ETA0) * np.einsum("a,anc->nc", self.h * self._phase, A)

    def __call__(self, theta, phi) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        theta, phi = np.broadcast_arrays(theta, phi)
        F = self.vector(theta.ravel(), phi.ravel())
        _, that, phat = _unit_vectors(theta.ravel(), phi.ravel())
        return np.stack([np.sum(F * that, -1), np.sum(F * phat, -1)], axis=-1)

    def intensity(self, theta, phi) -> np.ndarray:
        """Radiation intensity (W/sr) for peak-amplitude coefficients."""
        F = self(theta, phi)
        return np.sum(np.abs(F) ** 2, -1) / (2.0 * ETA0)

    def radiated_power(self) -> float:
        return 0.5 * float(np.sum(np.abs(self.h) ** 2))


def farfield_from_outgoing(basis: SphericalBasis, h) -> FarField:
    return FarField(basis, h)


def sphere_quadrature(n_theta: int, n_phi: int):
    """Gauss-Legendre x trapezoid rule on the unit sphere."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    theta = np.arccos(x)
    T, Pp = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w, np.full(n_phi, 2.0 * math.pi / n_phi))
    return T, Pp, W


# ----------------------------------------------------------------------------
# translation

@dataclass(frozen=True)
class TranslationOperator:
    """Maps outgoing coefficients at the source to incoming ones at the target.

    ``matrix = Y(k d) / 2`` where ``d`` points from the source centre to the
    target centre and ``Y`` re-expands outgoing waves as regular waves.
    """

    source_basis: SphericalBasis
    target_basis: SphericalBasis
    displacement: np.ndarray
    matrix: np.ndarray

    def __matmul__(self, h):
        return self.matrix @ h


_RING_CACHE: dict = {}
_RING_CACHE_SIZE = 6


def _frame(d_hat: np.ndarray) -> np.ndarray:
    trial = np.array([1.0, 0.0, 0.0]) if abs(d_hat[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - np.dot(trial, d_hat) * d_hat
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d_hat, e1)
    return np.stack([e1, e2, d_hat])


def _ring_products(source: SphericalBasis, target: SphericalBasis, d_hat: np.ndarray):
    """Per-ring sums of ``A_beta . A_alpha`` on a grid whose pole is ``d_hat``.

    The result is independent of ``k``, so it is cached across frequencies.
    """
    key = (source.l_max, target.l_max, tuple(np.round(d_hat, 14)))
    hit = _RING_CACHE.get(key)
    if hit is not None:
        return hit
    deg = source.l_max + target.l_max
    n_theta = deg + 1
    n_phi = 2 * deg + 2
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    T, Pp = np.meshgrid(theta, phi, indexing="ij")
    local = np.stack([np.sin(T) * np.cos(Pp), np.sin(T) * np.sin(Pp), np.cos(T)], -1)
    dirs = local.reshape(-1, 3) @ _frame(d_hat)
    hs = harmonics_at(source, dirs).A(source.tau).reshape(source.J, n_theta, n_phi * 3)
    ht = hs if target.l_max == source.l_max else \
        harmonics_at(target, dirs).A(target.tau).reshape(target.J, n_theta, n_phi * 3)
    rings = np.matmul(ht.transpose(1, 0, 2), hs.transpose(1, 2, 0)) * (2.0 * math.pi / n_phi)
    if len(_RING_CACHE) >= _RING_CACHE_SIZE:
        _RING_CACHE.pop(next(iter(_RING_CACHE)))
    _RING_CACHE[key] = (x, w, rings)
    return x, w, rings


def _selection_mask(source: SphericalBasis, target: SphericalBasis, lam: int) -> np.ndarray:
    la, lb = source.l[None, :], target.l[:, None]
    flip = (source.tau[None, :] != target.tau[:, None]).astype(int)
    return ((np.abs(la - lb) <= lam) & (lam <= la + lb)
            & ((la + lb + lam + flip) % 2 == 0))


def translation_matrix(source: SphericalBasis, target: SphericalBasis, d,
                       regular: bool = False) -> np.ndarray:
    """Full re-expansion matrix ``Y(k d)`` (outgoing -> regular).

    With ``regular=True`` the regular -> regular matrix is returned instead.
    """
    if not math.isclose(source.k, target.k, rel_tol=1e-12):
        raise ValueError("source and target bases use different wavenumbers")
    d = np.asarray(d, dtype=float)
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        raise ZeroDivisionError("translation by a zero displacement")
    k = source.k
    x, w, rings = _ring_products(source, target, d / dist)
    deg = source.l_max + target.l_max
    lam = np.arange(deg + 1)
    if regular:
        radial = spherical_jn(lam, k * dist).astype(complex)
    else:
        radial = spherical_jn(lam, k * dist) - 1j * spherical_yn(lam, k * dist)
    Y = np.zeros((target.J, source.J), dtype=complex)
    for L in lam:
        C = np.tensordot(w * eval_legendre(L, x), rings, axes=(0, 0))
        coef = (-1j) ** L * (2 * L + 1) * radial[L]
        Y += coef * np.where(_selection_mask(source, target, L), C, 0.0)
    phase_t = _incidence_phase(target)
    phase_s = _incidence_phase(source)
    return (phase_t[:, None] / phase_s[None, :]) * Y


def translation_operator(source_basis: SphericalBasis, target_basis: SphericalBasis,
                         d) -> TranslationOperator:
    """Translation from a source centred at ``c_q`` to a target at ``c_p = c_q + d``."""
    d = np.asarray(d, dtype=float)
    mat = 0.5 * translation_matrix(source_basis, target_basis, d)
    return TranslationOperator(source_basis, target_basis, d.copy(), mat)
