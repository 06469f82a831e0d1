"""Generalized scattering matrices: assembly, observables and compression.

The stacked matrix ``S~ = [[Gamma, R], [T, S]]`` maps incoming port-mode and
regular spherical-wave amplitudes ``(v, a)`` to outgoing ones ``(w, b)``.
Only propagating port modes are kept.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ValidationError
from .mom import ELECTRIC, MAGNETIC, ImpedanceSystem
from .sphwave import FarField, SphericalBasis, plane_wave_coefficients

log = logging.getLogger(__name__)

DEFAULT_IOTA = 1.53e-5
EIGEN = "eigen"
SINGULAR = "singular"
LOSSY_DEFECT = 1e-3


@dataclass(frozen=True)
class Gsm:
    """GSM of one antenna at one frequency.

    ``center`` is the expansion origin and ``radius`` the enclosing radius
    used when the element is placed in an array.
    """

    frequency: float
    k: float
    port_labels: tuple[str, ...]
    basis: SphericalBasis
    Gamma: np.ndarray
    R: np.ndarray
    T: np.ndarray
    S: np.ndarray
    formulation: str = MAGNETIC
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = 0.0

    def __post_init__(self):
        M, J = len(self.port_labels), self.basis.J
        shapes = {"Gamma": (M, M), "R": (M, J), "T": (J, M), "S": (J, J)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(f"GSM block {name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n_ports(self) -> int:
        return len(self.port_labels)

    @property
    def dim(self) -> int:
        return self.n_ports + self.basis.J

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.Gamma, self.R], [self.T, self.S]])

    @classmethod
    def from_full(cls, St: np.ndarray, **kw) -> "Gsm":
        M = len(kw["port_labels"])
        return cls(Gamma=St[:M, :M], R=St[:M, M:], T=St[M:, :M], S=St[M:, M:], **kw)


def gsm_from_system(system: ImpedanceSystem, frequency: float | None = None,
                    radius: float = 0.0) -> Gsm:
    """GSM of a factorized impedance system.

    Magnetic route: ``S~ = -2 P~ Z^-1 P~^t + diag(-1, 1)``; electric route:
    ``S~ = 1 - 2 P~ Z^-1 P~^t``.  Evanescent port rows are dropped.
    """
    pr = system.projections
    if pr.basis is None:
        raise ValidationError("a GSM needs a spherical basis")
    Pt = pr.stacked(system.formulation, propagating_only=True)
    M = Pt.shape[0] - pr.basis.J
    X = system.solve(Pt.T)
    St = -2.0 * Pt @ X
    diag = np.ones(Pt.shape[0])
    if system.formulation == MAGNETIC:
        diag[:M] = -1.0
    St[np.diag_indices_from(St)] += diag
    if not np.all(np.isfinite(St)):
        raise NumericalError("GSM contains non-finite entries")
    labels = tuple(lab for lab, p in zip(pr.modes.labels, pr.propagating) if p)
    if frequency is None:
        frequency = system.k * 299792458.0 / (2.0 * math.pi)
    return Gsm.from_full(St, frequency=float(frequency), k=system.k, port_labels=labels,
                         basis=pr.basis, formulation=system.formulation,
                         center=np.asarray(pr.origin, dtype=float).copy(), radius=float(radius))


def port_sparams(system: ImpedanceSystem) -> np.ndarray:
    """Port-to-port block of ``S~`` without the spherical rows.

    Needs no spherical basis; used for full-structure reference solves.
    """
    pr = system.projections
    Q = (pr.Q_M if system.formulation == MAGNETIC else pr.Q_E)[pr.propagating]
    Gamma = -2.0 * Q @ system.solve(Q.T)
    Gamma[np.diag_indices_from(Gamma)] += -1.0 if system.formulation == MAGNETIC else 1.0
    return Gamma


def sparams(gsm: Gsm) -> np.ndarray:
    """Port S-parameters among the propagating modes (the ``Gamma`` block)."""
    return gsm.Gamma


@dataclass(frozen=True)
class InvariantReport:
    unitarity: float
    reciprocity: float
    passivity_margin: float
    circle_defect: float

    def passed(self, unitarity_tol: float = 1e-2, reciprocity_tol: float = 1e-12,
               passivity_tol: float = 1e-6, circle_tol: float = 1e-6) -> dict[str, bool]:
        return {"unitarity": self.unitarity < unitarity_tol,
                "reciprocity": self.reciprocity < reciprocity_tol,
                "passivity": self.passivity_margin > -passivity_tol,
                "circle": self.circle_defect < circle_tol}


def unitarity_defect(St: np.ndarray) -> float:
    """``||S^H S - 1||_F / sqrt(dim)``."""
    n = St.shape[0]
    return float(np.linalg.norm(St.conj().T @ St - np.eye(n)) / math.sqrt(n))


def reciprocity_defect(gsm: Gsm) -> float:
    """Largest of the R/T, Gamma and S asymmetries, relative to ``max|T|`` (or ``max|S|``)."""
    scale = np.abs(gsm.T).max() if gsm.T.size else np.abs(gsm.S).max()
    scale = scale or 1.0
    d = max(np.abs(gsm.R - gsm.T.T).max(initial=0.0), np.abs(gsm.Gamma - gsm.Gamma.T).max(initial=0.0),
            np.abs(gsm.S - gsm.S.T).max(initial=0.0))
    return float(d / scale)


def check_invariants(gsm: Gsm) -> InvariantReport:
    St = gsm.full
    t = np.linalg.eigvals((St - np.eye(gsm.dim)) / 2.0)
    sv = np.linalg.svd(gsm.Gamma, compute_uv=False) if gsm.n_ports else np.zeros(1)
    return InvariantReport(unitarity_defect(St), reciprocity_defect(gsm), float(1.0 - sv.max()),
                           float(np.max(np.abs(np.abs(t + 0.5) - 0.5))))


# ----------------------------------------------------------------------------
# observables

def _accepted_power(gsm: Gsm, v: np.ndarray) -> float:
    w = gsm.Gamma @ v
    return 0.5 * float(np.sum(np.abs(v) ** 2) - np.sum(np.abs(w) ** 2))


def gain_pattern(gsm: Gsm, v, theta, phi, realized: bool = False) -> np.ndarray:
    """Gain (linear) for port excitation ``v``; ``b = T v``.

    Normalized to the accepted power, or to the incident power ``|v|^2/2``
    when ``realized``.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != (gsm.n_ports,):
        raise ValidationError(f"expected {gsm.n_ports} port amplitudes")
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    power = 0.5 * float(np.sum(np.abs(v) ** 2)) if realized else _accepted_power(gsm, v)
    if power <= 0.0:
        return np.zeros(theta.shape)
    ff = FarField(gsm.basis, gsm.T @ v)
    return 4.0 * math.pi * ff.intensity(theta.ravel(), phi.ravel()).reshape(theta.shape) / power


def farfield(gsm: Gsm, v) -> FarField:
    return FarField(gsm.basis, gsm.T @ np.asarray(v, dtype=complex))


def rcs_bistatic(gsm: Gsm, k_hat_inc, polarization, theta, phi) -> np.ndarray:
    """Bistatic RCS (m^2) for a plane wave ``polarization * exp(-j k k_hat.r)``.

    The scattered outgoing amplitudes are ``h = (S - 1) a``.
    """
    E0 = np.asarray(polarization, dtype=complex)
    amp = float(np.linalg.norm(E0))
    if amp == 0.0:
        raise ValidationError("polarization vector must be nonzero")
    a = plane_wave_coefficients(gsm.basis, E0, k_hat_inc) / 2.0
    h = gsm.S @ a - a
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    F = FarField(gsm.basis, h)(theta.ravel(), phi.ravel())
    return (4.0 * math.pi * np.sum(np.abs(F) ** 2, axis=1) / amp ** 2).reshape(theta.shape)


# ----------------------------------------------------------------------------
# compression

@dataclass(frozen=True)
class CompressedGsm:
    """Low-rank form ``S~' = 1 + 2 F diag(values) G^H``.

    For the eigen kind ``G = F``; for the singular kind ``F`` and ``G`` are
    the left and right singular vectors and ``values`` are real.
    """

    kind: str
    values: np.ndarray
    vectors: np.ndarray
    right: np.ndarray | None
    iota: float
    n_ports: int
    frequency: float = 0.0
    k: float = 0.0
    port_labels: tuple[str, ...] = ()
    l_max: int = 0
    all_values: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def G(self) -> np.ndarray:
        return self.vectors if self.right is None else self.right

    def shifted_matvec(self, x: np.ndarray) -> np.ndarray:
        """``(S~' - 1) x`` as two thin products."""
        y = self.G.conj().T @ x
        return 2.0 * self.vectors @ (self.values[:, None] * y if y.ndim == 2 else self.values * y)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return x + self.shifted_matvec(x)

    def reconstruct(self) -> np.ndarray:
        return np.eye(self.dim) + 2.0 * (self.vectors * self.values) @ self.G.conj().T

    @property
    def memory_saving(self) -> float:
        d = self.dim
        stored = self.N * (d + 1) if self.kind == EIGEN else self.N * (2 * d + 1)
        return 1.0 - stored / d ** 2


def _sort_spectrum(values: np.ndarray) -> np.ndarray:
    # descending modulus, ties by phase angle for deterministic output
    mod = np.round(np.abs(values), 14)
    return np.lexsort((np.angle(values), -mod))


def retained_count(moduli: np.ndarray, iota: float) -> int:
    """Modes with ``|t_n| > iota |t_1|``; the leading mode is always kept."""
    if len(moduli) == 0:
        return 0
    return max(1, int(np.count_nonzero(moduli > iota * moduli[0])))


def compress(gsm: Gsm | np.ndarray, iota: float = DEFAULT_IOTA, kind: str = EIGEN) -> CompressedGsm:
    """Truncated spectral form of ``T~ = (S~ - 1)/2``.

    The eigen kind uses a complex Schur decomposition, which is a unitary
    diagonalization when ``T~`` is normal.  A unitarity defect above 1e-3
    (lossy structure) switches to the SVD.
    """
    if not 0.0 < iota <= 1.0:
        raise ValidationError("iota must lie in (0, 1]")
    if kind not in (EIGEN, SINGULAR):
        raise ValidationError(f"unknown compression kind {kind!r}")
    St = gsm.full if isinstance(gsm, Gsm) else np.asarray(gsm, dtype=complex)
    n = St.shape[0]
    Tt = (St - np.eye(n)) / 2.0
    if kind == EIGEN:
        defect = unitarity_defect(St)
        if defect > LOSSY_DEFECT:
            log.warning("unitarity defect %.2e exceeds %.0e; using SVD compression", defect, LOSSY_DEFECT)
            kind = SINGULAR
    meta = {}
    if isinstance(gsm, Gsm):
        meta = dict(n_ports=gsm.n_ports, frequency=gsm.frequency, k=gsm.k,
                    port_labels=gsm.port_labels, l_max=gsm.basis.l_max)
    else:
        meta = dict(n_ports=0)
    if kind == EIGEN:
        try:
            U, Z = sla.schur(Tt, output="complex")
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.warning("Schur decomposition failed (%s); using SVD compression", exc)
            return compress(St, iota, SINGULAR) if not isinstance(gsm, Gsm) else compress(gsm, iota, SINGULAR)
        t = np.diag(U)
        order = _sort_spectrum(t)
        t, Z = t[order], Z[:, order]
        N = retained_count(np.abs(t), iota)
        return CompressedGsm(EIGEN, t[:N].copy(), Z[:, :N].copy(), None, float(iota),
                             all_values=t, **meta)
    Uu, s, Vh = np.linalg.svd(Tt)
    N = retained_count(s, iota)
    return CompressedGsm(SINGULAR, s[:N].astype(complex), Uu[:, :N].copy(), Vh[:N].conj().T.copy(),
                         float(iota), all_values=s.astype(complex), **meta)


def reconstruction_error(gsm: Gsm | np.ndarray, compressed: CompressedGsm, trials: int = 100,
                         seed: int = 0) -> float:
    """Mean of ``||S~ f - S~' f|| / ||S~ f||`` over random complex vectors ``f``."""
    St = gsm.full if isinstance(gsm, Gsm) else np.asarray(gsm)
    if St.shape[0] != compressed.dim:
        raise ValidationError("compressed GSM does not match the full GSM dimensions")
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((St.shape[0], trials)) + 1j * rng.standard_normal((St.shape[0], trials))
    ref = St @ f
    approx = compressed.matvec(f)
    return float(np.mean(np.linalg.norm(ref - approx, axis=0) / np.linalg.norm(ref, axis=0)))


# ----------------------------------------------------------------------------
# characteristic modes

@dataclass(frozen=True)
class CharacteristicSpectrum:
    eigenvalues: np.ndarray
    currents: np.ndarray
    null_dim: int


@dataclass(frozen=True)
class CharacteristicReport:
    spectrum: CharacteristicSpectrum
    t_gsm: np.ndarray
    t_cm: np.ndarray
    mismatch: np.ndarray
    circle_defect: float

    @property
    def max_mismatch(self) -> float:
        return float(self.mismatch.max(initial=0.0))


def characteristic_modes(system: ImpedanceSystem, rank_tol: float = 1e-10) -> CharacteristicSpectrum:
    """Solve ``X I = lambda R I`` with ``Z = R + jX``.

    The null space of ``R`` is eliminated by static condensation, leaving a
    definite symmetric pencil on the range of ``R``.
    """
    R = 0.5 * (system.Z.real + system.Z.real.T)
    X = 0.5 * (system.Z.imag + system.Z.imag.T)
    w, V = np.linalg.eigh(R)
    keep = w > rank_tol * w.max()
    Vr, Vn, wr = V[:, keep], V[:, ~keep], w[keep]
    Xrr = Vr.T @ X @ Vr
    if Vn.shape[1]:
        Xnr = Vn.T @ X @ Vr
        Xnn = Vn.T @ X @ Vn
        C = np.linalg.solve(Xnn, Xnr)
        Xeff = Xrr - Xnr.T @ C
    else:
        C = np.zeros((0, Vr.shape[1]))
        Xeff = Xrr
    s = 1.0 / np.sqrt(wr)
    lam, Y = np.linalg.eigh(s[:, None] * Xeff * s[None, :])
    Yr = s[:, None] * Y
    currents = Vr @ Yr - Vn @ (C @ Yr)
    order = np.argsort(np.abs(lam))
    return CharacteristicSpectrum(lam[order], currents[:, order], int(Vn.shape[1]))


def characteristic_check(system: ImpedanceSystem, gsm: Gsm | None = None, n_top: int = 10,
                         rank_tol: float = 1e-10) -> CharacteristicReport:
    """Compare the eigenvalues of ``T~`` with ``-1/(1 + j lambda_n)``.

    Pairs are formed greedily in order of descending ``|t_n|``; the mismatch
    is ``|t_gsm - t_cm| / |t_gsm|``.
    """
    if system.formulation != ELECTRIC:
        raise ValidationError("the characteristic-mode link uses the electric formulation")
    if gsm is None:
        gsm = gsm_from_system(system)
    spec = characteristic_modes(system, rank_tol)
    t = np.linalg.eigvals((gsm.full - np.eye(gsm.dim)) / 2.0)
    t = t[_sort_spectrum(t)]
    t_cm = -1.0 / (1.0 + 1j * spec.eigenvalues)
    t_cm = t_cm[_sort_spectrum(t_cm)]
    n = min(n_top, len(t), len(t_cm))
    pool = list(range(min(len(t_cm), 3 * n_top)))
    matched = np.zeros(n, dtype=complex)
    for i in range(n):
        j = min(pool, key=lambda c: abs(t_cm[c] - t[i]))
        pool.remove(j)
        matched[i] = t_cm[j]
    mismatch = np.abs(t[:n] - matched) / np.abs(t[:n])
    circle = float(np.max(np.abs(np.abs(t + 0.5) - 0.5)))
    return CharacteristicReport(spec, t[:n], matched, mismatch, circle)


__all__ = ["Gsm", "CompressedGsm", "CharacteristicSpectrum", "CharacteristicReport",
           "InvariantReport", "DEFAULT_IOTA", "gsm_from_system", "port_sparams", "sparams", "gain_pattern",
           "farfield", "rcs_bistatic", "compress", "reconstruction_error", "retained_count",
           "characteristic_modes", "characteristic_check", "check_invariants",
           "unitarity_defect", "reciprocity_defect"]
