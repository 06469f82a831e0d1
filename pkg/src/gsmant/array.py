"""Array S-parameters from element GSMs coupled by spherical-wave translation.

Element ``p`` sees the regular amplitudes ``a^p = sum_q G_pq h^q`` where
``h^q = b^q - a^q`` is the outgoing amplitude of element ``q`` and
``G_pq = Y(k d_pq)/2`` with ``d_pq = c_p - c_q``.  Eliminating ``a`` gives

    h = [1 - (S^ - 1) G^]^-1 T^ v,    w = Gamma^ v + R^ G^ h.

High-order translation entries grow like ``h_l(k d)`` and reach 1e15 or more
for closely packed elements, while the matching entries of ``S - 1`` are
correspondingly small.  Both routes therefore work in balanced amplitudes
``h' = h / s`` with ``s_l = 1 / |h_l(k r)|`` at each element radius ``r``,
which keeps every factor of order one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import DivergenceError, LayoutError, SolverError, ValidationError
from .gsm import CompressedGsm, Gsm
from .sphwave import OUTGOING, SphericalBasis, radial_functions, translation_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArrayElement:
    """One element: a full or compressed GSM placed with its expansion centre at ``center``."""

    gsm: Gsm | CompressedGsm
    center: np.ndarray
    radius: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValidationError("element enclosing radius must be positive")

    @cached_property
    def basis(self) -> SphericalBasis:
        g = self.gsm
        return g.basis if isinstance(g, Gsm) else SphericalBasis(g.k, g.l_max)

    @property
    def k(self) -> float:
        return self.gsm.k

    @property
    def n_ports(self) -> int:
        return self.gsm.n_ports

    @cached_property
    def blocks(self):
        """``Gamma, R, T`` and the dense ``S - 1``."""
        g = self.gsm
        M = g.n_ports
        if isinstance(g, Gsm):
            return g.Gamma, g.R, g.T, g.S - np.eye(g.basis.J)
        F = g.reconstruct()
        return F[:M, :M], F[:M, M:], F[M:, :M], F[M:, M:] - np.eye(F.shape[0] - M)

    def shifted_S(self, x: np.ndarray) -> np.ndarray:
        """``(S - 1) x`` for spherical amplitudes, using the factored form when compressed."""
        g = self.gsm
        if isinstance(g, Gsm):
            # S x - x cancels catastrophically when x carries large high-order terms
            return self.blocks[3] @ x
        M = g.n_ports
        pad = np.zeros((g.dim,) + x.shape[1:], dtype=complex)
        pad[M:] = x
        return g.shifted_matvec(pad)[M:]


@dataclass(frozen=True)
class ArrayLayout:
    elements: tuple[ArrayElement, ...]

    def __post_init__(self):
        els = tuple(self.elements)
        object.__setattr__(self, "elements", els)
        if not els:
            raise ValidationError("an array needs at least one element")
        k0 = els[0].k
        for i, e in enumerate(els):
            if not math.isclose(e.k, k0, rel_tol=1e-9):
                raise ValidationError(f"element {i} GSM is at a different frequency")
        bad = []
        for p in range(len(els)):
            for q in range(p + 1, len(els)):
                d = float(np.linalg.norm(els[p].center - els[q].center))
                if d <= els[p].radius + els[q].radius:
                    bad.append(f"({p}, {q}): |d| = {d:.6g} <= {els[p].radius + els[q].radius:.6g}")
        if bad:
            raise LayoutError("enclosing spheres overlap for element pairs " + "; ".join(bad))

    @classmethod
    def from_gsm(cls, gsm, centers, radius: float | None = None) -> "ArrayLayout":
        """Copies of one element GSM at several centres (shared, not duplicated)."""
        r = radius if radius is not None else getattr(gsm, "radius", 0.0)
        return cls(tuple(ArrayElement(gsm, c, r, name=str(i)) for i, c in enumerate(centers)))

    def moved(self, centers) -> "ArrayLayout":
        """Same element GSM objects at new centres."""
        centers = np.asarray(centers, dtype=float)
        if centers.shape != (len(self.elements), 3):
            raise ValidationError("one centre per element is required")
        return ArrayLayout(tuple(replace(e, center=c) for e, c in zip(self.elements, centers)))

    @property
    def k(self) -> float:
        return self.elements[0].k

    def __len__(self) -> int:
        return len(self.elements)


@dataclass
class BlockSystem:
    """Block-diagonal element data and the balanced coupling matrix.

    ``Gb = diag(s) G^ diag(s)``; ``G`` returns the unbalanced matrix.
    """

    layout: ArrayLayout
    Gb: np.ndarray
    scale: np.ndarray
    port_offsets: np.ndarray
    wave_offsets: np.ndarray
    _direct: tuple | None = field(default=None, repr=False)

    @property
    def n_ports(self) -> int:
        return int(self.port_offsets[-1])

    @property
    def n_waves(self) -> int:
        return int(self.wave_offsets[-1])

    @property
    def G(self) -> np.ndarray:
        return self.Gb / np.outer(self.scale, self.scale)

    def port_slice(self, p: int) -> slice:
        return slice(self.port_offsets[p], self.port_offsets[p + 1])

    def wave_slice(self, p: int) -> slice:
        return slice(self.wave_offsets[p], self.wave_offsets[p + 1])

    def G_block(self, p: int, q: int) -> np.ndarray:
        sp, sq = self.wave_slice(p), self.wave_slice(q)
        return self.Gb[sp, sq] / np.outer(self.scale[sp], self.scale[sq])

    def _blockwise(self, x: np.ndarray, which: int) -> np.ndarray:
        """Apply Gamma (0), R (1) or T (2) of every element."""
        rows = self.port_offsets if which in (0, 1) else self.wave_offsets
        cols = self.port_offsets if which in (0, 2) else self.wave_offsets
        out = np.zeros((rows[-1],) + x.shape[1:], dtype=complex)
        for p, e in enumerate(self.layout.elements):
            out[rows[p]:rows[p + 1]] = e.blocks[which] @ x[cols[p]:cols[p + 1]]
        return out

    def _col(self, x: np.ndarray) -> np.ndarray:
        return self.scale if x.ndim == 1 else self.scale[:, None]

    def apply_Gamma(self, v):
        return self._blockwise(v, 0)

    def apply_R(self, a):
        return self._blockwise(a, 1)

    def apply_T(self, v):
        return self._blockwise(v, 2)

    def apply_S_shift(self, a: np.ndarray) -> np.ndarray:
        out = np.empty_like(a, dtype=complex)
        for p, e in enumerate(self.layout.elements):
            sl = self.wave_slice(p)
            out[sl] = e.shifted_S(a[sl])
        return out

    def apply_G(self, h: np.ndarray) -> np.ndarray:
        s = self._col(h)
        return (self.Gb @ (h / s)) / s

    def balanced_step(self, x: np.ndarray) -> np.ndarray:
        """``diag(s)^-1 (S^ - 1) diag(s)^-1 Gb x``, one Neumann step in balanced amplitudes."""
        s = self._col(x)
        return self.apply_S_shift((self.Gb @ x) / s) / s

    def dense_S_shift(self) -> np.ndarray:
        return sla.block_diag(*[e.blocks[3] for e in self.layout.elements])


def _parity(basis: SphericalBasis) -> np.ndarray:
    """Sign pattern with ``Y(-d) = parity * Y(d)`` for equal source and target bases."""
    s = (-1.0) ** basis.l
    return s[:, None] * s[None, :] * np.where(basis.tau[:, None] != basis.tau[None, :], -1.0, 1.0)


def _balance(e: ArrayElement) -> np.ndarray:
    """``1 / |h_l(k r)|`` per mode of one element."""
    z, _, _ = radial_functions(e.basis.l, e.k * e.radius, OUTGOING)
    return 1.0 / np.abs(z)


def build_system(layout: ArrayLayout) -> BlockSystem:
    """Assemble ``G^`` with zero diagonal blocks; ``G_pq = Y(k (c_p - c_q)) / 2``."""
    els = layout.elements
    J = np.array([e.basis.J for e in els])
    M = np.array([e.n_ports for e in els])
    wo = np.concatenate([[0], np.cumsum(J)])
    po = np.concatenate([[0], np.cumsum(M)])
    G = np.zeros((wo[-1], wo[-1]), dtype=complex)
    scale = np.concatenate([_balance(e) for e in els])
    for p in range(len(els)):
        for q in range(p + 1, len(els)):
            bp, bq = els[p].basis, els[q].basis
            d = els[p].center - els[q].center
            Gpq = 0.5 * translation_matrix(bq, bp, d)
            G[wo[p]:wo[p + 1], wo[q]:wo[q + 1]] = Gpq
            if bp.l_max == bq.l_max:
                G[wo[q]:wo[q + 1], wo[p]:wo[p + 1]] = _parity(bp) * Gpq
            else:
                G[wo[q]:wo[q + 1], wo[p]:wo[p + 1]] = 0.5 * translation_matrix(bp, bq, -d)
    G *= np.outer(scale, scale)
    return BlockSystem(layout, G, scale, po, wo)


def compose_direct(system: BlockSystem) -> np.ndarray:
    """``Gamma = Gamma^ + R^ G^ [1 - (S^ - 1) G^]^-1 T^`` by dense LU in balanced amplitudes."""
    if system._direct is None:
        s = system.scale
        Sb = system.dense_S_shift() / np.outer(s, s)
        A = np.eye(system.n_waves, dtype=complex) - Sb @ system.Gb
        lu, piv = sla.lu_factor(A, check_finite=False)
        rcond, _ = sla.lapack.zgecon(lu, np.linalg.norm(A, 1), norm="1")
        if not rcond > np.finfo(float).eps:
            raise SolverError("array coupling matrix is singular", condition=1.0 / max(rcond, 1e-300))
        system._direct = (lu, piv)
    V = np.eye(system.n_ports, dtype=complex)
    hb = sla.lu_solve(system._direct, system.apply_T(V) / system.scale[:, None], check_finite=False)
    return system.apply_Gamma(V) + system.apply_R((system.Gb @ hb) / system.scale[:, None])


@dataclass(frozen=True)
class IterativeResult:
    w: np.ndarray
    h: np.ndarray
    iterations: int
    term_norms: np.ndarray


def compose_iterative(system: BlockSystem, v, tol: float = 1e-8, max_iter: int = 100) -> IterativeResult:
    """Neumann series ``h = sum_l h(l)``, ``h(l+1) = (S^ - 1) G^ h(l)``, ``h(0) = T^ v``.

    Stops when ``||h(l)|| / ||h(0)|| < tol``, with norms taken in balanced
    amplitudes.  ``v`` may hold several excitations as columns.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape[0] != system.n_ports:
        raise ValidationError(f"expected {system.n_ports} port amplitudes, got {v.shape[0]}")
    s = system._col(v)
    term = system.apply_T(v) / s
    h = term.copy()
    ref = np.linalg.norm(term)
    norms = [ref]
    it = 1
    if ref > 0.0:
        while True:
            if it > max_iter:
                raise DivergenceError(f"Neumann series did not reach tol={tol:g} in {max_iter} "
                                      f"iterations (last ratio {norms[-1] / ref:.3g}); use compose_direct")
            term = system.balanced_step(term)
            nrm = np.linalg.norm(term)
            norms.append(nrm)
            h += term
            it += 1
            if not np.isfinite(nrm):
                raise DivergenceError("Neumann series produced non-finite terms; use compose_direct")
            if nrm / ref < tol:
                break
    w = system.apply_Gamma(v) + system.apply_R((system.Gb @ h) / s)
    return IterativeResult(w, h * s, it, np.array(norms))


def compose_sparams_column(system: BlockSystem, element: int, mode: int = 0,
                           tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Column of the array S-matrix for port mode ``mode`` of ``element``."""
    if not 0 <= element < len(system.layout):
        raise ValidationError(f"element index {element} out of range")
    sl = system.port_slice(element)
    if not 0 <= mode < sl.stop - sl.start:
        raise ValidationError(f"element {element} has no port mode {mode}")
    v = np.zeros(system.n_ports, dtype=complex)
    v[sl.start + mode] = 1.0
    return compose_iterative(system, v, tol, max_iter).w


__all__ = ["ArrayElement", "ArrayLayout", "BlockSystem", "IterativeResult", "build_system",
           "compose_direct", "compose_iterative", "compose_sparams_column"]
