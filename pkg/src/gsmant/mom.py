"""Method-of-moments operators for waveport-fed PEC antennas.

Unknowns are stacked as ``[I_e; j I_m]``: electric RWG coefficients on the
whole surface A+P followed by ``j`` times the magnetic coefficients on the
port-interior edges.  Both impedance matrices are complex symmetric.

The Green's function is ``exp(-j k R) / (4 pi R)``.  For near triangle pairs
the static ``1/R`` part is integrated analytically over the source triangle
and the smooth remainder with the regular product rule; the regular rule is
the same one used for the spherical-wave projection, so the radiating part
of the impedance matrix is reproduced exactly by the projection operator up
to basis truncation.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .constants import ETA0
from .errors import SolverError, ValidationError
from .mesh import RwgBasisSet
from .quadrature import potential_integrals, triangle_rule
from .sphwave import SphericalBasis, waves
from .waveguide import ModeSet

log = logging.getLogger(__name__)

MAGNETIC = "magnetic"
ELECTRIC = "electric"
_FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class AssemblyOptions:
    """Quadrature controls.

    ``near_factor`` marks a triangle pair as near when its centroid distance
    is below ``near_factor`` times the larger triangle diameter.  The static
    part of near pairs is integrated over the test triangle with the finer
    ``near_rule_degree`` rule; the regular remainder always uses
    ``rule_degree`` so that it matches the spherical-wave projection.
    """

    rule_degree: int = 4
    near_rule_degree: int = 14
    port_rule_degree: int = 10
    near_factor: float = 2.0
    block_size: float = 3.0e6


class Discretization:
    """Quadrature points and RWG bookkeeping shared by all operators."""

    def __init__(self, rwg: RwgBasisSet, options: AssemblyOptions):
        self.rwg = rwg
        self.options = options
        mesh = rwg.mesh
        self.rule = triangle_rule(options.rule_degree)
        self.corners = mesh.corners
        self.points = self.rule.points(mesh.corners)
        self.weights = mesh.areas[:, None] * self.rule.weights[None, :]
        self.centroids = mesh.centroids
        self.rho = self.points - self.centroids[:, None, :]
        self.near_rule = triangle_rule(options.near_rule_degree)
        self.near_points = self.near_rule.points(mesh.corners)
        self.near_weights = mesh.areas[:, None] * self.near_rule.weights[None, :]
        self.near_rho = self.near_points - self.centroids[:, None, :]
        self.coef = rwg.side_coefficients()
        # c_t - p_a for each side a (opposite vertex a)
        self.offsets = self.centroids[:, None, :] - mesh.corners
        T = mesh.n_triangles
        rows = np.flatnonzero(rwg.side_basis.ravel() >= 0)
        cols = rwg.side_basis.ravel()[rows]
        self.side_map = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(3 * T, rwg.n_basis))
        mag_pos = -np.ones(rwg.n_basis, dtype=np.int64)
        mag_pos[rwg.magnetic_index] = np.arange(rwg.n_magnetic)
        mpos = mag_pos[np.where(rwg.side_basis >= 0, rwg.side_basis, 0)]
        mpos = np.where(rwg.side_basis >= 0, mpos, -1).ravel()
        mrows = np.flatnonzero(mpos >= 0)
        self.magnetic_map = sp.csr_matrix((np.ones(len(mrows)), (mrows, mpos[mrows])),
                                          shape=(3 * T, rwg.n_magnetic))
        self.port_triangles = np.flatnonzero(mesh.region > 0)

    def chunks(self, n_rows: int, n_cols: int, per_pair: int):
        step = max(1, int(self.options.block_size // max(1, n_cols * per_pair)))
        for start in range(0, n_rows, step):
            yield np.arange(start, min(n_rows, start + step))

    def near_mask(self, tb: np.ndarray, cols: np.ndarray) -> np.ndarray:
        mesh = self.rwg.mesh
        dist = np.linalg.norm(self.centroids[tb][:, None] - self.centroids[cols][None], axis=-1)
        size = np.maximum(mesh.diameters[tb][:, None], mesh.diameters[cols][None])
        return dist < self.options.near_factor * size

    @cached_property
    def static_L(self) -> "_StaticPairs":
        """Frequency-independent ``1/R`` moments of all near pairs (sorted by test triangle)."""
        mesh = self.rwg.mesh
        T = mesh.n_triangles
        parts = []
        for tb in self.chunks(T, T, len(self.near_rule)):
            ii, ss = np.nonzero(self.near_mask(tb, np.arange(T)))
            t = tb[ii]
            obs = self.near_points[t]
            nrm = mesh.normals[ss][:, None, :]
            I0, I1, _ = potential_integrals(obs, self.corners[ss][:, None], nrm)
            d = np.sum((obs - self.corners[ss][:, None, 0]) * nrm, axis=-1)
            proj = obs - d[..., None] * nrm
            V = (I1 + (proj - self.centroids[ss][:, None]) * I0[..., None]) / _FOUR_PI
            w = self.near_weights[t]
            rt = self.near_rho[t]
            wI = w * I0 / _FOUR_PI
            parts.append((t, ss, wI.sum(axis=1), np.einsum("nq,nqc->nc", wI, rt),
                          np.einsum("nq,nqc->nc", w, V), np.einsum("nq,nqc,nqc->n", w, rt, V)))
        cols = [np.concatenate(c) for c in zip(*parts)]
        return _StaticPairs(cols[0], cols[1], *cols[2:])

    @cached_property
    def static_K(self) -> "_StaticPairs":
        """Gradient-of-``1/R`` part of near electric-test / port-source pairs."""
        mesh = self.rwg.mesh
        src = self.port_triangles
        parts = []
        for tb in self.chunks(mesh.n_triangles, max(1, len(src)), len(self.near_rule)):
            near = self.near_mask(tb, src) & (tb[:, None] != src[None, :])
            ii, ss = np.nonzero(near)
            t, s = tb[ii], src[ss]
            obs = self.near_points[t]
            _, _, grad = potential_integrals(obs, self.corners[s][:, None], mesh.normals[s][:, None, :])
            rq = obs[:, :, None, :] - self.corners[s][:, None, :, :]
            cr = np.cross(grad[:, :, None, :] / _FOUR_PI, rq) * self.coef[s][:, None, :, None]
            X = self.rwg_values(t, obs)
            parts.append((t, ss, np.einsum("nqac,nqbc,nq->nab", X, cr, self.near_weights[t])))
        cols = [np.concatenate(c) for c in zip(*parts)] if parts else [np.zeros(0, int)] * 2 + [np.zeros((0, 3, 3))]
        return _StaticPairs(cols[0], cols[1], block=cols[2])

    def rwg_values(self, tri: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Half-basis values ``coef * (r - p_a)`` with shape ``(len(tri), q, 3, 3)``."""
        return self.coef[tri][:, None, :, None] * (points[:, :, None, :] - self.corners[tri][:, None, :, :])


@dataclass(frozen=True)
class _StaticPairs:
    test: np.ndarray
    source: np.ndarray
    g0: np.ndarray | None = None
    gr: np.ndarray | None = None
    grp: np.ndarray | None = None
    grr: np.ndarray | None = None
    block: np.ndarray | None = None


@dataclass
class OperatorBlocks:
    """Frequency-specific MoM blocks on one RWG set.

    ``L`` is over all RWG functions; ``K_pv`` and ``N`` have electric rows
    and magnetic columns, so ``K_plus = K_pv + N`` and ``K_minus = K_pv - N``.
    """

    k: float
    L: np.ndarray
    K_pv: np.ndarray
    N: np.ndarray
    disc: Discretization = field(repr=False)

    @property
    def rwg(self) -> RwgBasisSet:
        return self.disc.rwg

    @property
    def K_plus(self) -> np.ndarray:
        return self.K_pv + self.N

    @property
    def K_minus(self) -> np.ndarray:
        return self.K_pv - self.N

    @property
    def L_mm(self) -> np.ndarray:
        m = self.rwg.magnetic_index
        return self.L[np.ix_(m, m)]


# ----------------------------------------------------------------------------
# kernels

def _smooth_green(k: float, R: np.ndarray, near: np.ndarray) -> np.ndarray:
    """Green's function, minus its static part where ``near``; finite at R = 0."""
    Rs = np.where(R > 0.0, R, 1.0)
    full = np.exp(-1j * k * R) / Rs
    smooth = np.where(R > 0.0, np.expm1(-1j * k * R) / Rs, -1j * k)
    return np.where(near, smooth, full) / _FOUR_PI


def _smooth_grad_factor(k: float, R: np.ndarray, near: np.ndarray) -> np.ndarray:
    """``g'(R)/R`` (static part removed where ``near``); ``grad g = (r - r') * this``."""
    Rs = np.where(R > 0.0, R, 1.0)
    x = k * R
    e = np.exp(-1j * x)
    full = -(1.0 + 1j * x) * e / Rs ** 3
    # 1 - (1 + jx) exp(-jx) = x^2/2 - j x^3/3 + O(x^4)
    num = np.where(x > 1e-3, 1.0 - (1.0 + 1j * x) * e, x * x / 2 - 1j * x ** 3 / 3 - x ** 4 / 8)
    smooth = num / Rs ** 3
    return np.where(near, smooth, full) / _FOUR_PI


def _assemble_L(disc: Discretization, k: float) -> np.ndarray:
    mesh = disc.rwg.mesh
    T = mesh.n_triangles
    q = len(disc.rule)
    P, W, rho, off, coef = disc.points, disc.weights, disc.rho, disc.offsets, disc.coef
    N = disc.rwg.n_basis
    L = np.zeros((N, N), dtype=complex)
    S = disc.side_map
    ST = S.T.tocsr()
    for tb in disc.chunks(T, T, q * q * 3):
        nb = len(tb)
        near = disc.near_mask(tb, np.arange(T))
        D = P[tb][:, :, None, None, :] - P[None, None, :, :, :]
        R = np.sqrt(np.einsum("iqtpc,iqtpc->iqtp", D, D))
        del D
        A = _smooth_green(k, R, near[:, None, :, None])
        A *= W[tb][:, :, None, None] * W[None, None, :, :]
        G0 = A.sum(axis=(1, 3))
        Gr = np.einsum("iqtp,iqc->itc", A, rho[tb])
        B = np.einsum("iqtp,tpc->iqtc", A, rho)
        Grp = B.sum(axis=1)
        Grr = np.einsum("iqtc,iqc->it", B, rho[tb])
        del A, B
        st = disc.static_L
        sel = slice(*np.searchsorted(st.test, [tb[0], tb[-1] + 1]))
        ii, ss = st.test[sel] - tb[0], st.source[sel]
        np.add.at(G0, (ii, ss), st.g0[sel])
        np.add.at(Gr, (ii, ss), st.gr[sel])
        np.add.at(Grp, (ii, ss), st.grp[sel])
        np.add.at(Grr, (ii, ss), st.grr[sel])
        ot = off[tb]
        H = (Grr[:, None, :, None]
             + np.einsum("itc,tbc->itb", Gr, off)[:, None, :, :]
             + np.einsum("iac,itc->iat", ot, Grp)[..., None]
             + (np.einsum("iac,tbc->iatb", ot, off) - 4.0 / (k * k)) * G0[:, None, :, None])
        H *= coef[tb][:, :, None, None] * coef[None, None, :, :]
        rows = (3 * tb[:, None] + np.arange(3)).ravel()
        Hm = H.reshape(nb * 3, T * 3)
        L += ST[:, rows] @ (S.T @ Hm.T).T
    return 0.5 * (L + L.T)


def _assemble_K(disc: Discretization, k: float) -> np.ndarray:
    """Principal-value ``<psi_i, curl L psi_j>`` for all i and magnetic j."""
    mesh = disc.rwg.mesh
    T = mesh.n_triangles
    src = disc.port_triangles
    Ns, Nm = disc.rwg.n_basis, disc.rwg.n_magnetic
    K = np.zeros((Ns, Nm), dtype=complex)
    if Nm == 0:
        return K
    q = len(disc.rule)
    P, W = disc.points, disc.weights
    Y = disc.rwg_values(src, P[src])
    Msrc = disc.magnetic_map[(3 * src[:, None] + np.arange(3)).ravel()]
    S = disc.side_map
    for tb in disc.chunks(T, len(src), q * q * 27):
        nb = len(tb)
        near = disc.near_mask(tb, src)
        same = tb[:, None] == src[None, :]
        D = P[tb][:, :, None, None, :] - P[src][None, None, :, :, :]
        R = np.sqrt(np.einsum("iqtpc,iqtpc->iqtp", D, D))
        A = _smooth_grad_factor(k, R, near[:, None, :, None])
        A *= W[tb][:, :, None, None] * W[src][None, None, :, :]
        A *= ~same[:, None, :, None]
        # X_a . (D x Y_b)
        C = np.cross(D[:, :, :, :, None, :], Y[None, None])
        M = np.einsum("iqtp,iqtpbc->iqtbc", A, C)
        del C, D
        X = disc.rwg_values(tb, P[tb])
        H = np.einsum("iqac,iqtbc->iatb", X, M)
        st = disc.static_K
        sel = slice(*np.searchsorted(st.test, [tb[0], tb[-1] + 1]))
        np.add.at(H, (st.test[sel] - tb[0], slice(None), st.source[sel], slice(None)), st.block[sel])
        rows = (3 * tb[:, None] + np.arange(3)).ravel()
        Hm = H.reshape(nb * 3, len(src) * 3)
        K += S[rows].T @ (Msrc.T @ Hm.T).T
    return K


def _assemble_residue(disc: Discretization) -> np.ndarray:
    """``N_ij = 1/2 <psi_i, n x psi_j>`` over port triangles."""
    mesh = disc.rwg.mesh
    src = disc.port_triangles
    N = np.zeros((disc.rwg.n_basis, disc.rwg.n_magnetic))
    if len(src) == 0:
        return N
    rule = triangle_rule(2)
    pts = rule.points(mesh.corners[src])
    w = mesh.areas[src][:, None] * rule.weights[None]
    V = disc.rwg_values(src, pts)
    nV = np.cross(mesh.normals[src][:, None, None, :], V)
    H = 0.5 * np.einsum("tq,tqac,tqbc->tab", w, V, nV)
    rows = (3 * src[:, None] + np.arange(3)).ravel()
    Hb = sp.block_diag([h for h in H], format="csr")
    return (disc.side_map[rows].T @ (Hb @ disc.magnetic_map[rows])).toarray()


def assemble_operators(rwg: RwgBasisSet, k: float, options: AssemblyOptions | None = None,
                       disc: Discretization | None = None) -> OperatorBlocks:
    """Assemble ``L``, principal-value ``K`` and the residue block at wavenumber ``k``."""
    if not k > 0:
        raise ValidationError("k must be positive")
    if disc is None:
        disc = Discretization(rwg, options or AssemblyOptions())
    L = _assemble_L(disc, k)
    K = _assemble_K(disc, k)
    N = _assemble_residue(disc)
    return OperatorBlocks(float(k), L, K, N, disc)


# ----------------------------------------------------------------------------
# projections

@dataclass(frozen=True)
class PortModes:
    """Modes of every port, in port order, with per-mode bookkeeping."""

    ports: dict[int, ModeSet]

    @cached_property
    def mode_port(self) -> np.ndarray:
        return np.concatenate([np.full(len(ms), p) for p, ms in sorted(self.ports.items())]
                              ).astype(int) if self.ports else np.zeros(0, dtype=int)

    @cached_property
    def eta(self) -> np.ndarray:
        if not self.ports:
            return np.zeros(0, dtype=complex)
        return np.concatenate([ms.eta for _, ms in sorted(self.ports.items())])

    @cached_property
    def propagating(self) -> np.ndarray:
        if not self.ports:
            return np.zeros(0, dtype=bool)
        return np.concatenate([ms.propagating for _, ms in sorted(self.ports.items())])

    @cached_property
    def labels(self) -> list[str]:
        return [f"P{p}:{lab}" for p, ms in sorted(self.ports.items()) for lab in ms.labels]

    def __len__(self) -> int:
        return len(self.mode_port)


@dataclass
class ProjectionOperators:
    """``P`` (J x n), ``Q_M`` and ``Q_E`` (M x n) over the unknowns ``[I_e; j I_m]``."""

    P: np.ndarray
    Q_M: np.ndarray
    Q_E: np.ndarray
    modes: PortModes
    basis: SphericalBasis | None
    origin: np.ndarray
    n_e: int
    n_m: int

    @property
    def propagating(self) -> np.ndarray:
        return self.modes.propagating

    def stacked(self, formulation: str, propagating_only: bool = True) -> np.ndarray:
        Q = self.Q_M if formulation == MAGNETIC else self.Q_E
        if propagating_only:
            Q = Q[self.propagating]
        return np.vstack([Q, self.P])


def _port_mode_fields(disc: Discretization, modes: PortModes):
    """Mode fields at port quadrature points, orthonormalized on the meshed port.

    Returns ``(tri, points, weights, e)`` with ``e`` of shape ``(M, n, q, 3)``
    over the port triangles ``tri`` (per-mode zeros off its own port).
    """
    mesh = disc.rwg.mesh
    rule = triangle_rule(disc.options.port_rule_degree)
    tri = disc.port_triangles
    pts = rule.points(mesh.corners[tri])
    w = mesh.areas[tri][:, None] * rule.weights[None]
    e = np.zeros((len(modes), len(tri), len(rule), 3))
    row = 0
    for p, ms in sorted(modes.ports.items()):
        sel = mesh.region[tri] == p
        spec = ms.spec
        n_mesh = mesh.port_normal(p)
        if np.dot(n_mesh, spec.frame[2]) < 1.0 - 1e-6:
            raise ValidationError(f"port {p}: mesh normal {n_mesh.round(6).tolist()} does not match "
                                  f"the waveguide normal {spec.frame[2].round(6).tolist()}")
        local = spec.to_local(pts[sel])
        # polygonal port meshes may poke slightly outside the exact cross-section
        if not np.all(spec.contains(local, 0.25)):
            raise ValidationError(f"port {p}: mesh lies outside the {spec.kind} cross-section")
        block = np.array([m.field_local(local) @ spec.frame[:2] for m in ms])
        G = np.einsum("mtqc,ntqc,tq->mn", block, block, w[sel])
        C = np.linalg.cholesky(G)
        block = np.linalg.solve(C, block.reshape(len(ms), -1)).reshape(block.shape)
        e[row:row + len(ms)][:, sel] = block
        row += len(ms)
    return tri, pts, w, e


def build_projections(blocks: OperatorBlocks, modes: PortModes | dict | None,
                      basis: SphericalBasis | None, origin=(0.0, 0.0, 0.0)) -> ProjectionOperators:
    """Projection operators ``P``, ``Q_M`` and ``Q_E``."""
    disc = blocks.disc
    rwg = disc.rwg
    k = blocks.k
    if modes is None:
        modes = PortModes({})
    elif isinstance(modes, dict):
        modes = PortModes(modes)
    for p, ms in modes.ports.items():
        if p not in rwg.mesh.port_ids:
            raise ValidationError(f"port {p} has modes but no tagged triangles in the mesh")
        if not math.isclose(ms.k, k, rel_tol=1e-12):
            raise ValidationError(f"port {p} modes were enumerated at a different wavenumber")
    missing = set(rwg.mesh.port_ids) - set(modes.ports)
    if missing:
        raise ValidationError(f"mesh ports {sorted(missing)} have no waveguide specification")
    n_e, n_m = rwg.n_basis, rwg.n_magnetic
    n = n_e + n_m
    origin = np.asarray(origin, dtype=float)
    M = len(modes)
    Q_M = np.zeros((M, n), dtype=complex)
    Q_E = np.zeros((M, n), dtype=complex)
    if M:
        tri, pts, w, e = _port_mode_fields(disc, modes)
        rows = (3 * tri[:, None] + np.arange(3)).ravel()
        V = disc.rwg_values(tri, pts)
        ne = np.cross(rwg.mesh.normals[tri][None, :, None, :], e)
        he = np.einsum("mtqc,tqac,tq->mta", e, V, w)
        hn = np.einsum("mtqc,tqac,tq->mta", ne, V, w)
        E_proj = (disc.side_map[rows].T @ he.reshape(M, -1).T).T
        N_proj = (disc.magnetic_map[rows].T @ hn.reshape(M, -1).T).T
        sq = np.sqrt(modes.eta.astype(complex))
        Q_M[:, n_e:] = -1j / sq[:, None] * N_proj
        Q_E[:, :n_e] = -sq[:, None] * E_proj
    if basis is None:
        P = np.zeros((0, n), dtype=complex)
    else:
        if not math.isclose(basis.k, k, rel_tol=1e-12):
            raise ValidationError("spherical basis uses a different wavenumber")
        P = _spherical_projection(disc, basis, origin)
    return ProjectionOperators(P, Q_M, Q_E, modes, basis, origin, n_e, n_m)


def _spherical_projection(disc: Discretization, basis: SphericalBasis, origin: np.ndarray) -> np.ndarray:
    rwg = disc.rwg
    T = rwg.mesh.n_triangles
    k = basis.k
    J = basis.J
    H = np.zeros((J, T, 3))
    q = len(disc.rule)
    for tb in disc.chunks(T, J, q * 3):
        pts = disc.points[tb]
        U = waves(basis, pts.reshape(-1, 3), origin=origin).reshape(J, len(tb), q, 3)
        V = disc.rwg_values(tb, pts)
        H[:, tb] = np.einsum("jtqc,tqac,tq->jta", U, V, disc.weights[tb])
    Hb = H.reshape(J, 3 * T)
    proj = (disc.side_map.T @ Hb.T).T
    Pe = k * math.sqrt(ETA0) * proj
    Pm = k / math.sqrt(ETA0) * proj[basis.bar][:, rwg.magnetic_index]
    return np.hstack([Pe, -Pm]).astype(complex)


# ----------------------------------------------------------------------------
# systems

@dataclass
class ImpedanceSystem:
    """Impedance matrix of one formulation with a cached LU factorization."""

    formulation: str
    Z: np.ndarray
    projections: ProjectionOperators
    k: float
    _lu: tuple | None = field(default=None, repr=False)

    @property
    def Q(self) -> np.ndarray:
        return self.projections.Q_M if self.formulation == MAGNETIC else self.projections.Q_E

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    def factorize(self) -> tuple:
        """LU of the symmetrically equilibrated matrix ``D Z D``.

        ``D = |diag Z|^(-1/2)`` removes the ``eta0^2`` scale gap between the
        electric and magnetic blocks before pivoting.
        """
        if self._lu is None:
            if not np.all(np.isfinite(self.Z)):
                raise SolverError("impedance matrix contains non-finite entries")
            d = np.abs(np.diag(self.Z))
            if not np.all(d > 0.0):
                raise SolverError("impedance matrix has a zero diagonal entry")
            scale = 1.0 / np.sqrt(d)
            Zs = scale[:, None] * self.Z * scale[None, :]
            with warnings.catch_warnings():
                # exact singularity is reported below through rcond
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(Zs, check_finite=False)
            rcond, info = sla.lapack.zgecon(lu, np.linalg.norm(Zs, 1), norm="1")
            if info != 0 or not rcond > np.finfo(float).eps:
                raise SolverError("impedance matrix is singular to working precision",
                                  condition=1.0 / rcond if rcond > 0 else math.inf)
            self.rcond = float(rcond)
            self._lu = (lu, piv, scale)
        return self._lu

    @property
    def condition_estimate(self) -> float:
        """1-norm condition estimate of the equilibrated matrix."""
        self.factorize()
        return 1.0 / self.rcond

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex)
        if rhs.shape[0] != self.n:
            raise ValidationError(f"right-hand side has {rhs.shape[0]} rows, system has {self.n}")
        lu, piv, scale = self.factorize()
        b = rhs * (scale[:, None] if rhs.ndim == 2 else scale)
        y = sla.lu_solve((lu, piv), b, check_finite=False)
        return y * (scale[:, None] if rhs.ndim == 2 else scale)

    def excitation(self, v=None, a=None) -> np.ndarray:
        """``V = 2 P^t a + 2 Q^t v`` for port coefficients ``v`` and incoming ``a``."""
        if v is None and a is None:
            raise ValidationError("an excitation needs port coefficients v or incoming waves a")
        rhs = np.zeros(self.n, dtype=complex)
        if v is not None:
            v = np.asarray(v, dtype=complex)
            Q = self.Q
            if v.shape[0] == self.projections.propagating.sum() and v.shape[0] != Q.shape[0]:
                Q = Q[self.projections.propagating]
            if v.shape[0] != Q.shape[0]:
                raise ValidationError(f"expected {Q.shape[0]} port coefficients, got {v.shape[0]}")
            rhs += 2.0 * Q.T @ v
        if a is not None:
            a = np.asarray(a, dtype=complex)
            if a.shape[0] != self.projections.P.shape[0]:
                raise ValidationError(f"expected {self.projections.P.shape[0]} spherical coefficients")
            rhs += 2.0 * self.projections.P.T @ a
        return rhs


def excitations(system: ImpedanceSystem, v=None, a=None) -> np.ndarray:
    return system.excitation(v, a)


def solve(system: ImpedanceSystem, rhs: np.ndarray) -> np.ndarray:
    return system.solve(rhs)


def assemble_system(blocks: OperatorBlocks, projections: ProjectionOperators,
                    formulation: str = MAGNETIC) -> ImpedanceSystem:
    """Block impedance matrix of the magnetic or electric formulation."""
    if formulation not in (MAGNETIC, ELECTRIC):
        raise ValidationError(f"unknown formulation {formulation!r}")
    k = blocks.k
    n_e, n_m = blocks.rwg.n_basis, blocks.rwg.n_magnetic
    if (projections.n_e, projections.n_m) != (n_e, n_m):
        raise ValidationError("projection operators were built for a different RWG set")
    Z = np.empty((n_e + n_m, n_e + n_m), dtype=complex)
    Z[:n_e, :n_e] = 1j * k * ETA0 * blocks.L
    Z[n_e:, n_e:] = 1j * k / ETA0 * blocks.L_mm
    if formulation == MAGNETIC:
        Kem = blocks.K_plus
        Qm = projections.Q_M[:, n_e:]
        Z[n_e:, n_e:] += -Qm.T @ Qm
    else:
        Kem = blocks.K_minus
        Qe = projections.Q_E[:, :n_e]
        Z[:n_e, :n_e] += Qe.T @ Qe
    Z[:n_e, n_e:] = -1j * Kem
    Z[n_e:, :n_e] = -1j * Kem.T
    return ImpedanceSystem(formulation, Z, projections, k)


def direct_incident_rhs(blocks: OperatorBlocks, E0, k_hat) -> np.ndarray:
    """``[<psi, E_inc>; j <psi, H_inc>]`` of a plane wave by direct quadrature."""
    disc = blocks.disc
    rwg = disc.rwg
    k = blocks.k
    E0 = np.asarray(E0, dtype=complex)
    k_hat = np.asarray(k_hat, dtype=float)
    H0 = np.cross(k_hat, E0) / ETA0
    phase = np.exp(-1j * k * disc.points @ k_hat)
    V = disc.rwg_values(np.arange(rwg.mesh.n_triangles), disc.points)
    he = np.einsum("tq,tqac,c->ta", disc.weights * phase, V, E0)
    hh = np.einsum("tq,tqac,c->ta", disc.weights * phase, V, H0)
    ve = disc.side_map.T @ he.ravel()
    vm = disc.magnetic_map.T @ hh.ravel()
    return np.concatenate([ve, 1j * vm])
