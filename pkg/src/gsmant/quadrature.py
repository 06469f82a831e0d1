"""Triangle quadrature and analytic potential integrals over flat triangles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class TriangleRule:
    """Symmetric rule on the reference triangle.

    ``bary`` holds barycentric coordinates ``(n, 3)``; ``weights`` sum to one,
    so the integral over a triangle is ``area * sum(w * f)``.
    """

    bary: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self) -> int:
        return len(self.weights)

    def points(self, corners: np.ndarray) -> np.ndarray:
        """Map to physical points; ``corners`` has shape ``(..., 3, 3)``."""
        return np.einsum("qa,...ac->...qc", self.bary, corners)


def _orbit(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Rule exact for polynomials up to ``degree``.

    Degrees 1, 2, 4 and 5 use the classical 1/3/6/7-point symmetric rules;
    anything else falls back to a collapsed Gauss-Legendre product rule.
    """
    if degree <= 1:
        pts, wts = [(1 / 3, 1 / 3, 1 / 3)], [1.0]
    elif degree == 2:
        pts, wts = _orbit(1 / 6), [1 / 3] * 3
    elif degree <= 4:
        pts = _orbit(0.445948490915965) + _orbit(0.091576213509771)
        wts = [0.223381589678011] * 3 + [0.109951743655322] * 3
    elif degree == 5:
        pts = ([(1 / 3, 1 / 3, 1 / 3)] + _orbit(0.470142064105115)
               + _orbit(0.101286507323456))
        wts = [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3
    else:
        n = (degree + 3) // 2
        x, w = np.polynomial.legendre.leggauss(n)
        x, w = 0.5 * (x + 1.0), 0.5 * w
        u, v = np.meshgrid(x, x, indexing="ij")
        wu, wv = np.meshgrid(w, w, indexing="ij")
        # Duffy map of the unit square onto the triangle
        s = u.ravel()
        t = (v * (1.0 - u)).ravel()
        wt = (2.0 * wu * wv * (1.0 - u)).ravel()
        pts = list(zip(1.0 - s - t, s, t))
        wts = list(wt)
    bary = np.array(pts, dtype=float)
    weights = np.array(wts, dtype=float)
    weights /= weights.sum()
    return TriangleRule(bary, weights, degree)


def potential_integrals(obs: np.ndarray, corners: np.ndarray, normal: np.ndarray):
    """Static potential integrals of a flat triangle at observation points.

    Parameters
    ----------
    obs : (..., 3) array
        Observation points.
    corners : (..., 3, 3) array
        Triangle vertices, broadcast against ``obs``.
    normal : (..., 3) array
        Unit normal of each triangle.

    Returns
    -------
    I0 : (...,) array
        ``int 1/R dS'``.
    I1 : (..., 3) array
        ``int (r' - rho)/R dS'`` with ``rho`` the projection of ``obs``.
    grad : (..., 3) array
        ``grad_r int 1/R dS'``.  On the triangle plane the normal jump
        term is dropped (principal value).

    Notes
    -----
    Closed-form line-integral expressions; the logarithmic factor is
    evaluated in whichever of its two algebraically equal forms avoids
    cancellation.
    """
    obs = np.asarray(obs, dtype=float)
    n = np.asarray(normal, dtype=float)
    v0 = corners[..., 0, :]
    d = np.sum((obs - v0) * n, axis=-1)
    rho = obs - d[..., None] * n
    ad = np.abs(d)
    I0 = np.zeros(np.broadcast_shapes(d.shape, corners.shape[:-2]))
    I1 = np.zeros(I0.shape + (3,))
    gsum = np.zeros(I0.shape + (3,))
    bsum = np.zeros(I0.shape)
    for i in range(3):
        pm = corners[..., i, :]
        pp = corners[..., (i + 1) % 3, :]
        edge = pp - pm
        length = np.linalg.norm(edge, axis=-1)
        lhat = edge / length[..., None]
        uhat = np.cross(lhat, n)
        t0 = np.sum((pp - rho) * uhat, axis=-1)
        sp = np.sum((pp - rho) * lhat, axis=-1)
        sm = np.sum((pm - rho) * lhat, axis=-1)
        r0sq = t0 * t0 + d * d
        Rp = np.sqrt(sp * sp + r0sq)
        Rm = np.sqrt(sm * sm + r0sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            f_pos = np.log((Rp + sp) / (Rm + sm))
            f_neg = np.log((Rm - sm) / (Rp - sp))
        f = np.where(sm + sp >= 0.0, f_pos, f_neg)
        f = np.where(np.isfinite(f), f, 0.0)
        beta = (np.arctan2(t0 * sp, r0sq + ad * Rp) - np.arctan2(t0 * sm, r0sq + ad * Rm))
        I0 += t0 * f - ad * beta
        I1 += 0.5 * (r0sq * f + sp * Rp - sm * Rm)[..., None] * uhat
        gsum -= f[..., None] * uhat
        bsum += beta
    grad = gsum - (np.sign(d) * bsum)[..., None] * n
    return I0, I1, grad
