"""Independent Mie-series oracle for plane-wave scattering by a PEC sphere.

Uses the textbook amplitude functions S1, S2 with scipy's spherical Bessel
functions; nothing here is shared with the package under test.
"""

import numpy as np
from scipy.special import spherical_jn, spherical_yn


def _coefficients(x: float, n_max: int):
    n = np.arange(1, n_max + 1)
    j = spherical_jn(n, x)
    jp = spherical_jn(n, x, derivative=True)
    h = j - 1j * spherical_yn(n, x)
    hp = jp - 1j * spherical_yn(n, x, derivative=True)
    a = (j + x * jp) / (h + x * hp)
    b = j / h
    return n, a, b


def amplitudes(ka: float, theta, n_max: int | None = None):
    """``S1(theta), S2(theta)`` for a PEC sphere of size parameter ``ka``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if n_max is None:
        n_max = int(ka + 4 * ka ** (1 / 3) + 10)
    n, a, b = _coefficients(ka, n_max)
    mu = np.cos(theta)
    s = np.sin(theta)
    pi = np.zeros((n_max, len(theta)))
    tau = np.zeros((n_max, len(theta)))
    for i, nn in enumerate(n):
        # pi_n = P_n^1/sin, tau_n = dP_n^1/dtheta, via the standard recurrences
        if nn == 1:
            pi[i] = 1.0
        elif nn == 2:
            pi[i] = 3.0 * mu
        else:
            pi[i] = ((2 * nn - 1) * mu * pi[i - 1] - nn * pi[i - 2]) / (nn - 1)
        prev = pi[i - 1] if nn > 1 else 0.0
        tau[i] = nn * mu * pi[i] - (nn + 1) * prev
    f = ((2 * n + 1) / (n * (n + 1)))[:, None]
    S1 = np.sum(f * (a[:, None] * pi + b[:, None] * tau), axis=0)
    S2 = np.sum(f * (a[:, None] * tau + b[:, None] * pi), axis=0)
    return S1, S2


def bistatic_rcs(k: float, radius: float, theta, plane: str = "E"):
    """Bistatic RCS in m^2 for incidence along +z polarized along x.

    ``plane="E"`` is the xz-plane (phi = 0), ``plane="H"`` the yz-plane.
    """
    S1, S2 = amplitudes(k * radius, theta)
    S = S2 if plane == "E" else S1
    return 4.0 * np.pi * np.abs(S) ** 2 / k ** 2


__all__ = ["amplitudes", "bistatic_rcs"]
