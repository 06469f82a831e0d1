"""Physical constants (SI)."""

from math import pi

from scipy.constants import c as C0, epsilon_0 as EPS0, mu_0 as MU0

ETA0 = float((MU0 / EPS0) ** 0.5)


def wavenumber(freq_hz: float) -> float:
    return 2.0 * pi * freq_hz / C0
