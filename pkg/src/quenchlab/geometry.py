"""Ball volumes, sphere areas and the isotropic stable normalisation."""
from __future__ import annotations

import math


def unit_ball_volume(d: int) -> float:
    """omega_d = pi^(d/2) / Gamma(d/2 + 1), exact for d = 1, 2, 3."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return 2.0
    if d == 2:
        return math.pi
    if d == 3:
        return 4.0 * math.pi / 3.0
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1} in R^d (sigma_0 = 2)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def stable_density_constant(d: int, alpha: float) -> float:
    """C_{d,alpha} such that C|y|^{-d-alpha} dy has symbol |xi|^alpha."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.gamma((d + alpha) / 2.0)
        / (math.pi ** (d / 2.0) * math.gamma(1.0 - alpha / 2.0))
    )
