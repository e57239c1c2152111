"""F and Student t distribution functions via the regularised incomplete beta.

Upper tails are evaluated directly from the complementary beta integral so
that very small p-values keep full relative accuracy.
"""

import math

from scipy import special

__all__ = ["f_cdf", "f_sf", "f_ppf", "t_sf", "t_ppf"]


def f_cdf(x, d1, d2):
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return float(special.betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))


def f_sf(x, d1, d2):
    if x <= 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))


def f_ppf(p, d1, d2):
    """Quantile of F(d1, d2) at probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return math.inf
    # Invert the upper tail when it is the smaller side to keep precision.
    if p > 0.5:
        v = float(special.betaincinv(d2 / 2.0, d1 / 2.0, 1.0 - p))
        return d2 * (1.0 - v) / (d1 * v)
    u = float(special.betaincinv(d1 / 2.0, d2 / 2.0, p))
    return d2 * u / (d1 * (1.0 - u))


def t_sf(t, nu):
    """Upper tail probability of Student's t with ``nu`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    half = 0.5 * float(special.betainc(nu / 2.0, 0.5, nu / (nu + t * t)))
    return half if t >= 0 else 1.0 - half


def t_ppf(p, nu):
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    q = math.sqrt(f_ppf(abs(2.0 * p - 1.0), 1, nu))
    return q if p > 0.5 else -q
