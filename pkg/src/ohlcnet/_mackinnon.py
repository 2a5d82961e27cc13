"""Response-surface tables for Dickey-Fuller p-values and critical values.

Constant-only ("c") regression, one integrated variable (N = 1).

p-values: MacKinnon, J.G. (1994) "Approximate asymptotic distribution
functions for unit-root and cointegration tests", JBES 12(2), tables 3-4.
Critical values: MacKinnon, J.G. (2010) "Critical values for cointegration
tests", Queen's Economics Department Working Paper 1227, table 2.
"""

import math

from scipy.stats import norm

# stat above TAU_MAX -> p = 1, below TAU_MIN -> p = 0
TAU_MAX_C = 2.74
TAU_MIN_C = -18.83
# boundary between the small-p and large-p polynomials
TAU_STAR_C = -1.61

# p = Phi(c0 + c1*t + c2*t^2)
TAU_C_SMALLP = (2.1659, 1.4412, 3.8269e-2)
# p = Phi(c0 + c1*t + c2*t^2 + c3*t^3)
TAU_C_LARGEP = (1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2)

# cv(T) = b0 + b1/T + b2/T^2 + b3/T^3 for 1%, 5%, 10%
TAU_C_2010 = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}


def mackinnon_pvalue(stat: float) -> float:
    if stat > TAU_MAX_C:
        return 1.0
    if stat < TAU_MIN_C:
        return 0.0
    coef = TAU_C_SMALLP if stat <= TAU_STAR_C else TAU_C_LARGEP
    z = sum(c * stat**i for i, c in enumerate(coef))
    return float(norm.cdf(z))


def mackinnon_critical_values(nobs: int) -> dict[str, float]:
    if nobs <= 0 or not math.isfinite(nobs):
        raise ValueError("nobs must be positive")
    return {
        level: b0 + b1 / nobs + b2 / nobs**2 + b3 / nobs**3
        for level, (b0, b1, b2, b3) in TAU_C_2010.items()
    }
