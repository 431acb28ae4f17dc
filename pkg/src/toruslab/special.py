"""Scalar special functions used by the zeta machinery.

Double precision throughout; tolerances are relative.  The Dedekind eta
function and the upper incomplete gamma (which must accept complex
order) are implemented here; the complete Gamma function is delegated
to scipy's complex-capable implementation behind a pole guard.
"""

from dataclasses import dataclass
import cmath
import math

import numpy as np
import scipy.special as sps

from .errors import GammaPoleError, InvalidInputError, NonConvergenceError


@dataclass(frozen=True)
class EtaValue:
    """Value of the Dedekind eta function with truncation bookkeeping."""

    value: complex
    tau: complex
    terms_used: int


def dedekind_eta(tau, tol=1e-16):
    """eta(tau) = e^{pi i tau/12} prod_{k>=1} (1 - e^{2 pi i k tau}).

    The product is truncated once the next factor differs from 1 by
    less than tol; |q|^k decay makes the dropped tail smaller still.
    """
    tau = complex(tau)
    if tau.imag <= 0:
        raise InvalidInputError(f"dedekind_eta requires Im tau > 0, got {tau}")
    q = cmath.exp(2j * cmath.pi * tau)
    value = cmath.exp(1j * cmath.pi * tau / 12.0)
    qk = 1.0 + 0j
    k = 0
    while True:
        k += 1
        qk *= q
        value *= 1.0 - qk
        if abs(qk) < tol:
            break
        if k > 10_000:
            raise NonConvergenceError(
                "eta q-series did not converge", achieved=abs(qk)
            )
    return EtaValue(value=value, tau=tau, terms_used=k)


def euler_gamma():
    """The Euler-Mascheroni constant."""
    return float(np.euler_gamma)


def gamma(s):
    """Complete Gamma function for complex s, raising at the poles."""
    s = complex(s)
    if s.imag == 0.0 and s.real <= 0.0 and s.real == int(s.real):
        raise GammaPoleError(int(s.real))
    out = complex(sps.gamma(s))
    return out


def incomplete_gamma_upper(s, x, tol=1e-15, max_iter=10_000):
    """Upper incomplete gamma Gamma(s, x) for complex s and real x > 0.

    Continued fraction for x > Re(s) + 1, otherwise the lower series
    subtracted from Gamma(s); the split keeps both branches well
    conditioned on the domain |s| <= 10, 0 < x <= 50.
    """
    s = complex(s)
    x = float(x)
    if x <= 0:
        raise InvalidInputError("incomplete_gamma_upper requires x > 0")
    prefac = cmath.exp(-x + s * cmath.log(x))
    if x > s.real + 1.0:
        # Lentz's algorithm for the continued fraction
        #   Gamma(s,x) = e^-x x^s / (x + 1 - s - 1(1-s)/(x + 3 - s - ...))
        tiny = 1e-300
        b = x + 1.0 - s
        c = 1.0 / tiny
        d = 1.0 / b if b != 0 else 1.0 / tiny
        h = d
        for i in range(1, max_iter):
            an = -i * (i - s)
            b += 2.0
            d = an * d + b
            if abs(d) < tiny:
                d = tiny
            c = b + an / c
            if abs(c) < tiny:
                c = tiny
            d = 1.0 / d
            delta = d * c
            h *= delta
            if abs(delta - 1.0) < tol:
                return prefac * h
        raise NonConvergenceError(
            "incomplete gamma continued fraction stalled", achieved=abs(delta - 1.0)
        )
    # lower series gamma(s,x) = x^s e^-x sum_k x^k / (s (s+1) ... (s+k))
    term = 1.0 / s
    total = term
    for k in range(1, max_iter):
        term *= x / (s + k)
        total += term
        if abs(term) < tol * abs(total):
            return gamma(s) - prefac * total
    raise NonConvergenceError(
        "incomplete gamma series stalled", achieved=abs(term)
    )
