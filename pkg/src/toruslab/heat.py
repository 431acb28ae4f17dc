"""Heat traces and zeta-regularized determinants on flat tori.

The trace theta(t) = sum mult * exp(-t*lambda) over the nonzero
spectrum is computed by two routes: a direct lattice sum (good for
large t) and the Poisson-dual sum over the period lattice (good for
small t), each with a certified truncation bound.  zeta(0) and
zeta'(0) are then assembled by two independent pipelines:

  * the heat-trace formula
        b1 = gamma*a0 - sum_{k=1}^n a_k/k
             + int_0^1 (theta - sum a_k t^-k) dt/t + int_1^inf theta dt/t
    with the short-time coefficients a_k (the printed sign of the
    a_k/k term follows from the Mellin poles; see tests against the
    Riemann zeta oracle), and
  * the Mellin split at t = 1, where the upper piece is a sum of
    incomplete gamma values over modes and the lower piece is the
    Poisson-dual form with its pole part made explicit.

det = exp(-zeta'(0)); zero modes are always excluded from theta and
accounted for in the constant coefficient a_0.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.integrate import quad
from scipy.special import exp1, gammaincc, gamma as _gamma_fn

from .errors import InvalidInputError, NonConvergenceError
from .lattice import (
    _FOUR_PI_SQ,
    _box_point_count,
    _integer_box,
    _dual_gram,
    convention,
    covolume,
    gaussian_lattice_tail,
    shortest_dual_normsq,
    shortest_period_normsq,
    volume,
)

_EULER_GAMMA = float(np.euler_gamma)
_MAX_BOX_POINTS = 40_000_000


@dataclass(frozen=True)
class HeatTraceValue:
    """One evaluation of the zero-mode-excluded heat trace."""

    t: float
    value: float
    abs_error: float
    route: str


@dataclass
class AsymptoticCoeffs:
    """Short-time coefficients: theta(t) = sum_k a[k]/t^k + O(t).

    a[0] already carries the -zero_modes adjustment from excluding the
    constant modes.  source is "analytic_torus" or "fitted".
    """

    a: list
    source: str
    residual: float = 0.0


@dataclass
class ZetaResult:
    """zeta(0), zeta'(0) = b1, and det = exp(-zeta'(0))."""

    zeta_at_0: float
    zeta_prime_at_0: float
    det: float
    est_error: float
    route: str

    def to_json_obj(self):
        return {
            "zeta0": self.zeta_at_0,
            "zeta_prime0": self.zeta_prime_at_0,
            "det": self.det,
            "route": self.route,
            "est_error": self.est_error,
        }


# ---------------------------------------------------------------------------
# heat traces
# ---------------------------------------------------------------------------

def crossover_t(torus, conv):
    """Crossover between direct and Poisson-dual summation; proportional
    to covolume^{1/n}/(4 pi^2) under de Rham and rescaled with the
    eigenvalue convention."""
    conv = convention(conv)
    s = conv.scale(torus)
    return covolume(torus) ** (1.0 / torus.n) / (_FOUR_PI_SQ * s)


def _theta_direct(torus, c, binom, t, tol):
    """Direct sum over dual modes with a certified tail bound."""
    mu_sq = shortest_dual_normsq(torus)
    mu = math.sqrt(mu_sq)
    dim = 2 * torus.n
    need = math.log(max(4.0 * binom / tol, 4.0)) / (t * c)
    r_sq = max(mu_sq, need)
    for _ in range(200):
        tail = binom * gaussian_lattice_tail(mu, dim, t * c, math.sqrt(r_sq))
        if tail <= 0.5 * tol:
            break
        r_sq *= 1.44
    else:
        raise NonConvergenceError(
            f"direct heat trace cannot reach tol={tol:g} at t={t:g}",
            achieved=tail,
        )
    if _box_point_count(_dual_gram(torus), r_sq, dim) > _MAX_BOX_POINTS:
        raise NonConvergenceError(
            f"direct heat trace needs too many modes at t={t:g}", achieved=tail
        )
    _, nsq = _integer_box(_dual_gram(torus), r_sq, dim)
    nsq = nsq[nsq > 1e-300]
    value = binom * float(np.exp(-t * c * nsq).sum())
    return value, tail


def _theta_dual(torus, c, binom, t, tol):
    """Poisson-dual sum over the period lattice with a certified tail."""
    n = torus.n
    dim = 2 * n
    B = torus.real_basis
    G = torus.metric_real
    P = B.T @ G @ B
    amp = binom * volume(torus) * (math.pi / (t * c)) ** n
    if not math.isfinite(amp):
        raise NonConvergenceError(
            f"dual heat trace amplitude overflows at t={t:g}", achieved=math.inf
        )
    s_eff = math.pi**2 / (t * c)
    mu_sq = shortest_period_normsq(torus)
    mu = math.sqrt(mu_sq)
    budget = 0.5 * tol / max(amp, 1e-300)
    need = math.log(max(4.0 / budget, 4.0)) / s_eff
    r_sq = max(mu_sq, need)
    for _ in range(200):
        tail = amp * gaussian_lattice_tail(mu, dim, s_eff, math.sqrt(r_sq))
        if tail <= 0.5 * tol:
            break
        r_sq *= 1.44
    else:
        raise NonConvergenceError(
            f"dual heat trace cannot reach tol={tol:g} at t={t:g}", achieved=tail
        )
    if _box_point_count(P, r_sq, dim) > _MAX_BOX_POINTS:
        raise NonConvergenceError(
            f"dual heat trace needs too many modes at t={t:g}", achieved=tail
        )
    _, nsq = _integer_box(P, r_sq, dim)
    value = amp * float(np.exp(-s_eff * nsq).sum()) - binom
    return value, tail


def theta(torus, conv, q, t, tol=1e-13, route="auto"):
    """Heat trace over the nonzero (0,q) spectrum at time t.

    The route is chosen automatically around the crossover unless
    forced; abs_error is a certified truncation bound.
    """
    conv = convention(conv)
    if t <= 0:
        raise InvalidInputError("t must be positive")
    if not 0 <= q <= torus.n:
        raise InvalidInputError(f"q out of range [0, {torus.n}]")
    c = conv.scale(torus) * _FOUR_PI_SQ
    binom = math.comb(torus.n, q)
    if route == "auto":
        route = "direct" if t >= crossover_t(torus, conv) else "poisson_dual"
    if route == "direct":
        value, tail = _theta_direct(torus, c, binom, t, tol)
    elif route == "poisson_dual":
        value, tail = _theta_dual(torus, c, binom, t, tol)
    else:
        raise InvalidInputError(f"unknown route {route!r}")
    return HeatTraceValue(t=float(t), value=value, abs_error=float(tail), route=route)


def heat_trace_rows(torus, conv, q, ts, tol=1e-13):
    """(t, value, abs_error, route) rows for a CSV sweep."""
    rows = []
    for t in ts:
        h = theta(torus, conv, q, float(t), tol=tol)
        rows.append((h.t, h.value, h.abs_error, h.route))
    return rows


# ---------------------------------------------------------------------------
# short-time coefficients
# ---------------------------------------------------------------------------

def asymptotic_coeffs(torus, conv, q=0):
    """Analytic short-time coefficients for a flat torus.

    a_n = C(n,q) * vol_g / (4 pi scale)^n from the Poisson leading term;
    flat metric makes every intermediate coefficient vanish; excluding
    the zero modes contributes -C(n,q) to the constant term.
    """
    conv = convention(conv)
    n = torus.n
    binom = math.comb(n, q)
    s = conv.scale(torus)
    a = [0.0] * (n + 1)
    a[0] = -float(binom)
    a[n] += binom * volume(torus) / (4.0 * math.pi * s) ** n
    return AsymptoticCoeffs(a=a, source="analytic_torus")


def fit_asymptotic(trace_samples, n):
    """Least-squares fit of sum_k a_k t^-k to heat-trace samples.

    Requires at least 2(n+1) samples; refuses ill-conditioned designs.
    """
    pts = [(float(t), float(v)) for t, v in trace_samples]
    if len(pts) < 2 * (n + 1):
        raise InvalidInputError(
            f"need at least {2 * (n + 1)} samples for n={n}, got {len(pts)}"
        )
    t = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(t <= 0):
        raise InvalidInputError("sample times must be positive")
    X = np.column_stack([t ** (-k) for k in range(n + 1)])
    scale = np.linalg.norm(X, axis=0)
    Xs = X / scale
    cond = float(np.linalg.cond(Xs))
    if cond > 1e10:
        raise NonConvergenceError(
            f"ill-conditioned asymptotic fit (cond={cond:.3e})", achieved=cond
        )
    coef, _, _, _ = np.linalg.lstsq(Xs, y, rcond=None)
    a = coef / scale
    residual = float(np.linalg.norm(X @ a - y))
    return AsymptoticCoeffs(a=list(map(float, a)), source="fitted", residual=residual)


# ---------------------------------------------------------------------------
# zeta'(0) by the heat-trace (regularized integral) route
# ---------------------------------------------------------------------------

def abks_b1(theta_fn, coeffs, n, tol=1e-10):
    """Assemble zeta(0) and zeta'(0) from a heat trace and its a_k.

    theta_fn must be the zero-mode-excluded trace consistent with
    coeffs.  Both integrals use adaptive quadrature; the upper integral
    advances in doubling windows until the certified remainder drops
    below tol.
    """
    a = list(coeffs.a)
    if len(a) != n + 1:
        raise InvalidInputError(f"expected {n + 1} coefficients, got {len(a)}")

    def integrand_low(t):
        poly = sum(a[k] * t ** (-k) for k in range(n + 1))
        return (theta_fn(t) - poly) / t

    low, low_err = quad(integrand_low, 0.0, 1.0, epsabs=0.25 * tol, limit=400)
    if low_err > max(100.0 * tol, 1e-8 * max(1.0, abs(low))):
        raise NonConvergenceError(
            "lower heat-trace integral did not converge", achieved=low_err
        )

    total_high = 0.0
    high_err = 0.0
    t_left = 1.0
    tail_est = math.inf
    for _ in range(60):
        piece, err = quad(
            lambda t: theta_fn(t) / t, t_left, 2.0 * t_left,
            epsabs=0.25 * tol, limit=200,
        )
        total_high += piece
        high_err += err
        th_r = theta_fn(2.0 * t_left)
        th_l = theta_fn(t_left)
        if th_r <= 0.0:
            tail_est = 0.0
            break
        lam_hat = math.log(max(th_l / th_r, 1.0 + 1e-15)) / t_left
        tail_est = th_r / max(lam_hat * 2.0 * t_left, 1e-300)
        if tail_est < 0.25 * tol:
            break
        t_left *= 2.0
    else:
        raise NonConvergenceError(
            "upper heat-trace integral tail did not close", achieved=tail_est
        )

    b1 = (
        _EULER_GAMMA * a[0]
        - sum(a[k] / k for k in range(1, n + 1))
        + low
        + total_high
    )
    est = low_err + high_err + tail_est
    return ZetaResult(
        zeta_at_0=float(a[0]),
        zeta_prime_at_0=float(b1),
        det=float(math.exp(-b1)),
        est_error=float(est),
        route="abks",
    )


def abks_for_torus(torus, conv, q=0, tol=1e-10, theta_tol=1e-13):
    """Heat-trace-route determinant for a torus Laplacian."""
    coeffs = asymptotic_coeffs(torus, conv, q)
    fn = lambda t: theta(torus, conv, q, t, tol=theta_tol).value
    return abks_b1(fn, coeffs, torus.n, tol=tol)


# ---------------------------------------------------------------------------
# zeta'(0) by the Mellin-split (incomplete gamma) route
# ---------------------------------------------------------------------------

def epstein_zeta_det(torus, conv, q=0, cutoff=60.0, stream=None):
    """Determinant from the Mellin integral split at t = 1.

    The [1, inf) piece is sum mult * E1(lambda); the (0, 1] piece uses
    the Poisson-dual trace, which isolates the poles -z/s + A/(s-n) and
    leaves an entire incomplete-gamma sum over the period lattice.  A
    precomputed SpectrumStream (e.g. from the cache) may supply the
    direct part.
    """
    conv = convention(conv)
    n = torus.n
    binom = math.comb(n, q)
    c = conv.scale(torus) * _FOUR_PI_SQ
    A = binom * volume(torus) * (math.pi / c) ** n
    z = float(binom)

    # direct part: nonzero modes with lambda <= cutoff
    if stream is not None:
        if stream.lambda_max < cutoff or stream.tail_t_min > 1.0:
            raise InvalidInputError(
                "supplied spectrum does not cover the Mellin cutoff"
            )
        S_direct = float((exp1(stream.lambdas) * stream.mults).sum())
        tail_direct = stream.tail_bound / stream.lambda_max
    else:
        Q = _dual_gram(torus)
        _, nsq = _integer_box(Q, cutoff / c, 2 * n)
        lam = c * nsq[nsq > 1e-300]
        S_direct = binom * float(exp1(lam).sum()) if lam.size else 0.0
        mu_d = math.sqrt(shortest_dual_normsq(torus))
        tail_direct = (
            binom
            * gaussian_lattice_tail(mu_d, 2 * n, c, math.sqrt(cutoff / c))
            / cutoff
        )

    # dual part: period-lattice betas up to the same cutoff
    B = torus.real_basis
    P = B.T @ torus.metric_real @ B
    s_eff = math.pi**2 / c
    _, psq = _integer_box(P, cutoff / s_eff, 2 * n)
    beta = s_eff * psq[psq > 1e-300]
    if beta.size:
        Gn = gammaincc(n, beta) * _gamma_fn(n)
        S_dual = float((beta ** (-n) * Gn).sum())
    else:
        S_dual = 0.0
    mu_p = math.sqrt(shortest_period_normsq(torus))
    tail_dual = (
        (2.0 / cutoff)
        * gaussian_lattice_tail(mu_p, 2 * n, s_eff, math.sqrt(cutoff / s_eff))
    )

    zp0 = -_EULER_GAMMA * z - A / n + A * S_dual + S_direct
    est = tail_direct + abs(A) * tail_dual + 1e-14 * (1.0 + abs(zp0))
    return ZetaResult(
        zeta_at_0=-z,
        zeta_prime_at_0=float(zp0),
        det=float(math.exp(-zp0)),
        est_error=float(est),
        route="epstein_continuation",
    )
