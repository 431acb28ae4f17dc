"""Flat complex tori and their exact Laplace spectra.

A torus is C^n / Lambda with a constant Hermitian metric H.  Fourier
modes are labelled by the dual lattice: with B the real 2n x 2n
realization of the period columns, the dual basis B* satisfies
B^T B* = I and the mode e_xi(z) = exp(2*pi*i Re<z, xi>) is periodic
exactly for xi in the span of B*.  The Laplace eigenvalue of a mode is
a convention-dependent multiple of |xi|^2 measured in the dual metric,
so spectra are exact and multiplicities can be counted combinatorially.

Conventions (eigenvalue of the mode xi):
    de-rham      4*pi^2 |xi|^2
    dolbeault    2*pi^2 |xi|^2            (half of de Rham, mode by mode)
    raw-epstein  |m + n*tau|^2 for n = 1  (the classical Epstein labels)
"""

from dataclasses import dataclass
from fractions import Fraction
import hashlib
import math
import os

import numpy as np
from scipy.special import gammaincc, gamma as _gamma_fn

from .errors import InvalidInputError
from ._format import FORMAT_VERSION, _atomic_write, fmt_float

_FOUR_PI_SQ = 4.0 * math.pi**2


# ---------------------------------------------------------------------------
# torus geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexTorus:
    """Flat torus C^n / Lambda with constant Hermitian metric.

    periods: n x 2n complex matrix whose columns generate the lattice.
    metric:  n x n Hermitian positive-definite matrix (dimensionless
             length^2); identity if omitted.
    """

    n: int
    periods: np.ndarray
    metric: np.ndarray

    def __init__(self, periods, metric=None):
        periods = np.asarray(periods, dtype=complex)
        if periods.ndim != 2 or periods.shape[1] != 2 * periods.shape[0]:
            raise InvalidInputError(
                f"periods must be n x 2n, got shape {periods.shape}"
            )
        n = periods.shape[0]
        if metric is None:
            metric = np.eye(n)
        metric = np.asarray(metric, dtype=complex)
        if metric.shape != (n, n):
            raise InvalidInputError("metric must be n x n")
        if not np.allclose(metric, metric.conj().T, atol=1e-13):
            raise InvalidInputError("metric must be Hermitian")
        if np.linalg.eigvalsh(metric).min() <= 0:
            raise InvalidInputError("metric must be positive definite")
        B = np.vstack([periods.real, periods.imag])
        if abs(np.linalg.det(B)) < 1e-12:
            raise InvalidInputError("period columns do not span R^{2n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "metric", metric)

    @classmethod
    def from_modulus(cls, tau, unit_volume=False):
        """Elliptic curve C/(Z + tau Z); unit_volume rescales the metric
        so the Riemannian volume is exactly 1."""
        tau = complex(tau)
        if tau.imag <= 0:
            raise InvalidInputError(f"Im tau must be positive, got {tau}")
        h = 1.0 / tau.imag if unit_volume else 1.0
        return cls(np.array([[1.0, tau]]), np.array([[h]]))

    @classmethod
    def product(cls, taus, unit_volume=False):
        """Product of elliptic curves: periods [I | diag(taus)]."""
        taus = [complex(t) for t in taus]
        n = len(taus)
        for t in taus:
            if t.imag <= 0:
                raise InvalidInputError(f"Im tau must be positive, got {t}")
        periods = np.hstack([np.eye(n), np.diag(taus)])
        metric = np.eye(n)
        if unit_volume:
            vol = float(np.prod([t.imag for t in taus]))
            metric = metric / vol ** (1.0 / n)
        return cls(periods, metric)

    @property
    def real_basis(self):
        """2n x 2n real realization B of the period columns."""
        return np.vstack([self.periods.real, self.periods.imag])

    @property
    def metric_real(self):
        """Realification G of H: <u,v> = Re(u^H H v) on R^{2n}."""
        S, A = self.metric.real, self.metric.imag
        return np.block([[S, -A], [A, S]])


def covolume(torus):
    """Euclidean covolume |det B| of the real period basis."""
    return abs(np.linalg.det(torus.real_basis))


def volume(torus):
    """Riemannian volume: covolume times det H."""
    return covolume(torus) * float(np.linalg.det(torus.metric).real)


def dual_basis(torus):
    """Dual lattice basis B* with B^T B* = I (columns generate Lambda*)."""
    B = torus.real_basis
    if abs(np.linalg.det(B)) < 1e-12:
        raise InvalidInputError("singular period matrix")
    return np.linalg.inv(B).T


# ---------------------------------------------------------------------------
# conventions
# ---------------------------------------------------------------------------

class LaplaceConvention:
    """Eigenvalue normalization: lambda = scale(torus) * 4pi^2 * |xi|^2_*."""

    def __init__(self, tag):
        if tag not in ("de-rham", "dolbeault", "raw-epstein"):
            raise InvalidInputError(f"unknown convention {tag!r}")
        self.tag = tag

    def scale(self, torus):
        if self.tag == "de-rham":
            return 1.0
        if self.tag == "dolbeault":
            return 0.5
        # raw-epstein: eigenvalue of the (m, n) mode is |m + n*tau|^2,
        # independent of the metric; only defined for n = 1.
        if torus.n != 1:
            raise InvalidInputError("raw-epstein requires complex dimension 1")
        h = float(torus.metric[0, 0].real)
        return covolume(torus) ** 2 * h / _FOUR_PI_SQ

    def __repr__(self):
        return f"LaplaceConvention({self.tag!r})"

    def __eq__(self, other):
        return isinstance(other, LaplaceConvention) and self.tag == other.tag

    def __hash__(self):
        return hash(self.tag)


DE_RHAM = LaplaceConvention("de-rham")
DOLBEAULT = LaplaceConvention("dolbeault")
RAW_EPSTEIN = LaplaceConvention("raw-epstein")

_CONVENTIONS = {c.tag: c for c in (DE_RHAM, DOLBEAULT, RAW_EPSTEIN)}


def convention(tag):
    """Look up a convention by tag string."""
    if isinstance(tag, LaplaceConvention):
        return tag
    try:
        return _CONVENTIONS[tag]
    except KeyError:
        raise InvalidInputError(f"unknown convention {tag!r}") from None


# ---------------------------------------------------------------------------
# mode enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualMode:
    """Fourier label: integer coordinates k in the dual basis and the
    squared dual-metric norm of xi = B* k."""

    k: tuple
    normsq: float


def _box_limits(gram, radius_sq, dim):
    """Per-axis bounds: max |k_i| over the ellipsoid k^T gram k <= r^2
    is r * sqrt((gram^-1)_{ii}) (provably complete bounding box)."""
    if radius_sq <= 0:
        return [0] * dim
    ginv = np.linalg.inv(gram)
    r = math.sqrt(radius_sq)
    return [
        int(math.floor(r * math.sqrt(max(float(ginv[i, i]), 0.0)) + 1e-9))
        for i in range(dim)
    ]


def _box_point_count(gram, radius_sq, dim):
    count = 1
    for m in _box_limits(gram, radius_sq, dim):
        count *= 2 * m + 1
    return count


def _integer_box(gram, radius_sq, dim):
    """Integer vectors k with k^T gram k <= radius_sq (vectorized scan).

    Returns (K, nsq): integer array (m, dim) and float squared norms.
    The scan is chunked along the first axis to bound peak memory.
    """
    if radius_sq < 0:
        return np.zeros((0, dim), dtype=np.int64), np.zeros(0)
    gram = np.asarray(gram, dtype=float)
    limits = _box_limits(gram, radius_sq, dim)
    axes = [np.arange(-m, m + 1, dtype=np.int64) for m in limits[1:]]
    if axes:
        grids = np.meshgrid(*axes, indexing="ij")
        tail = np.stack([g.ravel() for g in grids], axis=1)
    else:
        tail = np.zeros((1, 0), dtype=np.int64)
    cut = radius_sq * (1.0 + 1e-12) + 1e-300
    K_parts, n_parts = [], []
    for k0 in range(-limits[0], limits[0] + 1):
        K = np.concatenate(
            [np.full((tail.shape[0], 1), k0, dtype=np.int64), tail], axis=1
        )
        Kf = K.astype(float)
        nsq = np.einsum("ki,ij,kj->k", Kf, gram, Kf)
        keep = nsq <= cut
        K_parts.append(K[keep])
        n_parts.append(nsq[keep])
    return np.concatenate(K_parts, axis=0), np.concatenate(n_parts)


def _dual_gram(torus):
    """Gram matrix of the dual basis in the dual metric: (B^T G B)^{-1}."""
    B = torus.real_basis
    return np.linalg.inv(B.T @ torus.metric_real @ B)


def enumerate_modes(torus, radius_sq):
    """All dual modes with |xi|^2_* <= radius_sq, in lexicographic k order."""
    if radius_sq < 0:
        raise InvalidInputError("radius_sq must be nonnegative")
    Q = _dual_gram(torus)
    K, nsq = _integer_box(Q, radius_sq, 2 * torus.n)
    order = np.lexsort(K.T[::-1])
    modes = []
    for idx in order:
        k = tuple(int(v) for v in K[idx])
        modes.append(DualMode(k=k, normsq=float(max(nsq[idx], 0.0))))
    return modes


def shortest_dual_normsq(torus):
    """Smallest positive |xi|^2_* (squared length of the shortest dual vector)."""
    Q = _dual_gram(torus)
    r = float(np.linalg.eigvalsh(Q).min())
    while True:
        _, nsq = _integer_box(Q, r, 2 * torus.n)
        pos = nsq[nsq > 1e-300]
        if pos.size:
            return float(pos.min())
        r *= 4.0


def shortest_period_normsq(torus):
    """Smallest positive lambda^T G lambda over the period lattice."""
    B = torus.real_basis
    P = B.T @ torus.metric_real @ B
    r = float(np.linalg.eigvalsh(P).min())
    while True:
        _, nsq = _integer_box(P, r, 2 * torus.n)
        pos = nsq[nsq > 1e-300]
        if pos.size:
            return float(pos.min())
        r *= 4.0


def gaussian_lattice_tail(shortest_len, dim, s, radius):
    """Certified bound on sum exp(-s|x|^2) over lattice points |x| > radius.

    Uses the packing estimate N(r) <= (2r/mu + 1)^dim and termwise
    integration, valid for any lattice with shortest nonzero length mu.
    """
    if radius <= 0 or s <= 0:
        return math.inf
    total = 0.0
    x = s * radius * radius
    for j in range(dim + 1):
        a = j / 2.0 + 1.0
        total += (
            math.comb(dim, j)
            * (2.0 / shortest_len) ** j
            * s ** (-j / 2.0)
            * float(gammaincc(a, x) * _gamma_fn(a))
        )
    return total


# ---------------------------------------------------------------------------
# exact spectra
# ---------------------------------------------------------------------------

@dataclass
class SpectrumStream:
    """Nonzero Laplace eigenvalues with exact multiplicities up to a cutoff.

    entries: (lambdas, mults) arrays, strictly increasing lambdas; the
    lambda = 0 modes are excluded and counted in zero_modes.  tail_bound
    certifies the neglected contribution to sum(mult * exp(-t*lambda))
    for every t >= tail_t_min.
    """

    lambdas: np.ndarray
    mults: np.ndarray
    lambda_max: float
    zero_modes: int
    tail_bound: float
    tail_t_min: float

    @property
    def entries(self):
        return list(zip(self.lambdas.tolist(), self.mults.tolist()))

    def heat_sum(self, t):
        """sum mult * exp(-t lambda) over the stored nonzero spectrum."""
        return float(np.exp(-t * self.lambdas) @ self.mults)


def _rational_dual_gram(torus, max_den=10**6):
    """Exact rational dual Gram as (M, D) with Q = M/D, or None.

    Rationalizes the period Gram B^T G B (fewer float operations than the
    dual side), inverts it exactly, and clears denominators.
    """
    B = torus.real_basis
    P = B.T @ torus.metric_real @ B
    m = 2 * torus.n
    Pf = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            x = 0.5 * (P[i, j] + P[j, i])
            f = Fraction(x).limit_denominator(max_den)
            if abs(float(f) - x) > 1e-12 * max(1.0, abs(x)):
                return None
            Pf[i][j] = Pf[j][i] = f
    Qf = _fraction_inverse(Pf)
    if Qf is None:
        return None
    D = 1
    for row in Qf:
        for v in row:
            D = D * v.denominator // math.gcd(D, v.denominator)
    if D > 10**12:
        return None
    M = [[int(v * D) for v in row] for row in Qf]
    return M, D


def _fraction_inverse(A):
    """Exact inverse of a Fraction matrix by Gauss-Jordan; None if singular."""
    m = len(A)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(m)]
           for i, row in enumerate(A)]
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1, 1) / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[m:] for row in aug]


def _grouped_mode_norms(torus, radius_sq):
    """Distinct dual norms |xi|^2_* <= radius_sq with multiplicities.

    Exact integer grouping when the dual Gram is rational, otherwise
    clustering at relative 1e-12.  The k = 0 mode is excluded.
    Returns (normsq_values, counts).
    """
    Q = _dual_gram(torus)
    dim = 2 * torus.n
    rat = _rational_dual_gram(torus)
    K, nsq = _integer_box(Q, radius_sq, dim)
    nz = np.any(K != 0, axis=1)
    K, nsq = K[nz], nsq[nz]
    if K.shape[0] == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    if rat is not None:
        M, D = rat
        Mi = np.asarray(M, dtype=np.int64)
        kabs = int(np.abs(K).max()) if K.size else 0
        safe = (np.abs(Mi).max() * (dim * kabs) ** 2) < 2**62
        if safe:
            keys = np.einsum("ki,ij,kj->k", K, Mi, K)
            # exact filter: keep keys with key/D <= radius_sq (tolerate float cut)
            keep = keys.astype(float) / D <= radius_sq * (1 + 1e-12)
            keys = keys[keep]
            uniq, counts = np.unique(keys, return_counts=True)
            return uniq.astype(float) / D, counts
    order = np.argsort(nsq, kind="stable")
    nsq = nsq[order]
    values, counts = [], []
    for v in nsq:
        if values and v - values[-1] <= 1e-12 * max(v, 1e-300):
            counts[-1] += 1
        else:
            values.append(v)
            counts.append(1)
    return np.asarray(values), np.asarray(counts, dtype=np.int64)


def spectrum(torus, conv, q, lambda_max, tail_t_min=1.0):
    """Spectrum of the Dolbeault Laplacian on (0,q)-forms, complete up to
    lambda_max.  Multiplicities are C(n,q) times the function
    multiplicities (the flat torus acts componentwise); zero modes are
    counted separately.
    """
    conv = convention(conv)
    n = torus.n
    if not 0 <= q <= n:
        raise InvalidInputError(f"q must lie in [0, {n}], got {q}")
    if lambda_max <= 0:
        raise InvalidInputError("lambda_max must be positive")
    c = conv.scale(torus) * _FOUR_PI_SQ
    radius_sq = lambda_max / c
    values, counts = _grouped_mode_norms(torus, radius_sq)
    binom = math.comb(n, q)
    lambdas = c * values
    mults = counts * binom
    mu = math.sqrt(shortest_dual_normsq(torus))
    tail = binom * gaussian_lattice_tail(
        mu, 2 * n, tail_t_min * c, math.sqrt(max(radius_sq, 0.0))
    )
    return SpectrumStream(
        lambdas=lambdas,
        mults=mults,
        lambda_max=float(lambda_max),
        zero_modes=binom,
        tail_bound=float(tail),
        tail_t_min=float(tail_t_min),
    )


# ---------------------------------------------------------------------------
# spectrum cache files
# ---------------------------------------------------------------------------

def spectrum_cache_key(torus, conv, q, lambda_max):
    """Content hash of (periods, metric, convention, q, lambda_max)."""
    conv = convention(conv)
    parts = [str(torus.n), conv.tag, str(q), fmt_float(float(lambda_max))]
    for arr in (torus.periods, torus.metric):
        for v in np.asarray(arr, dtype=complex).ravel():
            parts.append(fmt_float(v.real))
            parts.append(fmt_float(v.imag))
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


def save_spectrum(path, torus, conv, q, stream):
    """Write a spectrum cache file: one header line, then CSV rows."""
    conv = convention(conv)
    key = spectrum_cache_key(torus, conv, q, stream.lambda_max)
    header = (
        f"# toruslab-spectrum format_version={FORMAT_VERSION} key={key} "
        f"n={torus.n} convention={conv.tag} q={q} "
        f"lambda_max={fmt_float(stream.lambda_max)} "
        f"zero_modes={stream.zero_modes} "
        f"tail_bound={fmt_float(stream.tail_bound)} "
        f"tail_t_min={fmt_float(stream.tail_t_min)}"
    )
    lines = [header, "lambda,multiplicity"]
    for lam, m in zip(stream.lambdas, stream.mults):
        lines.append(f"{fmt_float(float(lam))},{int(m)}")
    _atomic_write(path, "\n".join(lines) + "\n")


def load_spectrum(path):
    """Read a spectrum cache file written by save_spectrum."""
    with open(path) as f:
        header = f.readline().strip()
        fields = dict(
            kv.split("=", 1) for kv in header.lstrip("# ").split() if "=" in kv
        )
        f.readline()  # column names
        lams, mults = [], []
        for line in f:
            line = line.strip()
            if not line:
                continue
            a, b = line.split(",")
            lams.append(float(a))
            mults.append(int(b))
    return SpectrumStream(
        lambdas=np.asarray(lams),
        mults=np.asarray(mults, dtype=np.int64),
        lambda_max=float(fields["lambda_max"]),
        zero_modes=int(fields["zero_modes"]),
        tail_bound=float(fields["tail_bound"]),
        tail_t_min=float(fields["tail_t_min"]),
    ), fields


def cached_spectrum(cache_dir, torus, conv, q, lambda_max):
    """Fetch a spectrum through an on-disk cache keyed by content hash."""
    key = spectrum_cache_key(torus, conv, q, lambda_max)
    path = os.path.join(cache_dir, f"spectrum-{key}.csv")
    if os.path.exists(path):
        stream, _ = load_spectrum(path)
        return stream
    stream = spectrum(torus, conv, q, lambda_max)
    save_spectrum(path, torus, conv, q, stream)
    return stream
