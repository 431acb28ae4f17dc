"""Per-degree determinant bookkeeping and analytic torsion assembly.

On the flat torus every nonzero Fourier mode turns the (0,*) complex
into a Koszul complex for a nonzero covector, so the exact/coexact
dimensions in degree q are C(n-1,q-1) and C(n-1,q).  The torsion
log I = sum (-1)^q q log det Delta_q is assembled under two multiplicity
conventions for log det Delta'_q:

  koszul   C(n-1, q-1)          (the mode-wise Hodge split)
  shifted  C(n-1, q) for q < n and 1 at q = n (the accounting that
           reproduces the closed form -2 log det Delta_0 in odd
           dimension and 0 in even dimension)

Both are computed side by side; the discrepancy against the closed form
is reported, never silently resolved.
"""

from dataclasses import dataclass, field
import math

from .errors import InvalidInputError
from .heat import theta


TORSION_CONVENTIONS = ("koszul", "shifted")


@dataclass(frozen=True)
class HodgeModel:
    """Hodge-number bookkeeping: the torus model has h^{0,q} = C(n,q);
    a strict Calabi-Yau has h^{0,q} = 1 for q in {0, n} and 0 between."""

    tag: str
    n: int

    def __post_init__(self):
        if self.tag not in ("torus", "strict_cy"):
            raise InvalidInputError(f"unknown hodge model {self.tag!r}")
        if self.tag == "strict_cy" and self.n < 2:
            raise InvalidInputError("strict_cy requires n >= 2")
        if self.n < 1:
            raise InvalidInputError("n must be positive")

    def hodge_number(self, q):
        if not 0 <= q <= self.n:
            raise InvalidInputError(f"q out of range [0, {self.n}]")
        if self.tag == "torus":
            return math.comb(self.n, q)
        return 1 if q in (0, self.n) else 0


def koszul_split(n, q):
    """(exact_dim, coexact_dim) of the mode-wise (0,q) space:
    (C(n-1,q-1), C(n-1,q)); they sum to C(n,q)."""
    if not 0 <= q <= n:
        raise InvalidInputError(f"q out of range [0, {n}]")
    return math.comb(n - 1, q - 1) if q >= 1 else 0, math.comb(n - 1, q)


@dataclass(frozen=True)
class HodgeSplitZeta:
    """Integer multipliers c with zeta'_q = c' * zeta_0 and
    zeta''_q = c'' * zeta_0 on the nonzero spectrum."""

    n: int
    q: int
    zeta_prime_mult: int
    zeta_doubleprime_mult: int

    @classmethod
    def at(cls, n, q):
        e, c = koszul_split(n, q)
        return cls(n=n, q=q, zeta_prime_mult=e, zeta_doubleprime_mult=c)


def degree_sum_multiplier_identity(n):
    """Integer identity behind the torsion reduction:
    sum (-1)^q q C(n,q)  ==  sum_{q>=1} (-1)^q C(n-1,q-1)."""
    lhs = sum((-1) ** q * q * math.comb(n, q) for q in range(n + 1))
    rhs = sum((-1) ** q * math.comb(n - 1, q - 1) for q in range(1, n + 1))
    return lhs, rhs


def bochner_ratio(torus, q, t_grid, theta_tol=1e-13):
    """Max deviation of theta_q(t)/theta_0(t) from C(n,q) on full traces
    (zero modes included; the componentwise identity is exact here)."""
    n = torus.n
    binom = math.comb(n, q)
    worst = 0.0
    for t in t_grid:
        th0 = theta(torus, "dolbeault", 0, float(t), tol=theta_tol).value + 1.0
        thq = theta(torus, "dolbeault", q, float(t), tol=theta_tol).value + binom
        worst = max(worst, abs(thq / th0 - binom))
    return worst


def _primed_exponents(n, conv_tag):
    """Exponent of log det Delta_0 in log det Delta'_q for q = 1..n."""
    if conv_tag == "koszul":
        return [math.comb(n - 1, q - 1) for q in range(1, n + 1)]
    if conv_tag == "shifted":
        exps = [math.comb(n - 1, q) for q in range(1, n)]
        exps.append(1)
        return exps
    raise InvalidInputError(f"unknown torsion convention {conv_tag!r}")


@dataclass
class TorsionReport:
    """Assembled log I(M) under one multiplicity convention.

    log_torsion uses the primed-block sum sum_{q>=1} (-1)^q log det D'_q;
    the weighted sum sum (-1)^q q log det D_q over the same split is
    carried alongside (the two agree by Abel summation).  closed_form is
    -2 log det D_0 for odd n and 0 for even n.
    """

    n: int
    model: str
    convention: str
    log_det0: float
    hodge_numbers: list
    primed_log_dets: list
    per_q_log_dets: list
    log_torsion: float
    weighted_log_torsion: float
    closed_form: float
    discrepancy: float

    def to_json_obj(self):
        return {
            "n": self.n,
            "model": self.model,
            "convention": self.convention,
            "log_det0": self.log_det0,
            "hodge_numbers": list(self.hodge_numbers),
            "primed_log_dets": list(self.primed_log_dets),
            "per_q_log_dets": list(self.per_q_log_dets),
            "log_torsion": self.log_torsion,
            "weighted_log_torsion": self.weighted_log_torsion,
            "closed_form": self.closed_form,
            "discrepancy": self.discrepancy,
        }


def torsion(model, conv_tag, det0):
    """Assemble the torsion report from log det Delta_0.

    det0 may be a ZetaResult or a plain log-determinant value.
    """
    if conv_tag not in TORSION_CONVENTIONS:
        raise InvalidInputError(f"unknown torsion convention {conv_tag!r}")
    n = model.n
    d = -det0.zeta_prime_at_0 if hasattr(det0, "zeta_prime_at_0") else float(det0)
    # log det = -zeta'(0)
    exps = _primed_exponents(n, conv_tag)
    primed = [e * d for e in exps]
    # det D_q = det D'_q * det D''_q with det D''_q = det D'_{q+1}
    ext = exps + [0]
    per_q = [(ext[q - 1] if q >= 1 else 0) * d + ext[q] * d for q in range(n + 1)]
    log_t = sum((-1) ** q * primed[q - 1] for q in range(1, n + 1))
    weighted = sum((-1) ** q * q * per_q[q] for q in range(n + 1))
    closed = -2.0 * d if n % 2 == 1 else 0.0
    return TorsionReport(
        n=n,
        model=model.tag,
        convention=conv_tag,
        log_det0=d,
        hodge_numbers=[model.hodge_number(q) for q in range(n + 1)],
        primed_log_dets=primed,
        per_q_log_dets=per_q,
        log_torsion=float(log_t),
        weighted_log_torsion=float(weighted),
        closed_form=float(closed),
        discrepancy=float(log_t - closed),
    )


def torsion_pair_json(model, det0):
    """Both conventions side by side, ready for JSON emission."""
    return {
        conv: torsion(model, conv, det0).to_json_obj()
        for conv in TORSION_CONVENTIONS
    }
