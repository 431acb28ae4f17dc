"""Fourier-spectral tensor fields and the deformation power-series solver.

A TensorField is a finitely supported Fourier sum of (0,q)-forms,
optionally with values in T^{1,0}, on a flat torus.  On each mode
e_xi(z) = exp(2 pi i Re<z,xi>) the operators act algebraically:
dbar wedges with the mode covector (pi*i*xi), dbar* contracts with the
metric-dual vector, and the Green operator divides by the Dolbeault
eigenvalue 2 pi^2 |xi|^2 while annihilating the constant modes.  The
integrability equation dbar(phi) + 1/2 [phi, phi] = 0 is solved order
by order in the deformation parameters from harmonic first-order data.

Inner products use the pointwise trace
    Tr(phi1 conj(phi2)) = phi1^k_l conj(phi2^m_p) g^{lp} g_{km}
integrated over the torus (Parseval over modes); for q = 1 this is the
Weil-Petersson pairing of harmonic Beltrami differentials.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np

from .errors import InvalidInputError, ModeOverflowError, NonConvergenceError
from .lattice import ComplexTorus, dual_basis, volume

_TWO_PI_SQ = 2.0 * math.pi**2


def _subsets(n, q):
    return list(combinations(range(n), q))


def _subset_index(n, q):
    return {J: i for i, J in enumerate(_subsets(n, q))}


def _insertion_sign(b, J):
    """Sign of sorting (b, j1, .., jq) with b not in J (J sorted)."""
    return -1 if sum(1 for j in J if j < b) % 2 else 1


@dataclass
class TensorField:
    """Finite Fourier sum of (0,q)-forms, optionally T^{1,0}-valued.

    coeffs maps an integer mode key k (tuple of length 2n) to an array
    of shape (C(n,q), n) for vector-valued fields or (C(n,q),) for
    scalar ones; the first axis runs over strictly increasing barred
    multi-indices in lexicographic order.
    """

    torus: ComplexTorus
    q: int
    vector: bool
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.torus.n
        # degree n+1 is admitted as the always-empty image of a top wedge
        if not 0 <= self.q <= n + 1:
            raise InvalidInputError(f"form degree {self.q} out of range")
        shape = (math.comb(n, self.q), n) if self.vector else (math.comb(n, self.q),)
        clean = {}
        for k, arr in self.coeffs.items():
            k = tuple(int(v) for v in k)
            if len(k) != 2 * n:
                raise InvalidInputError("mode keys must have length 2n")
            arr = np.asarray(arr, dtype=complex)
            if arr.shape != shape:
                raise InvalidInputError(
                    f"coefficient shape {arr.shape} != expected {shape}"
                )
            if np.any(arr != 0):
                clean[k] = arr.copy()
        self.coeffs = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant_beltrami(cls, torus, matrix):
        """Constant (0,1) T^{1,0} field: matrix[a, v] multiplies dz^a x d_v."""
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (torus.n, torus.n):
            raise InvalidInputError("matrix must be n x n")
        return cls(torus, 1, True, {(0,) * (2 * torus.n): m})

    @classmethod
    def single_mode(cls, torus, k, q, array, vector=True):
        return cls(torus, q, vector, {tuple(k): np.asarray(array, dtype=complex)})

    # -- linear structure ---------------------------------------------------

    def copy(self):
        return TensorField(self.torus, self.q, self.vector,
                           {k: v.copy() for k, v in self.coeffs.items()})

    def scaled(self, a):
        return TensorField(self.torus, self.q, self.vector,
                           {k: a * v for k, v in self.coeffs.items()})

    def plus(self, other):
        if not other.coeffs:
            return self.copy()
        if not self.coeffs:
            return other.copy()
        _check_same_type(self, other)
        out = {k: v.copy() for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v.copy()
        return TensorField(self.torus, self.q, self.vector, out)

    def max_mode_norm(self):
        """Largest |k|_inf over the support."""
        return max((max(abs(v) for v in k) for k in self.coeffs), default=0)

    def mode_xi(self, k):
        """Complex dual vector xi of an integer mode key."""
        xi_r = dual_basis(self.torus) @ np.asarray(k, dtype=float)
        n = self.torus.n
        return xi_r[:n] + 1j * xi_r[n:]

    # -- evaluation on the fundamental domain -------------------------------

    def evaluate(self, U):
        """Values at points z = B u for rows u of U (shape (m, 2n)).

        Returns an array of shape (m,) + coefficient shape.  Because
        B^T B* = I, the mode e_xi at z = B u is exp(2 pi i k . u).
        """
        U = np.atleast_2d(np.asarray(U, dtype=float))
        n = self.torus.n
        shape = (math.comb(n, self.q), n) if self.vector else (math.comb(n, self.q),)
        out = np.zeros((U.shape[0],) + shape, dtype=complex)
        for k, arr in self.coeffs.items():
            phase = np.exp(2j * np.pi * (U @ np.asarray(k, dtype=float)))
            out += phase.reshape((-1,) + (1,) * arr.ndim) * arr
        return out


def _check_same_type(a, b):
    if a.torus is not b.torus and not (
        np.array_equal(a.torus.periods, b.torus.periods)
        and np.array_equal(a.torus.metric, b.torus.metric)
    ):
        raise InvalidInputError("fields live on different tori")
    if a.q != b.q or a.vector != b.vector:
        raise InvalidInputError("field type mismatch")


# ---------------------------------------------------------------------------
# mode-diagonal operators
# ---------------------------------------------------------------------------

def dbar(f):
    """Wedge each mode with its covector: (dbar f)_K = sum_b +- (pi i xi_b) f_{K\\b}."""
    n = f.torus.n
    if f.q >= n:
        return TensorField(f.torus, f.q + 1, f.vector, {})
    subs_in = _subset_index(n, f.q)
    subs_out = _subsets(n, f.q + 1)
    out = {}
    for k, arr in f.coeffs.items():
        w = 1j * np.pi * f.mode_xi(k)
        shape = (len(subs_out),) + arr.shape[1:]
        res = np.zeros(shape, dtype=complex)
        for K_i, K in enumerate(subs_out):
            for pos, b in enumerate(K):
                J = K[:pos] + K[pos + 1:]
                res[K_i] += (-1) ** pos * w[b] * arr[subs_in[J]]
        if np.any(res != 0):
            out[k] = res
    return TensorField(f.torus, f.q + 1, f.vector, out)


def dbar_star(f):
    """Contract each mode with the metric-dual vector of its covector."""
    n = f.torus.n
    if f.q == 0:
        return TensorField(f.torus, 0, f.vector, {})
    Hinv = np.linalg.inv(f.torus.metric)
    subs_in = _subset_index(n, f.q)
    subs_out = _subsets(n, f.q - 1)
    out = {}
    for k, arr in f.coeffs.items():
        xi = f.mode_xi(k)
        u = -1j * np.pi * 2.0 * np.conj(Hinv @ xi)
        shape = (len(subs_out),) + arr.shape[1:]
        res = np.zeros(shape, dtype=complex)
        for J_i, J in enumerate(subs_out):
            for b in range(n):
                if b in J:
                    continue
                K = tuple(sorted(J + (b,)))
                res[J_i] += _insertion_sign(b, J) * u[b] * arr[subs_in[K]]
        if np.any(res != 0):
            out[k] = res
    return TensorField(f.torus, f.q - 1, f.vector, out)


def mode_eigenvalue(torus, k):
    """Dolbeault eigenvalue 2 pi^2 |xi|^2_* of the mode k."""
    xi_r = dual_basis(torus) @ np.asarray(k, dtype=float)
    G_inv = np.linalg.inv(torus.metric_real)
    return _TWO_PI_SQ * float(xi_r @ G_inv @ xi_r)


def green(f):
    """Inverse Laplacian on the nonzero modes; kills the constant mode."""
    zero = (0,) * (2 * f.torus.n)
    out = {}
    for k, arr in f.coeffs.items():
        if k == zero:
            continue
        out[k] = arr / mode_eigenvalue(f.torus, k)
    return TensorField(f.torus, f.q, f.vector, out)


def harmonic_part(f):
    """Projection onto the constant (zero) mode."""
    zero = (0,) * (2 * f.torus.n)
    out = {zero: f.coeffs[zero].copy()} if zero in f.coeffs else {}
    return TensorField(f.torus, f.q, f.vector, out)


def laplace(f):
    """dbar dbar* + dbar* dbar (equals the mode eigenvalue on each mode)."""
    return dbar(dbar_star(f)).plus(dbar_star(dbar(f)))


# ---------------------------------------------------------------------------
# bracket
# ---------------------------------------------------------------------------

def bracket(phi, psi):
    """[phi, psi]^v_{ab} = phi^m_a d_m psi^v_b - psi^m_b d_m phi^v_a,
    antisymmetrized in (a, b); bilinear and symmetric under phi <-> psi."""
    _check_same_type(phi, psi)
    if phi.q != 1 or not phi.vector:
        raise InvalidInputError("bracket expects (0,1) T^{1,0} fields")
    n = phi.torus.n
    subs2 = _subsets(n, 2)
    out = {}
    for k1, c1 in phi.coeffs.items():
        xi1 = phi.mode_xi(k1)
        for k2, c2 in psi.coeffs.items():
            xi2 = psi.mode_xi(k2)
            # d_m acting on e_xi gives pi*i*conj(xi)_m
            d1 = c1 @ (1j * np.pi * np.conj(xi2))   # phi^m_a d_m(psi mode)
            d2 = c2 @ (1j * np.pi * np.conj(xi1))   # psi^m_b d_m(phi mode)
            E = d1[:, None, None] * c2[None, :, :] - d2[None, :, None] * c1[:, None, :]
            res = np.zeros((len(subs2), n), dtype=complex)
            for i, (a, b) in enumerate(subs2):
                res[i] = E[a, b] - E[b, a]
            if not np.any(res != 0):
                continue
            key = tuple(x + y for x, y in zip(k1, k2))
            if key in out:
                out[key] = out[key] + res
            else:
                out[key] = res
    return TensorField(phi.torus, 2, True, out)


# ---------------------------------------------------------------------------
# inner products and norms
# ---------------------------------------------------------------------------

def _minor_matrix(Hinv, q):
    """Gram of the barred multi-index contraction: det of q x q minors."""
    subs = _subsets(Hinv.shape[0], q)
    D = np.zeros((len(subs), len(subs)), dtype=complex)
    for i, J in enumerate(subs):
        for j, K in enumerate(subs):
            D[i, j] = np.linalg.det(Hinv[np.ix_(J, K)]) if q else 1.0
    return D


def field_inner(f, g):
    """L2 pairing with metric contractions, by Parseval over modes."""
    _check_same_type(f, g)
    H = f.torus.metric
    Hinv = np.linalg.inv(H)
    D = _minor_matrix(Hinv, f.q)
    vol = volume(f.torus)
    total = 0.0 + 0.0j
    for k, a in f.coeffs.items():
        b = g.coeffs.get(k)
        if b is None:
            continue
        if f.vector:
            total += np.einsum("jv,kw,jk,vw->", a, np.conj(b), D, H)
        else:
            total += np.einsum("j,k,jk->", a, np.conj(b), D)
    return complex(vol * total)


def field_norm(f):
    return math.sqrt(max(field_inner(f, f).real, 0.0))


def wp_inner(phi1, phi2):
    """Weil-Petersson pairing <phi1, phi2> = int Tr(phi1 conj(phi2)) vol(g)."""
    if phi1.q != 1 or not phi1.vector:
        raise InvalidInputError("wp_inner expects (0,1) T^{1,0} fields")
    return field_inner(phi1, phi2)


@dataclass
class WPGram:
    """Gram matrix of a basis of Beltrami differentials."""

    basis_size: int
    gram: np.ndarray

    def csv_rows(self):
        rows = []
        for i in range(self.basis_size):
            for j in range(self.basis_size):
                rows.append((i, j, self.gram[i, j].real, self.gram[i, j].imag))
        return rows


def wp_gram(basis):
    N = len(basis)
    g = np.zeros((N, N), dtype=complex)
    for i in range(N):
        for j in range(N):
            g[i, j] = wp_inner(basis[i], basis[j])
    return WPGram(basis_size=N, gram=g)


def pointwise_trace(values1, values2, H, Hinv):
    """Tr(phi1 conj(phi2)) at grid points from evaluate() outputs (q=1)."""
    return np.einsum("mjv,mkw,jk,vw->m", values1, np.conj(values2), Hinv, H)


def wedge_trace_identity(phi_i, phi_j, torus=None, grid_per_axis=None):
    """Fundamental-domain quadrature of the pointwise trace against the
    Parseval value; returns (lhs, rhs, |lhs - rhs|)."""
    torus = torus or phi_i.torus
    kmax = max(phi_i.max_mode_norm(), phi_j.max_mode_norm())
    N = grid_per_axis or max(2 * kmax + 1, 3)
    dim = 2 * torus.n
    axes = [np.arange(N) / N] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    U = np.stack([m.ravel() for m in mesh], axis=1)
    v1 = phi_i.evaluate(U)
    v2 = phi_j.evaluate(U)
    H = torus.metric
    Hinv = np.linalg.inv(H)
    lhs = complex(pointwise_trace(v1, v2, H, Hinv).mean() * volume(torus))
    rhs = wp_inner(phi_i, phi_j)
    return lhs, rhs, abs(lhs - rhs)


def symmetry_check(phi, torus=None, grid_per_axis=None):
    """Max over grid points of |phi_{k,l} - phi_{l,k}| for the lowered
    field phi_{k,l} = g_{jk} phi^j_l; zero for harmonic fields of the
    polarized (symmetric) type."""
    torus = torus or phi.torus
    if phi.q != 1 or not phi.vector:
        raise InvalidInputError("symmetry_check expects (0,1) T^{1,0} fields")
    kmax = phi.max_mode_norm()
    N = grid_per_axis or max(2 * kmax + 1, 3)
    dim = 2 * torus.n
    axes = [np.arange(N) / N] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    U = np.stack([m.ravel() for m in mesh], axis=1)
    vals = phi.evaluate(U)  # (m, form a, vector j)
    H = torus.metric
    lowered = np.einsum("jk,maj->mka", H, vals)  # phi_{k,a}
    asym = np.abs(lowered - np.swapaxes(lowered, 1, 2))
    return float(asym.max()) if asym.size else 0.0


# ---------------------------------------------------------------------------
# derivation-extension trace
# ---------------------------------------------------------------------------

def _perm_parity(seq):
    inv = 0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                inv += 1
    return -1 if inv % 2 else 1


def derivation_trace(F, q, tol=1e-12):
    """Trace of the derivation extension of F on Lambda^q C^n by basis
    enumeration; asserts agreement with C(n-1,q-1) * Tr F and returns
    the enumerated value."""
    F = np.asarray(F, dtype=complex)
    n = F.shape[0]
    if F.shape != (n, n):
        raise InvalidInputError("F must be square")
    if not 1 <= q <= n:
        raise InvalidInputError(f"q must lie in [1, {n}]")
    subs = _subsets(n, q)
    index = {J: i for i, J in enumerate(subs)}
    M = np.zeros((len(subs), len(subs)), dtype=complex)
    for J_i, J in enumerate(subs):
        for pos in range(q):
            for m in range(n):
                if F[m, J[pos]] == 0:
                    continue
                replaced = list(J)
                replaced[pos] = m
                if len(set(replaced)) < q:
                    continue
                K = tuple(sorted(replaced))
                M[index[K], J_i] += _perm_parity(replaced) * F[m, J[pos]]
    enumerated = complex(np.trace(M))
    expected = math.comb(n - 1, q - 1) * complex(np.trace(F))
    scale = max(1.0, abs(expected))
    if abs(enumerated - expected) > tol * scale:
        raise AssertionError(
            f"derivation trace {enumerated} != {expected} (n={n}, q={q})"
        )
    return enumerated


# ---------------------------------------------------------------------------
# power-series solver for the integrability equation
# ---------------------------------------------------------------------------

@dataclass
class KuranishiSolution:
    """Power-series Beltrami family phi(tau) = sum_I phi_I tau^I.

    coeffs maps multi-indices (exponent tuples over the basis) to
    TensorFields; residual_norms[m-1] is the L2 norm of the full
    integrability expression of the partial sum through order m.
    """

    first_order: list
    order: int
    coeffs: dict
    residual_norms: list
    mode_radius: int

    def field_at(self, taus):
        """Evaluate the series at parameter values taus."""
        taus = list(taus)
        total = None
        for I, f in sorted(self.coeffs.items()):
            w = 1.0
            for e, t in zip(I, taus):
                w *= t**e
            term = f.scaled(w)
            total = term if total is None else total.plus(term)
        return total

    def to_json_obj(self):
        coeff_obj = {}
        for I, f in sorted(self.coeffs.items()):
            modes = []
            for k in sorted(f.coeffs):
                arr = f.coeffs[k]
                modes.append({
                    "k": list(k),
                    "components": [
                        [[c.real, c.imag] for c in row] for row in np.atleast_2d(arr)
                    ],
                })
            coeff_obj[",".join(map(str, I))] = modes
        return {
            "basis_size": len(self.first_order),
            "order": self.order,
            "mode_radius": self.mode_radius,
            "residual_norms": list(self.residual_norms),
            "coefficients": coeff_obj,
        }


def _multi_indices(N, total):
    if N == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _multi_indices(N - 1, total - head):
            yield (head,) + rest


def _check_radius(f, R):
    if f.max_mode_norm() > R:
        raise ModeOverflowError(
            f"mode |k|_inf = {f.max_mode_norm()} exceeds declared radius {R}"
        )


def maurer_cartan_terms(coeffs, max_total):
    """Multi-index components of dbar(phi) + 1/2 [phi, phi] for a series."""
    out = {}
    for I, f in coeffs.items():
        if sum(I) <= max_total:
            out[I] = dbar(f)
    items = list(coeffs.items())
    for J, fJ in items:
        for Jp, fJp in items:
            I = tuple(a + b for a, b in zip(J, Jp))
            if sum(I) > max_total:
                continue
            term = bracket(fJ, fJp).scaled(0.5)
            out[I] = out[I].plus(term) if I in out else term
    return out


def synthetic_seed(torus=None, delta=0.05, eps=0.01):
    """Shipped n = 2 first-order datum with a nonzero self-bracket.

    One damped constant direction plus one two-mode direction whose
    modes are dbar-closed (form part parallel to the covector) but not
    coclosed; the cross brackets feed a geometrically decaying
    correction cascade.  Not harmonic: pass require_harmonic=False.
    """
    torus = torus or ComplexTorus.product([1j, 1j])
    if torus.n != 2:
        raise InvalidInputError("synthetic seed is built for n = 2")
    const = TensorField.constant_beltrami(
        torus, delta * np.array([[0.0, 1.0], [1.0, 0.0]])
    )
    a1 = np.zeros((2, 2), dtype=complex)
    a1[0, 1] = eps  # mode (1,0,0,0): dzbar^1 (its own covector) x d_2
    a2 = np.zeros((2, 2), dtype=complex)
    a2[1, 0] = eps  # mode (0,1,0,0): dzbar^2 x d_1
    waves = TensorField.single_mode(torus, (1, 0, 0, 0), 1, a1).plus(
        TensorField.single_mode(torus, (0, 1, 0, 0), 1, a2)
    )
    return torus, [const, waves]


def picard_solve(first_order, K, R, tol=1e-10, require_harmonic=True):
    """Solve the integrability equation order by order.

    phi_I for |I| = m is -1/2 dbar*(G(sum_{J+J'=I} [phi_J, phi_J'])),
    which keeps every higher coefficient dbar*-exact.  Modes beyond the
    declared radius R raise instead of being truncated.  Harmonicity of
    the first-order data is enforced unless explicitly waived (the
    waiver exercises the contraction on synthetic seeds).
    """
    if K < 1:
        raise InvalidInputError("order K must be >= 1")
    N = len(first_order)
    if N == 0:
        raise InvalidInputError("need at least one first-order field")
    for f in first_order:
        if f.q != 1 or not f.vector:
            raise InvalidInputError("first-order data must be (0,1) T^{1,0} fields")
        _check_radius(f, R)
        if require_harmonic:
            scale = max(field_norm(f), 1e-300)
            defect = field_norm(dbar(f)) + field_norm(dbar_star(f))
            if defect > 1e-10 * scale:
                raise InvalidInputError(
                    f"first-order field is not harmonic (defect {defect:.3e})"
                )
    coeffs = {}
    for i, f in enumerate(first_order):
        I = tuple(1 if j == i else 0 for j in range(N))
        coeffs[I] = coeffs[I].plus(f) if I in coeffs else f.copy()
    residual_norms = []
    for m in range(1, K + 1):
        if m >= 2:
            for I in _multi_indices(N, m):
                source = None
                for J, fJ in list(coeffs.items()):
                    sJ = sum(J)
                    if not 1 <= sJ <= m - 1:
                        continue
                    Jp = tuple(a - b for a, b in zip(I, J))
                    if any(v < 0 for v in Jp) or Jp not in coeffs:
                        continue
                    term = bracket(fJ, coeffs[Jp])
                    source = term if source is None else source.plus(term)
                if source is None or not source.coeffs:
                    continue
                _check_radius(source, R)
                phi_I = dbar_star(green(source)).scaled(-0.5)
                if phi_I.coeffs:
                    _check_radius(phi_I, R)
                    coeffs[I] = phi_I
        mc = maurer_cartan_terms(coeffs, 2 * m)
        full_sq = sum(field_inner(f, f).real for f in mc.values())
        low_sq = sum(
            field_inner(f, f).real for I, f in mc.items() if sum(I) <= m
        )
        residual_norms.append(math.sqrt(max(full_sq, 0.0)))
        if math.sqrt(max(low_sq, 0.0)) > tol:
            raise NonConvergenceError(
                f"integrability defect at order {m} exceeds tol {tol:g}",
                achieved=math.sqrt(low_sq),
            )
    return KuranishiSolution(
        first_order=list(first_order),
        order=K,
        coeffs=coeffs,
        residual_norms=residual_norms,
        mode_radius=R,
    )
