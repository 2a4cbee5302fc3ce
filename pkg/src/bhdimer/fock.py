"""Fock-space expansion of Bethe vectors and expectation values.

The (unnormalized) right and left eigenvectors built from a root set are

    |Psi> = sum_m e_m (b^+)^m X^(N-m) |0>,     <Psi| = <0| sum_m e_m a^m Y^(N-m)

with X = (delta/c) b^+ + c a^+a b^+ + a^+/c and Y = b/c + c a b^+ b, and e_m
the elementary symmetric functions of the roots.  Expanding the operator
powers with the integer coefficients D(M, k) (Stirling numbers of the second
kind) gives closed coefficient sums over the number basis.

Both vectors here are indexed by k = occupation of mode a, i.e. the basis
state |k>_a |N-k>_b.  They are not conjugates of each other, so expectation
values are always formed as <Psi|A|Psi> / <Psi|Psi>.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _chain
from .bethe import BetheState, SolverOptions, equidistant_init, solve_ground
from .errors import InvalidIndex, NumericalOverflow, SizeGuard, ZeroNorm
from .exact import format_float
from .model import ReducedParams

__all__ = [
    "KET",
    "BRA",
    "OBSERVABLES",
    "FockVector",
    "SymmetricFunctions",
    "elem_sym",
    "exact_roots",
    "stirling_D",
    "ket_expansion",
    "bra_expansion",
    "observable_matrix",
    "expectation",
    "expectation_with_approx_roots",
    "write_fock_csv",
]

KET = "KET"
BRA = "BRA"

DEFAULT_MAX_N = 30


@dataclass(frozen=True)
class SymmetricFunctions:
    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "e", np.asarray(self.e))

    @property
    def N(self) -> int:
        return self.e.size - 1


@dataclass(frozen=True)
class FockVector:
    side: str
    coeffs: np.ndarray
    params: ReducedParams

    def __post_init__(self):
        if self.side not in (KET, BRA):
            raise ValueError(f"side must be {KET!r} or {BRA!r}")
        coeffs = np.asarray(self.coeffs)
        if coeffs.shape != (self.params.N + 1,):
            raise ValueError(f"expected {self.params.N + 1} coefficients, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise NumericalOverflow("non-finite Fock coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    def normalized(self) -> np.ndarray:
        """Unit-norm copy of the coefficients, largest-magnitude entry made positive."""
        v = self.coeffs / np.linalg.norm(self.coeffs)
        pivot = v[np.argmax(np.abs(v))]
        return v * (abs(pivot) / pivot)


def elem_sym(roots) -> SymmetricFunctions:
    """Coefficients of prod_i (x + lam_i), highest power first: e[m] is the m-th elementary symmetric function."""
    roots = np.asarray(roots, dtype=complex).ravel()
    if roots.size < 1:
        raise ValueError("need at least one root")
    e = np.zeros(roots.size + 1, dtype=complex)
    e[0] = 1.0
    for i, lam in enumerate(roots, start=1):
        e[1 : i + 1] = e[1 : i + 1] + lam * e[0:i]
    if np.all(np.abs(e.imag) <= 1e-9 * np.abs(e)):
        return SymmetricFunctions(e.real.copy())
    return SymmetricFunctions(e)


# Rows D(M, 0..M) of the recurrence, starting from D(0, 0) = 1.
_D_ROWS: list[tuple[int, ...]] = [(1,)]
_D_LOCK = threading.Lock()


def _d_row(M: int) -> tuple[int, ...]:
    if M < len(_D_ROWS):
        return _D_ROWS[M]
    with _D_LOCK:
        while len(_D_ROWS) <= M:
            prev = _D_ROWS[-1]
            m = len(_D_ROWS)
            row = [0] * (m + 1)
            for k in range(1, m + 1):
                row[k] = (k * prev[k] if k < m else 0) + prev[k - 1]
            _D_ROWS.append(tuple(row))
    return _D_ROWS[M]


def _d(M: int, k: int) -> int:
    """D(M, k) with the M = 0 row included (D(0, 0) = 1)."""
    if k > M:
        return 0
    return _d_row(M)[k]


def stirling_D(M: int, k: int) -> int:
    """D(M, k) = k D(M-1, k) + D(M-1, k-1), D(1, 1) = 1, zero for k > M."""
    if int(M) != M or int(k) != k or M < 1 or k < 0:
        raise InvalidIndex(f"D({M}, {k}) needs M >= 1 and k >= 0")
    return _d(int(M), int(k))


def _check_size(N: int, max_n: int) -> None:
    if N > max_n:
        raise SizeGuard(f"Fock expansion refused for N={N} > {max_n}")


_LN2 = math.log(2.0)


def _exact_exp(x: float) -> Fraction:
    """e^x as a dyadic rational to double relative precision, far below the double range too."""
    n = math.floor(x / _LN2)
    return Fraction(math.exp(x - n * _LN2)) * Fraction(2) ** n


def _exact_base(base: float, r: ReducedParams) -> Fraction:
    # the anchor -delta/c enters the equations exactly; a rounded anchor would
    # swamp offsets far below double resolution
    if base == -r.delta / r.c:
        return -Fraction(r.delta) / Fraction(r.c)
    if base == r.delta / r.c:
        return Fraction(r.delta) / Fraction(r.c)
    return Fraction(base)


def exact_roots(s: BetheState) -> tuple[list[Fraction], list[Fraction]]:
    """Real and imaginary parts of the roots as exact rationals.

    Roots that carry chain offsets are rebuilt from them, so gaps far below
    double resolution survive; the vectors depend on exactly those gaps.
    """
    r = s.params
    if s.chain is None:
        return ([Fraction(float(z.real)) for z in s.roots], [Fraction(float(z.imag)) for z in s.roots])
    c = Fraction(r.c)
    re: list[Fraction] = []
    for (kind, base), x in zip(s.chain.layout, s.chain.log_offsets):
        offset = _exact_exp(x)
        if kind == _chain.BELOW:
            re.append(_exact_base(base, r) - offset)
        elif kind == _chain.ABOVE:
            re.append(_exact_base(base, r) + offset)
        else:
            re.append(re[-1] - c - offset)
    return re, [Fraction(0)] * len(re)


def _exact_elem_sym(re: list[Fraction], im: list[Fraction]):
    """Elementary symmetric functions of complex rationals, as (real, imaginary) lists."""
    e_re = [Fraction(1)] + [Fraction(0)] * len(re)
    e_im = [Fraction(0)] * (len(re) + 1)
    for i, (a, b) in enumerate(zip(re, im), start=1):
        for m in range(i, 0, -1):
            e_re[m] += a * e_re[m - 1] - b * e_im[m - 1]
            e_im[m] += a * e_im[m - 1] + b * e_re[m - 1]
    return e_re, e_im


def _to_float(total: Fraction, scale: float, index: int) -> float:
    try:
        return float(total) * scale
    except OverflowError:
        raise NumericalOverflow(f"Fock coefficient {index} exceeds the double range") from None


def _coefficients(s: BetheState, max_n: int, term_sum) -> np.ndarray:
    """Run ``term_sum(k, e)`` for every basis index in exact arithmetic."""
    r = s.params
    _check_size(r.N, max_n)
    e_re, e_im = _exact_elem_sym(*exact_roots(s))
    has_imag = any(e_im)
    out = np.zeros(r.N + 1, dtype=complex if has_imag else float)
    for k in range(r.N + 1):
        index, scale, re = term_sum(k, e_re)
        out[index] = _to_float(re, scale, index)
        if has_imag:
            out[index] += 1j * _to_float(term_sum(k, e_im)[2], scale, index)
    return out


def ket_expansion(s: BetheState, max_n: int = DEFAULT_MAX_N) -> FockVector:
    """Coefficients of sum_m e_m (b^+)^m X^(N-m)|0> over |k>_a |N-k>_b.

    The sums are evaluated in exact rational arithmetic; they cancel heavily
    whenever the state concentrates near the ends of the basis.
    """
    r = s.params
    N = r.N
    c, delta = Fraction(r.c), Fraction(r.delta)
    c_pow = {p: c**p for p in range(-N, N + 1)}
    d_pow = [delta**p for p in range(N + 1)]

    def term_sum(k, e):
        total = Fraction(0)
        for m in range(N + 1):
            if not e[m]:
                continue
            inner = Fraction(0)
            for l in range(k, N - m + 1):
                dpow = N - m - l
                if dpow and not delta:
                    continue
                D = _d(l, k)
                if D:
                    inner += D * math.comb(N - m, l) * d_pow[dpow] * c_pow[-N + m + 2 * l - 2 * k]
            total += inner * e[m]
        return k, math.sqrt(math.factorial(k) * math.factorial(N - k)), total

    return FockVector(KET, _coefficients(s, max_n, term_sum), r)


def bra_expansion(s: BetheState, max_n: int = DEFAULT_MAX_N) -> FockVector:
    """Coefficients of <0| sum_m e_m a^m Y^(N-m) over <k|_a <N-k|_b.

    A term with b-occupation j (a-occupation N - j) reads
    sqrt(j! (N-j)!) c^(N-m-2j) D(N-m, j) e_m.
    """
    r = s.params
    N = r.N
    c = Fraction(r.c)
    c_pow = {p: c**p for p in range(-N, N + 1)}

    def term_sum(j, e):
        total = Fraction(0)
        for m in range(N - j + 1):
            D = _d(N - m, j)
            if D and e[m]:
                total += D * c_pow[N - m - 2 * j] * e[m]
        return N - j, math.sqrt(math.factorial(j) * math.factorial(N - j)), total

    return FockVector(BRA, _coefficients(s, max_n, term_sum), r)


OBSERVABLES = ("n_a", "n_b", "N", "a_bdag", "adag_b", "n_a_n_b", "H")


def observable_matrix(name: str, r: ReducedParams) -> np.ndarray:
    """Matrix of a named observable in the basis |k>_a |N-k>_b, k = 0..N.

    Entry [k', k] is <k'|A|k>.  'a_bdag' is a b^+ (moves a boson from a to
    b), 'adag_b' its adjoint, and 'H' the reduced Hamiltonian
    a^+ b + a b^+ + delta n_b + c^2 n_a n_b.
    """
    N = r.N
    k = np.arange(N + 1, dtype=float)
    if name == "n_a":
        return np.diag(k)
    if name == "n_b":
        return np.diag(N - k)
    if name == "N":
        return np.diag(np.full(N + 1, float(N)))
    if name == "n_a_n_b":
        return np.diag(k * (N - k))
    # <k-1| a b^+ |k> = sqrt(k (N - k + 1))
    hop = np.sqrt(k[1:] * (N - k[1:] + 1))
    lower = np.diag(hop, -1)
    if name == "a_bdag":
        return lower
    if name == "adag_b":
        return lower.T.copy()
    if name == "H":
        return lower + lower.T + np.diag(r.delta * (N - k) + r.c2 * k * (N - k))
    raise ValueError(f"unknown observable {name!r}; choose from {OBSERVABLES}")


def _resolve(obs, r: ReducedParams) -> np.ndarray:
    if isinstance(obs, str):
        return observable_matrix(obs, r)
    A = np.asarray(obs)
    if A.shape != (r.N + 1, r.N + 1):
        raise ValueError(f"observable matrix must be {(r.N + 1, r.N + 1)}, got {A.shape}")
    return A


def expectation(s: BetheState, obs, max_n: int = DEFAULT_MAX_N, return_imag: bool = False):
    """<Psi|A|Psi> / <Psi|Psi> from the bra and ket expansions.

    ``obs`` is a name from :data:`OBSERVABLES` or an (N+1) x (N+1) matrix in
    the a-occupation basis.  The real part is returned; with
    ``return_imag=True`` the pair (real, imaginary residue) is returned.
    """
    A = _resolve(obs, s.params)
    ket = ket_expansion(s, max_n).coeffs
    bra = bra_expansion(s, max_n).coeffs
    # rescale both sides before pairing so the overlap cannot underflow
    ket = ket / np.max(np.abs(ket))
    bra = bra / np.max(np.abs(bra))
    norm = bra @ ket
    if abs(norm) < 1e-300:
        raise ZeroNorm("<Psi|Psi> vanishes")
    value = (bra @ A @ ket) / norm
    value = complex(value)
    if return_imag:
        return value.real, value.imag
    return value.real


def expectation_with_approx_roots(r: ReducedParams, obs, opts: SolverOptions | None = None,
                                  max_n: int = DEFAULT_MAX_N):
    """Ground-state expectation from the equidistant roots and from solved roots.

    Returns (approximate, solved).
    """
    _check_size(r.N, max_n)
    approx_state = BetheState(equidistant_init(r), 0, r, math.nan)
    solved = solve_ground(r, opts)
    return expectation(approx_state, obs, max_n), expectation(solved, obs, max_n)


def write_fock_csv(fh, vec: FockVector) -> None:
    """CSV with header k,coefficient; complex coefficients are written as their real part."""
    fh.write("k,coefficient\n")
    for k, value in enumerate(vec.coeffs):
        fh.write(f"{k},{format_float(float(np.real(value)))}\n")
