"""Exact diagonalization of the reduced Hamiltonian.

In the number basis |N-n>_a |n>_b the reduced Hamiltonian is a real symmetric
tridiagonal matrix with diagonal  delta*n + c^2*n*(N-n)  and off-diagonal
sqrt((n+1)(N-n)).  It is handed to LAPACK's symmetric-tridiagonal driver, so
N in the thousands costs milliseconds.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import ConvergenceFailure, IndexOutOfRange
from .model import PhysicalParams, ReducedParams, map_energy_to_physical, reduce

__all__ = [
    "TridiagonalMatrix",
    "Spectrum",
    "build_tridiagonal",
    "eigen_spectrum",
    "reduced_spectrum",
    "physical_spectrum",
    "free_spectrum",
    "zero_tunneling_spectrum",
    "spectrum_trace",
    "write_spectrum_csv",
    "format_float",
]


def format_float(x: float) -> str:
    """17 significant digits, the width every CSV in the package uses."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TridiagonalMatrix:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        offdiag = np.asarray(self.offdiag, dtype=float)
        if diag.ndim != 1 or offdiag.shape != (max(diag.size - 1, 0),):
            raise ValueError("offdiag must have exactly one entry fewer than diag")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def size(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        out = self.diag[:, None] * v if v.ndim == 2 else self.diag * v
        out = out.astype(np.result_type(out, self.offdiag), copy=True)
        out[:-1] += self.offdiag.reshape((-1,) + (1,) * (v.ndim - 1)) * v[1:]
        out[1:] += self.offdiag.reshape((-1,) + (1,) * (v.ndim - 1)) * v[:-1]
        return out

    def frobenius_norm(self) -> float:
        return math.sqrt(float(self.diag @ self.diag + 2.0 * self.offdiag @ self.offdiag))


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues; ``amplitudes[:, s]`` is the unit eigenvector of level s.

    Vector components are indexed by n, the occupation of mode b.
    """

    energies: np.ndarray
    amplitudes: np.ndarray | None = None

    def __len__(self) -> int:
        return self.energies.size


def build_tridiagonal(r: ReducedParams) -> TridiagonalMatrix:
    N = r.N
    n = np.arange(N + 1, dtype=float)
    diag = r.delta * n + r.c2 * n * (N - n)
    m = n[:-1]
    offdiag = np.sqrt((m + 1.0) * (N - m))
    return TridiagonalMatrix(diag, offdiag)


def eigen_spectrum(m: TridiagonalMatrix, want_vectors: bool = False) -> Spectrum:
    try:
        if want_vectors:
            w, v = eigh_tridiagonal(m.diag, m.offdiag, lapack_driver="stemr")
        else:
            w = eigh_tridiagonal(m.diag, m.offdiag, eigvals_only=True, lapack_driver="stemr")
            v = None
    except LinAlgError as exc:
        raise ConvergenceFailure(f"tridiagonal eigensolver failed: {exc}") from exc
    order = np.argsort(w, kind="stable")
    w = w[order]
    if v is not None:
        v = v[:, order]
        # Deterministic sign: the largest-magnitude component of each column is positive.
        pivot = np.argmax(np.abs(v), axis=0)
        signs = np.sign(v[pivot, np.arange(v.shape[1])])
        signs[signs == 0] = 1.0
        v = v * signs
    return Spectrum(w, v)


def reduced_spectrum(r: ReducedParams, want_vectors: bool = False) -> Spectrum:
    return eigen_spectrum(build_tridiagonal(r), want_vectors)


def physical_spectrum(p: PhysicalParams) -> np.ndarray:
    """Sorted spectrum of the physical Hamiltonian for any sign of the couplings.

    Built directly from the physical matrix (not through the reduced mapping),
    so it doubles as an independent check of that mapping.
    """
    N = p.N
    n = np.arange(N + 1, dtype=float)
    diag = p.epsilon * (N - 2 * n) + (p.U - p.V) * n * (n - N) + 0.5 * p.U * N * (N - 1)
    m = n[:-1]
    offdiag = -p.J * np.sqrt((m + 1.0) * (N - m))
    return eigen_spectrum(TridiagonalMatrix(diag, offdiag)).energies


def free_spectrum(p: PhysicalParams, sigma: int) -> float:
    """Level ``sigma`` of the non-interacting (U = V = 0) problem."""
    if not 0 <= sigma <= p.N:
        raise IndexOutOfRange(f"sigma={sigma} outside 0..{p.N}")
    return math.hypot(p.epsilon, p.J) * (2 * sigma - p.N)


def zero_tunneling_spectrum(r: ReducedParams, n: int) -> float:
    """Energy of the number state with n bosons in mode a when tunneling is switched off."""
    if not 0 <= n <= r.N:
        raise IndexOutOfRange(f"n={n} outside 0..{r.N}")
    return (r.N - n) * (r.delta + r.c2 * n)


def spectrum_trace(r: ReducedParams) -> float:
    N = r.N
    n = np.arange(N + 1, dtype=float)
    return float(np.sum(r.delta * n + r.c2 * n * (N - n)))


def write_spectrum_csv(fh, params, spectrum: Spectrum | None = None) -> None:
    """Write ``sigma,energy`` rows (plus ``physical_energy`` for physical input).

    A trailing ``#`` comment line records the trace identity check.
    """
    physical = isinstance(params, PhysicalParams)
    r = reduce(params) if physical else params
    if spectrum is None:
        spectrum = reduced_spectrum(r)
    w = csv.writer(fh, lineterminator="\n")
    header = ["sigma", "energy"] + (["physical_energy"] if physical else [])
    w.writerow(header)
    for s, e in enumerate(spectrum.energies):
        row = [str(s), format_float(e)]
        if physical:
            row.append(format_float(map_energy_to_physical(e, params)))
        w.writerow(row)
    total = float(np.sum(spectrum.energies))
    fh.write(f"# trace sum_energy={format_float(total)} sum_diag={format_float(spectrum_trace(r))}\n")
