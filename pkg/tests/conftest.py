"""Independent oracles shared by the test modules."""
import itertools
import math

import mpmath as mp
import numpy as np
import pytest


def mp_levels(c, delta, N, count=2, dps=40):
    """Lowest eigenvalues of the reduced Hamiltonian via mpmath."""
    with mp.workdps(dps):
        c, delta = mp.mpf(c), mp.mpf(delta)
        H = mp.zeros(N + 1)
        for n in range(N + 1):
            H[n, n] = delta * n + c**2 * n * (N - n)
            if n < N:
                H[n, n + 1] = H[n + 1, n] = mp.sqrt((n + 1) * (N - n))
        return [float(e) for e in sorted(mp.eigsy(H, eigvals_only=True))[:count]]


def dense_physical(eps, J, U, V, N):
    """Physical Hamiltonian built from ladder operators in the full two-mode space."""
    d = N + 1
    a1 = np.diag(np.sqrt(np.arange(1, d)), 1)
    I = np.eye(d)
    a, b = np.kron(a1, I), np.kron(I, a1)
    na, nb = a.T @ a, b.T @ b
    H = (eps * (na - nb) - J * (a.T @ b + b.T @ a)
         + U / 2 * (a.T @ a.T @ a @ a + b.T @ b.T @ b @ b) + V * na @ nb)
    keep = [q * d + (N - q) for q in range(N + 1)]
    return H[np.ix_(keep, keep)]


def operator_expansion(roots, c, delta, N):
    """Ket and bra by literally applying the operator strings to the vacuum.

    Returns (ket, bra) indexed by a-occupation.
    """
    from bhdimer.fock import elem_sym

    d = N + 1
    a1 = np.diag(np.sqrt(np.arange(1, d)), 1)
    I = np.eye(d)
    a, b = np.kron(a1, I), np.kron(I, a1)
    ad, bd = a.T, b.T
    X = delta / c * bd + c * ad @ a @ bd + ad / c
    Y = b / c + c * a @ bd @ b
    vac = np.zeros(d * d)
    vac[0] = 1.0
    e = elem_sym(roots).e
    mpow = np.linalg.matrix_power
    ket = sum(e[m] * mpow(bd, m) @ mpow(X, N - m) @ vac for m in range(N + 1))
    bra = sum(e[m] * vac @ mpow(a, m) @ mpow(Y, N - m) for m in range(N + 1))
    keep = [q * d + (N - q) for q in range(N + 1)]
    off = np.setdiff1d(np.arange(d * d), keep)
    assert np.allclose(ket[off], 0) and np.allclose(bra[off], 0)
    return ket[keep], bra[keep]


def nested_sum_D(M, k):
    """D(M, k) from the nested-sum closed form (exponential cost, small M only)."""
    if k == 0 or k > M:
        return 0

    def inner(j, budget):
        # sum over n_1..n_{k-1} of k^n1 (k-1)^n2 ... 2^n_{k-1} with total <= M - k
        if j == 1:
            return 1
        return sum(j**n * inner(j - 1, budget - n) for n in range(budget + 1))

    return inner(k, M - k)


def subset_sums(roots):
    N = len(roots)
    return [sum(math.prod(c) for c in itertools.combinations(roots, m)) for m in range(N + 1)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
