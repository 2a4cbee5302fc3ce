import io
import math

import numpy as np
import pytest

from bhdimer.errors import IndexOutOfRange
from bhdimer.exact import (
    TridiagonalMatrix,
    build_tridiagonal,
    eigen_spectrum,
    format_float,
    free_spectrum,
    physical_spectrum,
    reduced_spectrum,
    spectrum_trace,
    write_spectrum_csv,
    zero_tunneling_spectrum,
)
from bhdimer.model import PhysicalParams, ReducedParams

from conftest import mp_levels

# lowest two levels from 40-digit mpmath diagonalization
FROZEN_LEVELS = {
    (0.3, 0.5, 15): (-7.6083535425258106449, -5.9049598060350687825),
    (1.0, 0.5, 5): (-1.1215433252300382319, 0.9926123385795106487),
    (1.0, 0.5, 10): (-1.0533399759921287046, 3.8200995946911358978),
    (2.0, 0.5, 50): (-0.25445304603268554777, 24.7442453670439277),
    (0.5, 1.0, 15): (-3.3019666459600149686, 0.87225636063838142728),
    (0.5, 1.0, 40): (-3.7185937459345958781, 6.8626171742968789168),
    (1.2, 1.0, 40): (-0.69979175540561860525, 39.2748260047810603),
}


@pytest.mark.parametrize("delta", [0.0, 0.5, 2.0])
def test_two_level_closed_form(delta):
    got = reduced_spectrum(ReducedParams(0.7, delta, 1)).energies
    root = math.sqrt(delta * delta + 4)
    assert got == pytest.approx([(delta - root) / 2, (delta + root) / 2], abs=1e-12)


@pytest.mark.parametrize("key", sorted(FROZEN_LEVELS))
def test_frozen_levels(key):
    got = reduced_spectrum(ReducedParams(*key)).energies[:2]
    assert np.allclose(got, FROZEN_LEVELS[key], rtol=1e-12, atol=1e-13)


def test_mpmath_oracle_small_random(rng):
    for _ in range(3):
        c, delta, N = rng.uniform(0.2, 2), rng.uniform(0, 2), int(rng.integers(2, 12))
        got = reduced_spectrum(ReducedParams(c, delta, N)).energies[:2]
        assert np.allclose(got, mp_levels(c, delta, N), rtol=1e-12, atol=1e-12)


def test_trace_identity(rng):
    for _ in range(10):
        r = ReducedParams(rng.uniform(0.1, 3), rng.uniform(0, 3), int(rng.integers(1, 200)))
        total = reduced_spectrum(r).energies.sum()
        assert total == pytest.approx(spectrum_trace(r), rel=1e-9)


def test_eigenvectors_orthonormal_with_sign_convention():
    spec = reduced_spectrum(ReducedParams(0.8, 0.4, 12), want_vectors=True)
    Q = spec.amplitudes
    assert np.allclose(Q.T @ Q, np.eye(13), atol=1e-12)
    for s in range(13):
        col = Q[:, s]
        assert col[np.argmax(np.abs(col))] > 0
    m = build_tridiagonal(ReducedParams(0.8, 0.4, 12))
    assert np.allclose(m.to_dense() @ Q, Q * spec.energies, atol=1e-11)


def test_matvec_matches_dense(rng):
    m = build_tridiagonal(ReducedParams(1.3, 0.2, 9))
    v = rng.normal(size=10)
    assert np.allclose(m.matvec(v), m.to_dense() @ v)
    assert m.frobenius_norm() == pytest.approx(np.linalg.norm(m.to_dense()))


def test_tridiagonal_shape_checked():
    with pytest.raises(ValueError):
        TridiagonalMatrix(np.zeros(3), np.zeros(3))


def test_eigen_spectrum_sorted():
    m = TridiagonalMatrix(np.array([3.0, 1.0, 2.0]), np.array([0.0, 0.0]))
    assert list(eigen_spectrum(m).energies) == [1.0, 2.0, 3.0]


@pytest.mark.parametrize("sigma", [0, 3, 7])
def test_free_spectrum(sigma):
    p = PhysicalParams(-0.3, -0.9, 0.0, 0.0, 7)
    assert free_spectrum(p, sigma) == pytest.approx(physical_spectrum(p)[sigma], abs=1e-12)


def test_free_spectrum_index_checked():
    with pytest.raises(IndexOutOfRange):
        free_spectrum(PhysicalParams(-0.3, -0.9, 0.0, 0.0, 7), 8)


def test_zero_tunneling_levels_match_diagonal():
    r = ReducedParams(0.9, 0.6, 11)
    levels = sorted(zero_tunneling_spectrum(r, n) for n in range(12))
    assert np.allclose(levels, np.sort(build_tridiagonal(r).diag))


def test_format_float_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 6.02e23):
        s = format_float(x)
        assert float(s) == x
    assert format_float(0.1) == "0.10000000000000001"


def test_spectrum_csv_reduced():
    buf = io.StringIO()
    write_spectrum_csv(buf, ReducedParams(1.0, 0.5, 2))
    lines = buf.getvalue().split("\n")
    assert lines[0] == "sigma,energy"
    assert len([l for l in lines[1:] if l and not l.startswith("#")]) == 3
    assert lines[-2].startswith("# trace")
    assert "\r" not in buf.getvalue()


def test_spectrum_csv_physical_column():
    p = PhysicalParams(-0.25, -1.0, -0.4, 0.0, 100)
    buf = io.StringIO()
    write_spectrum_csv(buf, p)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "sigma,energy,physical_energy"
    rows = [l.split(",") for l in lines[1:] if not l.startswith("#")]
    assert len(rows) == 101
    phys = np.array([float(r[2]) for r in rows])
    assert np.allclose(phys, physical_spectrum(p), rtol=1e-12)
