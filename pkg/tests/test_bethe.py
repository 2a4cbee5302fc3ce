import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhdimer.approx import first_excited_reduced_large_c, lambda_linear
from bhdimer.bethe import (
    BetheState,
    SolverOptions,
    dump_state,
    energy_from_roots,
    equidistant_init,
    first_excited_init,
    jacobian,
    load_state,
    residual,
    scaled_residual_norm,
    shift_state,
    shift_transform,
    solve_first_excited,
    solve_ground,
    state_from_dict,
    state_to_dict,
    validate_state,
)
from bhdimer.errors import (
    LengthMismatch,
    NoConvergence,
    NonRealEnergy,
    ParameterError,
    RegimeBoundary,
    ZeroRoot,
)
from bhdimer.exact import reduced_spectrum
from bhdimer.model import ReducedParams

from test_exact import FROZEN_LEVELS


def test_residual_single_root():
    r = ReducedParams(0.8, 0.3, 1)
    lam = 0.9
    assert residual([lam], r)[0] == pytest.approx(0.8 * lam * (0.8 * lam + 0.3) - 1)
    root = (-0.3 + math.sqrt(0.09 + 4)) / (2 * 0.8)
    assert abs(residual([root], r)[0]) < 1e-15


def test_residual_and_jacobian_at_minus_one():
    r = ReducedParams(1.0, 0.0, 1)
    assert residual([-1.0], r)[0] == 0
    assert jacobian([-1.0], r)[0, 0] == -2


def test_residual_length_checked():
    with pytest.raises(LengthMismatch):
        residual([1.0, 2.0], ReducedParams(1.0, 0.0, 3))


def _fd_jacobian(roots, r, step):
    N = len(roots)
    J = np.zeros((N, N), dtype=complex)
    for k in range(N):
        h = np.zeros(N, dtype=complex)
        h[k] = step
        J[:, k] = (residual(roots + h, r) - residual(roots - h, r)) / (2 * step)
    return J


def test_jacobian_fixed_example(rng):
    roots = rng.normal(size=3) + 1j * rng.normal(size=3)
    r = ReducedParams(0.7, 0.3, 3)
    J = jacobian(roots, r)
    fd = _fd_jacobian(roots, r, 1e-6 * max(1, np.abs(roots).max()))
    assert np.allclose(J, fd, rtol=1e-5, atol=1e-5 * np.abs(J).max())


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    N=st.integers(1, 7),
    c=st.floats(0.1, 3),
    delta=st.floats(-2, 2),
)
def test_jacobian_matches_finite_differences(seed, N, c, delta):
    g = np.random.default_rng(seed)
    roots = g.normal(size=N) * 2 + 1j * g.normal(size=N)
    r = ReducedParams(c, delta, N)
    J = jacobian(roots, r)
    fd = _fd_jacobian(roots, r, 1e-6 * max(1, np.abs(roots).max()))
    assert np.allclose(J, fd, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(J).max()))


def test_equidistant_init_examples():
    assert np.allclose(equidistant_init(ReducedParams(0.3, 0.5, 3)), [-5 / 3, -5 / 3 - 0.3, -5 / 3 - 0.6])
    assert list(equidistant_init(ReducedParams(1.0, 0.0, 2))) == [0.0, -1.0]
    steps = np.diff(equidistant_init(ReducedParams(0.37, 0.2, 9)))
    assert np.allclose(steps, -0.37, rtol=0, atol=1e-15)


def test_ground_state_reference_point():
    r = ReducedParams(0.3, 0.5, 15)
    s = solve_ground(r)
    assert s.sigma == 0
    assert s.residual_norm <= 1e-10
    assert scaled_residual_norm(s.roots, r) <= 1e-10
    assert np.all(s.roots.imag == 0) and np.all(s.roots.real < 0)
    anchor = -0.5 / 0.3
    assert abs(s.roots.real.max() - anchor) <= 0.1 * abs(anchor)
    assert s.energy == pytest.approx(FROZEN_LEVELS[(0.3, 0.5, 15)][0], rel=1e-8)
    report = validate_state(s)
    assert report.passed, report.as_dict()
    assert report.values["gap_ok"] and report.values["top_root_near_anchor"]


def test_single_particle_ground_state():
    s = solve_ground(ReducedParams(1.0, 0.0, 1))
    assert s.roots[0] == pytest.approx(-1.0, abs=1e-12)
    assert s.energy == pytest.approx(-1.0, abs=1e-12)


def test_strong_coupling_ground_state():
    s = solve_ground(ReducedParams(2.0, 0.5, 50))
    assert s.residual_norm <= 1e-10
    roots = np.sort(s.roots.real)[::-1]
    assert np.all(roots < 0)
    assert np.all(-np.diff(roots) >= 0.95 * 2.0)
    assert s.energy == pytest.approx(FROZEN_LEVELS[(2.0, 0.5, 50)][0], rel=1e-8)


def test_continuation_strategy_agrees():
    r = ReducedParams(0.2, 0.5, 30)
    direct = solve_ground(r)
    cont = solve_ground(r, SolverOptions(strategy="continuation"))
    assert cont.continuation_steps > 0
    assert cont.energy == pytest.approx(direct.energy, rel=1e-10)


def test_no_convergence_carries_trace():
    with pytest.raises(NoConvergence) as info:
        solve_ground(ReducedParams(0.2, 0.5, 50), SolverOptions(max_iter=1, strategy="continuation"))
    assert info.value.trace
    assert info.value.exit_code == 3


def test_energy_check_option():
    s = solve_ground(ReducedParams(0.5, 1.0, 15), SolverOptions(energy_check=True))
    assert s.energy == pytest.approx(FROZEN_LEVELS[(0.5, 1.0, 15)][0], rel=1e-8)


def test_solver_requires_nonnegative_delta():
    with pytest.raises(ParameterError):
        solve_ground(ReducedParams(1.0, -0.5, 4))


@pytest.mark.parametrize("key", [(0.5, 1.0, 15), (0.5, 1.0, 40), (1.2, 1.0, 40), (1.0, 0.5, 10)])
def test_first_excited_matches_exact(key):
    s = solve_first_excited(ReducedParams(*key))
    assert s.sigma == 1
    assert s.residual_norm <= 1e-10
    assert s.energy == pytest.approx(FROZEN_LEVELS[key][1], rel=1e-8)


def test_first_excited_large_c_near_shifted_ground():
    r = ReducedParams(1.2, 1.0, 100)
    E = solve_first_excited(r).energy
    assert E == pytest.approx(reduced_spectrum(r).energies[1], rel=0.02)
    assert E == pytest.approx(first_excited_reduced_large_c(r).value, rel=0.05)


def test_first_excited_small_c_structure():
    r = ReducedParams(0.5, 1.0, 100)
    s = solve_first_excited(r)
    positive = s.roots.real[s.roots.real > 0]
    assert positive.size == 1
    # the linearized estimate has the right order of magnitude
    assert positive[0] == pytest.approx(lambda_linear(r), rel=1.0)
    assert s.energy == pytest.approx(reduced_spectrum(r).energies[1], rel=1e-8)


def test_first_excited_large_c_structure():
    s = solve_first_excited(ReducedParams(2.0, 0.5, 8))
    top = s.roots.real.max()
    assert 0 < top < 1e-6
    others = np.sort(s.roots.real)[::-1][1:]
    assert others[0] == pytest.approx(-2.0, rel=1e-3)


def test_first_excited_init_matches_layout():
    r = ReducedParams(0.5, 1.0, 20)
    seed = first_excited_init(r)
    assert seed.size == 20
    assert seed[0] > 0
    # second root sits just below the anchor -delta/c = -2, within one c
    assert -2.0 - 0.5 < seed[1] < -2.0


@pytest.mark.parametrize("c,delta", [(1.0, 1.0), (math.sqrt(0.5 + 1e-8), 0.5)])
def test_first_excited_boundary_guard(c, delta):
    with pytest.raises(RegimeBoundary) as info:
        solve_first_excited(ReducedParams(c, delta, 10))
    assert info.value.exit_code == 4


def test_energy_from_roots_single_factor():
    s = BetheState([-1.0], 0, ReducedParams(1.0, 0.0, 1), 0.0)
    assert energy_from_roots(s) == -1.0


def test_energy_of_equidistant_roots_telescopes():
    r = ReducedParams(0.3, 0.5, 15)
    E = energy_from_roots((equidistant_init(r), r))
    assert E == pytest.approx(-15 / 1.76, rel=1e-12)


def test_energy_large_n_log_product_agrees():
    r = ReducedParams(0.6, 0.5, 600)
    roots = equidistant_init(r)
    assert energy_from_roots((roots, r)) == pytest.approx(-600 / (0.36 * 599 + 0.5), rel=1e-9)


def test_energy_zero_root():
    with pytest.raises(ZeroRoot):
        energy_from_roots(([0.0, -1.0], ReducedParams(1.0, 0.0, 2)))


def test_energy_non_real():
    with pytest.raises(NonRealEnergy):
        energy_from_roots(([1j], ReducedParams(1.0, 0.0, 1)))


def test_energy_conjugate_pair_is_real():
    r = ReducedParams(1.0, 0.0, 2)
    E = energy_from_roots(([-1 + 0.5j, -1 - 0.5j], r))
    assert isinstance(E, float)


def test_validate_flags_duplicates_and_lonely_complex_roots():
    r = ReducedParams(1.0, 0.5, 2)
    dup = validate_state(BetheState([-1.0, -1.0], 0, r, 0.0))
    assert not dup.checks["distinct"]
    lonely = validate_state(BetheState([1j], 3, ReducedParams(1.0, 0.5, 1), 0.0))
    assert not lonely.checks["conjugate_closed"]
    assert "conjugate_closed" in lonely.failed()


def test_shift_zero_delta_is_identity():
    s = solve_ground(ReducedParams(0.8, 0.0, 6))
    roots, params = shift_transform(s)
    assert np.array_equal(roots, s.roots)
    assert params.delta == 0.0


@pytest.mark.parametrize("sigma", [0, 1])
def test_shift_solves_mirrored_equations(sigma):
    r = ReducedParams(0.3, 0.5, 15)
    s = solve_ground(r) if sigma == 0 else solve_first_excited(r)
    shifted = shift_state(s)
    assert shifted.params == ReducedParams(0.3, -0.5, 15)
    assert np.allclose(shifted.roots, s.roots + 0.5 / 0.3, rtol=0, atol=1e-12)
    assert shifted.residual_norm <= 1e-9
    assert scaled_residual_norm(shifted.roots, shifted.params) <= 1e-9
    # the energy is a different function of the shifted roots, but the spectrum
    # of H(c, -delta) is that of H(c, delta) minus delta N
    mirrored = reduced_spectrum(shifted.params).energies[sigma]
    assert mirrored == pytest.approx(s.energy - 0.5 * 15, rel=1e-9)


def test_shift_is_an_involution():
    s = solve_first_excited(ReducedParams(2.0, 0.5, 12))
    back = shift_state(shift_state(s))
    assert back.params == s.params
    assert np.array_equal(back.roots, s.roots)


def test_state_json_round_trip(tmp_path):
    s = solve_first_excited(ReducedParams(0.5, 1.0, 15))
    data = json.loads(json.dumps(state_to_dict(s)))
    assert set(data) >= {"sigma", "c", "delta", "N", "roots", "residual_norm"}
    again = state_from_dict(data)
    assert np.array_equal(again.roots, s.roots)
    assert again.residual_norm == s.residual_norm
    assert again.energy == s.energy
    path = tmp_path / "state.json"
    dump_state(s, path)
    loaded = load_state(path)
    assert np.array_equal(loaded.roots, s.roots)
    assert loaded.params == s.params


def test_minimal_state_json():
    data = {"sigma": 0, "c": 1.0, "delta": 0.0, "N": 1, "roots": [[-1.0, 0.0]], "residual_norm": 0.0}
    s = state_from_dict(data)
    assert s.energy == -1.0
    assert s.chain is None


@pytest.mark.parametrize("c,delta,N", [(3.0, 0.5, 100), (2.0, 0.5, 200), (0.3, 0.5, 200), (1.2, 1.0, 300)])
def test_large_n_levels_match_diagonalization(c, delta, N):
    # deep chains put root offsets far below double precision; both levels must still converge
    r = ReducedParams(c, delta, N)
    exact = reduced_spectrum(r).energies
    assert solve_ground(r).energy == pytest.approx(exact[0], rel=1e-8)
    assert solve_first_excited(r).energy == pytest.approx(exact[1], rel=1e-8)
