import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhdimer.errors import NonAttractive, ParameterError, ZeroTunneling
from bhdimer.exact import physical_spectrum, reduced_spectrum
from bhdimer.model import (
    PhysicalParams,
    ReducedParams,
    load_params,
    map_energy_to_physical,
    params_from_dict,
    reduce,
    symmetry_images,
)

from conftest import dense_physical


def test_reduce_standard_point():
    r = reduce(PhysicalParams(-0.25, -1.0, -0.4, 0.0, 100))
    assert r.c == pytest.approx(math.sqrt(0.4), rel=1e-15)
    assert r.delta == 0.5
    assert r.N == 100


def test_reduce_rejects_zero_tunneling():
    with pytest.raises(ZeroTunneling):
        reduce(PhysicalParams(-0.25, 0.0, -0.4, 0.0, 10))


@pytest.mark.parametrize("U,V", [(0.4, 0.0), (0.0, 0.0), (-0.1, -0.1)])
def test_reduce_rejects_non_attractive(U, V):
    with pytest.raises(NonAttractive):
        reduce(PhysicalParams(-0.25, -1.0, U, V, 10))


def test_reduce_rejects_negative_delta():
    with pytest.raises(ParameterError):
        reduce(PhysicalParams(0.25, -1.0, -0.4, 0.0, 10))


@pytest.mark.parametrize("N", [0, -3, 1.5, True])
def test_bad_particle_number(N):
    with pytest.raises(ParameterError):
        ReducedParams(1.0, 0.5, N)


@pytest.mark.parametrize("c", [0.0, -1.0, math.nan, math.inf])
def test_bad_c(c):
    with pytest.raises(ParameterError):
        ReducedParams(c, 0.5, 3)


def test_negative_delta_is_representable():
    r = ReducedParams(1.0, -0.5, 3)
    with pytest.raises(ParameterError):
        r.require_nonnegative_delta()


def test_float_particle_number_is_normalized():
    assert ReducedParams(1.0, 0.5, 4.0).N == 4
    assert isinstance(ReducedParams(1.0, 0.5, 4.0).N, int)


@settings(max_examples=25, deadline=None)
@given(
    eps=st.floats(-2, 0),
    J=st.floats(-2, -0.05),
    U=st.floats(-3, 0),
    V=st.floats(0, 1),
    N=st.integers(1, 25),
)
def test_energy_map_matches_dense_physical(eps, J, U, V, N):
    p = PhysicalParams(eps, J, U, V, N)
    if not (U - V) / J > 0:
        return
    mapped = np.sort(map_energy_to_physical(reduced_spectrum(reduce(p)).energies, p))
    oracle = np.linalg.eigvalsh(dense_physical(eps, J, U, V, N))
    scale = max(1.0, np.abs(oracle).max())
    assert np.max(np.abs(mapped - oracle)) <= 1e-10 * scale


def test_physical_spectrum_matches_dense(rng):
    for _ in range(5):
        eps, J, U, V = rng.uniform(-2, 2, size=4)
        N = int(rng.integers(1, 20))
        got = physical_spectrum(PhysicalParams(eps, J, U, V, N))
        want = np.linalg.eigvalsh(dense_physical(eps, J, U, V, N))
        assert np.allclose(got, want, rtol=0, atol=1e-10 * max(1, np.abs(want).max()))


def test_symmetry_images_signs():
    p = PhysicalParams(-0.3, -1.1, -0.7, 0.2, 6)
    base = physical_spectrum(p)
    for image, sign in symmetry_images(p):
        other = physical_spectrum(image)
        expected = base if sign > 0 else -base[::-1]
        assert np.allclose(other, expected, atol=1e-10)


def test_params_from_dict_both_sets():
    assert params_from_dict({"c": 1, "delta": 0.5, "N": 3}) == ReducedParams(1.0, 0.5, 3)
    p = params_from_dict({"epsilon": -0.25, "J": -1, "U": -0.4, "V": 0, "N": 10})
    assert p == PhysicalParams(-0.25, -1.0, -0.4, 0.0, 10)


@pytest.mark.parametrize(
    "data",
    [
        {"c": 1, "delta": 0.5, "N": 3, "U": 1.0},
        {"c": 1, "N": 3},
        {"epsilon": -0.25, "J": -1, "U": -0.4, "N": 10},
        {"N": 3},
    ],
)
def test_params_from_dict_rejects(data):
    with pytest.raises(ParameterError):
        params_from_dict(data)


def test_load_params(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"c": 0.3, "delta": 0.5, "N": 15}))
    assert load_params(path) == ReducedParams(0.3, 0.5, 15)
