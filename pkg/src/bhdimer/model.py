"""Parameter containers and the physical <-> reduced mapping.

The physical Hamiltonian is

    H = eps (n_a - n_b) - J (a^+ b + a b^+) + U/2 (a^+a^+aa + b^+b^+bb) + V n_a n_b

and the reduced one, equivalent up to an offset and a rescaling,

    H_red = a^+ b + a b^+ + delta n_b + c^2 n_a n_b

with c^2 = (U - V) / J and delta = 2 eps / J.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import NonAttractive, ParameterError, ZeroTunneling

__all__ = [
    "PhysicalParams",
    "ReducedParams",
    "reduce",
    "map_energy_to_physical",
    "symmetry_images",
    "params_from_dict",
    "load_params",
]


def _check_n(N) -> int:
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ParameterError(f"particle number must be a positive integer, got {N!r}")
    return int(N)


@dataclass(frozen=True)
class PhysicalParams:
    epsilon: float
    J: float
    U: float
    V: float
    N: int

    def __post_init__(self):
        object.__setattr__(self, "N", _check_n(self.N))
        for name in ("epsilon", "J", "U", "V"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite")
            object.__setattr__(self, name, value)

    @property
    def attractive(self) -> bool:
        return self.U - self.V < 0

    def replace(self, **changes) -> "PhysicalParams":
        fields = dict(epsilon=self.epsilon, J=self.J, U=self.U, V=self.V, N=self.N)
        fields.update(changes)
        return PhysicalParams(**fields)


@dataclass(frozen=True)
class ReducedParams:
    c: float
    delta: float
    N: int

    def __post_init__(self):
        object.__setattr__(self, "N", _check_n(self.N))
        c, delta = float(self.c), float(self.delta)
        if not (math.isfinite(c) and c > 0):
            raise ParameterError(f"c must be positive and finite, got {self.c!r}")
        # Negative delta is representable (the Bethe shift maps delta -> -delta);
        # solvers and closed-form estimates check delta >= 0 themselves.
        if not math.isfinite(delta):
            raise ParameterError(f"delta must be finite, got {self.delta!r}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "delta", delta)

    @property
    def c2(self) -> float:
        return self.c * self.c

    def require_nonnegative_delta(self) -> "ReducedParams":
        if self.delta < 0:
            raise ParameterError(f"delta must be non-negative here, got {self.delta!r}")
        return self

    def replace(self, **changes) -> "ReducedParams":
        fields = dict(c=self.c, delta=self.delta, N=self.N)
        fields.update(changes)
        return ReducedParams(**fields)


def reduce(p: PhysicalParams) -> ReducedParams:
    """Map physical parameters onto (c, delta, N).

    Only the ratio (U - V) / J must be positive; the attractive convention of
    negative eps and J is not enforced, but delta = 2 eps / J must come out
    non-negative.
    """
    if p.J == 0:
        raise ZeroTunneling("J = 0: the reduced Hamiltonian is undefined")
    c2 = (p.U - p.V) / p.J
    if not c2 > 0:
        raise NonAttractive(f"(U - V) / J = {c2!r} must be positive")
    delta = 2.0 * p.epsilon / p.J
    if delta < 0:
        raise ParameterError(
            f"2 eps / J = {delta!r} is negative; flip the sign of eps (the spectrum is even in eps)"
        )
    return ReducedParams(math.sqrt(c2), delta, p.N)


def map_energy_to_physical(E, p: PhysicalParams):
    """Reduced eigenvalue(s) -> eigenvalue(s) of the physical Hamiltonian."""
    N = p.N
    return -p.J * E + 0.5 * p.U * N * (N - 1) + p.epsilon * N


def symmetry_images(p: PhysicalParams) -> list[tuple[PhysicalParams, int]]:
    """Parameter sets whose sorted spectrum is +/- the spectrum of ``p``.

    A sign of -1 means the image spectrum is the negated original, i.e. its
    ascending order is the reversed original order.
    """
    return [
        (p.replace(epsilon=-p.epsilon), +1),
        (p.replace(J=-p.J), +1),
        (p.replace(U=-p.U, V=-p.V), -1),
    ]


_PHYSICAL_KEYS = {"epsilon", "J", "U", "V", "N"}
_REDUCED_KEYS = {"c", "delta", "N"}


def params_from_dict(data: dict) -> PhysicalParams | ReducedParams:
    keys = set(data)
    has_phys = bool(keys & (_PHYSICAL_KEYS - {"N"}))
    has_red = bool(keys & (_REDUCED_KEYS - {"N"}))
    if has_phys and has_red:
        raise ParameterError("parameter set mixes physical and reduced keys")
    if has_phys:
        missing = _PHYSICAL_KEYS - keys
        if missing:
            raise ParameterError(f"missing physical keys: {sorted(missing)}")
        return PhysicalParams(**{k: data[k] for k in _PHYSICAL_KEYS})
    if has_red:
        missing = _REDUCED_KEYS - keys
        if missing:
            raise ParameterError(f"missing reduced keys: {sorted(missing)}")
        return ReducedParams(**{k: data[k] for k in _REDUCED_KEYS})
    raise ParameterError("no parameter keys found")


def load_params(path) -> PhysicalParams | ReducedParams:
    with Path(path).open(encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))
