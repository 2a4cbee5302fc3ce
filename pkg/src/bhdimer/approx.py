"""Closed-form estimates of the two lowest eigenvalues.

All formulas come from truncating the Bethe equations to their leading
order in 1/N.  The ground-state estimate holds for any attractive coupling;
the first excited state has one form for c^2 < delta (one root near zero,
the rest chained below -delta/c) and another for c^2 > delta, where the
excited level is the ground level shifted by delta N.

Every estimator returns its value together with a flag saying whether the
parameters lie in the regime the formula was derived for.  Out-of-regime
values are still returned so the breakdown can be studied.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateDenominator, NonAttractive, RegimeViolation, ZeroTunneling
from .model import PhysicalParams, ReducedParams, reduce

__all__ = [
    "EnergyEstimate",
    "Regime",
    "FORMULAS",
    "ground_energy_reduced",
    "ground_energy_telescoped",
    "ground_energy_physical",
    "first_excited_reduced_small_c",
    "first_excited_physical_small_c",
    "first_excited_reduced_large_c",
    "first_excited_physical_large_c",
    "lambda_linear",
    "regime",
    "estimate",
]

# Below this magnitude a denominator is treated as zero.
DENOMINATOR_FLOOR = 1e-12
# The ground-state estimate is accurate to about 1% only above this c^2.
GROUND_C2_MIN = 0.01


class Regime(str, Enum):
    SMALL_C = "SMALL_C"
    LARGE_C = "LARGE_C"
    BOUNDARY = "BOUNDARY"


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    formula_id: str
    in_validity_regime: bool

    def __float__(self) -> float:
        return float(self.value)


def _denominator(value: float, what: str) -> float:
    if abs(value) < DENOMINATOR_FLOOR:
        raise DegenerateDenominator(f"{what} = {value!r} vanishes")
    return value


def _check_physical(p: PhysicalParams) -> None:
    if p.J == 0:
        raise ZeroTunneling("J = 0: the closed forms are undefined")
    if not (p.U - p.V) / p.J > 0:
        raise NonAttractive(f"(U - V) / J = {(p.U - p.V) / p.J!r} must be positive")


def ground_energy_reduced(r: ReducedParams) -> EnergyEstimate:
    """-(N + 1) / (c^2 (N - 1) + delta)."""
    N = r.N
    den = _denominator(r.c2 * (N - 1) + r.delta, "c^2 (N - 1) + delta")
    return EnergyEstimate(-(N + 1) / den, "G_RED", r.c2 > GROUND_C2_MIN)


def ground_energy_telescoped(r: ReducedParams) -> EnergyEstimate:
    """-N / (c^2 (N - 1) + delta).

    Same root ansatz as :func:`ground_energy_reduced`, but with the root
    product telescoped exactly; its error falls off roughly as N^-3 rather
    than N^-1.
    """
    N = r.N
    den = _denominator(r.c2 * (N - 1) + r.delta, "c^2 (N - 1) + delta")
    return EnergyEstimate(-N / den, "G_RED_TELESCOPED", r.c2 > GROUND_C2_MIN)


def ground_energy_physical(p: PhysicalParams) -> EnergyEstimate:
    """J^2 (N + 1) / ((U - V)(N - 1) + 2 eps) + U N (N - 1) / 2 + eps N."""
    _check_physical(p)
    N, J, eps = p.N, p.J, p.epsilon
    den = _denominator((p.U - p.V) * (N - 1) + 2 * eps, "(U - V)(N - 1) + 2 eps")
    value = J * J * (N + 1) / den + 0.5 * p.U * N * (N - 1) + eps * N
    return EnergyEstimate(value, "G_PHYS", (p.U - p.V) / J > GROUND_C2_MIN)


def first_excited_reduced_small_c(r: ReducedParams) -> EnergyEstimate:
    """c^2 (N - 1) - N / (c^2 (N - 2) + delta) + delta, for c^2 < delta."""
    N = r.N
    den = _denominator(r.c2 * (N - 2) + r.delta, "c^2 (N - 2) + delta")
    value = r.c2 * (N - 1) - N / den + r.delta
    return EnergyEstimate(value, "E1_RED_SMALL", r.c2 < r.delta)


def first_excited_physical_small_c(p: PhysicalParams) -> EnergyEstimate:
    """eps (N-2) - (U-V)(N-1) + U N (N-1)/2 + J^2 N / ((U-V)(N-2) + 2 eps), for c^2 < delta."""
    _check_physical(p)
    N, J, eps, UV = p.N, p.J, p.epsilon, p.U - p.V
    den = _denominator(UV * (N - 2) + 2 * eps, "(U - V)(N - 2) + 2 eps")
    value = eps * (N - 2) - UV * (N - 1) + 0.5 * p.U * N * (N - 1) + J * J * N / den
    # compare in reduced units: dividing by J flips the inequality when J < 0
    return EnergyEstimate(value, "E1_PHYS_SMALL", UV / J < 2 * eps / J)


def first_excited_reduced_large_c(r: ReducedParams) -> EnergyEstimate:
    """delta N - (N + 1) / (c^2 (N - 1) + delta), for c^2 > delta."""
    N = r.N
    den = _denominator(r.c2 * (N - 1) + r.delta, "c^2 (N - 1) + delta")
    return EnergyEstimate(r.delta * N - (N + 1) / den, "E1_RED_LARGE", r.c2 > r.delta)


def first_excited_physical_large_c(p: PhysicalParams) -> EnergyEstimate:
    """J^2 (N + 1) / ((U - V)(N - 1) + 2 eps) + U N (N - 1) / 2 - eps N, for c^2 > delta."""
    _check_physical(p)
    N, J, eps, UV = p.N, p.J, p.epsilon, p.U - p.V
    den = _denominator(UV * (N - 1) + 2 * eps, "(U - V)(N - 1) + 2 eps")
    value = J * J * (N + 1) / den + 0.5 * p.U * N * (N - 1) - eps * N
    return EnergyEstimate(value, "E1_PHYS_LARGE", UV / J > 2 * eps / J)


def lambda_linear(r: ReducedParams) -> float:
    """Linearized small positive root of the first excited state (needs c^2 < delta)."""
    if r.c2 >= r.delta:
        raise RegimeViolation(f"c^2 = {r.c2!r} >= delta = {r.delta!r}: the linearized root is not positive")
    N, c, c2, d = r.N, r.c, r.c2, r.delta
    den = _denominator((c2 * (N - 2) + d) * (c2 * (N - 1) + d) * c - c, "linearized denominator")
    return (d - c2) / den


def regime(r: ReducedParams, guard: float | None = None) -> Regime:
    """Which first-excited form applies; BOUNDARY within ``guard`` of c^2 = delta."""
    if guard is None:
        guard = 1e-9 * max(1.0, abs(r.delta))
    if r.c2 < r.delta - guard:
        return Regime.SMALL_C
    if r.c2 > r.delta + guard:
        return Regime.LARGE_C
    return Regime.BOUNDARY


FORMULAS = {
    "G_RED": ground_energy_reduced,
    "G_RED_TELESCOPED": ground_energy_telescoped,
    "G_PHYS": ground_energy_physical,
    "E1_RED_SMALL": first_excited_reduced_small_c,
    "E1_PHYS_SMALL": first_excited_physical_small_c,
    "E1_RED_LARGE": first_excited_reduced_large_c,
    "E1_PHYS_LARGE": first_excited_physical_large_c,
}


def estimate(params, sigma: int = 0) -> EnergyEstimate:
    """Pick the appropriate closed form for level ``sigma`` (0 or 1).

    Physical parameters give physical energies.  For sigma = 1 the form is
    chosen by regime; at the boundary the small-c form is used and flagged
    as out of regime.
    """
    physical = isinstance(params, PhysicalParams)
    r = reduce(params) if physical else params
    if sigma == 0:
        return ground_energy_physical(params) if physical else ground_energy_reduced(r)
    if sigma != 1:
        raise ValueError(f"closed forms exist for sigma in (0, 1), got {sigma!r}")
    which = regime(r)
    if which is Regime.LARGE_C:
        return first_excited_physical_large_c(params) if physical else first_excited_reduced_large_c(r)
    est = first_excited_physical_small_c(params) if physical else first_excited_reduced_small_c(r)
    if which is Regime.BOUNDARY:
        est = EnergyEstimate(est.value, est.formula_id, False)
    return est
