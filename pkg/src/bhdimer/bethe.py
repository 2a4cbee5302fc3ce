"""Bethe equations of the reduced two-site Hamiltonian.

A root set {lam_1, ..., lam_N} describes an eigenstate when

    c lam_n (c lam_n + delta) = prod_{j != n} (lam_n - lam_j - c) / (lam_n - lam_j + c)

for every n, and its energy is  E = (-1 + prod_j (1 + c / lam_j)) / c^2.

The public residual and Jacobian use the cleared-denominator form
F_n = c lam_n (c lam_n + delta) P_n - Q_n, which has no poles.  The
ground and first-excited solvers work in the offset coordinates of
:mod:`bhdimer._chain` instead, because the physically relevant roots sit
within ~1e-10 (or far less) of -delta/c, of 0, or of each other plus c.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _chain
from .errors import (
    LengthMismatch,
    NoConvergence,
    NonRealEnergy,
    RegimeBoundary,
    StructureViolation,
    ZeroRoot,
)
from .model import ReducedParams

__all__ = [
    "SolverOptions",
    "ChainCoords",
    "BetheState",
    "DiagnosticsReport",
    "residual",
    "jacobian",
    "scaled_residual_norm",
    "equidistant_init",
    "first_excited_init",
    "solve_ground",
    "solve_first_excited",
    "newton_refine",
    "energy_from_roots",
    "validate_state",
    "shift_transform",
    "shift_state",
    "state_to_dict",
    "state_from_dict",
    "dump_state",
    "load_state",
]

# Beyond this many roots the energy product is accumulated in log form.
LOG_PRODUCT_THRESHOLD = 512


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 200
    max_halvings: int = 20
    # relative widening of every seed gap beyond the equidistant value c
    seed_excess: float = 0.1
    boundary_guard: float = 1e-6
    energy_check: bool = False
    energy_check_tol: float = 1e-8
    # "auto": direct Newton, then continuation; "continuation": skip the direct attempt
    strategy: str = "auto"
    continuation_floor: float = 1e-4


@dataclass(frozen=True)
class ChainCoords:
    """Offset description of a real root set, see :mod:`bhdimer._chain`."""

    layout: tuple
    log_offsets: tuple

    def __post_init__(self):
        object.__setattr__(self, "layout", _chain.check_layout(self.layout))
        offsets = tuple(float(v) for v in self.log_offsets)
        if len(offsets) != len(self.layout):
            raise LengthMismatch("layout and offsets differ in length")
        object.__setattr__(self, "log_offsets", offsets)

    @property
    def x(self) -> np.ndarray:
        return np.array(self.log_offsets)

    def roots(self, r: ReducedParams) -> np.ndarray:
        return _chain.quantities(self.layout, self.x, r.c, r.delta)[0]


@dataclass(frozen=True)
class BetheState:
    roots: np.ndarray
    sigma: int
    params: ReducedParams
    residual_norm: float
    iterations: int = 0
    continuation_steps: int = 0
    chain: ChainCoords | None = None
    trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        roots = np.asarray(self.roots, dtype=complex).ravel()
        if roots.size != self.params.N:
            raise LengthMismatch(f"{roots.size} roots for N={self.params.N}")
        object.__setattr__(self, "roots", roots)

    @property
    def energy(self) -> float:
        return energy_from_roots(self)


@dataclass
class DiagnosticsReport:
    checks: dict
    values: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failed(self) -> list:
        return [k for k, ok in self.checks.items() if not ok]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": dict(self.checks), "values": dict(self.values)}


# ---------------------------------------------------------------------------
# cleared-denominator system


def _as_roots(roots, r: ReducedParams) -> np.ndarray:
    roots = np.asarray(roots, dtype=complex).ravel()
    if roots.size != r.N:
        raise LengthMismatch(f"expected {r.N} roots, got {roots.size}")
    return roots


def _exclusive_products(f: np.ndarray) -> np.ndarray:
    """out[n, k] = prod_{j != k} f[n, j], without division."""
    N = f.shape[1]
    ones = np.ones((f.shape[0], 1), dtype=f.dtype)
    prefix = np.cumprod(np.hstack([ones, f[:, :-1]]), axis=1)
    suffix = np.cumprod(np.hstack([ones, f[:, :0:-1]]), axis=1)[:, ::-1]
    return prefix * suffix if N else prefix


def _cleared_parts(roots, c, delta):
    N = roots.size
    diff = roots[:, None] - roots[None, :]
    plus = diff + c
    minus = diff - c
    np.fill_diagonal(plus, 1.0)
    np.fill_diagonal(minus, 1.0)
    g = c * roots * (c * roots + delta)
    P = np.prod(plus, axis=1) if N > 1 else np.ones(N, dtype=complex)
    Q = np.prod(minus, axis=1) if N > 1 else np.ones(N, dtype=complex)
    return g, P, Q, plus, minus


def residual(roots, r: ReducedParams) -> np.ndarray:
    """F_n = c lam_n (c lam_n + delta) prod_{j!=n}(lam_n-lam_j+c) - prod_{j!=n}(lam_n-lam_j-c)."""
    roots = _as_roots(roots, r)
    g, P, Q, _, _ = _cleared_parts(roots, r.c, r.delta)
    return g * P - Q


def jacobian(roots, r: ReducedParams) -> np.ndarray:
    """Analytic dF_n / dlam_k of :func:`residual`."""
    roots = _as_roots(roots, r)
    c, delta = r.c, r.delta
    g, P, Q, plus, minus = _cleared_parts(roots, c, delta)
    excl_plus = _exclusive_products(plus)
    excl_minus = _exclusive_products(minus)
    np.fill_diagonal(excl_plus, 0.0)
    np.fill_diagonal(excl_minus, 0.0)
    J = -g[:, None] * excl_plus + excl_minus
    dg = 2.0 * c * c * roots + c * delta
    diag = dg * P + g * excl_plus.sum(axis=1) - excl_minus.sum(axis=1)
    J[np.diag_indices_from(J)] = diag
    return J


def scaled_residual_norm(roots, r: ReducedParams) -> float:
    """max_n |F_n| / (|g_n P_n| + |Q_n|): a scale-free residual in [0, 1]."""
    roots = _as_roots(roots, r)
    g, P, Q, _, _ = _cleared_parts(roots, r.c, r.delta)
    scale = np.abs(g * P) + np.abs(Q)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.abs(g * P - Q) / scale
    ratio = np.where(scale == 0, 1.0, ratio)
    return float(np.max(ratio))


def newton_refine(roots, r: ReducedParams, opts: SolverOptions | None = None):
    """Damped complex Newton on the cleared system, for arbitrary root sets.

    Rows are rescaled by |g P| + |Q| (which leaves the Newton step unchanged)
    and a step is halved while the scaled residual grows.  Returns
    (roots, iterations, converged, residual_norm).
    """
    opts = opts or SolverOptions()
    lam = _as_roots(roots, r).copy()
    res = scaled_residual_norm(lam, r)
    for it in range(opts.max_iter):
        if res <= opts.tol:
            return lam, it, True, res
        g, P, Q, _, _ = _cleared_parts(lam, r.c, r.delta)
        scale = np.abs(g * P) + np.abs(Q)
        scale[scale == 0] = 1.0
        F = (g * P - Q) / scale
        J = jacobian(lam, r) / scale[:, None]
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        t = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = lam + t * step
            trial_res = scaled_residual_norm(trial, r)
            if trial_res < res:
                break
            t *= 0.5
        else:
            return lam, it, False, res
        lam, res = trial, trial_res
    return lam, opts.max_iter, res <= opts.tol, res


# ---------------------------------------------------------------------------
# initial roots


def equidistant_init(r: ReducedParams) -> np.ndarray:
    """lam_n = -delta/c - c (n - 1), n = 1..N."""
    n = np.arange(r.N, dtype=float)
    return -r.delta / r.c - r.c * n


def _regime_small(r: ReducedParams) -> bool:
    return r.c2 < r.delta


def _lambda_linear(r: ReducedParams) -> float:
    c, d, N = r.c, r.delta, r.N
    return (d - c * c) / ((c * c * (N - 2) + d) * (c * c * (N - 1) + d) * c - c)


def _positive_top_offset(r: ReducedParams, x_rest: np.ndarray, layout) -> float:
    """Solve the first Bethe equation for a positive top root, the rest held fixed.

    For a chain hanging from the top root the pair factors do not depend on
    the top root itself, so the equation is a quadratic in it:
    c lam (c lam + delta) = K.
    """
    c, d = r.c, r.delta
    x = np.concatenate([[math.log(c)], x_rest])
    R, _, _ = _chain.residual_and_jacobian(layout, x, c, d, jacobian=False)
    # R_0 = log(c lam (c lam + delta)) - log K at lam = c
    log_k = math.log(c * c * (c * c + d)) - R[0]
    # positive root of c lam (c lam + delta) = K, kept in logs since K may underflow
    if d > 0:
        K = math.exp(min(log_k, 700.0))
        return math.log(2.0) + log_k - math.log(c) - math.log(d + math.sqrt(d * d + 4.0 * K))
    return 0.5 * log_k - math.log(c)


def _seed(r: ReducedParams, sigma: int, opts: SolverOptions):
    """(layout, offsets) of the starting root set for the requested level."""
    N, c = r.N, r.c
    gap = math.log(opts.seed_excess * c)
    if sigma == 0:
        return _chain.ground_layout(N, c, r.delta), np.full(N, gap)
    if N == 1:
        # one positive root of c lam (c lam + delta) = 1
        lam = 2.0 / (c * (r.delta + math.sqrt(r.delta**2 + 4.0)))
        return ((_chain.ABOVE, 0.0),), np.array([math.log(lam)])
    if _regime_small(r):
        layout = ((_chain.ABOVE, 0.0),) + _chain.ground_layout(N - 1, c, r.delta)
        x = np.full(N, gap)
        lam1 = _lambda_linear(r)
        x[0] = math.log(lam1) if lam1 > 0 else math.log(c)
        return layout, x
    layout = _chain.check_layout(((_chain.ABOVE, 0.0),) + ((_chain.CHAIN, 0.0),) * (N - 1))
    x_rest = np.full(N - 1, gap)
    return layout, np.concatenate([[_positive_top_offset(r, x_rest, layout)], x_rest])


def _layout_for(r: ReducedParams, sigma: int):
    return _seed(r, sigma, SolverOptions())[0]


def first_excited_init(r: ReducedParams, opts: SolverOptions | None = None) -> np.ndarray:
    """Starting roots of the first excited state (for inspection; see ``_seed``)."""
    opts = opts or SolverOptions()
    _check_regime(r, opts)
    layout, x = _seed(r, 1, opts)
    return _chain.quantities(layout, x, r.c, r.delta)[0]


# ---------------------------------------------------------------------------
# solvers


def _check_regime(r: ReducedParams, opts: SolverOptions):
    if abs(r.c2 - r.delta) < opts.boundary_guard:
        raise RegimeBoundary(f"c^2 = {r.c2!r} is within {opts.boundary_guard} of delta = {r.delta!r}")


def _continuation_path(r: ReducedParams, sigma: int):
    """Start parameters where the seed is accurate, and the interpolation in between.

    Coupling is raised (ground state, strong-coupling excited state) or the
    detuning is raised (weak-coupling excited state) so the path never crosses
    c^2 = delta.
    """
    if sigma == 1 and _regime_small(r):
        start = 4.0 * max(r.delta, r.c2)

        def at(t):
            return r.replace(delta=start * (r.delta / start) ** t) if r.delta > 0 else r

        return at, "delta"
    start = 4.0 * max(r.c, math.sqrt(max(r.delta, 0.0)))

    def at(t):
        return r.replace(c=start * (r.c / start) ** t)

    return at, "c"


def _continuation(r: ReducedParams, sigma: int, opts: SolverOptions):
    at, axis = _continuation_path(r, sigma)
    trace = []
    p0 = at(0.0)
    _, x = _seed(p0, sigma, opts)
    layout = _layout_for(p0, sigma)
    x, its, ok, res = _chain.newton(layout, x, p0.c, p0.delta, opts.tol, opts.max_iter, opts.max_halvings)
    trace.append((axis, getattr(p0, axis), ok, res))
    if not ok:
        raise NoConvergence(f"continuation start {p0} did not converge", trace)
    t, dt, steps, total_its = 0.0, 0.25, 0, its
    floor = opts.continuation_floor
    while t < 1.0:
        t_next = min(1.0, t + dt)
        p = at(t_next)
        layout = _layout_for(p, sigma)
        x_new, its, ok, res = _chain.newton(layout, x, p.c, p.delta, opts.tol, opts.max_iter, opts.max_halvings)
        total_its += its
        trace.append((axis, getattr(p, axis), ok, res))
        if ok:
            t, x, steps = t_next, x_new, steps + 1
            dt *= 1.5
        else:
            dt *= 0.5
            if abs(getattr(at(t + dt), axis) - getattr(at(t), axis)) < floor * getattr(r, axis if axis == "c" else "c"):
                raise NoConvergence(f"continuation stalled at {axis}={getattr(at(t), axis)!r}", trace)
    return layout, x, total_its, steps, res, trace


def _solve(r: ReducedParams, sigma: int, opts: SolverOptions) -> BetheState:
    r.require_nonnegative_delta()
    trace = []
    state = None
    if opts.strategy not in ("auto", "continuation"):
        raise ValueError(f"unknown strategy {opts.strategy!r}")
    if opts.strategy == "auto":
        layout, x0 = _seed(r, sigma, opts)
        x, its, ok, res = _chain.newton(layout, x0, r.c, r.delta, opts.tol, opts.max_iter, opts.max_halvings)
        trace.append(("direct", r.c, ok, res))
        if ok:
            state = (layout, x, its, 0, res)
    if state is None:
        try:
            layout, x, its, steps, res, ctrace = _continuation(r, sigma, opts)
        except NoConvergence as exc:
            raise NoConvergence(str(exc), trace + exc.trace) from None
        trace.extend(ctrace)
        state = (layout, x, its, steps, res)
    layout, x, its, steps, res = state
    chain = ChainCoords(layout, tuple(x))
    roots = chain.roots(r)
    s = BetheState(roots, sigma, r, res, its, steps, chain, tuple(trace))
    if not np.all(np.isfinite(roots)):
        raise StructureViolation("non-finite roots")
    if sigma == 0 and np.any(roots.real >= 0):
        raise StructureViolation("ground-state root set has a non-negative root")
    if opts.energy_check:
        _cross_validate(s, opts)
    return s


def _cross_validate(s: BetheState, opts: SolverOptions):
    from .exact import reduced_spectrum

    exact = reduced_spectrum(s.params).energies[s.sigma]
    E = energy_from_roots(s)
    if abs(E - exact) > opts.energy_check_tol * max(1.0, abs(exact)):
        raise StructureViolation(
            f"Bethe energy {E!r} disagrees with exact level {s.sigma} ({exact!r})"
        )


def solve_ground(r: ReducedParams, opts: SolverOptions | None = None) -> BetheState:
    return _solve(r, 0, opts or SolverOptions())


def solve_first_excited(r: ReducedParams, opts: SolverOptions | None = None) -> BetheState:
    opts = opts or SolverOptions()
    _check_regime(r, opts)
    return _solve(r, 1, opts)


# ---------------------------------------------------------------------------
# energy, validation, transforms


def energy_from_roots(s) -> float:
    """E = (-1 + prod_j (1 + c/lam_j)) / c^2.

    Accepts a :class:`BetheState` or a ``(roots, params)`` pair.  States that
    carry offset coordinates are evaluated from them, which keeps full
    relative accuracy when a root is within rounding of 0 or of -c.
    """
    if isinstance(s, BetheState):
        roots, r, chain = s.roots, s.params, s.chain
    else:
        roots, r = s
        roots, chain = _as_roots(roots, r), None
    c = r.c
    if np.any(np.abs(roots) < 1e-12) and chain is None:
        raise ZeroRoot("a root is zero: the energy product has a pole")
    if chain is not None:
        return _chain.energy(chain.layout, chain.x, c, r.delta)
    factors = 1.0 + c / roots
    if roots.size > LOG_PRODUCT_THRESHOLD:
        if np.any(factors == 0):
            prod = 0j
        else:
            prod = np.exp(np.sum(np.log(np.abs(factors)))) * np.exp(1j * np.sum(np.angle(factors)))
    else:
        prod = np.prod(factors)
    if abs(prod.imag) / max(1.0, abs(prod.real)) > 1e-8:
        raise NonRealEnergy(f"root product has imaginary part {prod.imag!r}")
    return float((prod.real - 1.0) / (c * c))


def _state_residual(s: BetheState) -> float:
    if s.chain is not None:
        return _chain.residual_norm(s.chain.layout, s.chain.x, s.params.c, s.params.delta)
    return scaled_residual_norm(s.roots, s.params)


def validate_state(s: BetheState, tol: float = 1e-10) -> DiagnosticsReport:
    roots, r = s.roots, s.params
    scale = max(1.0, float(np.max(np.abs(roots))))
    checks, values = {}, {}

    if roots.size > 1:
        diff = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(diff, np.inf)
        min_sep = float(diff.min())
    else:
        min_sep = math.inf
    values["min_separation"] = min_sep
    checks["distinct"] = min_sep > 1e-8 * scale

    closed = True
    for z in roots[np.abs(roots.imag) > 1e-8]:
        if np.min(np.abs(roots - np.conj(z))) > 1e-8 * scale:
            closed = False
            break
    checks["conjugate_closed"] = closed

    res = _state_residual(s)
    values["residual_norm"] = res
    checks["residual"] = res <= tol

    if s.sigma == 0:
        real = bool(np.all(np.abs(roots.imag) <= 1e-8 * scale))
        checks["real_negative"] = real and bool(np.all(roots.real < 0))
        ordered = np.sort(roots.real)[::-1]
        anchor = -r.delta / r.c
        values["top_root"] = float(ordered[0])
        values["anchor"] = anchor
        values["top_root_near_anchor"] = bool(abs(ordered[0] - anchor) <= 0.1 * abs(anchor)) if anchor else None
        if s.chain is not None:
            _, _, _, dm, _, _ = _chain.quantities(s.chain.layout, s.chain.x, r.c, r.delta)
            gaps = np.diag(dm, 1) + r.c
        else:
            gaps = -np.diff(ordered)
        ratio = float(gaps.min() / r.c) if gaps.size else math.inf
        values["min_gap_over_c"] = ratio
        values["gap_ok"] = ratio >= 0.95
    return DiagnosticsReport(checks, values)


def shift_state(s: BetheState) -> BetheState:
    """Shift every root by +delta/c; the result solves the equations at (c, -delta).

    Offset coordinates are carried along (only the bases move), so the shifted
    state keeps full accuracy and shifting twice restores the roots bit for bit.
    """
    r = s.params
    shift = r.delta / r.c
    r_new = r.replace(delta=-r.delta)
    if s.chain is None:
        return BetheState(s.roots + shift, s.sigma, r_new, scaled_residual_norm(s.roots + shift, r_new))
    layout = tuple((kind, base + shift if kind != _chain.CHAIN else base) for kind, base in s.chain.layout)
    chain = ChainCoords(layout, s.chain.log_offsets)
    return BetheState(
        chain.roots(r_new), s.sigma, r_new,
        _chain.residual_norm(layout, chain.x, r_new.c, r_new.delta),
        s.iterations, s.continuation_steps, chain,
    )


def shift_transform(s: BetheState):
    """(roots + delta/c, params with delta -> -delta)."""
    shifted = shift_state(s)
    return shifted.roots, shifted.params


# ---------------------------------------------------------------------------
# JSON


def state_to_dict(s: BetheState) -> dict:
    out = {
        "sigma": s.sigma,
        "c": s.params.c,
        "delta": s.params.delta,
        "N": s.params.N,
        "roots": [[float(z.real), float(z.imag)] for z in s.roots],
        "residual_norm": float(s.residual_norm),
        "iterations": int(s.iterations),
        "continuation_steps": int(s.continuation_steps),
    }
    if s.chain is not None:
        out["chain"] = {
            "layout": [[kind, base] for kind, base in s.chain.layout],
            "log_offsets": list(s.chain.log_offsets),
        }
    return out


def state_from_dict(data: dict) -> BetheState:
    r = ReducedParams(data["c"], data["delta"], data["N"])
    roots = np.array([complex(re, im) for re, im in data["roots"]])
    chain = None
    if data.get("chain"):
        layout = tuple(tuple(entry) for entry in data["chain"]["layout"])
        chain = ChainCoords(layout, tuple(data["chain"]["log_offsets"]))
    return BetheState(
        roots,
        int(data["sigma"]),
        r,
        float(data.get("residual_norm", math.nan)),
        int(data.get("iterations", 0)),
        int(data.get("continuation_steps", 0)),
        chain,
    )


def dump_state(s: BetheState, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(s), indent=2) + "\n", encoding="utf-8")


def load_state(path) -> BetheState:
    return state_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
