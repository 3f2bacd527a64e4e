"""Right-hand side of the rotationally symmetric flow and RK4 stepping."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from numba import njit

from .state import FlowParameters, FlowState, OuterBC


class NonFiniteError(ArithmeticError):
    def __init__(self, index: int, which: str):
        super().__init__(f"non-finite {which} at node {index}")
        self.index = index
        self.field = which


@dataclass
class RhsPair:
    df_dt: np.ndarray
    dz_dt: np.ndarray


@njit(cache=True)
def _rhs_kernel(f, z, w1, w2, ws1, ws2, inv_r, zeta0_w, n, k2, df, dz):
    # inv_r holds 1/r for nodes 1..N. Derivatives of the even field f are taken
    # in s = r^2 (exact for 1 + a r^2 + b r^4), which keeps the truncation error
    # zero at the origin.
    # The z equation is written with zeta = z/r (even), which is algebraically
    # identical but free of 1/r-amplified truncation error at the origin:
    #   z_t = (z'' + zeta')/f^2 + (n-2) zeta' + (n-2) r lambda2 zeta - k^2 z^3
    m = f.size
    df[0] = 0.0
    dz[0] = 0.0
    df[m - 1] = 0.0
    dz[m - 1] = 0.0
    zeta_prev = zeta0_w[0] * z[1] * inv_r[0] + zeta0_w[1] * z[2] * inv_r[1] + zeta0_w[2] * z[3] * inv_r[2]
    zeta_c = z[1] * inv_r[0]
    for j in range(m - 2):
        i = j + 1
        ir = inv_r[j]
        zeta_next = z[i + 1] * inv_r[j + 1]
        fm, fc, fq = f[i - 1], f[i], f[i + 1]
        zm, zc, zq = z[i - 1], z[i], z[i + 1]
        # difference form: exact zero on constants
        fs = ws1[0, j] * (fm - fc) + ws1[2, j] * (fq - fc)
        fss = ws2[0, j] * (fm - fc) + ws2[2, j] * (fq - fc)
        rr = 1.0 / (ir * ir)
        fp = 2.0 * fs / ir
        fpp = 2.0 * fs + 4.0 * rr * fss
        zpp = w2[0, j] * (zm - zc) + w2[2, j] * (zq - zc)
        zeta_p = w1[0, j] * (zeta_prev - zeta_c) + w1[2, j] * (zeta_next - zeta_c)
        inv_f = 1.0 / fc
        inv_f2 = inv_f * inv_f
        lam2 = (1.0 - inv_f2) * ir * ir
        df[i] = (
            inv_f2 * (fpp - 2.0 * inv_f * fp * fp)
            + ((n - 2) - inv_f2) * 2.0 * fs
            - (n - 2) * fc * lam2
            + k2 * fc * zc * zc
        )
        dz[i] = (
            inv_f2 * (zpp + zeta_p)
            + (n - 2) * (zeta_p + lam2 * zeta_c / ir)
            - k2 * zc * zc * zc
        )
        zeta_prev = zeta_c
        zeta_c = zeta_next


@njit(cache=True)
def _rk4_kernel(f0, z0, dt, w1, w2, ws1, ws2, inv_r, zeta0_w, n, k2):
    m = f0.size
    kf = np.empty((4, m))
    kz = np.empty((4, m))
    ft = np.empty(m)
    zt = np.empty(m)
    _rhs_kernel(f0, z0, w1, w2, ws1, ws2, inv_r, zeta0_w, n, k2, kf[0], kz[0])
    for s, c in ((1, 0.5), (2, 0.5), (3, 1.0)):
        for i in range(m):
            ft[i] = f0[i] + c * dt * kf[s - 1, i]
            zt[i] = z0[i] + c * dt * kz[s - 1, i]
        _rhs_kernel(ft, zt, w1, w2, ws1, ws2, inv_r, zeta0_w, n, k2, kf[s], kz[s])
    f = np.empty(m)
    z = np.empty(m)
    h6 = dt / 6.0
    for i in range(m):
        f[i] = f0[i] + h6 * (kf[0, i] + 2.0 * kf[1, i] + 2.0 * kf[2, i] + kf[3, i])
        z[i] = z0[i] + h6 * (kz[0, i] + 2.0 * kz[1, i] + 2.0 * kz[2, i] + kz[3, i])
    return f, z


@njit(cache=True)
def _cfl_kernel(f, w1, inv_r, spacing, n):
    best = np.inf
    for j in range(f.size - 2):
        i = j + 1
        fc = f[i]
        dx = spacing[j]
        a = fc * fc * dx * dx / 2.0
        if a < best:
            best = a
        ir = inv_r[j]
        inv_f2 = 1.0 / (fc * fc)
        fp = w1[0, j] * (f[i - 1] - fc) + w1[2, j] * (f[i + 1] - fc)
        drift = max(abs((n - 2) * ir - ir * inv_f2), abs(ir * inv_f2 + (n - 2) * ir),
                    2.0 * abs(fp) / (fc * fc * fc))
        if drift > 0.0:
            b = dx / drift
            if b < best:
                best = b
    return best


def _raw_rhs(f, z, grid, n, k2):
    # interior stencils only; both end nodes are Dirichlet
    df = np.empty_like(f)
    dz = np.empty_like(z)
    _rhs_kernel(f, z, grid._w1, grid._w2, grid._ws1, grid._ws2, grid._inv_r_all, grid._zeta0_w, float(n), float(k2), df, dz)
    return df, dz


def _first_bad(a: np.ndarray) -> Optional[int]:
    bad = ~np.isfinite(a)
    return int(np.argmax(bad)) if bad.any() else None


def rhs(state: FlowState, params: FlowParameters) -> RhsPair:
    """Time derivatives of ``f`` and ``z``; zero on both Dirichlet end nodes."""
    df, dz = _raw_rhs(state.f, state.z, state.grid, params.n, params.k_n**2)
    for arr, name in ((df, "f"), (dz, "z")):
        i = _first_bad(arr)
        if i is not None:
            raise NonFiniteError(i, name)
    return RhsPair(df, dz)


def cfl_dt(state: FlowState, params: FlowParameters) -> float:
    """Explicit step limit: ``min f^2 dx^2 / 2`` and ``dx / |drift|`` over
    interior nodes, scaled by ``cfl_safety``."""
    grid = state.grid
    best = _cfl_kernel(state.f, grid._w1, grid._inv_r_all, grid._spacing_interior, float(params.n))
    return float(params.cfl_safety * best)


class Outcome(str, enum.Enum):
    ADVANCED = "advanced"
    CFL_COLLAPSE = "cfl_collapse"
    NON_FINITE = "non_finite"
    MINIMAL_SPHERE = "minimal_sphere"


@dataclass
class StepOutcome:
    kind: Outcome
    state: Optional[FlowState] = None
    dt: float = 0.0
    index: Optional[int] = None
    field: Optional[str] = None

    @property
    def advanced(self) -> bool:
        return self.kind is Outcome.ADVANCED


def pin_boundaries(f: np.ndarray, z: np.ndarray, state_grid, params: FlowParameters) -> None:
    f[0] = 1.0
    z[0] = 0.0
    z[-1] = 0.0
    if params.outer_bc is OuterBC.ROBIN:
        r = state_grid.nodes
        # r (f - f_inf) constant across the last cell
        f[-1] = params.f_infinity + (r[-2] / r[-1]) * (f[-2] - params.f_infinity)
    else:
        f[-1] = params.f_infinity


def step(state: FlowState, params: FlowParameters, dt_max: Optional[float] = None) -> StepOutcome:
    """One classical RK4 step of size ``min(cfl_dt, dt_max)``."""
    i = _first_bad(state.f)
    if i is not None:
        return StepOutcome(Outcome.NON_FINITE, index=i, field="f")
    i = _first_bad(state.z)
    if i is not None:
        return StepOutcome(Outcome.NON_FINITE, index=i, field="z")
    dt_cfl = cfl_dt(state, params)
    if not np.isfinite(dt_cfl) or dt_cfl < params.dt_floor:
        return StepOutcome(Outcome.CFL_COLLAPSE, dt=dt_cfl)
    dt = dt_cfl if dt_max is None else min(dt_cfl, dt_max)
    grid, n, k2 = state.grid, params.n, params.k_n**2
    f, z = _rk4_kernel(
        state.f, state.z, dt, grid._w1, grid._w2, grid._ws1, grid._ws2, grid._inv_r_all, grid._zeta0_w, float(n), float(k2)
    )
    pin_boundaries(f, z, grid, params)
    for arr, name in ((f, "f"), (z, "z")):
        i = _first_bad(arr)
        if i is not None:
            return StepOutcome(Outcome.NON_FINITE, dt=dt, index=i, field=name)
    if np.any(f <= 0):
        # coordinate breakdown from below; reported as a non-finite f
        return StepOutcome(Outcome.NON_FINITE, dt=dt, index=int(np.argmax(f <= 0)), field="f")
    if np.any(f > params.f_cap):
        return StepOutcome(Outcome.MINIMAL_SPHERE, dt=dt, index=int(np.argmax(f > params.f_cap)))
    return StepOutcome(Outcome.ADVANCED, FlowState(state.t + dt, f, z, grid), dt)


Callback = Callable[[FlowState], None]


@dataclass
class Trajectory:
    state: FlowState
    reason: str
    steps: int
    dt_min: float
    dt_max: float
    wall_seconds: float
    last_outcome: Optional[StepOutcome] = None
    outputs: int = 0


def evolve(
    state: FlowState,
    params: FlowParameters,
    callbacks: Iterable[Callback] = (),
    step_callbacks: Iterable[Callable[[FlowState, float], None]] = (),
    max_steps: Optional[int] = None,
) -> Trajectory:
    """Step until ``t_end`` (hit exactly) or a failure outcome.

    ``callbacks`` run at ``t = 0``, after each step that crosses a multiple of
    ``output_every`` and at the final state; ``step_callbacks`` see every
    accepted state together with the step size.
    """
    callbacks = list(callbacks)
    step_callbacks = list(step_callbacks)
    t0 = time.perf_counter()
    cadence = params.output_every
    next_out = state.t + cadence
    outputs = 0
    for cb in callbacks:
        cb(state)
    outputs += 1
    steps = 0
    dt_lo, dt_hi = np.inf, 0.0
    reason = "completed"
    last = None
    eps = 1e-12 * max(1.0, params.t_end)
    last_emitted_t = state.t
    while state.t < params.t_end - eps:
        if max_steps is not None and steps >= max_steps:
            reason = "max_steps"
            break
        out = step(state, params, dt_max=params.t_end - state.t)
        last = out
        if not out.advanced:
            reason = out.kind.value
            break
        state = out.state
        if params.t_end - state.t <= eps:
            state = FlowState(params.t_end, state.f, state.z, state.grid)
        steps += 1
        dt_lo = min(dt_lo, out.dt)
        dt_hi = max(dt_hi, out.dt)
        for cb in step_callbacks:
            cb(state, out.dt)
        if state.t >= next_out - eps:
            for cb in callbacks:
                cb(state)
            outputs += 1
            last_emitted_t = state.t
            while next_out <= state.t + eps:
                next_out += cadence
    if last_emitted_t != state.t:
        for cb in callbacks:
            cb(state)
        outputs += 1
    return Trajectory(state, reason, steps, float(dt_lo), float(dt_hi), time.perf_counter() - t0, last, outputs)
