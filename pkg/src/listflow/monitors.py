"""A-priori bound constants and signed margins along a trajectory.

Monitors only observe; they never alter the evolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import curvature, masses, sectional_curvatures
from .grid import Parity, d1
from .state import FlowParameters, FlowState

MARGIN_NAMES = ("m1", "m2", "m3a", "m3b", "m4", "m5", "m6")


@dataclass(frozen=True)
class BoundConstants:
    C_z_plus: float
    C_S_minus: float
    C_f_minus: float
    C_f_plus: float
    p: float
    C_lambda2_minus: float
    C_zeta_plus: float
    S_initially_nonnegative: bool
    mass_initially_nonnegative: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def zeta_profile(state: FlowState) -> np.ndarray:
    """``z / r`` with the odd-parity limit ``z'(0)`` at the origin."""
    out = np.empty_like(state.z)
    out[1:] = state.z[1:] / state.grid.nodes[1:]
    out[0] = d1(state.z, Parity.ODD, state.grid)[0]
    return out


def hessian_profile(state: FlowState) -> np.ndarray:
    return d1(state.z, Parity.ODD, state.grid)


def y_profile(state: FlowState) -> np.ndarray:
    """``f lambda2 / (1 + f) - f lambda1 / 2`` off the origin, 0 at it."""
    lam1, lam2 = sectional_curvatures(state.f, state.grid)
    f = state.f
    y = f * lam2 / (1.0 + f) - 0.5 * f * lam1
    y[0] = 0.0
    return y


def compute_constants(initial: FlowState, params: FlowParameters) -> BoundConstants:
    n, k = params.n, params.k_n
    f0, z0 = initial.f, initial.z
    C_z = max(1.0 / math.sqrt(2.0 * k * k), float(np.max(np.abs(z0))))
    curv = curvature(initial, params)
    S_inf = float(np.min(curv.S))
    C_S = min(-n / 2.0, S_inf)
    kc2 = (k * C_z) ** 2
    p = 1.0 + kc2
    if n == 2:
        C_f_minus = min(1.0, params.f_infinity, float(np.min(f0)))
        C_f_plus = max(params.f_infinity, math.sqrt(1.0 + kc2), float(np.max(f0)))
    else:
        C_f_minus = float(np.min(f0))
        C_f_plus = max(math.sqrt(1.0 + kc2), float(np.max(f0)))
    C_l2 = max(1.0 / (n - 1), -2.0 * float(np.min(curv.lambda2)))
    C_zeta = 2.0 * float(np.max(np.abs(zeta_profile(initial))))
    mu = masses(initial, params, strict=False).mu_BY
    return BoundConstants(
        C_z_plus=C_z,
        C_S_minus=C_S,
        C_f_minus=C_f_minus,
        C_f_plus=C_f_plus,
        p=p,
        C_lambda2_minus=C_l2,
        C_zeta_plus=C_zeta,
        S_initially_nonnegative=S_inf >= 0.0,
        mass_initially_nonnegative=bool(np.min(mu) >= 0.0),
    )


@dataclass
class DiagnosticsRecord:
    t: float
    sup_z: float
    sup_riem: float
    min_f: float
    max_f: float
    min_S: float
    min_lambda2: float
    min_H_off_origin: float
    max_zeta: float
    max_zprime: float
    min_y: float
    adm_estimate: float
    margins: dict
    tol: float
    violations: list = field(default_factory=list)
    zeta_hypothesis_held: Optional[bool] = None
    S_positivity_held: Optional[bool] = None
    mass_positivity_held: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return not self.violations


def default_tol(state: FlowState) -> float:
    return 10.0 * state.grid.h_max**2


def audit(
    state: FlowState,
    consts: BoundConstants,
    params: FlowParameters,
    tol: Optional[float] = None,
    zeta_hypothesis: Optional[Callable[[float], float]] = None,
) -> DiagnosticsRecord:
    """Evaluate every monitored bound; margin >= 0 means the bound holds.

    For n >= 3 the ``z/r`` bound is a hypothesis ``F(t)`` (constant
    ``C_zeta_plus`` by default); it is reported but never counted as a
    violation.
    """
    if tol is None:
        tol = default_tol(state)
    t = state.t
    curv = curvature(state, params)
    mass = masses(state, params, strict=False)
    r = state.grid.nodes
    f, z = state.f, state.z
    zeta = zeta_profile(state)
    zprime = hessian_profile(state)
    y = y_profile(state)
    sup_z = float(np.max(np.abs(z)))
    max_zeta = float(np.max(np.abs(zeta)))
    min_H = float(np.min(mass.H[1:]))
    if params.n == 2:
        bound_zeta = consts.C_zeta_plus
    else:
        bound_zeta = zeta_hypothesis(t) if zeta_hypothesis else consts.C_zeta_plus
    m = {
        "m1": consts.C_z_plus / math.sqrt(1.0 + t) - sup_z,
        "m2": float(np.min(curv.S)) - consts.C_S_minus / (1.0 + t),
        "m3a": float(np.min(f)) - consts.C_f_minus,
        "m3b": consts.C_f_plus * (1.0 + t) ** consts.p - float(np.max(f)),
        "m4": float(np.min(curv.lambda2)) + consts.C_lambda2_minus / (1.0 + t),
        "m5": bound_zeta - max_zeta,
        "m6": min_H,
    }
    violations = [k for k in ("m1", "m2", "m3a", "m3b", "m4") if m[k] < -tol]
    if params.n == 2 and m["m5"] < -tol:
        violations.append("m5")
    if not m["m6"] > 0:
        violations.append("m6")
    rec = DiagnosticsRecord(
        t=t,
        sup_z=sup_z,
        sup_riem=float(np.sqrt(np.max(curv.riem_norm_sq))),
        min_f=float(np.min(f)),
        max_f=float(np.max(f)),
        min_S=float(np.min(curv.S)),
        min_lambda2=float(np.min(curv.lambda2)),
        min_H_off_origin=min_H,
        max_zeta=max_zeta,
        max_zprime=float(np.max(np.abs(zprime))),
        min_y=float(np.min(y)),
        adm_estimate=mass.adm_estimate,
        margins=m,
        tol=tol,
        violations=violations,
    )
    if params.n >= 3:
        rec.zeta_hypothesis_held = m["m5"] >= -tol
    if consts.S_initially_nonnegative:
        rec.S_positivity_held = rec.min_S >= -tol
        if not rec.S_positivity_held:
            rec.violations.append("S_positivity")
    if consts.mass_initially_nonnegative:
        slack = tol * 8.0 * np.pi / r[1:]
        rec.mass_positivity_held = bool(np.all(mass.mu_BY[1:] >= -slack))
        if not rec.mass_positivity_held:
            rec.violations.append("mass_positivity")
    return rec
