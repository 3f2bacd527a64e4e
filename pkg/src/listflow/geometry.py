"""Curvature and quasi-local mass diagnostics of a state."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Parity, d1, fd_weights
from .state import FlowParameters, FlowState


@dataclass
class CurvatureProfile:
    lambda1: np.ndarray
    lambda2: np.ndarray
    R: np.ndarray
    S: np.ndarray
    riem_norm_sq: np.ndarray

    @property
    def riem_norm(self) -> np.ndarray:
        return np.sqrt(self.riem_norm_sq)


def even_slope_over_r(f: np.ndarray, grid) -> np.ndarray:
    """``f'(r) / r`` for an even field, as ``2 df/d(r^2)``.

    The three-point stencil in ``s = r^2`` is exact for quadratics in ``s``,
    so the error vanishes like ``r^2`` at the origin instead of staying
    ``O(h^2)``; that keeps ``(2/r)(lambda1 - lambda2)`` second order.
    """
    r = grid.nodes
    s = r * r
    out = np.empty_like(f)
    hm = s[1:-1] - s[:-2]
    hp = s[2:] - s[1:-1]
    fc = f[1:-1]
    out[1:-1] = 2.0 * (-hp / (hm * (hm + hp)) * (f[:-2] - fc) + hm / (hp * (hm + hp)) * (f[2:] - fc))
    # one-sided in s: f''(0) to O(h^4)
    w = fd_weights(0.0, s[:3], 1)
    out[0] = 2.0 * (w[1] * (f[1] - f[0]) + w[2] * (f[2] - f[0]))
    e = grid._end1
    out[-1] = (e[0] * (f[-3] - f[-1]) + e[1] * (f[-2] - f[-1])) / r[-1]
    return out


def sectional_curvatures(f: np.ndarray, grid) -> tuple[np.ndarray, np.ndarray]:
    r = grid.nodes[1:]
    slope = even_slope_over_r(f, grid)
    lam1 = np.empty_like(f)
    lam2 = np.empty_like(f)
    fr = f[1:]
    lam1[1:] = slope[1:] / fr**3
    lam2[1:] = (1.0 - 1.0 / (fr * fr)) / (r * r)
    # both tend to f''(0) for even f with f(0) = 1, which is slope[0]
    lam1[0] = lam2[0] = slope[0]
    return lam1, lam2


def scalar_curvature(lam1: np.ndarray, lam2: np.ndarray, n: int) -> np.ndarray:
    return 2 * (n - 1) * lam1 + (n - 1) * (n - 2) * lam2


def riem_norm_sq(lam1: np.ndarray, lam2: np.ndarray, n: int) -> np.ndarray:
    return 2 * (n - 1) * lam1**2 + (n - 1) * (n - 2) * lam2**2


def curvature(state: FlowState, params: FlowParameters) -> CurvatureProfile:
    n = params.n
    lam1, lam2 = sectional_curvatures(state.f, state.grid)
    R = scalar_curvature(lam1, lam2, n)
    S = R - params.k_n**2 * state.z**2
    return CurvatureProfile(lam1, lam2, R, S, riem_norm_sq(lam1, lam2, n))


def bianchi_residual(state: FlowState) -> np.ndarray:
    """``d lambda2/dr - (2/r)(lambda1 - lambda2)`` at interior nodes."""
    lam1, lam2 = sectional_curvatures(state.f, state.grid)
    dl2 = d1(lam2, Parity.EVEN, state.grid)
    out = np.zeros_like(lam2)
    r = state.grid.nodes[1:-1]
    out[1:-1] = dl2[1:-1] - 2.0 / r * (lam1[1:-1] - lam2[1:-1])
    return out


@dataclass
class AdmEstimate:
    value: float
    uncertainty: float
    slope: float
    residual: float


@dataclass
class MassProfile:
    H: np.ndarray
    mu_BY: np.ndarray
    mu_MS: np.ndarray
    adm: AdmEstimate

    @property
    def adm_estimate(self) -> float:
        return self.adm.value


def adm_fit(state: FlowState, params: FlowParameters, min_nodes: int = 8) -> AdmEstimate:
    """Extrapolate ``r (1 - 1/f)`` to ``1/r -> 0`` over the outer half of the grid.

    The Dirichlet node ``r_N`` is left out. The value is the intercept of a
    linear fit in ``1/r``; the uncertainty adds the intercept's standard
    error to its shifts under quadratic and cubic fits.
    """
    if params.n == 2:
        return AdmEstimate(math.nan, math.nan, math.nan, math.nan)
    r = state.grid.nodes
    tail = (r > 0.5 * state.grid.R_max)
    tail[-1] = False
    if tail.sum() < min_nodes:
        raise ValueError(f"ADM fit needs at least {min_nodes} tail nodes")
    x = 1.0 / r[tail]
    y = r[tail] * (1.0 - 1.0 / state.f[tail])
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    dof = max(len(x) - 2, 1)
    sigma2 = float(res @ res) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    # truncation of the 1/r expansion, telescoped through quadratic and cubic fits
    c2 = np.polyfit(x, y, 2)[-1]
    c3 = np.polyfit(x, y, 3)[-1]
    unc = math.sqrt(max(cov[0, 0], 0.0)) + abs(c2 - coef[0]) + abs(c3 - c2)
    return AdmEstimate(float(coef[0]), float(unc), float(coef[1]), float(np.max(np.abs(res))))


def masses(state: FlowState, params: FlowParameters, strict: bool = True) -> MassProfile:
    """Mean curvature and the Brown-York / Misner-Sharp masses of r = const.

    The n = 3 normalisation ``8 pi / r`` is used in every dimension. Both masses
    vanish at the origin. With ``strict=False`` a tail too short for the ADM
    fit yields NaN instead of raising.
    """
    r = state.grid.nodes
    f = state.f
    H = np.empty_like(f)
    H[0] = np.inf
    H[1:] = (params.n - 1) / (r[1:] * f[1:])
    mu_by = np.zeros_like(f)
    mu_by[1:] = 8.0 * np.pi / r[1:] * (1.0 - 1.0 / f[1:])
    mu_ms = (1.0 + 1.0 / f) * mu_by
    try:
        adm = adm_fit(state, params)
    except ValueError:
        if strict:
            raise
        adm = AdmEstimate(math.nan, math.nan, math.nan, math.nan)
    return MassProfile(H, mu_by, mu_ms, adm)


def deturck_gradient(state: FlowState, params: FlowParameters) -> np.ndarray:
    f = state.f
    fp = d1(f, Parity.EVEN, state.grid)
    out = np.zeros_like(f)
    r = state.grid.nodes[1:]
    out[1:] = fp[1:] / f[1:] + (params.n - 2) / r * (f[1:] ** 2 - 1.0)
    return out
