"""Flow parameters, the dynamical state and initial data."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

from .grid import RadialGrid


class OuterBC(str, enum.Enum):
    DIRICHLET = "dirichlet"
    ROBIN = "robin"


@dataclass(frozen=True)
class FlowParameters:
    """Physics and stepping configuration.

    ``k_n`` defaults to ``sqrt((n-1)/(n-2))`` for ``n >= 3`` (the coupling
    whose fixed points are static vacuum metrics); it must be given for n = 2.
    """

    n: int = 3
    k_n: Optional[float] = None
    f_infinity: float = 1.0
    cfl_safety: float = 0.5
    t_end: float = 1.0
    output_every: float = 0.1
    f_cap: float = 1.0e6
    dt_floor: float = 1.0e-14
    outer_bc: OuterBC = OuterBC.DIRICHLET

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        k = self.k_n
        if k is None:
            if self.n == 2:
                raise ValueError("k_n has no default for n = 2; set it explicitly")
            k = math.sqrt((self.n - 1) / (self.n - 2))
        if not (math.isfinite(k) and k > 0):
            raise ValueError(f"k_n must be positive, got {k}")
        object.__setattr__(self, "k_n", float(k))
        if self.n == 2:
            if not (math.isfinite(self.f_infinity) and self.f_infinity > 0):
                raise ValueError("f_infinity must be positive for n = 2")
        elif self.f_infinity != 1.0:
            raise ValueError("f_infinity is fixed to 1 for n >= 3")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if not self.output_every > 0:
            raise ValueError("output_every must be positive")
        if not self.f_cap > 1:
            raise ValueError("f_cap must exceed 1")
        object.__setattr__(self, "outer_bc", OuterBC(self.outer_bc))


class InvalidState(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FlowState:
    """Time plus nodal ``f = sqrt(g_rr)`` and ``z = u_r / f``."""

    t: float
    f: np.ndarray
    z: np.ndarray
    grid: RadialGrid

    def validate(self) -> "FlowState":
        n = self.grid.nodes.size
        if self.f.shape != (n,) or self.z.shape != (n,):
            raise InvalidState("field length does not match grid")
        bad = ~np.isfinite(self.f) | ~np.isfinite(self.z)
        if bad.any():
            raise InvalidState(f"non-finite value at node {int(np.argmax(bad))}")
        if np.any(self.f <= 0):
            raise InvalidState(f"f <= 0 at node {int(np.argmax(self.f <= 0))}")
        if self.f[0] != 1.0 or self.z[0] != 0.0:
            raise InvalidState("origin values must be f = 1, z = 0")
        return self

    def copy(self, **changes) -> "FlowState":
        out = replace(self, **changes)
        if "f" not in changes:
            object.__setattr__(out, "f", self.f.copy())
        if "z" not in changes:
            object.__setattr__(out, "z", self.z.copy())
        return out


class DataKind(str, enum.Enum):
    FLAT = "flat"
    METRIC_BUMP = "metric_bump"
    FIELD_BUMP = "field_bump"
    COMBINED = "combined"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial-data family.

    MetricBump adds ``A s^2 / (1 + s^2)^{3/2}`` to the background ``f`` with
    ``s = r / metric_width``; FieldBump sets ``z = B r exp(-r^2 / sigma^2)``.
    Combined applies both.
    """

    kind: DataKind = DataKind.FLAT
    amplitude: float = 0.0
    metric_width: float = 1.0
    field_amplitude: float = 0.0
    sigma: float = 1.0
    path: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DataKind(self.kind))
        for name in ("amplitude", "metric_width", "field_amplitude", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.metric_width <= 0 or self.sigma <= 0:
            raise ValueError("widths must be positive")
        if self.kind in (DataKind.METRIC_BUMP, DataKind.COMBINED) and self.amplitude <= -1:
            raise ValueError("metric bump amplitude must exceed -1")
        if self.kind is DataKind.TABULATED and not self.path:
            raise ValueError("tabulated data needs a path")


def background_f(r: np.ndarray, params: FlowParameters) -> np.ndarray:
    """Flat data: 1 for n >= 3, cone-interpolating profile for n = 2."""
    if params.n >= 3 or params.f_infinity == 1.0:
        return np.ones_like(r)
    w = (params.f_infinity**2 - 1.0) * r**2 / (1.0 + r**2)
    return np.sqrt(1.0 + w)


def metric_bump(r: np.ndarray, amplitude: float, width: float = 1.0) -> np.ndarray:
    s2 = (r / width) ** 2
    return amplitude * s2 / (1.0 + s2) ** 1.5


def field_bump(r: np.ndarray, amplitude: float, sigma: float = 1.0) -> np.ndarray:
    return amplitude * r * np.exp(-((r / sigma) ** 2))


def load_table(path) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Read ``r, f[, z]`` comma-separated columns (a header line is allowed)."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            if not rows:
                continue  # header
            raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
        if len(vals) not in (2, 3):
            raise ValueError(f"{path}:{lineno}: expected 2 or 3 columns")
        rows.append(vals)
    if len(rows) < 4:
        raise ValueError(f"{path}: need at least 4 rows")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise ValueError(f"{path}: inconsistent column count")
    a = np.array(rows)
    if np.any(np.diff(a[:, 0]) <= 0):
        raise ValueError(f"{path}: r must be strictly increasing")
    return a[:, 0], a[:, 1], (a[:, 2] if a.shape[1] == 3 else None)


def make_initial_data(spec: InitialDataSpec, params: FlowParameters, grid: RadialGrid) -> FlowState:
    r = grid.nodes
    f = background_f(r, params)
    z = np.zeros_like(r)
    if spec.kind in (DataKind.METRIC_BUMP, DataKind.COMBINED):
        f = f + metric_bump(r, spec.amplitude, spec.metric_width)
    if spec.kind in (DataKind.FIELD_BUMP, DataKind.COMBINED):
        z = field_bump(r, spec.field_amplitude, spec.sigma)
    if spec.kind is DataKind.TABULATED:
        rt, ft, zt = load_table(spec.path)
        if rt[0] > 0 or rt[-1] < grid.R_max:
            raise ValueError("tabulated data must cover [0, R_max]")
        f = PchipInterpolator(rt, ft)(r)
        if zt is not None:
            z = PchipInterpolator(rt, zt)(r)
    f = np.asarray(f, dtype=float)
    z = np.asarray(z, dtype=float)
    f[0] = 1.0
    z[0] = 0.0
    if not np.all(np.isfinite(f)) or not np.all(np.isfinite(z)):
        raise ValueError("initial data is not finite")
    if np.any(f <= 0):
        raise ValueError("initial data has f <= 0")
    if np.any(f > params.f_cap):
        raise ValueError("initial data exceeds f_cap (minimal sphere surrogate)")
    return FlowState(0.0, f, z, grid)


@dataclass
class DecayFit:
    quantity: str
    required: float  # maximal allowed exponent
    exponent: Optional[float]  # None when the tail vanishes
    ok: bool

    @property
    def status(self) -> str:
        if self.exponent is None:
            return "exact"
        return "ok" if self.ok else "FAIL"


@dataclass
class AsymptoticsReport:
    fits: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.fits)


def _decay_exponent(r: np.ndarray, v: np.ndarray) -> Optional[float]:
    v = np.abs(v)
    scale = max(1.0, float(np.max(v)) if v.size else 0.0)
    mask = v > 1e-13 * scale
    if mask.sum() < 3:
        return None
    slope, _ = np.polyfit(np.log(r[mask]), np.log(v[mask]), 1)
    return float(slope)


def validate_asymptotics(state: FlowState, params: FlowParameters, slack: float = 0.3) -> AsymptoticsReport:
    """Log-log fits of ``|f^2 - f_inf^2|`` and ``|z|`` over ``r > R_max / 2``.

    Order-one decay needs exponents at most -1 and -2 respectively, relaxed by
    ``slack``.
    """
    r = state.grid.nodes
    tail = r > 0.5 * state.grid.R_max
    if tail.sum() < 8:
        raise ValueError("need at least 8 tail nodes beyond R_max/2")
    rt = r[tail]
    rep = AsymptoticsReport()
    for name, vals, req in (
        ("f^2 - f_inf^2", state.f[tail] ** 2 - params.f_infinity**2, -1.0),
        ("z", state.z[tail], -2.0),
    ):
        e = _decay_exponent(rt, vals)
        rep.fits.append(DecayFit(name, req, e, e is None or e <= req + slack))
    return rep


def reconstruct_u(state: FlowState) -> np.ndarray:
    """``u(r) = -int_r^R f z dr`` by the trapezoid rule, so ``u(R_max) = 0``."""
    r = state.grid.nodes
    integrand = state.f * state.z
    cum = cumulative_trapezoid(integrand, r, initial=0.0)
    return cum - cum[-1]
