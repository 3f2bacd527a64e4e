"""Radial grids and second-order finite-difference operators.

Fields live on nodes ``r_0 = 0 < r_1 < ... < r_N = R_max``. The origin is
closed with a ghost node at ``-r_1`` whose value follows the field's
reflection parity; the outer node uses one-sided stencils.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

MIN_NODES = 16


class Parity(enum.Enum):
    EVEN = 1
    ODD = -1


def fd_weights(x0: float, xs: np.ndarray, order: int) -> np.ndarray:
    """Fornberg weights for the ``order``-th derivative at ``x0`` on ``xs``."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


StretchSpec = Union[None, str, Callable[[np.ndarray], np.ndarray]]


def _stretch_map(stretch: StretchSpec) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    if stretch is None or stretch == "uniform":
        return None
    if callable(stretch):
        return stretch
    kind, _, arg = str(stretch).partition(":")
    kind = kind.strip().lower()
    try:
        a = float(arg) if arg else None
    except ValueError:
        raise ValueError(f"bad stretch parameter in {stretch!r}") from None
    if kind == "power":
        p = 2.0 if a is None else a
        if p < 1.0:
            # r'' unbounded at the origin
            raise ValueError("power stretch needs exponent >= 1")
        return lambda xi: xi**p
    if kind == "sinh":
        s = 3.0 if a is None else a
        if s <= 0:
            raise ValueError("sinh stretch needs a positive scale")
        return lambda xi: np.sinh(s * xi) / np.sinh(s)
    raise ValueError(f"unknown stretch map {stretch!r}")


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Immutable radial grid with precomputed stencil weights."""

    nodes: np.ndarray
    h: Optional[float]  # None for stretched grids
    stretch: Optional[str] = None
    _w1: np.ndarray = field(repr=False, default=None)
    _w2: np.ndarray = field(repr=False, default=None)
    _end1: np.ndarray = field(repr=False, default=None)
    _end2: np.ndarray = field(repr=False, default=None)
    _ws1: np.ndarray = field(repr=False, default=None)
    _ws2: np.ndarray = field(repr=False, default=None)
    _inv_r_all: np.ndarray = field(repr=False, default=None)
    _zeta0_w: np.ndarray = field(repr=False, default=None)
    _spacing_interior: np.ndarray = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def R_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def uniform(self) -> bool:
        return self.h is not None

    @property
    def spacing(self) -> np.ndarray:
        """Local spacing per node: the smaller of the two adjacent cells."""
        dr = np.diff(self.nodes)
        s = np.empty_like(self.nodes)
        s[0] = dr[0]
        s[-1] = dr[-1]
        s[1:-1] = np.minimum(dr[:-1], dr[1:])
        return s

    @property
    def h_max(self) -> float:
        return float(np.max(np.diff(self.nodes)))


def build_grid(R_max: float, N: int, stretch: StretchSpec = None) -> RadialGrid:
    """Build a grid of ``N + 1`` nodes on ``[0, R_max]``.

    ``stretch`` is ``None``/``"uniform"``, ``"power:p"`` (``r = R xi**p``),
    ``"sinh:s"`` or a callable mapping ``[0, 1]`` monotonically onto itself.
    """
    if not (np.isfinite(R_max) and R_max > 0):
        raise ValueError("R_max must be positive")
    if int(N) != N or N < MIN_NODES:
        raise ValueError(f"N must be an integer >= {MIN_NODES}, got {N}")
    N = int(N)
    mapping = _stretch_map(stretch)
    if mapping is None:
        h = R_max / N
        nodes = np.arange(N + 1, dtype=float) * h
        nodes[-1] = R_max
        label = None
    else:
        xi = np.linspace(0.0, 1.0, N + 1)
        nodes = R_max * np.asarray(mapping(xi), dtype=float)
        fine = np.linspace(0.0, 1.0, 8 * N + 1)
        m = np.asarray(mapping(fine), dtype=float)
        d2 = np.diff(m, 2) * (8 * N) ** 2
        if not np.all(np.isfinite(d2)):
            raise ValueError("stretch map has unbounded second derivative")
        if not np.all(np.diff(m) > 0) or not np.all(np.diff(nodes) > 0):
            raise ValueError("stretch map is not strictly monotone")
        if abs(m[0]) > 1e-14 or abs(m[-1] - 1.0) > 1e-12:
            raise ValueError("stretch map must send 0 -> 0 and 1 -> 1")
        nodes[0] = 0.0
        nodes[-1] = R_max
        h = None
        label = stretch if isinstance(stretch, str) else getattr(stretch, "__name__", "custom")

    # interior three-point weights (rows: minus, centre, plus)
    if h is not None:
        hm = np.full(N - 1, h)
        hp = np.full(N - 1, h)
    else:
        hm = nodes[1:-1] - nodes[:-2]
        hp = nodes[2:] - nodes[1:-1]
    w1 = np.vstack([-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))])
    w2 = np.vstack([2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))])
    sq = nodes * nodes
    sm = sq[1:-1] - sq[:-2]
    sp = sq[2:] - sq[1:-1]
    ws1 = np.vstack([-sp / (sm * (sm + sp)), (sp - sm) / (sm * sp), sm / (sp * (sm + sp))])
    ws2 = np.vstack([2.0 / (sm * (sm + sp)), -2.0 / (sm * sp), 2.0 / (sp * (sm + sp))])
    x0 = nodes[-1]
    end1 = fd_weights(x0, nodes[-3:], 1)
    end2 = fd_weights(x0, nodes[-4:], 2)
    return RadialGrid(
        nodes=nodes, h=h, stretch=label, _w1=w1, _w2=w2, _end1=end1, _end2=end2, _ws1=ws1, _ws2=ws2,
        _inv_r_all=1.0 / nodes[1:],
        _zeta0_w=fd_weights(0.0, nodes[1:4] ** 2, 0),
        _spacing_interior=np.minimum(np.diff(nodes)[:-1], np.diff(nodes)[1:]),
    )


def _check(field_: np.ndarray, grid: RadialGrid) -> np.ndarray:
    field_ = np.asarray(field_, dtype=float)
    if field_.shape != grid.nodes.shape:
        raise ValueError(f"field has length {field_.size}, grid needs {grid.nodes.size}")
    return field_


def d1(field_: np.ndarray, parity: Parity, grid: RadialGrid) -> np.ndarray:
    """First radial derivative, second order everywhere.

    Stencils are applied to differences from the centre value, so constants
    differentiate to exactly zero.
    """
    g = _check(field_, grid)
    out = np.empty_like(g)
    w = grid._w1
    gc = g[1:-1]
    out[1:-1] = w[0] * (g[:-2] - gc) + w[2] * (g[2:] - gc)
    r1 = grid.nodes[1]
    if parity is Parity.EVEN:
        out[0] = 0.0
    else:
        # ghost g(-r1) = -g(r1)
        out[0] = (g[1] + g[1]) / (2.0 * r1)
    e = grid._end1
    out[-1] = e[0] * (g[-3] - g[-1]) + e[1] * (g[-2] - g[-1])
    return out


def d2(field_: np.ndarray, parity: Parity, grid: RadialGrid) -> np.ndarray:
    """Second radial derivative, three-point stencil in the interior."""
    g = _check(field_, grid)
    out = np.empty_like(g)
    w = grid._w2
    gc = g[1:-1]
    out[1:-1] = w[0] * (g[:-2] - gc) + w[2] * (g[2:] - gc)
    r1 = grid.nodes[1]
    ghost = g[1] if parity is Parity.EVEN else -g[1]
    out[0] = (ghost - 2.0 * g[0] + g[1]) / (r1 * r1)
    e = grid._end2
    out[-1] = e[0] * (g[-4] - g[-1]) + e[1] * (g[-3] - g[-1]) + e[2] * (g[-2] - g[-1])
    return out
