"""INI-style run configuration.

Sections: ``grid``, ``physics``, ``initial_data``, ``output``, ``monitors``
and ``blowup``. Unknown keys and bad values are reported with the line they
came from.
"""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .grid import RadialGrid, build_grid
from .singularity import DEFAULT_C
from .state import FlowParameters, InitialDataSpec, OuterBC, make_initial_data, FlowState

OUTPUT_ENV = "LISTFLOW_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None, key: Optional[str] = None, source: str = "<config>"):
        where = source if line is None else f"{source}:{line}"
        if key:
            where += f" [{key}]"
        super().__init__(f"{where}: {msg}")
        self.line = line
        self.key = key


# key -> (converter, default); a default of ... means required
_SCHEMA = {
    "grid": {"R_max": (float, ...), "N": (int, ...), "stretch": (str, "uniform")},
    "physics": {
        "n": (int, ...),
        "k_n": (float, None),
        "f_infinity": (float, None),
        "t_end": (float, 1.0),
        "cfl_safety": (float, 0.5),
        "f_cap": (float, 1.0e6),
        "dt_floor": (float, 1.0e-14),
        "outer_bc": (str, "dirichlet"),
    },
    "initial_data": {
        "kind": (str, "flat"),
        "amplitude": (float, 0.0),
        "metric_width": (float, 1.0),
        "field_amplitude": (float, 0.0),
        "sigma": (float, 1.0),
        "path": (str, None),
        "perturbation": (float, 0.0),
        "seed": (int, 0),
    },
    "output": {
        "dir": (str, "listflow_out"),
        "output_every": (float, 0.1),
        "snapshots": (str, "yes"),
    },
    "monitors": {"tol": (float, None), "fatal": (str, "no")},
    "blowup": {"C": (float, DEFAULT_C), "keep": (int, 16)},
}

_BOOL = {"yes": True, "true": True, "on": True, "1": True, "no": False, "false": False, "off": False, "0": False}


@dataclass(frozen=True)
class RunConfig:
    params: FlowParameters
    data: InitialDataSpec
    R_max: float
    N: int
    stretch: Optional[str]
    output_dir: Path
    tol: Optional[float] = None
    fatal_violations: bool = False
    blowup_C: float = DEFAULT_C
    blowup_keep: int = 16
    perturbation: float = 0.0
    seed: int = 0
    snapshots: bool = True
    source_text: str = field(default="", repr=False)

    def grid(self, N: Optional[int] = None) -> RadialGrid:
        return build_grid(self.R_max, self.N if N is None else N, self.stretch)

    def initial_state(self, grid: Optional[RadialGrid] = None) -> FlowState:
        grid = grid or self.grid()
        st = make_initial_data(self.data, self.params, grid)
        if self.perturbation:
            st = perturb(st, self.perturbation, self.seed, self.params)
        return st


def perturb(state: FlowState, eps: float, seed: int, params: FlowParameters) -> FlowState:
    """Add ``eps * sum_m c_m (r/m)^2 exp(-(r/m)^2)`` with ``c_m ~ N(0, 1)``."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(4)
    r = state.grid.nodes
    bump = sum(c[m - 1] * (r / m) ** 2 * np.exp(-((r / m) ** 2)) for m in range(1, 5))
    f = state.f + eps * bump
    if np.any(f <= 0) or np.any(f > params.f_cap):
        raise ValueError("perturbed data leaves (0, f_cap]")
    return FlowState(state.t, f, state.z.copy(), state.grid)


def _line_index(text: str) -> dict:
    """Map (section, key) to the line number where it is set."""
    out = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = lineno
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = lineno
    return out


def parse_config(text: str, source: str = "<config>", env: Optional[dict] = None) -> RunConfig:
    env = os.environ if env is None else env
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(str(e).splitlines()[0], getattr(e, "lineno", None), source=source) from None
    lines = _line_index(text)
    vals = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)), source=source)
    for sec, keys in _SCHEMA.items():
        lower = {k.lower(): k for k in keys}
        given = dict(cp.items(sec)) if cp.has_section(sec) else {}
        for k in given:
            if k.lower() not in lower:
                raise ConfigError("unknown key", lines.get((sec, k.lower())), f"{sec}.{k}", source)
        given = {lower[k.lower()]: v for k, v in given.items()}
        for k, (conv, default) in keys.items():
            loc = lines.get((sec, k.lower()))
            if k in given and given[k].strip() != "":
                raw = given[k].strip()
                try:
                    v = conv(raw)
                except ValueError:
                    raise ConfigError(f"cannot read {raw!r} as {conv.__name__}", loc, f"{sec}.{k}", source) from None
                if isinstance(v, float) and not math.isfinite(v):
                    raise ConfigError("must be finite", loc, f"{sec}.{k}", source)
            elif default is ...:
                raise ConfigError("missing required key", lines.get((sec, None)), f"{sec}.{k}", source)
            else:
                v = default
            vals[(sec, k)] = (v, loc)

    def get(sec, k):
        return vals[(sec, k)][0]

    def fail(sec, k, msg):
        raise ConfigError(msg, vals[(sec, k)][1], f"{sec}.{k}", source)

    def flag(sec, k):
        v = str(get(sec, k)).lower()
        if v not in _BOOL:
            fail(sec, k, f"expected yes/no, got {v!r}")
        return _BOOL[v]

    n = get("physics", "n")
    k_n = get("physics", "k_n")
    if k_n is not None and not k_n > 0:
        fail("physics", "k_n", "k_n must be positive")
    if n == 2 and k_n is None:
        fail("physics", "k_n", "k_n has no default for n = 2")
    f_inf = get("physics", "f_infinity")
    if n == 2 and f_inf is None:
        fail("physics", "f_infinity", "f_infinity is required for n = 2")
    try:
        OuterBC(get("physics", "outer_bc").lower())
    except ValueError:
        fail("physics", "outer_bc", "expected dirichlet or robin")
    try:
        params = FlowParameters(
            n=n,
            k_n=k_n,
            f_infinity=1.0 if f_inf is None else f_inf,
            cfl_safety=get("physics", "cfl_safety"),
            t_end=get("physics", "t_end"),
            output_every=get("output", "output_every"),
            f_cap=get("physics", "f_cap"),
            dt_floor=get("physics", "dt_floor"),
            outer_bc=get("physics", "outer_bc").lower(),
        )
    except ValueError as e:
        raise ConfigError(str(e), lines.get(("physics", None)), "physics", source) from None
    try:
        data = InitialDataSpec(
            kind=get("initial_data", "kind").lower(),
            amplitude=get("initial_data", "amplitude"),
            metric_width=get("initial_data", "metric_width"),
            field_amplitude=get("initial_data", "field_amplitude"),
            sigma=get("initial_data", "sigma"),
            path=get("initial_data", "path"),
        )
    except ValueError as e:
        raise ConfigError(str(e), lines.get(("initial_data", None)), "initial_data", source) from None
    if data.path and not Path(data.path).is_absolute() and source != "<config>":
        data = InitialDataSpec(**{**data.__dict__, "path": str(Path(source).parent / data.path)})
    stretch = get("grid", "stretch")
    try:
        build_grid(get("grid", "R_max"), get("grid", "N"), stretch)
    except ValueError as e:
        raise ConfigError(str(e), lines.get(("grid", None)), "grid", source) from None
    tol = get("monitors", "tol")
    if tol is not None and tol < 0:
        fail("monitors", "tol", "tol must be non-negative")
    C = get("blowup", "C")
    if not C >= 1:
        fail("blowup", "C", "C must be >= 1")
    if get("blowup", "keep") < 0:
        fail("blowup", "keep", "keep must be non-negative")
    out_dir = env.get(OUTPUT_ENV) or get("output", "dir")
    return RunConfig(
        params=params,
        data=data,
        R_max=get("grid", "R_max"),
        N=get("grid", "N"),
        stretch=None if stretch == "uniform" else stretch,
        output_dir=Path(out_dir),
        tol=tol,
        fatal_violations=flag("monitors", "fatal"),
        blowup_C=C,
        blowup_keep=get("blowup", "keep"),
        perturbation=get("initial_data", "perturbation"),
        seed=get("initial_data", "seed"),
        snapshots=flag("output", "snapshots"),
        source_text=text,
    )


def load_config(path, env: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", source=str(path)) from None
    return parse_config(text, source=str(path), env=env)
