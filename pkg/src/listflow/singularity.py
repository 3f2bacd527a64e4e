"""Curvature blow-up tracking and parabolic rescaling of candidate slices."""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import curvature
from .state import FlowParameters, FlowState, reconstruct_u

DEFAULT_C = 2.0


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    t: float
    sup_riem: float
    r_argmax: float


@dataclass
class RescaledProfile:
    """``s = 0`` slice of the rescaling by ``B``: radius stretched by ``sqrt(B)``,
    curvatures divided by ``B``, ``f`` and ``u`` unchanged."""

    t: float
    B: float
    r_tilde: np.ndarray
    f: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    riem: np.ndarray
    u: np.ndarray
    lambda2_floor: Optional[float] = None  # -C_lambda2 / (B (1 + t))

    def table(self) -> np.ndarray:
        return np.column_stack([self.r_tilde, self.f, self.lambda1, self.lambda2, self.riem, self.u])


@dataclass
class BlowUpRecord:
    sequence: list  # (t_k, r_k, B_k)
    C_used: float
    indices: list = field(default_factory=list)  # positions in the history
    steps: list = field(default_factory=list)
    rescaled_profiles: dict = field(default_factory=dict)  # step -> RescaledProfile
    termination: str = "unknown"

    @property
    def empty(self) -> bool:
        return not self.sequence


def _as_entries(history) -> list:
    out = []
    for j, h in enumerate(history):
        if isinstance(h, HistoryEntry):
            out.append(h)
        elif np.ndim(h) == 0:
            out.append(HistoryEntry(j, float(j), float(h), math.nan))
        else:
            t, v, r = h
            out.append(HistoryEntry(j, float(t), float(v), float(r)))
    return out


def scan_indices(values: Sequence[float], C: float) -> list:
    """Indices ``j`` with ``max_{i <= j} values[i] <= C values[j]`` and ``values[j] > 0``."""
    if not C >= 1:
        raise ValueError(f"C must be >= 1, got {C}")
    out = []
    running = -math.inf
    for j, v in enumerate(values):
        running = max(running, v)
        if v > 0 and running <= C * v:
            out.append(j)
    return out


def track_blowup(history, C: float = DEFAULT_C, termination: str = "unknown") -> BlowUpRecord:
    """Scan a per-step ``(t, sup |Riem|, argmax radius)`` history.

    Plain numbers are accepted as a toy history (``t`` = index). Zero curvature
    never qualifies, so a flat run yields an empty sequence.
    """
    entries = _as_entries(history)
    if not entries:
        raise ValueError("history is empty")
    idx = scan_indices([e.sup_riem for e in entries], C)
    seq = [(entries[j].t, entries[j].r_argmax, entries[j].sup_riem) for j in idx]
    return BlowUpRecord(seq, float(C), idx, [entries[j].step for j in idx], termination=termination)


def check_record(record: BlowUpRecord, history) -> bool:
    """Brute-force re-check of the defining inequality on the stored history."""
    entries = _as_entries(history)
    for j, (_, _, B) in zip(record.indices, record.sequence):
        if max(e.sup_riem for e in entries[: j + 1]) > record.C_used * B:
            return False
    return True


def rescale(state: FlowState, B: float, params: FlowParameters, C_lambda2_minus: Optional[float] = None) -> RescaledProfile:
    if not (math.isfinite(B) and B > 0):
        raise ValueError(f"B must be positive, got {B}")
    curv = curvature(state, params)
    floor = None
    if C_lambda2_minus is not None:
        floor = -C_lambda2_minus / (B * (1.0 + state.t))
    return RescaledProfile(
        t=state.t,
        B=B,
        r_tilde=math.sqrt(B) * state.grid.nodes,
        f=state.f.copy(),
        lambda1=curv.lambda1 / B,
        lambda2=curv.lambda2 / B,
        riem=curv.riem_norm / B,
        u=reconstruct_u(state),
        lambda2_floor=floor,
    )


def sup_riem(state: FlowState, params: FlowParameters) -> tuple[float, float]:
    riem = curvature(state, params).riem_norm
    j = int(np.argmax(riem))
    return float(riem[j]), float(state.grid.nodes[j])


class BlowUpTracker:
    """Step callback that records the history and keeps candidate states.

    Qualification only depends on the past, so candidates are decided online.
    At most ``keep`` states are retained (the latest ones).
    """

    def __init__(self, params: FlowParameters, C: float = DEFAULT_C, keep: int = 16):
        if not C >= 1:
            raise ValueError(f"C must be >= 1, got {C}")
        self.params = params
        self.C = float(C)
        self.keep = int(keep)
        self.history: list[HistoryEntry] = []
        self.states: "OrderedDict[int, FlowState]" = OrderedDict()
        self._running = -math.inf

    def record(self, state: FlowState) -> None:
        v, r = sup_riem(state, self.params)
        step = len(self.history)
        self.history.append(HistoryEntry(step, state.t, v, r))
        self._running = max(self._running, v)
        if v > 0 and self._running <= self.C * v:
            self.states[step] = state
            while len(self.states) > self.keep:
                self.states.popitem(last=False)

    def __call__(self, state: FlowState, dt: float = 0.0) -> None:
        self.record(state)

    def finish(self, termination: str, C: Optional[float] = None, C_lambda2_minus: Optional[float] = None) -> BlowUpRecord:
        rec = track_blowup(self.history, self.C if C is None else C, termination)
        for step, (_, _, B) in zip(rec.steps, rec.sequence):
            st = self.states.get(step)
            if st is not None:
                rec.rescaled_profiles[step] = rescale(st, B, self.params, C_lambda2_minus)
        return rec


def sensitivity(history, Cs: Sequence[float] = (1.0, 1.5, 2.0, 4.0)) -> dict:
    """Sequence length for several values of ``C``."""
    return {float(C): len(track_blowup(history, C).sequence) for C in Cs}
