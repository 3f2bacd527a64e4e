import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from listflow.dynamics import evolve
from listflow.grid import build_grid
from listflow.monitors import (
    MARGIN_NAMES, audit, compute_constants, default_tol, hessian_profile, y_profile, zeta_profile,
)
from listflow.state import FlowParameters, FlowState, InitialDataSpec, make_initial_data


def test_flat_constants_n3():
    p = FlowParameters(n=3)
    s = make_initial_data(InitialDataSpec("flat"), p, build_grid(20.0, 200))
    c = compute_constants(s, p)
    assert c.C_z_plus == pytest.approx(0.5)
    assert c.C_S_minus == -1.5
    assert c.C_f_minus == 1.0
    assert c.p == pytest.approx(1.5)
    # max{sqrt(1 + (k C_z)^2), sup f} = sqrt(3/2)
    assert c.C_f_plus == pytest.approx(math.sqrt(1.5))
    assert c.C_lambda2_minus == 0.5
    assert c.C_zeta_plus == 0.0
    assert c.S_initially_nonnegative and c.mass_initially_nonnegative


def test_field_bump_C_z():
    p = FlowParameters(n=3)
    s = make_initial_data(InitialDataSpec("field_bump", field_amplitude=1.0), p, build_grid(10.0, 2000))
    assert np.max(np.abs(s.z)) == pytest.approx(0.42888, abs=1e-4)
    assert compute_constants(s, p).C_z_plus == pytest.approx(0.5)
    big = make_initial_data(InitialDataSpec("field_bump", field_amplitude=3.0), p, build_grid(10.0, 2000))
    assert compute_constants(big, p).C_z_plus == pytest.approx(np.max(np.abs(big.z)))


def test_n2_lower_f_constant():
    p = FlowParameters(n=2, k_n=1.0, f_infinity=1.2)
    s = make_initial_data(InitialDataSpec("metric_bump", amplitude=0.2), p, build_grid(20.0, 400))
    assert 1.0 <= s.f.min() and s.f.max() <= 1.3
    c = compute_constants(s, p)
    assert c.C_f_minus == 1.0
    assert c.C_f_plus == max(1.2, math.sqrt(1 + c.C_z_plus**2), s.f.max())


def test_flat_audit_margins():
    p = FlowParameters(n=3)
    s = make_initial_data(InitialDataSpec("flat"), p, build_grid(20.0, 200))
    c = compute_constants(s, p)
    for t in (0.0, 0.7, 3.0):
        rec = audit(FlowState(t, s.f, s.z, s.grid), c, p)
        assert rec.ok and all(rec.margins[k] >= 0 for k in MARGIN_NAMES)
        assert rec.margins["m1"] == c.C_z_plus / math.sqrt(1 + t)
        assert rec.tol == 10 * s.grid.h_max**2 == default_tol(s)


def test_fault_injection_m3a():
    p = FlowParameters(n=3)
    s = make_initial_data(InitialDataSpec("metric_bump", amplitude=0.3), p, build_grid(20.0, 200))
    c = compute_constants(s, p)
    f = s.f.copy()
    f[50] = 0.5 * c.C_f_minus
    rec = audit(FlowState(0.0, f, s.z, s.grid), c, p)
    assert rec.margins["m3a"] < 0 and "m3a" in rec.violations


def test_field_bump_run_m1():
    p = FlowParameters(n=3, t_end=5.0, output_every=0.25)
    s = make_initial_data(InitialDataSpec("field_bump", field_amplitude=0.8), p, build_grid(20.0, 200))
    c = compute_constants(s, p)
    recs = []
    evolve(s, p, callbacks=[lambda st: recs.append(audit(st, c, p))])
    assert len(recs) == 21
    assert all(r.margins["m1"] >= -r.tol for r in recs)
    assert all(r.margins["m6"] > 0 for r in recs)


def test_zeta_hypothesis_never_violates_for_n3():
    p = FlowParameters(n=3)
    s = make_initial_data(InitialDataSpec("field_bump", field_amplitude=0.5), p, build_grid(20.0, 200))
    c = compute_constants(s, p)
    rec = audit(s, c, p, zeta_hypothesis=lambda t: 0.0)
    assert rec.zeta_hypothesis_held is False
    assert "m5" not in rec.violations
    p2 = FlowParameters(n=2, k_n=1.0)
    rec2 = audit(s, c.__class__(**{**c.as_dict(), "C_zeta_plus": 0.0}), p2)
    assert "m5" in rec2.violations


def test_positivity_flags():
    p = FlowParameters(n=3)
    s = make_initial_data(InitialDataSpec("metric_bump", amplitude=0.3), p, build_grid(20.0, 200))
    c = compute_constants(s, p)
    assert c.mass_initially_nonnegative
    f = s.f.copy(); f[100] = 0.9
    rec = audit(FlowState(0.0, f, s.z, s.grid), c, p)
    assert rec.mass_positivity_held is False and "mass_positivity" in rec.violations


def test_profiles():
    g = build_grid(5.0, 200)
    x = g.nodes
    s = FlowState(0.0, np.ones_like(x), x * np.exp(-x * x), g)
    zeta = zeta_profile(s)
    np.testing.assert_allclose(zeta[1:], np.exp(-x[1:] ** 2), rtol=1e-14)
    assert zeta[0] == pytest.approx(1.0, abs=2 * g.h**2)
    assert hessian_profile(s)[0] == zeta[0]
    flat = FlowState(0.0, np.ones_like(x), np.zeros_like(x), g)
    for fn in (zeta_profile, hessian_profile, y_profile):
        assert np.all(fn(flat) == 0.0)


def test_y_on_round_cap():
    rho = 2.0
    K = 1 / rho**2
    errs = []
    for N in (100, 200):
        g = build_grid(1.5, N)
        x = g.nodes
        f = 1 / np.sqrt(1 - x * x / rho**2)
        y = y_profile(FlowState(0.0, f, np.zeros_like(x), g))
        exact = K * f * (1 / (1 + f) - 0.5)
        assert y[0] == 0.0
        errs.append(np.max(np.abs(y - exact)[1:-1]))
    assert errs[1] < errs[0] / 3.5


@settings(max_examples=25, deadline=None)
@given(A=st.floats(0.0, 1.0), B=st.floats(0.0, 1.0), n=st.integers(3, 5))
def test_initial_margins_nonnegative(A, B, n):
    p = FlowParameters(n=n)
    s = make_initial_data(InitialDataSpec("combined", amplitude=A, field_amplitude=B), p, build_grid(20.0, 100))
    c = compute_constants(s, p)
    rec = audit(s, c, p)
    for k in ("m1", "m2", "m3a", "m3b", "m4"):
        assert rec.margins[k] >= 0
    assert c.C_S_minus <= 0 and 0 < c.C_f_minus <= c.C_f_plus and c.p >= 1 and c.C_lambda2_minus >= 0
