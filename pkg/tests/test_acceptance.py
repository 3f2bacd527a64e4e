"""Acceptance criteria, one test per item; each prints a PASS/FAIL line."""
import filecmp

import numpy as np
import pytest

from listflow import (
    FlowParameters, FlowState, InitialDataSpec, build_grid, curvature, evolve, make_initial_data, masses, rhs,
)
from listflow.cli import main as cli_main
from listflow.driver import converge
from listflow.monitors import audit, compute_constants
from listflow.singularity import check_record, rescale, track_blowup

BAND = (1.8, 2.2)


def _line(report, k, ok, detail):
    report(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


# 1 -------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4])
def test_c1_flat_fixed_point(n, report):
    p = FlowParameters(n=n, k_n=1.0 if n == 2 else None, t_end=1.0)
    g = build_grid(20.0, 400)
    s = make_initial_data(InitialDataSpec("flat"), p, g)
    r = rhs(s, p)
    res = max(np.max(np.abs(r.df_dt)), np.max(np.abs(r.dz_dt)))
    tr = evolve(s, p)
    ef = float(np.max(np.abs(tr.state.f - 1.0)))
    ez = float(np.max(np.abs(tr.state.z)))
    ok = res <= 1e-12 and tr.reason == "completed" and ef <= 1e-10 and ez <= 1e-10
    _line(report, 1, ok, f"n={n} |rhs|={res:.1e} |f-1|={ef:.1e} |z|={ez:.1e}")
    assert ok


# 2 -------------------------------------------------------------------------

def heat_z(r, t, A=1e-4, t0=1.0):
    # u = A (t0+t)^{-3/2} exp(-r^2 / 4(t0+t)) solves u_t = u'' + 2u'/r; z = u'
    T = t0 + t
    return -A * (r / 2.0) * T**-2.5 * np.exp(-r * r / (4.0 * T))


def test_c2_linear_heat_oracle(report):
    p = FlowParameters(n=3, t_end=1.0)
    g = build_grid(40.0, 2000)
    s = FlowState(0.0, np.ones_like(g.nodes), heat_z(g.nodes, 0.0), g)
    tr = evolve(s, p)
    exact = heat_z(g.nodes, 1.0)
    err = float(np.max(np.abs(tr.state.z - exact)) / np.max(np.abs(exact)))
    ok = tr.reason == "completed" and err <= 1e-3
    _line(report, 2, ok, f"max relative error {err:.2e} (limit 1e-3)")
    assert ok


# 3, 4, 8 share the N = 500/1000/2000 runs ------------------------------------

BUMP = InitialDataSpec("combined", amplitude=0.3, field_amplitude=0.3, sigma=2.0)
R_BUMP = 20.0


@pytest.fixture(scope="module")
def bump_levels():
    p = FlowParameters(n=3, t_end=0.5)
    out = {}
    for N in (500, 1000, 2000):
        s0 = make_initial_data(BUMP, p, build_grid(R_BUMP, N))
        tr = evolve(s0, p)
        assert tr.reason == "completed"
        out[N] = (s0, tr.state)
    return p, out


def test_c3_convergence_order(bump_levels, report):
    p, lv = bump_levels
    rep = converge(None, [500, 1000, 2000], states=[lv[N][1] for N in (500, 1000, 2000)])
    of, oz = rep.orders["f"][0], rep.orders["z"][0]
    ob = rep.orders["bianchi"]
    inband = lambda o: o is not None and BAND[0] <= o <= BAND[1]
    ok = inband(of) and inband(oz) and all(inband(o) for o in ob)
    _line(report, 3, ok, f"order f={of:.3f} z={oz:.3f} bianchi={ob[0]:.3f},{ob[1]:.3f}")
    assert ok


def test_c4_monitor_suite(bump_levels, report):
    p, lv = bump_levels
    s0, s_half = lv[2000]
    consts = compute_constants(s0, p)
    tol = 10.0 * s0.grid.h_max**2
    recs = []
    cb = lambda st: recs.append(audit(st, consts, p))
    evolve(s0, p, callbacks=[cb])
    tr = evolve(s_half, FlowParameters(n=3, t_end=5.0), callbacks=[cb])
    worst = {k: min(r.margins[k] for r in recs) for k in ("m1", "m2", "m3a", "m3b", "m4")}
    min_h = min(r.margins["m6"] for r in recs)
    ok = tr.reason == "completed" and all(v >= -tol for v in worst.values()) and min_h > 0
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items())
    _line(report, 4, ok, f"{len(recs)} audits, min {detail} m6={min_h:.3e} tol={tol:.1e}")
    assert ok


def test_c8_identities(bump_levels, report):
    p, lv = bump_levels
    worst_R = worst_mu = 0.0
    for N in lv:
        for s in lv[N]:
            c = curvature(s, p)
            m = masses(s, p, strict=False)
            a = 2 * (p.n - 1) * c.lambda1
            b = (p.n - 1) * (p.n - 2) * c.lambda2
            scale = np.maximum(np.abs(a) + np.abs(b), 1e-300)
            worst_R = max(worst_R, float(np.max(np.abs(c.R - (a + b)) / scale)))
            ms = (1.0 + 1.0 / s.f) * m.mu_BY
            sc = np.maximum(np.abs(ms), 1e-300)
            worst_mu = max(worst_mu, float(np.max(np.abs(m.mu_MS - ms) / sc)))
    D = {}
    for N in lv:
        s = lv[N][1]
        c = curvature(s, p)
        D[N] = (abs(c.lambda1[1] - c.lambda2[1]), s.grid.h_max)
    C = max(D[N][0] / D[N][1] ** 2 for N in (500, 1000))
    d4, h4 = D[2000]
    ok = worst_R <= 1e-14 and worst_mu <= 1e-14 and d4 <= 1.1 * C * h4**2
    _line(report, 8, ok, f"R identity {worst_R:.1e}, mu_MS identity {worst_mu:.1e}, "
                         f"|l1-l2|(r1)/h^2 at N=2000: {d4 / h4**2:.4f} vs C={C:.4f}")
    assert ok


# 5 -------------------------------------------------------------------------

def test_c5_n2_immortality(report):
    p = FlowParameters(n=2, k_n=1.0, f_infinity=1.2, t_end=50.0, output_every=0.5)
    s0 = make_initial_data(BUMP, p, build_grid(40.0, 1000))
    consts = compute_constants(s0, p)
    tol = 10.0 * s0.grid.h_max**2
    recs = []
    tr = evolve(s0, p, callbacks=[lambda st: recs.append(audit(st, consts, p))])
    m5 = min(r.margins["m5"] for r in recs)
    ok = tr.reason == "completed" and m5 >= -tol
    _line(report, 5, ok, f"termination {tr.reason} at t={tr.state.t:g}, min m5={m5:.3e} tol={tol:.1e}")
    assert ok


# 6 -------------------------------------------------------------------------

def test_c6_mass_positivity(report):
    A = 0.5
    p = FlowParameters(n=3, t_end=2.0, output_every=0.1)
    s0 = make_initial_data(InitialDataSpec("metric_bump", amplitude=A), p, build_grid(100.0, 2000))
    consts = compute_constants(s0, p)
    assert consts.mass_initially_nonnegative
    recs = []
    tr = evolve(s0, p, callbacks=[lambda st: recs.append(audit(st, consts, p))])
    held = all(r.mass_positivity_held for r in recs)
    adm = masses(s0, p).adm
    # r (1 - 1/f) = A - A^2 / r + O(r^-2) for this profile: intercept A
    dev = abs(adm.value - A)
    ok = tr.reason == "completed" and held and dev <= adm.uncertainty
    _line(report, 6, ok, f"mu_BY bound held at {len(recs)} audits: {held}; adm(0)={adm.value:.6f} "
                         f"vs {A} (|diff|={dev:.4e}, uncertainty {adm.uncertainty:.4e})")
    assert ok


# 7 -------------------------------------------------------------------------

def test_c7_scaling_and_scan(report):
    p = FlowParameters(n=3, t_end=0.2)
    s = evolve(make_initial_data(BUMP, p, build_grid(R_BUMP, 400)), p).state
    c = curvature(s, p)
    worst = 0.0
    for B in (0.5, 2.0, 100.0):
        pr = rescale(s, B, p)
        for got, ref in ((pr.lambda1, c.lambda1), (pr.lambda2, c.lambda2)):
            mask = ref != 0
            worst = max(worst, float(np.max(np.abs(got[mask] - ref[mask] / B) / np.abs(ref[mask] / B))))
    hist = [1.0, 3.0, 2.0, 9.0, 5.0, 27.0]
    brute = [j for j in range(6) if max(hist[: j + 1]) <= 1.0 * hist[j]]
    rec = track_blowup(hist, 1.0)
    ok = worst <= 1e-14 and rec.indices == brute == [0, 1, 3, 5] and check_record(rec, hist)
    _line(report, 7, ok, f"max relative rescale error {worst:.1e}; scan {rec.indices} vs brute force {brute}")
    assert ok


# 9 -------------------------------------------------------------------------

def test_c9_determinism(tmp_path, monkeypatch, report):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[grid]\nR_max = 20\nN = 200\n[physics]\nn = 3\nt_end = 0.5\n"
        "[initial_data]\nkind = combined\namplitude = 0.3\nfield_amplitude = 0.3\nsigma = 2\n"
        "[output]\noutput_every = 0.1\n"
    )
    dirs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        monkeypatch.setenv("LISTFLOW_OUTPUT_DIR", str(d))
        assert cli_main(["run", str(cfg)]) == 0
        dirs.append(d)
    files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*.csv"))
    same = [filecmp.cmp(dirs[0] / f, dirs[1] / f, shallow=False) for f in files]
    ok = len(files) > 3 and all(same)
    _line(report, 9, ok, f"{sum(same)}/{len(files)} CSV files byte-identical")
    assert ok
