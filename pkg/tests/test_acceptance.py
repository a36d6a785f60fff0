"""Acceptance criteria, one PASS/FAIL line each at the contractual tolerances.

Every test records its line in ``conftest.ACCEPTANCE_LINES`` before asserting,
so a failure still shows up in the end-of-run summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from neumann_green import capture as cap
from neumann_green import cli
from neumann_green import geometry as geo
from neumann_green import greens as gr
from neumann_green import oracles as orc
from neumann_green import signaling as sg

import conftest
from conftest import RANDOM_SEED, random_points_in, rel_err

PI = math.pi
AXES = (1.5, 2.0, 2.5)


def report(label, ok, detail):
    ok = bool(ok)
    conftest.ACCEPTANCE_LINES.append((label, ok, detail))
    print(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    assert ok, f"{label}: {detail}"


def test_01_disk_bulk_accuracy():
    t0 = time.perf_counter()
    pan = geo.panelize(geo.disk(), 128, 32)
    y = np.array([0.25, 1 / 3])
    sol = gr.solve(pan, "interior-bulk", y)
    R, g, H = gr.derivatives(sol, y)
    Rr, gr_, Hr = orc.disk_R_bulk(y, y)
    eR, eg, eH = rel_err(R[0], Rr), rel_err(g[0], gr_), rel_err(H[0], Hr)
    dt = time.perf_counter() - t0
    report("1 disk bulk", eR <= 1e-12 and eg <= 1e-10 and eH <= 1e-10 and dt < 10,
           f"rel R {eR:.1e}, grad {eg:.1e}, hess {eH:.1e}, {dt:.1f} s")


def test_02_ellipse_bulk_series():
    worst, slowest = 0.0, 0.0
    for a in AXES:
        t0 = time.perf_counter()
        b = 1 / a
        pan = geo.panelize(geo.ellipse(a, b), 64, 16)
        y = np.array([a / 4, b / 3])
        sol = gr.solve(pan, "interior-bulk", y)
        R = gr.regular_part(sol, y[None, :])[0]
        worst = max(worst, rel_err(R, orc.ellipse_R_self(y, a, b)))
        slowest = max(slowest, time.perf_counter() - t0)
    report("2 ellipse bulk", worst <= 1e-10 and slowest < 30,
           f"max rel err {worst:.1e}, slowest case {slowest:.1f} s")


def test_03_ellipse_surface():
    worst = 0.0
    for a in AXES:
        b = 1 / a
        pan = geo.panelize(geo.ellipse(a, b), 64, 16)
        for t in (0.0, 0.7, PI / 2, 2.2, 4.0):
            y = pan.curve.position(np.array([t]))[0]
            for variant, side in (("interior-surface", "interior"), ("exterior-surface", "exterior")):
                sol = gr.solve(pan, variant, t)
                R = gr.regular_part(sol, t=[t])[0]
                worst = max(worst, rel_err(R, orc.ellipse_R_surface(y, a, b, side)))
    report("3 ellipse surface", worst <= 1e-10, f"max rel err {worst:.1e} (interior and exterior)")


def test_04_exterior_disk_surface():
    pan = geo.panelize(geo.disk(), 32, 16)
    sol = gr.solve(pan, "exterior-surface", 0.9)
    tb = np.linspace(0, 2 * PI, 16, endpoint=False) + 0.05
    on = gr.regular_part(sol, t=tb)
    rng = np.random.default_rng(RANDOM_SEED)
    r = rng.uniform(1.1, 6.0, 16)
    th = rng.uniform(0, 2 * PI, 16)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    off = gr.regular_part(sol, pts)
    ref = np.array([orc.disk_R_surface_ext(p) for p in pts])
    err = max(np.max(np.abs(on)), np.max(np.abs(off - ref)))
    report("4 exterior disk surface", err <= 1e-11, f"max abs err {err:.1e} at 32 targets")


def test_05_mean_zero():
    random_curve = geo.fourier_random(RANDOM_SEED)
    cases = {
        "disk": (geo.panelize(geo.disk(), 32, 16), [0.25, 1 / 3]),
        "ellipse": (geo.panelize(geo.ellipse(2.0, 0.5), 64, 16), [0.5, 0.1]),
        "random": (geo.panelize(random_curve, 64, 16),
                   random_points_in(random_curve, 1, seed=5, margin=0.5)[0]),
    }
    vals = {k: abs(gr.mean_value(gr.solve(p, "interior-bulk", y), 200, 200))
            for k, (p, y) in cases.items()}
    report("5 mean zero", max(vals.values()) <= 1e-8,
           ", ".join(f"{k} {v:.1e}" for k, v in vals.items()))


def test_06_reciprocity():
    curve = geo.fourier_random(RANDOM_SEED)
    pan = geo.panelize(curve, 64, 16)
    pts = random_points_in(curve, 100, seed=13, margin=0.05)
    sols = [gr.solve(pan, "interior-bulk", p) for p in pts]
    worst = 0.0
    for i in range(50):
        x, y = pts[i], pts[50 + i]
        gxy = gr.greens_value(sols[50 + i], x=x[None, :])[0]
        gyx = gr.greens_value(sols[i], x=y[None, :])[0]
        worst = max(worst, abs(gxy - gyx))
    report("6 reciprocity", worst <= 1e-10, f"max |G(x;y) - G(y;x)| {worst:.1e} over 50 pairs")


def test_07_analytic_pipeline():
    sol = gr.solve(geo.panelize(geo.disk(), 32, 16), "interior-bulk", [0.0, 0.0])
    e_sigma = np.max(np.abs(sol.sigma + 3 / (16 * PI**2)))
    e_alpha = abs(sol.alpha + 3 / (8 * PI))
    report("7 centred disk density", max(e_sigma, e_alpha) <= 1e-12,
           f"sigma err {e_sigma:.1e}, alpha err {e_alpha:.1e}")


# -- criterion 8 --------------------------------------------------------------------
#
# The computed landscape does not follow the stated labels: with 40 seeded starts on
# an ellipse of area pi, every start at both a = 1.577 and a = 1.675 ends in the same
# non-collinear minimum (a staggered inner pair), and the collinear state only takes
# over near a = 1.71. The literal claim is therefore recorded as an expected failure
# and the transition itself is checked separately.


def _ellipse_n4(a, starts, seed=0):
    pan = geo.panelize(geo.ellipse(a, 1 / a), 24, 16)
    return cap.optimize_traps(pan, 4, "interior", cap.OptimizeOptions(starts=starts, seed=seed))


@pytest.mark.xfail(strict=True, reason="best configuration at a = 1.577 is non-collinear")
def test_08_ellipse_n4_literal():
    t0 = time.perf_counter()
    low, high = _ellipse_n4(1.577, 40), _ellipse_n4(1.675, 40)
    c_low, c_high = cap.is_collinear(low.best.centers), cap.is_collinear(high.best.centers)
    dt = time.perf_counter() - t0
    report("8 ellipse N=4 (literal)", c_low and not c_high and dt < 600,
           f"a=1.577 collinear={c_low} (p={low.best.p:.10f}), "
           f"a=1.675 collinear={c_high} (p={high.best.p:.10f}), {dt:.0f} s")


def test_08b_ellipse_n4_transition():
    states = {a: cap.is_collinear(_ellipse_n4(a, 8).best.centers) for a in (1.577, 1.675, 1.75, 1.85)}
    ok = not states[1.577] and not states[1.675] and states[1.75] and states[1.85]
    report("8b ellipse N=4 transition", ok,
           "collinear: " + ", ".join(f"a={a} {c}" for a, c in states.items()))


def test_09_orientation_bifurcation():
    t0 = time.perf_counter()
    pan = geo.panelize(geo.disk(), 32, 16)
    rc = brentq(lambda r: cap.orientation_at(pan, [r, 0.0], 2.0, 1.0, 0.05).p[0], 0.6, 0.9, xtol=1e-12)
    err = abs(rc - math.sqrt(2 - math.sqrt(2)))
    dt = time.perf_counter() - t0
    report("9 orientation bifurcation", err <= 1e-4 and dt < 120,
           f"r_c = {rc:.10f}, err {err:.1e}, {dt:.1f} s")


def test_10_splitting_limits():
    disk = geo.panelize(geo.disk(), 32, 16)
    sol = sg.solve_splitting(disk, [0.0, PI], 0.1)
    axis = np.column_stack([np.zeros(16), np.linspace(1.2, 40, 16) * np.repeat([1, -1], 8)])
    phi = sg.splitting_field(sol, axis)
    xi_sym = np.max(np.abs(phi[:, 0] - phi[:, 1]))

    ell = geo.panelize(geo.ellipse(2.0, 0.5), 48, 16)
    devs = [np.max(np.abs(sg.solve_splitting(ell, [0.2, 1.9, 3.9], nu).phi_bar - 1 / 3))
            for nu in (0.1, 0.05, 0.025)]
    ratios = [devs[0] / devs[1], devs[1] / devs[2]]

    ks = sg.default_k_grid(25)
    xis = [sg.cassini_xi(float(k), eps=1e-4, R_source=5.0)["xi"] for k in ks]
    argmax = int(np.argmax(xis))

    ok = xi_sym <= 1e-10 and all(1.5 <= r <= 2.5 for r in ratios) and argmax == len(ks) - 1
    report("10 splitting limits", ok,
           f"(a) |Xi| {xi_sym:.1e}; (b) ratios {ratios[0]:.3f}, {ratios[1]:.3f}; "
           f"(c) max Xi {max(xis):.6f} at k={ks[argmax]:.4f} (largest sampled {ks[-1]:.4f})")


def test_11_property_suites(tmp_path):
    curve = geo.fourier_random(RANDOM_SEED)
    pan = geo.panelize(curve, 64, 16)
    y = random_points_in(curve, 1, seed=11, margin=0.5)[0]
    sol = gr.solve(pan, "interior-bulk", y)
    x = random_points_in(curve, 4, seed=12, margin=0.4)
    h = 1e-4
    g, H = gr.gradient(sol, x), gr.hessian(sol, x)
    fd_err = 0.0
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        Rp, Rm = gr.regular_part(sol, x + e), gr.regular_part(sol, x - e)
        gp, gm = gr.gradient(sol, x + e), gr.gradient(sol, x - e)
        fd_err = max(fd_err, np.max(np.abs((Rp - Rm) / (2 * h) - g[:, k])),
                     np.max(np.abs((gp - gm) / (2 * h) - H[:, :, k])))

    gb = 0.0
    for c in (geo.disk(), geo.ellipse(2.0, 0.5), curve, geo.cassini(0.9)):
        p = geo.panelize(c, 96, 16)
        gb = max(gb, abs(float(np.dot(p.kappa, p.weights)) - 2 * PI))

    spl = sg.solve_splitting(pan, [0.5, 2.0, 3.7, 5.2], 0.05)
    far = np.array([[6.0, 1.0], [-3.0, 9.0], [0.5, -20.0], [100.0, 40.0]])
    cons = np.max(np.abs(sg.splitting_field(spl, far).sum(axis=1) - 1))

    cfg = tmp_path / "opt.ini"
    cfg.write_text("[domain]\ntype = ellipse\na = 2\nb = 0.5\nn_panels = 32\n"
                   "[optimize]\nN = 2\nstarts = 3\nprofile_points = 16\n")
    runs = []
    for name in ("r1", "r2"):
        assert cli.main(["optimize", "--config", str(cfg), "--seed", "42", "--out", str(tmp_path / name)]) == 0
        runs.append([(tmp_path / name / f).read_bytes() for f in ("optimize.json", "optimize.csv", "profiles.csv")])
    same = runs[0] == runs[1]

    ok = fd_err <= 1e-6 and gb <= 1e-10 and cons <= 1e-10 and same
    report("11 property suites", ok,
           f"FD {fd_err:.1e}, Gauss-Bonnet {gb:.1e}, sum phi - 1 {cons:.1e}, byte-identical reruns {same}")


def test_12_disk_energy_non_inferiority():
    # reference multistart is 10x longer than the run under test
    pan = geo.panelize(geo.disk(), 48, 16)
    run = cap.optimize_traps(pan, 10, "interior", cap.OptimizeOptions(starts=4, seed=0))
    ref = cap.optimize_traps(pan, 10, "interior", cap.OptimizeOptions(starts=40, seed=1))
    gap = run.best.p - ref.best.p
    report("12 disk N=10 non-inferiority", gap <= 1e-6,
           f"p = {run.best.p:.10f} vs reference {ref.best.p:.10f}, excess {gap:.1e}")
