"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings as they complete.  The simulation criteria use reduced
horizons; the full sweep takes a few minutes of wall time.
"""

import json
import time

import numpy as np
import pytest

from anisoswarm.cli import main as cli_main
from anisoswarm.discrete import (AnsatzSpec, ansatz_residual, jacobian,
                                 solve_discrete_ring)
from anisoswarm.equilibria import (DEFAULT_QUADRATURE, QuadratureSpec,
                                   ellipse_G, ellipse_H, ring_G,
                                   ring_vertical_G, solve_ring_radius,
                                   solve_trivial_r, stripe_condition)
from anisoswarm.forces import ForceParams, total_force
from anisoswarm.metrics import classify
from anisoswarm.sim import (PLANE, TORUS, DormandPrinceAdaptive, EulerFixed,
                            Gaussian, ParticleState, RingEquiangular,
                            SimConfig, init_state, rhs, simulate, step)
from anisoswarm.tensor import Homogeneous, RotationAngle, TensorFieldSpec

PARAMS = ForceParams()
R_600 = solve_discrete_ring(600, PARAMS)


def _field(chi):
    return TensorFieldSpec(chi=chi, direction=Homogeneous())


def _report(number, label, ok, elapsed, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {number} ({label}): {detail} [{elapsed:.1f} s]")
    assert ok, f"criterion {number} failed: {detail}"


def test_criterion_1_ring_radius(tmp_path, capsys):
    start = time.perf_counter()
    out = tmp_path / "ring"
    code = cli_main(["ring", "--out", str(out)])
    payload = json.loads((out / "ring.json").read_text())
    elapsed = time.perf_counter() - start
    discrete_r = payload["discrete_radius"]
    rel = payload["relative_difference"]
    ok = (code == 0 and abs(discrete_r - 0.0017) <= 1e-4
          and rel < 0.02 and elapsed < 10.0)
    with capsys.disabled():
        _report(1, "ring radius", ok, elapsed,
                f"R_600={discrete_r:.6e}, continuous within {100 * rel:.3f}%")


def test_criterion_2_line_stability_window(tmp_path, capsys):
    start = time.perf_counter()
    out = tmp_path / "thr"
    code = cli_main(["line-threshold", "--out", str(out),
                     "--set", "discrete.n_particles=1200",
                     "--set", "discrete.tol_chi=0.01"])
    chi_star = json.loads((out / "threshold.json").read_text())["chi_star"]
    elapsed = time.perf_counter() - start
    ok = code == 0 and abs(chi_star - 0.27) <= 0.02 and elapsed < 1800.0
    with capsys.disabled():
        _report(2, "line stability window", ok, elapsed,
                f"chi* = {chi_star:.4f} (target 0.27 +- 0.02, N=1200)")


def test_criterion_3_ring_emergence(capsys):
    start = time.perf_counter()
    cfg = SimConfig(n_particles=600, dt=0.2, integrator=EulerFixed(),
                    t_end=2000.0, stationarity_tol=1e-9, seed=42,
                    initial=Gaussian((0.5, 0.5), 0.005))
    result = simulate(cfg, _field(1.0), PARAMS, TORUS)
    summary = classify(result.final.positions, TORUS)
    elapsed = time.perf_counter() - start
    radius_err = abs(summary.fitted_R - R_600) / R_600
    major_err = abs(summary.fitted_R + summary.fitted_r - R_600) / R_600
    ok = (summary.pattern_class == "Ring" and radius_err <= 0.05
          and major_err <= 0.05 and elapsed < 300.0)
    with capsys.disabled():
        _report(3, "ring emergence", ok, elapsed,
                f"class={summary.pattern_class}, fitted radius off by "
                f"{100 * radius_err:.2f}%")


def test_criterion_4_chi_sweep_morphology(capsys):
    start = time.perf_counter()
    runs = [
        (0.12, DormandPrinceAdaptive(), 50000.0),
        (0.40, EulerFixed(), 4000.0),
        (0.70, EulerFixed(), 4000.0),
        (1.00, EulerFixed(), 2000.0),
    ]
    classes, eccs = [], []
    for chi, integrator, t_end in runs:
        cfg = SimConfig(n_particles=600, dt=0.2, integrator=integrator,
                        t_end=t_end, stationarity_tol=1e-9, seed=42,
                        initial=RingEquiangular((0.5, 0.5), 0.005))
        result = simulate(cfg, _field(chi), PARAMS, TORUS)
        summary = classify(result.final.positions, TORUS)
        classes.append(summary.pattern_class)
        eccs.append(summary.eccentricity)
    elapsed = time.perf_counter() - start
    ok = (classes == ["VerticalLine", "Ellipse", "Ellipse", "Ring"]
          and all(a >= b - 1e-12 for a, b in zip(eccs, eccs[1:]))
          and eccs[2] < eccs[1]
          and elapsed < 1800.0)
    with capsys.disabled():
        _report(4, "chi-sweep morphology", ok, elapsed,
                f"classes={classes}, eccentricities="
                + str([round(e, 4) for e in eccs]))


def test_criterion_5_ellipse_branch(tmp_path, capsys):
    start = time.perf_counter()
    out = tmp_path / "branch"
    code = cli_main(["ellipse-branch", "--out", str(out)])
    rows = [line.split(",") for line in
            (out / "branch_continuous.csv").read_text().strip().split("\n")[1:]]
    r = np.array([float(row[0]) for row in rows])
    R = np.array([float(row[1]) for row in rows])
    chi = np.array([float(row[2]) for row in rows])
    ecc = np.array([float(row[3]) for row in rows])
    elapsed = time.perf_counter() - start
    strict = 1e-10
    checks = {
        "exit": code == 0,
        "ring endpoint": R[0] == pytest.approx(solve_ring_radius(PARAMS), abs=1e-8)
                          and r[0] == 0.0 and abs(chi[0] - 1.0) <= 1e-6,
        "trivial endpoint": R[-1] == 0.0
                            and r[-1] == pytest.approx(solve_trivial_r(PARAMS), abs=1e-10)
                            and 0.0 < chi[-1] < 1.0,
        "R strictly decreasing in r": bool(np.all(np.diff(R) < strict)),
        "chi strictly decreasing in r": bool(np.all(np.diff(chi) < strict)),
        "ecc strictly decreasing in chi": bool(np.all(np.diff(ecc) > -strict)),
        "runtime": elapsed < 60.0,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    with capsys.disabled():
        _report(5, "ellipse branch", ok, elapsed,
                f"{len(rows)} tuples, chi_bar={chi[-1]:.4f}"
                + (f", failed: {failed}" if failed else ""))


def test_criterion_6_invariant_suite(capsys):
    start = time.perf_counter()
    failures = []
    rng = np.random.default_rng(2)

    # force antisymmetry, bitwise
    T = np.array([[1.0, 0.0], [0.0, 0.3]])
    for _ in range(200):
        d = rng.normal(scale=0.1, size=2)
        f1, f2 = total_force(d, T, PARAMS), total_force(-d, T, PARAMS)
        if f1[0] != -f2[0] or f1[1] != -f2[1]:
            failures.append("force antisymmetry")
            break

    # cutoff nullity, exact
    for scale in (0.5, 0.6, 1.4):
        d = np.array([scale, 0.0])
        if np.any(total_force(d, T, PARAMS) != 0.0):
            failures.append("cutoff nullity")
            break

    # center-of-mass drift per rhs call
    n = 200
    state = ParticleState(t=0.0, positions=0.5 + 0.01 * rng.standard_normal((n, 2)))
    v = rhs(state, _field(0.2), PARAMS, PLANE)
    if np.abs(v.mean(axis=0)).max() > 1e-13 * n:
        failures.append("center-of-mass drift")

    # rotation equivariance over 1000 Euler steps
    theta = 0.7
    Rm = RotationAngle(theta).matrix
    pos0 = 0.5 + 0.01 * rng.standard_normal((30, 2))
    x_c = pos0.mean(axis=0)
    cfg = SimConfig(n_particles=30, dt=0.2, initial=Gaussian())
    st_a = ParticleState(t=0.0, positions=pos0)
    st_b = ParticleState(t=0.0, positions=x_c + (pos0 - x_c) @ Rm.T)
    fa = TensorFieldSpec(chi=0.5, direction=Homogeneous(0.0))
    fb = TensorFieldSpec(chi=0.5, direction=Homogeneous(theta))
    for _ in range(1000):
        st_a = step(st_a, cfg, fa, PARAMS, PLANE)
        st_b = step(st_b, cfg, fb, PARAMS, PLANE)
    dev = np.abs(x_c + (st_a.positions - x_c) @ Rm.T - st_b.positions).max()
    if dev > 1e-9:
        failures.append(f"rotation equivariance ({dev:.2e})")

    # energy descent at chi = 1, every Euler step of an N=100 run
    from test_sim import interaction_energy
    cfg = SimConfig(n_particles=100, dt=0.2, t_end=40.0, seed=4,
                    initial=Gaussian((0.5, 0.5), 0.005), stationarity_tol=0.0)
    st = init_state(cfg, TORUS)
    energy = [interaction_energy(st.positions, PARAMS)]
    for _ in range(200):
        st = step(st, cfg, _field(1.0), PARAMS, TORUS)
        energy.append(interaction_energy(st.positions, PARAMS))
    if not np.all(np.diff(energy) <= 1e-15 * max(1.0, abs(energy[0]))):
        failures.append("energy descent")

    # line-ansatz residual for even N across chi
    for n_line in (60, 600):
        spec = AnsatzSpec(kind="line", n_particles=n_line, center=(0.5, 0.5))
        for chi in (0.0, 0.25, 0.5, 0.75, 1.0):
            if ansatz_residual(spec, chi, PARAMS, TORUS) > 1e-14:
                failures.append(f"line residual (N={n_line}, chi={chi})")
                break

    # cell list vs brute force, bitwise, N=200
    params_cells = ForceParams(cutoff=0.125)
    state = ParticleState(t=0.0, positions=rng.random((200, 2)))
    vb = rhs(state, _field(0.2), params_cells, TORUS, accel="brute")
    vc = rhs(state, _field(0.2), params_cells, TORUS, accel="cells")
    if not np.array_equal(vb, vc):
        failures.append("cell list bitwise equality")

    # analytic vs finite-difference Jacobian
    for _ in range(5):
        pos = 0.5 + 0.02 * rng.standard_normal((10, 2))
        st = ParticleState(t=0.0, positions=pos)
        J = jacobian(st, _field(0.35), PARAMS, PLANE, mode="analytic")
        J_fd = jacobian(st, _field(0.35), PARAMS, PLANE, mode="fd")
        if np.abs(J - J_fd).max() > 1e-5 * np.abs(J).max():
            failures.append("jacobian analytic vs fd")
            break

    # quadrature doubling stability at 1e-10 on the equilibrium integrals
    quad = QuadratureSpec(panels=DEFAULT_QUADRATURE.panels,
                          nodes_per_panel=DEFAULT_QUADRATURE.nodes_per_panel,
                          refinement_tol=1e-10)
    r_bar = solve_trivial_r(PARAMS, quad)
    try:
        ring_G(0.8 * R_600, PARAMS, quad)
        ring_vertical_G(0.8 * R_600, 0.3, PARAMS, quad)
        ellipse_G(0.5 * R_600, 0.5 * r_bar, PARAMS, quad)
        ellipse_H(0.5 * R_600, 0.5 * r_bar, 0.5, PARAMS, quad)
        stripe_condition(0.05, 0.01, PARAMS, 0.2, quad)
    except Exception as exc:
        failures.append(f"quadrature stability ({exc})")

    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 300.0
    with capsys.disabled():
        _report(6, "invariant suite", ok, elapsed,
                "all invariants hold" if not failures else f"failed: {failures}")


def test_criterion_7_non_equilibrium_assertions(capsys):
    start = time.perf_counter()
    spec = AnsatzSpec(kind="ring", n_particles=600, center=(0.5, 0.5), R=R_600)
    residuals = {chi: ansatz_residual(spec, chi, PARAMS, PLANE)
                 for chi in (0.0, 0.2, 0.5, 0.9)}
    stripe = stripe_condition(0.05, 0.01, PARAMS, 0.2)
    elapsed = time.perf_counter() - start
    ok = (all(res > 1e-3 for res in residuals.values())
          and abs(stripe) > 1e-10 and elapsed < 60.0)
    with capsys.disabled():
        _report(7, "non-equilibrium assertions", ok, elapsed,
                f"ring residuals >= {min(residuals.values()):.2e}, "
                f"stripe value {stripe:.3e}")
