"""One test per acceptance criterion; each records a PASS/FAIL line for the summary."""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, torsion_case

from finsler_pohozaev import (
    ConstantSource,
    Ellipsoidal,
    Euclidean,
    GridField,
    Profile,
    StarDomain,
    check_hypotheses,
    check_structural_bounds,
    cli,
    config,
    critical_exponent,
    dirichlet_boundary_reduction,
    experiments,
    identity_sides,
    nonexistence_scan,
    solve_dirichlet,
    torsion_oracle,
    wholespace_check,
)
from finsler_pohozaev import field as fl
from finsler_pohozaev import pohozaev as ph
from finsler_pohozaev.reporting import observed_orders
from finsler_pohozaev.sources import PowerSource

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
P3_EXACT = np.pi * np.sqrt(2) / 3


def record(k, checks):
    """checks: list of (label, ok). Appends the summary line, then asserts."""
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{label}{'' if c else ' [FAIL]'}" for label, c in checks)
    ACCEPTANCE_LINES.append(f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def identity_sweep(p, levels):
    start = time.perf_counter()
    reps = [identity_sides(*torsion_case(p, n)) for n in levels]
    elapsed = time.perf_counter() - start
    orders = observed_orders([r.residual_abs for r in reps], [1.0 / n for n in levels])
    return reps, orders, elapsed


def test_criterion_1_p2_torsion_identity():
    reps, orders, elapsed = identity_sweep(2, (64, 128, 256, 512))
    top = reps[-1]
    # the volume side carries the O(h^2) quadrature error; check that it converges to pi/4
    lhs_err = [abs(r.lhs / (np.pi / 4) - 1) for r in reps]
    lhs_order = observed_orders(lhs_err, [1.0 / n for n in (64, 128, 256, 512)])[-1]
    record(1, [
        (f"lhs={top.lhs:.10f} vs pi/4 (rel {lhs_err[-1]:.1e} <= 1e-5, order {lhs_order:.2f} >= 1.9)",
         lhs_err[-1] <= 1e-5 and lhs_order >= 1.9),
        (f"rhs={top.rhs:.10f} vs pi/4", abs(top.rhs / (np.pi / 4) - 1) <= 1e-12),
        (f"residual_rel@512={top.residual_rel:.2e} <= 1e-6", top.residual_rel <= 1e-6),
        (f"orders={[round(o, 3) for o in orders[-2:]]} >= 1.9", min(orders[-2:]) >= 1.9),
        (f"runtime={elapsed:.1f}s < 30s", elapsed < 30),
    ])


def test_criterion_2_p3_torsion_identity():
    reps, orders, elapsed = identity_sweep(3, (64, 128, 256))
    top = reps[-1]
    record(2, [
        (f"lhs={top.lhs:.6f} rhs={top.rhs:.6f} vs {P3_EXACT:.6f} (rel 1e-3)",
         abs(top.lhs / P3_EXACT - 1) <= 1e-3 and abs(top.rhs / P3_EXACT - 1) <= 1e-3),
        (f"residual_rel@256={top.residual_rel:.2e} <= 1e-3", top.residual_rel <= 1e-3),
        (f"orders={[round(o, 3) for o in orders]} >= 1.5", min(orders) >= 1.5),
        (f"runtime={elapsed:.1f}s < 60s", elapsed < 60),
    ])


def test_criterion_3_anisotropic_manufactured_pair():
    cfg = config.load(CONFIGS / "anisotropic_manufactured.ini")
    assert isinstance(experiments.build_anisotropy(cfg), Ellipsoidal)
    out = experiments.run(cfg)
    reps = [lv["identity"] for lv in out.results["levels"]]
    orders = out.results["observed_orders"]
    top = reps[-1]
    record(3, [
        (f"A=diag(2,1) on ellipse 1.5x1, residual_rel@{top.resolution[0]}={top.residual_rel:.2e} <= 1e-3", top.residual_rel <= 1e-3),
        (f"last order={orders[-1]:.3f} >= 1.5", orders[-1] >= 1.5),
        ("trace is zero", bool(np.max(np.abs(out.field.trace)) <= 1e-12)),
    ])


def test_criterion_4_specialization_equality():
    gaps = {}
    for p, n in ((2, 512), (3, 256)):
        u, src, pr, a, d = torsion_case(p, n)
        gaps[p] = ph.specialization_gap(identity_sides(u, src, pr, a), ph.classical_plap_form(u, src, pr, a))
    record(4, [(f"p={p} gap={g:.1e} <= 1e-12", g <= 1e-12) for p, g in gaps.items()])


def test_criterion_5_dirichlet_reduction():
    checks = []
    for p, n in ((2, 512), (3, 256)):
        red = dirichlet_boundary_reduction(*torsion_case(p, n))
        gap = abs(red.unreduced - red.power_form) / abs(red.power_form)
        checks.append((f"p={p} |unreduced - ((p-1)/p) int H^p x.eta| rel={gap:.1e} <= 1e-10", gap <= 1e-10))
        checks.append((f"p={p} reduced-density gap={red.relative_gap:.1e}", red.relative_gap <= 1e-10))
    record(5, checks)


def test_criterion_6_hypothesis_suite():
    euc = check_hypotheses(Euclidean(), n_samples=10_000)
    ell = check_hypotheses(Ellipsoidal([[2.0, 0.0], [0.0, 1.0]]), n_samples=10_000)
    checks = []
    for name, rep in (("euclidean", euc), ("ellipsoidal", ell)):
        err = max(rep.max_homogeneity_error, rep.max_euler_error)
        checks.append((f"{name} homogeneity/Euler={err:.1e} <= 1e-10 ({rep.sample_count} samples)", err <= 1e-10))
    checks.append((f"euclidean lambda_hat={euc.lambda_hat:.12f}", abs(euc.lambda_hat - 1) <= 1e-8))
    checks.append((f"diag(2,1) (c1,c2)=({ell.c1_hat:.10f},{ell.c2_hat:.10f})",
                   abs(ell.c1_hat - 1) <= 1e-8 and abs(ell.c2_hat - np.sqrt(2)) <= 1e-8))
    for p in (1.5, 2.0, 3.0, 4.0):
        b = check_structural_bounds(Profile.power(p))
        ok = b.passed and abs(b.gamma_hat - 1) <= 1e-12 and abs(b.Gamma_hat - 1) <= 1e-12
        checks.append((f"power p={p} gamma=Gamma=1", ok))
    record(6, checks)


def test_criterion_7_critical_exponent_table():
    table = {(2, 3): 5, (2, 4): 3, (3, 4): 11}
    record(7, [(f"{k}->{critical_exponent(*k)!r}", critical_exponent(*k) == v) for k, v in table.items()])


def test_criterion_8_nonexistence_scan():
    checks = []
    for a in (Euclidean(), Ellipsoidal([[2.0, 0.0], [0.0, 1.0]])):
        for p in (2.0, 3.0):
            rep = nonexistence_scan(PowerSource(1.5), Profile.power(p), a, StarDomain.disk(1.0, 64, 64))
            pred = (1 - 1 / p) * rep.min_s**p
            ok = rep.condition_holds and rep.min_value >= 0 and abs(rep.min_value - pred) <= 1e-12 * max(1.0, pred)
            checks.append((f"{a.kind} p={p} min={rep.min_value:.3e} = (1-1/p) min(tH)^p, holds={rep.condition_holds}", ok))
    record(8, checks)


def _monotone(history):
    stages = {}
    for kappa, e in history:
        stages.setdefault(kappa, []).append(e)
    return all(all(b <= a for a, b in zip(es, es[1:])) for es in stages.values())


def test_criterion_9_solver_validation():
    checks = []
    for p, tol in ((2, 1e-3), (3, 5e-3)):
        d = StarDomain.disk(1.0, 256, 256)
        src, pr, a = ConstantSource(1.0), Profile.power(p), Euclidean()
        res = solve_dirichlet(src, pr, a, d)
        exact = GridField.from_function(d, torsion_oracle(p))
        err = float(np.max(np.abs(res.u.values - exact.values)))
        solved = identity_sides(res.u, src, pr, a).residual_rel
        oracle = identity_sides(exact, src, pr, a).residual_rel
        checks.append((f"p={p} Linf={err:.2e} <= {tol:g}", err <= tol))
        checks.append((f"p={p} energy monotone over {res.iterations} iterations", _monotone(res.energy_history)))
        checks.append((f"p={p} residual ratio {solved:.2e}/{oracle:.2e}={solved / oracle:.2f} <= 5", solved <= 5 * oracle))
    record(9, checks)


def test_criterion_10_wholespace():
    d = StarDomain.disk(2.0, 512, 512)
    u = GridField.from_function(d, fl.bump((0.2, -0.1), 1.0, 6))
    radii = [0.5, 1.0, 1.5, 1.9]
    r2 = wholespace_check(u, Profile.power(2), Euclidean(), radii)
    r3 = wholespace_check(u, Profile.power(3), Euclidean(), radii)
    beyond = [v for r, v in r2.decay_table + r3.decay_table if r > r2.support_radius]
    record(10, [
        (f"p=N=2 rhs={r2.rhs!r}", r2.rhs == 0.0),
        (f"p=2 |lhs|/scale={abs(r2.lhs) / r2.term_scale:.2e} <= 1e-3", abs(r2.lhs) <= 1e-3 * r2.term_scale),
        (f"decay table zero beyond r={r2.support_radius:.3f} ({len(beyond)} entries)", len(beyond) > 0 and all(v == 0.0 for v in beyond)),
        (f"p=3 statement sign residual_rel={r3.residual_rel:.2e} <= 1e-3", r3.residual_rel <= 1e-3),
        (f"p=3 proof-display sign residual_rel={r3.residual_rel_proof_sign:.2f} does not close", r3.residual_rel_proof_sign > 1e-3),
    ])


def test_criterion_11_stress_sobolev_diagnostic():
    fields = [GridField.from_function(StarDomain.disk(1.0, n, n), torsion_oracle(3)) for n in (64, 128, 256)]
    diag = fl.stress_sobolev_diagnostic(fields, Profile.power(3), Euclidean())
    var = abs(diag.values[-1] / diag.values[-2] - 1)
    record(11, [(f"int_E |grad S|^2 = {[f'{v:.6f}' for v in diag.values]}, last variation {var:.1e} <= 0.1", var <= 0.1)])


@pytest.mark.parametrize("name", ["torsion_p3.ini"])
def test_criterion_12_determinism(tmp_path, name):
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        args = ["--config", str(CONFIGS / name), "--out", str(out), "--deterministic", "--seed", "11"]
        assert cli.main(args) == 0
        blobs.append((out / "report.json").read_bytes())
    same = blobs[0] == blobs[1]
    record(12, [(f"{name} report.json byte-identical ({len(blobs[0])} bytes)", same),
                ("no timestamp", "timestamp" not in json.loads(blobs[0]))])
