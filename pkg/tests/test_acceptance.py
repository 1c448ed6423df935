"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line through ``acceptance_log`` before
asserting, so the terminal summary lists all criteria even when one fails.
Tolerances and sizes are the contract values; nothing here is loosened to fit.
"""

import itertools
import json
import time

import numpy as np
import pytest

import acceptance_log
from curveflow import cli, ineq, pinch
from curveflow.pinch import PinchingConfig, PinchingFunction, PreliminaryPinching
from curveflow.sampling import sample_unit_slice
from curveflow.symfun import SpeedFunction, fd_check

SPEEDS = {name: SpeedFunction.parse(name) for name in ("mean", "pow2", "pow3")}
MEAN, POW2 = SPEEDS["mean"], SPEEDS["pow2"]


def _check(criterion, passed, detail):
    acceptance_log.record(criterion, passed, detail)
    assert passed, detail


# 1. spectral derivatives against finite differences


def test_criterion_1_spectral_derivatives_match_finite_differences():
    started = time.time()
    worst = 0.0
    for seed, (f, n) in enumerate(itertools.product(SPEEDS.values(), (3, 4, 5))):
        g_err, h_err = fd_check(f, n, 1000, rng=seed, min_gap=0.1)
        worst = max(worst, g_err, h_err)
    elapsed = time.time() - started
    _check(1, worst <= 1e-5 and elapsed <= 60,
           f"spectral FD: worst rel err {worst:.2e} (tol 1e-5) over 3 speeds x n=3,4,5 x 1000; "
           f"{elapsed:.1f}s (limit 60s)")


# 2. decomposed Q against the direct spectral route


def test_criterion_2_decomposition_identity():
    started = time.time()
    worst, failures = 0.0, 0
    for n, m, f in itertools.product((3, 4, 5), (0, 1), (MEAN, POW2)):
        cfg = PinchingConfig(n=n, m=m, f=f, M_samples=20_000)
        rep = ineq.verify_decomposition(cfg, 1000, seed=n * 10 + m, tol=1e-5)
        worst = max(worst, rep.extra["max_rel_err"])
        failures += len(rep.failures)
    elapsed = time.time() - started
    _check(2, failures == 0 and elapsed <= 120,
           f"Q decomposed vs direct: worst rel err {worst:.2e} (tol 1e-5), {failures} failures "
           f"over 12 configs x 1000; {elapsed:.1f}s (limit 120s)")


# 3. sign of Q and the pairing inequality


Q_CONFIGS = [(n, m, f) for n in (3, 4, 5, 6) for m in (0, 1) if m <= n - 2 for f in ("mean", "pow2")]


def test_criterion_3_Q_sign_and_pairing():
    sign_fail = pair_fail = 0
    q_max = -np.inf
    pair_min = np.inf
    for n, m, name in Q_CONFIGS:
        cfg = PinchingConfig(n=n, m=m, f=SPEEDS[name], M_samples=20_000)
        for which in ("g1", "g"):
            rep = ineq.verify_Q_negativity(cfg, 10_000, seed=n + 7 * m, which=which)
            sign_fail += len(rep.failures)
            q_max = max(q_max, rep.q_max)
        rep = ineq.verify_pairing(cfg, 10_000, seed=n + 7 * m)
        pair_fail += len(rep.failures)
        pair_min = min(pair_min, rep.q_min)
    _check(3, sign_fail == 0 and pair_fail == 0,
           f"Q <= 1e-9 scale: {sign_fail} violations (max Q {q_max:.2e}); pairing: {pair_fail} "
           f"violations (min {pair_min:.2e}); {len(Q_CONFIGS)} configs x 10^4, n <= 6")


# 4. uniform negativity constant


def test_criterion_4_uniform_constant_stable_across_seeds():
    rows, ok = [], True
    for name, eps in itertools.product(("mean", "pow2"), (0.05, 0.1)):
        cfg = PinchingConfig(n=4, m=1, f=SPEEDS[name], M_samples=20_000)
        c = [ineq.verify_Q_uniform(cfg, 10_000, seed=s, eps=eps).c_eps for s in (0, 1)]
        spread = abs(c[0] - c[1]) / max(c)
        ok &= min(c) > 0 and spread <= 0.2
        rows.append(f"{name} eps={eps:g}: {c[0]:.3e}/{c[1]:.3e} ({100 * spread:.1f}%)")
    _check(4, ok, "c_eps > 0 within 20% across seeds 0/1 (n=4, m=1): " + "; ".join(rows))


# 5. zero-order estimate


def test_criterion_5_Z_estimate_feasible_on_grid():
    cfg = PinchingConfig(n=4, m=1, f=MEAN, M_samples=20_000)
    rows, ok = [], True
    for delta, eps, C in itertools.product((0.05, 0.1), (0.05, 0.1), (0.0, 1.0)):
        rep = ineq.verify_Z_estimate(cfg, 10_000, seed=3, delta=delta, eps=eps, C_delta=C)
        ge, gd = rep.extra["gamma_eps"], rep.extra["gamma_delta"]
        ok &= not rep.failures and np.isfinite(ge) and ge > 0
        rows.append(f"({delta:g},{eps:g},{C:g}): {ge:.3g}/{gd:.3g}")
    _check(5, ok, "feasible (gamma_eps, gamma_delta) with zero violations for "
           "(delta, eps, C): " + "; ".join(rows))


# 6. exact solutions


@pytest.mark.parametrize("preset", ["sphere", "cylinder"])
def test_criterion_6_exact_solutions(preset, tmp_path):
    started = time.time()
    assert cli.main(["simulate", "--preset", preset, "--refine", "1",
                     "--out", str(tmp_path)]) == 0
    elapsed = time.time() - started
    summary = json.loads((tmp_path / f"simulate_{preset}.json").read_text())
    coarse, fine = summary["levels"]
    within = all(lv["within_tolerance"] for lv in summary["levels"])
    order = summary["orders"][0]
    _check(6, within and order >= 1.8 and elapsed <= 120,
           f"{preset}: max error {coarse['error']:.2e} (tol {coarse['tolerance']:.2e}) at N=256, "
           f"{fine['error']:.2e} at N=512, order {order:.3f} (>= 1.8); {elapsed:.1f}s "
           f"for both levels (limit 120s)")


# 7 and 8. dumbbell neckpinch


@pytest.fixture(scope="module")
def dumbbell(tmp_path_factory):
    out = tmp_path_factory.mktemp("dumbbell")
    started = time.time()
    code = cli.main(["simulate", "--preset", "dumbbell", "--out", str(out)])
    elapsed = time.time() - started
    summary = json.loads((out / "simulate_dumbbell.json").read_text())
    return code, summary, elapsed


def test_criterion_7_convexity_preserved(dumbbell):
    code, s, _ = dumbbell
    conv = s["convexity"]
    ok = code == 0 and conv["status"] == "pass" and conv["min_ratio"] >= conv["beta"] - conv["tol"]
    _check(7, ok, f"dumbbell n=4 m=1: min subset ratio {conv['min_ratio']:.6f} >= "
           f"beta {conv['beta']:.6f} - {conv['tol']:.2e}")


def test_criterion_8_cylindrical_approach(dumbbell):
    code, s, elapsed = dumbbell
    ratio = s["F_final"] / s["F0"]
    g5, gf = s["G1_ratio_at_5x"], s["G1_ratio_final"]
    ok = (code == 0 and s["status"] == "singular" and ratio >= 50
          and s["cylinder_distance"] <= 0.1 and g5 is not None and gf < 0.5 * g5
          and elapsed <= 600)
    _check(8, ok, f"dumbbell N=512: F_max/F0 {ratio:.1f}, l_inf distance to cylinder "
           f"{s['cylinder_distance']:.4f} (<= 0.1), max G1/F {g5:.2e} (5x) -> {gf:.2e} (final); "
           f"{elapsed:.1f}s (limit 600s)")


# 9. homogeneity and symmetry


def test_criterion_9_homogeneity_and_symmetry():
    rng = np.random.default_rng(9)
    cfg = PinchingConfig(n=5, m=1, f=MEAN, eta=0.5, M_samples=20_000)
    g1, g = PreliminaryPinching(cfg), PinchingFunction(cfg)
    g2 = pinch.G2Function(cfg.M)
    positive = np.abs(rng.standard_normal((400, 5))) + 0.05  # the power means need z > 0
    cone = sample_unit_slice(cfg.cone, MEAN, 5, 400, rng)  # reaches g > 0 as well as g = 0
    lam = np.exp(rng.uniform(-3, 3, 400))[:, None]
    funcs = {"mean": MEAN.value, "pow2": POW2.value, "pow3": SPEEDS["pow3"].value,
             "g1": g1.value, "g2": g2.value, "g": g.value}
    worst_scale = worst_perm = 0.0
    for name, fn in funcs.items():
        Z = cone if name in ("mean", "g1", "g2", "g") else positive
        base = fn(Z)
        # the pinching functions are conditioned by exp(-1/r^2); compare only where representable
        keep = np.abs(base) > 1e-60 * MEAN.value(Z) if name in ("g1", "g") else np.ones(len(Z), bool)
        scaled = fn(Z * lam)
        worst_scale = max(worst_scale, float(np.max(
            np.abs(scaled - lam[:, 0] * base)[keep] / np.abs(lam[:, 0] * base)[keep], initial=0)))
        perm = np.argsort(rng.random(Z.shape), axis=1)
        permuted = fn(np.take_along_axis(Z, perm, axis=1))
        worst_perm = max(worst_perm, float(np.max(
            np.abs(permuted - base)[keep] / np.abs(base)[keep], initial=0)))
    Z = cone
    worst_G = 0.0
    for sigma in (0.25, 0.5, 0.75):
        c = PinchingConfig(n=5, m=1, f=MEAN, eta=0.5, sigma=sigma, M_samples=20_000)
        base = pinch.G_eps_sigma(Z, c)
        scaled = pinch.G_eps_sigma(Z * lam, c)
        ref = lam[:, 0] ** sigma * base
        worst_G = max(worst_G, float(np.max(np.abs(scaled - ref) / np.abs(ref))))
    ok = worst_scale <= 1e-12 and worst_perm <= 1e-12 and worst_G <= 1e-10
    _check(9, ok, f"degree-one scaling rel {worst_scale:.1e}, permutation rel {worst_perm:.1e} "
           f"(tol 1e-12); G_eps_sigma exponent sigma rel {worst_G:.1e} (tol 1e-10)")
