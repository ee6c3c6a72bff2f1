"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or as a script
``python3 tests/test_acceptance.py``.
"""
import json
import os
import subprocess
import sys
import time

import pytest

from nlgauge.experiments import (RunConfig, exact_identity_instance, laplacian_consistency,
                                 run_experiment)
from nlgauge.gauge import build_gauge
from nlgauge.grid import make_grid
from nlgauge.problems import random_antisymmetric_omega

# pinned tolerances and runtime budgets (seconds)
EXACT_TOL = 1e-11
HODGE_TOL = 1e-9
HODGE_LIN_TOL = 1e-8
GAUGE_DIV_REL = 1e-5
GAUGE_OSC_REL = 1e-6
GAUGE_MIN_DET = 0.5
STABILITY_BAND = 0.20
LARGE_OMEGA = 0.8
CONSERVE_FACTOR = 10.0
IDENTITY_GAUGE_TOL = 1e-11
TAIL_HEAD_RATIO = 0.5
SLOPE, SLOPE_TOL = -1.0, 0.3
CUTOFF_RATIO = 0.9
FLATNESS = 0.02
ENERGY_TOL = 1e-12
BUDGET = {1: 30, 2: 60, 3: 600, 4: 120, 5: 120, 6: 300, 7: 30, 8: 60, 9: 120}

RESULTS = {}
_CAP = {}


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    _CAP["sys"] = capsys
    yield
    _CAP.pop("sys", None)


def announce(n, title, ok, detail, elapsed):
    within = elapsed <= BUDGET[n]
    status = "PASS" if ok and within else "FAIL"
    line = f"[criterion {n}] {status}  {title} | {detail} | {elapsed:.1f}s (budget {BUDGET[n]}s)"
    RESULTS[n] = line
    cap = _CAP.get("sys")
    if cap is None:
        print(line)
    else:
        # bypass capture so the line lands in the pytest log
        with cap.disabled():
            print("\n" + line)
    return ok and within


def test_criterion_1_exact_identities():
    t0 = time.perf_counter()
    keys = ("adjoint", "product_with_x", "product_with_y", "rewrite", "reformulation")
    worst = dict.fromkeys(keys, 0.0)
    Ms, Ns = set(), set()
    for k in range(100):
        M, N = 2 + k % 31, (1, 2, 3)[k % 3]
        geom = "periodic_torus" if k % 4 == 3 else "truncated_line"
        row = exact_identity_instance(2024, k, M, N, geom)
        Ms.add(M)
        Ns.add(N)
        for key in keys:
            worst[key] = max(worst[key], row[key])
    ok = all(v <= EXACT_TOL for v in worst.values()) and Ms == set(range(2, 33)) and Ns == {1, 2, 3}
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f" (tol {EXACT_TOL:.0e})"
    assert announce(1, "exact identities, 100 instances", ok, detail, time.perf_counter() - t0)


def test_criterion_2_hodge(tmp_path):
    t0 = time.perf_counter()
    rep = run_experiment(RunConfig(experiment="hodge", points=64, N=2, out=str(tmp_path)))
    w = rep.metrics["worst"]
    ok = (w["div_B_over_G"] <= HODGE_TOL and w["pythagoras"] <= HODGE_TOL
          and w["idempotence"] <= HODGE_LIN_TOL and w["linearity"] <= HODGE_LIN_TOL
          and max(r["M"] for r in rep.metrics["rows"]) <= 64)
    detail = (f"div B/|G|={w['div_B_over_G']:.1e}, pythagoras={w['pythagoras']:.1e}, "
              f"idempotence={w['idempotence']:.1e}, linearity={w['linearity']:.1e}")
    assert announce(2, "Hodge decomposition", ok, detail, time.perf_counter() - t0)


def test_criterion_3_gauge_sweep(tmp_path):
    t0 = time.perf_counter()
    cfg = RunConfig(experiment="sweep", N=2, sweep_points=[32, 64], sweep_norms=[0.025, 0.05],
                    sweep_seeds=10, out=str(tmp_path))
    rep = run_experiment(cfg)
    rows = rep.metrics["rows"]
    stab = rep.metrics["stability"]
    core = (all(r["converged"] and r["iterations"] <= 50 for r in rows)
            and all(r["contracting"] for r in rows)
            and all(r["div_dual_rel"] <= GAUGE_DIV_REL for r in rows)
            and all(r["osc_a_rel"] <= GAUGE_OSC_REL for r in rows)
            and all(r["min_det"] >= GAUGE_MIN_DET for r in rows))
    stable = all(stab[k]["max_rel_deviation"] <= STABILITY_BAND for k in ("A_ratio", "eps_ratio"))
    detail = (f"runs={len(rows)}, core checks {'ok' if core else 'FAILED'}, "
              f"max iters={max(r['iterations'] for r in rows)}, "
              f"max div/|Om|={max(r['div_dual_rel'] for r in rows):.1e}, "
              f"max osc/|Om|={max(r['osc_a_rel'] for r in rows):.1e}, "
              f"min det={min(r['min_det'] for r in rows):.3f}, "
              f"C_A={stab['A_ratio']['constant']:.3f} (seed dev {stab['A_ratio']['max_rel_deviation']:.0%}), "
              f"C_eps={stab['eps_ratio']['constant']:.2e} (seed dev {stab['eps_ratio']['max_rel_deviation']:.0%})")
    assert announce(3, "gauge construction sweep", core and stable, detail, time.perf_counter() - t0)


def test_criterion_4_large_omega_flagged():
    t0 = time.perf_counter()
    flags, ratios = [], []
    for M in (32, 64):
        g = make_grid(1.0, M)
        for seed in range(3):
            res = build_gauge(random_antisymmetric_omega(g, seed, 2, LARGE_OMEGA))
            flags.append(res.diverged or not res.contracting)
            ratios.append(max(res.contraction_ratios[1:], default=0.0))
    ok = all(flags)
    detail = f"flagged {sum(flags)}/{len(flags)} runs at |Om|={LARGE_OMEGA}; max contraction ratio {max(ratios):.3f}"
    assert announce(4, "large potential flags divergence", ok, detail, time.perf_counter() - t0)


def test_criterion_5_conservation(tmp_path):
    t0 = time.perf_counter()
    worst_ratio, worst_id, ok = 0.0, 0.0, True
    for M in (32, 64):
        for seed in range(3):
            rep = run_experiment(RunConfig(experiment="conserve", points=M, seed=seed, N=2,
                                           out=str(tmp_path / f"{M}_{seed}")))
            m = rep.metrics
            bound = CONSERVE_FACTOR * m["gauge_residual"] * m["u_norm"]
            ok &= m["max_residual"] <= bound and m["identity_gauge_residual"] <= IDENTITY_GAUGE_TOL
            worst_ratio = max(worst_ratio, m["max_residual"] / (m["gauge_residual"] * m["u_norm"]))
            worst_id = max(worst_id, m["identity_gauge_residual"])
    detail = (f"max residual/(rho*|u|)={worst_ratio:.2f} (<= {CONSERVE_FACTOR:g}), "
              f"identity-gauge residual={worst_id:.1e} (<= {IDENTITY_GAUGE_TOL:.0e})")
    assert announce(5, "conservation law", ok, detail, time.perf_counter() - t0)


def test_criterion_6_weak_convergence(tmp_path):
    t0 = time.perf_counter()
    rep = run_experiment(RunConfig(experiment="weakconv", points=64, ell_max=8, N=2, out=str(tmp_path)))
    m = rep.metrics
    res = m["control_limit_residuals"]
    ok = (rep.checks["uniform_bound<=2x"]
          and m["tail_spread"] <= TAIL_HEAD_RATIO * m["head_spread"]
          and all(b < a for a, b in zip(res, res[1:]))
          and abs(m["control_slope"] - SLOPE) <= SLOPE_TOL
          and not m["failures"])
    detail = (f"sup size/base={m['uniform_bound_ratio']:.4f}, tail/head spread="
              f"{m['tail_spread'] / m['head_spread']:.3f}, control slope={m['control_slope']:.3f}")
    assert announce(6, "weak convergence experiment", ok, detail, time.perf_counter() - t0)


def test_criterion_7_cutoff(tmp_path):
    t0 = time.perf_counter()
    rep = run_experiment(RunConfig(experiment="cutoff", out=str(tmp_path)))
    semis = [r["seminorm"] for r in rep.metrics["rows"]]
    ok = semis[0] > semis[1] > semis[2] and semis[2] / semis[0] < CUTOFF_RATIO
    detail = f"seminorms={[round(s, 4) for s in semis]}, last/first={semis[2] / semis[0]:.3f}"
    assert announce(7, "cut-off decay", ok, detail, time.perf_counter() - t0)


def test_criterion_8_fractional_laplacian():
    t0 = time.perf_counter()
    rep = laplacian_consistency(M=256, images=64)
    ok = rep["max_flatness"] <= FLATNESS and rep["max_energy_defect"] <= ENERGY_TOL
    cont = [r["continuum_ratio"] for r in rep["rows"] if "continuum_ratio" in r]
    detail = (f"flatness={rep['max_flatness']:.1e}, energy defect={rep['max_energy_defect']:.1e}, "
              f"s=1/2 discrete/continuum symbol in [{min(cont):.3f}, {max(cont):.3f}]")
    assert announce(8, "fractional Laplacian consistency", ok, detail, time.perf_counter() - t0)


DET_SCRIPT = r"""
import json, sys
from nlgauge.experiments import RunConfig, run_experiment
from nlgauge.io import jsonable
out = {}
for sel, extra in [("ops-check", {"instances": 30}), ("hodge", {}), ("gauge", {}), ("conserve", {}),
                   ("weakconv", {"points": 48}), ("cutoff", {"refinement": 1000}), ("localize", {}),
                   ("sweep", {"sweep_points": [32], "sweep_seeds": 2})]:
    rep = run_experiment(RunConfig(experiment=sel, seed=7, out=sys.argv[1] + "/" + sel, **extra))
    out[sel] = jsonable(rep.numerics())
print(json.dumps(out, sort_keys=True))
"""


def _run_det(tmp, threads):
    env = dict(os.environ, OMP_NUM_THREADS=str(threads), OPENBLAS_NUM_THREADS=str(threads),
               MKL_NUM_THREADS=str(threads))
    proc = subprocess.run([sys.executable, "-c", DET_SCRIPT, str(tmp)], env=env, capture_output=True,
                          text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    a = _run_det(tmp_path / "a", 1)
    b = _run_det(tmp_path / "b", 1)
    c = _run_det(tmp_path / "c", 4)
    same = [k for k in a if a[k] == b[k] == c[k]]
    ok = len(same) == len(a) == 8
    detail = f"bit-identical selectors {len(same)}/{len(a)} across reruns and 1 vs 4 threads"
    assert announce(9, "determinism", ok, detail, time.perf_counter() - t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
