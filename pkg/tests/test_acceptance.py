"""Acceptance suite: one test per criterion, each printing a pass/fail line
in the terminal summary."""

import time

import numpy as np

from attractor_lab.cli import ExperimentConfig, run
from attractor_lab.cover import finite_scales
from attractor_lab.instances import compare_with_oracle, generate_instances, random_block_constant, random_instance
from attractor_lab.randomset import closed_random_hull
from attractor_lab.rds import invariance_check, lemma_tq2_check, omega_limit_set
from attractor_lab.systems import circle, doublewell, ou_strip
from oracles import minimal_measurable_superset

INSTANCES = 200
SEED = 2024


def test_criterion_1_hull_oracle(record_criterion):
    start = time.perf_counter()
    mismatches = 0
    for i in range(INSTANCES):
        inst = random_instance(SEED, i, (4, 4, 3))
        K, u = inst.probe, inst.universe
        H, _ = closed_random_hull(K, finite_scales(inst.rds.space))
        ref = minimal_measurable_superset(K.sections_mask, u.blocks, u.essential)
        positive = u.weights > 0
        mismatches += not np.array_equal(H.sections_mask[positive], ref[positive])
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    record_criterion(1, ok, f"{INSTANCES} universes, {mismatches} mismatches, {elapsed:.1f}s (limit 60s)")
    assert ok


def test_criterion_2_attractor_oracle(record_criterion):
    start = time.perf_counter()
    results = [compare_with_oracle(inst) for inst in generate_instances(INSTANCES, seed=SEED)]
    elapsed = time.perf_counter() - start
    undetermined = sum(not r.determined for r in results)
    failed = [r.index for r in results if r.determined and not r.passed]
    ok = not failed and undetermined == 0 and elapsed < 300
    record_criterion(2, ok, f"{INSTANCES} instances, {len(failed)} failed, {undetermined} undetermined, "
                            f"{elapsed:.1f}s (limit 300s)")
    assert ok, failed


def test_criterion_3_limit_and_hull_suites(record_criterion):
    start = time.perf_counter()
    violations = 0
    checks = 0
    for i in range(INSTANCES):
        inst = random_instance(SEED + 1, i)
        c = inst.rds
        scales = finite_scales(c.space)
        rng = np.random.default_rng(i)
        for B in inst.family:
            om = omega_limit_set(c, B)
            checks += 1
            violations += not invariance_check(c, om, "forward", t_max=4).holds
            # premise holds for K = Omega_B; conclusions give strict invariance
            v = lemma_tq2_check(c, B, om)
            checks += 2
            violations += v.status != "pass"
            violations += not invariance_check(c, om, "strict", t_max=4).holds
            # an arbitrary K: conclusions must hold wherever the premise does
            v2 = lemma_tq2_check(c, B, random_block_constant(rng, c.universe, c.n))
            checks += 1
            violations += not v2.conclusions_hold
            H, _ = closed_random_hull(om, scales)
            checks += 2
            violations += not invariance_check(c, H, "forward", t_max=4).holds
            violations += not invariance_check(c, H, "strict", t_max=4).holds
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 60
    record_criterion(3, ok, f"{checks} checks, {violations} violations, {elapsed:.1f}s (limit 60s)")
    assert ok


def test_criterion_4_double_well(record_criterion):
    start = time.perf_counter()
    rep = doublewell.doublewell_attractor_suite(0.01, 3.0, 50.0)
    elapsed = time.perf_counter() - start
    ok = rep.passed and elapsed < 10
    grid = rep.set_attractor_grid
    record_criterion(4, ok, f"points {rep.point_attractor}, set [{grid[0]:.2f}, {grid[-1]:.2f}], "
                            f"candidates {sorted(rep.candidates)}, {elapsed:.1f}s (limit 10s)")
    assert ok


def test_criterion_5_circle_sync_and_lyapunov(record_criterion):
    start = time.perf_counter()
    sync = circle.synchronization_experiment(range(200), horizon=30, points=16, radius=0.05)
    lyap = circle.lyapunov_experiment(range(100), T=2000.0)
    elapsed = time.perf_counter() - start
    ok = sync.fraction >= 0.95 and lyap.within and elapsed < 600
    record_criterion(5, ok, f"sync fraction {sync.fraction:.3f} (>=0.95), Lyapunov mean {lyap.forward_mean:.4f} "
                            f"(-0.5 +- 0.05), {elapsed:.1f}s (limit 600s)")
    assert ok


def test_criterion_6_circle_omega_contrast(record_criterion):
    start = time.perf_counter()
    rep = circle.omega_experiment(range(200), budget=1e4, radius=0.1)
    elapsed = time.perf_counter() - start
    ok = rep.discrete_fraction >= 0.9 and rep.certified_fraction >= 0.9 and elapsed < 900
    record_criterion(6, ok, f"discrete within 0.1: {rep.discrete_fraction:.3f}, certified pairs "
                            f"{rep.certified_fraction:.3f} ({rep.undetermined_pairs} undetermined), "
                            f"{elapsed:.1f}s (limit 900s)")
    assert ok


def test_criterion_7_ou_strip(record_criterion):
    start = time.perf_counter()
    r100 = ou_strip.ou_forward_experiment("triple-exp", T=100.0, paths=200, seed=1)
    r1000 = ou_strip.ou_forward_experiment("triple-exp", T=1000.0, paths=200, seed=1)
    disc = max(ou_strip.a_gamma_invariance_discrepancy(g, ou_strip.OUPath(0.01, s), t, samples=1000)
               for s in range(5) for g in (0.5, 1.0, 2.0) for t in (0.5, 2.0, 5.0))
    elapsed = time.perf_counter() - start
    resid = max(r100.euclid_max_residual, r1000.euclid_max_residual)
    ratio = max(r100.euclid_ratio_at_20, r1000.euclid_ratio_at_20)
    ok = (resid < 1e-9 and ratio <= 1e-3 and r100.exceed_fraction >= 0.6
          and r1000.exceed_fraction >= r100.exceed_fraction and disc < 1e-6 and elapsed < 300)
    record_criterion(7, ok, f"residual {resid:.1e}, ratio at 20 {ratio:.1e}, exceedance {r100.exceed_fraction:.3f}"
                            f" -> {r1000.exceed_fraction:.3f}, A_gamma discrepancy {disc:.1e}, "
                            f"{elapsed:.1f}s (limit 300s)")
    assert ok


def test_criterion_8_byte_identical_reruns(record_criterion, tmp_path):
    generate_instances(1, seed=SEED, out_dir=tmp_path / "spec")
    spec = str(tmp_path / "spec" / "instance_0000.json")
    configs = [
        ("doublewell", 1, {}),
        ("finite-generate", SEED, {"count": 20}),
        ("finite-run", 1, {"spec": spec, "oracle": True}),
        ("circle", 0, {"mode": "sync", "seeds": 20}),
        ("circle", 0, {"mode": "lyapunov", "seeds": 2, "T": 200.0, "reversed_paths": 1}),
        ("circle", 0, {"mode": "omega", "seeds": 3, "budget": 1e3}),
        ("ou-forward", 1, {"T": 100.0, "paths": 20}),
        ("tq7", 0, {"example": "circle"}),
    ]
    differing = []
    for k, (name, seed, params) in enumerate(configs):
        outs = []
        for rep in ("a", "b"):
            cfg = ExperimentConfig(name, seed, str(tmp_path / f"{k}{rep}"), dict(params))
            cfg.resolve()
            run(cfg)
            outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / f"{k}{rep}").glob("*.*"))})
        if not outs[0] or outs[0] != outs[1]:
            differing.append(name)
    ok = not differing
    record_criterion(8, ok, f"{len(configs)} experiment reruns, differing: {differing or 'none'}")
    assert ok
