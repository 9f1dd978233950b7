"""End-to-end acceptance suite.

Each test prints one pass/fail line for its criterion. The shared benchmark
is the staggered three-channel field: three floating high-contrast channels
per subdomain row band, so every vertical interface is crossed by exactly
three channels and no two channels have the same length.
"""

import math
import time

import numpy as np
import pytest

from schwarzlab import linalg, schwarz
from schwarzlab.coarse import verify_stable_decomposition
from schwarzlab.experiments import (AdaptiveConfig, AlphaConfig, BenchmarkSpec,
                                    CoarseConfig, ExperimentConfig, MeshConfig,
                                    PartitionConfig, RunContext, prepare_point,
                                    solve_point)
from schwarzlab.partition import build_partition_of_unity

CHANNELS3 = {"count": 3, "per_band": True, "margin": 2, "stagger": True}
CHANNELS1 = {"count": 1, "per_band": True, "margin": 2, "stagger": True}
CONTRASTS = [1.0, 1e2, 1e4, 1e6]


def make_config(n, H, delta, type_, m=0, contrast=1.0, channels=None, adaptive=None):
    alpha = AlphaConfig(contrast=contrast)
    if channels is not None:
        alpha = AlphaConfig(contrast=contrast,
                            benchmark=BenchmarkSpec(name="channels", params=channels))
    coarse = CoarseConfig(type=type_, m=m,
                          adaptive=AdaptiveConfig(**adaptive) if adaptive else None)
    return ExperimentConfig(mesh=MeshConfig(n=n),
                            partition=PartitionConfig(H_cells=H, delta_layers=delta),
                            alpha=alpha, coarse=coarse)


def report(num, ok, detail):
    print(f"\ncriterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


@pytest.fixture(scope="module")
def suite64():
    """Criterion-3 geometry: n=64, H=16h, delta=2 layers, staggered channels."""
    t0 = time.perf_counter()
    ctx = RunContext(make_config(64, 16, 2, "shem", 3, channels=CHANNELS3))
    ctx_adapt = RunContext(make_config(64, 16, 2, "shem", channels=CHANNELS3,
                                       adaptive={"tau": 1.0 / 32.0, "min_one": True}))
    rows, solutions = {}, []
    for ctx_, label, type_, m in [
        (ctx, "ms", "ms", 0),
        (ctx, "shem2", "shem", 2),
        (ctx, "shem3", "shem", 3),
        (ctx, "nshem-alt3", "nshem-alt", 3),
        (ctx, "nshem-sin3", "nshem-sin", 3),
        (ctx_adapt, "shem-adapt", "shem", 0),
    ]:
        for c in CONTRASTS:
            row, x, _ = solve_point(ctx_, type_, m, 2, c)
            assert row.converged, f"{label} at contrast {c:g} did not converge"
            rows[(label, c)] = row
            solutions.append((ctx_, type_, m, c, x))
    return {"ctx": ctx, "ctx_adapt": ctx_adapt, "rows": rows,
            "solutions": solutions, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def small_suite():
    """Oracle-checkable configurations, all at or below 2000 dofs."""
    points = [
        (16, 4, 2, "ms", 0, 1.0, None),
        (32, 8, 2, "ms", 0, 1.0, None),
        (32, 8, 2, "shem", 2, 1.0, None),
        (32, 8, 2, "ms", 0, 1e4, CHANNELS1),
        (32, 8, 2, "shem", 1, 1e4, CHANNELS1),
        (32, 8, 2, "nshem-alt", 1, 1e4, CHANNELS1),
        (32, 8, 2, "nshem-sin", 1, 1e4, CHANNELS1),
        (32, 8, 0, "ohem", 0, 1e6, CHANNELS1),
    ]
    out = []
    for n, H, delta, type_, m, contrast, channels in points:
        ctx = RunContext(make_config(n, H, delta, type_, m, contrast, channels))
        row, x, _ = solve_point(ctx, type_, m, delta, contrast)
        system, space, P = prepare_point(ctx, type_, m, delta, contrast)
        assert system.n_dofs <= 2000
        oracle = schwarz.dense_condition_oracle(system.A, P)
        out.append({"ctx": ctx, "type": type_, "m": m, "delta": delta,
                    "contrast": contrast, "row": row, "x": x,
                    "system": system, "space": space, "oracle": oracle})
    return out


def test_criterion_1_ohem_direct_solver():
    t0 = time.perf_counter()
    ctx = RunContext(make_config(32, 8, 0, "ohem", contrast=1e6, channels=CHANNELS3))
    row, _, rep = solve_point(ctx, "ohem", 0, 0, 1e6)
    elapsed = time.perf_counter() - t0
    ok = (row.iterations == 1 and row.final_relres <= 1e-6
          and abs(row.kappa - 1.0) <= 1e-8 and elapsed < 5.0)
    report(1, ok, f"iterations={row.iterations}, kappa={row.kappa:.10f}, "
                  f"relres={row.final_relres:.2e}, {elapsed:.2f}s")


def test_criterion_2_interface_projection_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    worst = 0.0
    checked = 0
    for channels, contrast in [(None, 1.0), (CHANNELS3, 1e6)]:
        ctx = RunContext(make_config(32, 8, 2, "shem", 3, contrast, channels))
        ops = ctx.ops(contrast)
        for t in range(len(ctx.partition.interfaces)):
            spec = ops.spectrum(t)
            M = spec.bdiag.shape[0]
            m = 3
            Vm = spec.eigenvectors[:, :m]
            lam_next = spec.eigenvalues[m]

            def energy(w):
                return float(w @ (spec.abar @ w))

            for _ in range(200):
                v = rng.standard_normal(M)
                pv = Vm @ (Vm.T @ (spec.bdiag * v))
                e_v, e_p, e_r = energy(v), energy(pv), energy(v - pv)
                worst = max(worst, (e_p - e_v) / e_v)                     # contraction
                worst = max(worst, (e_r - e_v) / e_v)                     # contraction
                worst = max(worst, abs(e_p + e_r - e_v) / e_v)            # Pythagoras
                r = v - pv
                b_norm = float(r @ (spec.bdiag * r))
                worst = max(worst, (b_norm - e_r / lam_next) / max(e_r / lam_next, 1e-300))
                checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    report(2, ok, f"{checked} traces, worst slack {worst:.2e}, {elapsed:.2f}s")


def test_criterion_3_shem_contrast_robustness(suite64):
    k3 = [suite64["rows"][("shem3", c)].kappa for c in CONTRASTS]
    k2_lo = suite64["rows"][("shem2", 1.0)].kappa
    k2_hi = suite64["rows"][("shem2", 1e6)].kappa
    elapsed = suite64["seconds"]
    ok = (max(k3) / min(k3) < 2.0 and max(k3) <= 50.0
          and k2_hi >= 100.0 * k2_lo and elapsed < 120.0)
    report(3, ok, f"shem3 kappa {min(k3):.2f}..{max(k3):.2f}, "
                  f"shem2 ratio {k2_hi / k2_lo:.0f}, suite {elapsed:.1f}s")


def test_criterion_4_ms_degrades_with_contrast(suite64):
    k6 = suite64["rows"][("ms", 1e6)].kappa
    k4 = suite64["rows"][("ms", 1e4)].kappa
    ratio = k6 / k4
    ok = 10.0 <= ratio <= 1000.0
    report(4, ok, f"kappa(1e6)/kappa(1e4) = {ratio:.1f}")


def test_criterion_5_nshem_tracks_shem(suite64):
    gaps = []
    for label in ("nshem-alt3", "nshem-sin3"):
        for c in CONTRASTS:
            gaps.append(abs(suite64["rows"][(label, c)].iterations
                            - suite64["rows"][("shem3", c)].iterations))
    ok = max(gaps) <= 5
    report(5, ok, f"max iteration gap {max(gaps)}")


def test_criterion_6_kappa_estimate_matches_oracle(small_suite):
    worst = 0.0
    for entry in small_suite:
        rel = abs(entry["row"].kappa - entry["oracle"]) / entry["oracle"]
        worst = max(worst, rel)
    ok = worst <= 0.05
    report(6, ok, f"{len(small_suite)} configurations, worst deviation {worst * 100:.2f}%")


def test_criterion_7_condition_and_decomposition_bounds(suite64, small_suite):
    rng = np.random.default_rng(7)
    worst_margin = 0.0
    checked_kappa = checked_decomp = 0

    def bound_of(lam):
        if lam is None or math.isinf(lam):
            return 100.0
        return 100.0 * (1.0 + 1.0 / lam)

    for row in suite64["rows"].values():
        assert row.kappa <= bound_of(row.lambda_m_plus_1)
        checked_kappa += 1
    for entry in small_suite:
        assert entry["row"].kappa <= bound_of(entry["row"].lambda_m_plus_1)
        checked_kappa += 1

    # stable decomposition on every eigenfunction-based configuration
    decomp_cases = [(suite64["ctx"], "ms", 0), (suite64["ctx"], "shem", 2),
                    (suite64["ctx"], "shem", 3), (suite64["ctx_adapt"], "shem", 0)]
    for ctx, type_, m in decomp_cases:
        pou = build_partition_of_unity(ctx.partition, ctx.overlap(2))
        for c in CONTRASTS:
            ops = ctx.ops(c)
            space = ctx.coarse(c, type_, m)
            bound = bound_of(space.lambda_m_plus_1)
            interior = ctx.mesh.interior_nodes
            for _ in range(20):
                u = np.zeros(ctx.mesh.n_nodes)
                u[interior] = rng.standard_normal(interior.shape[0])
                _, _, ratio = verify_stable_decomposition(ops, space, pou, u)
                worst_margin = max(worst_margin, ratio / bound)
                checked_decomp += 1
    for entry in small_suite:
        if entry["space"].kind in ("ms", "shem", "ohem") and entry["delta"] >= 1:
            ctx = entry["ctx"]
            ops = ctx.ops(entry["contrast"])
            pou = build_partition_of_unity(ctx.partition, ctx.overlap(entry["delta"]))
            bound = bound_of(entry["space"].lambda_m_plus_1)
            interior = ctx.mesh.interior_nodes
            for _ in range(20):
                u = np.zeros(ctx.mesh.n_nodes)
                u[interior] = rng.standard_normal(interior.shape[0])
                _, _, ratio = verify_stable_decomposition(ops, entry["space"], pou, u)
                worst_margin = max(worst_margin, ratio / bound)
                checked_decomp += 1

    ok = worst_margin <= 1.0
    report(7, ok, f"{checked_kappa} kappa checks, {checked_decomp} decompositions, "
                  f"worst ratio/bound {worst_margin:.3f}")


def test_criterion_8_adaptive_selects_channel_count(suite64):
    ctx = suite64["ctx_adapt"]
    space = ctx.coarse(1e6, "shem", 0)
    counts_ok = all(
        space.m_by_interface[gam.index] == 3
        for gam in ctx.partition.interfaces if gam.orientation == "v")
    k_adapt = suite64["rows"][("shem-adapt", 1e6)].kappa
    k_shem3 = suite64["rows"][("shem3", 1e6)].kappa
    ok = counts_ok and k_adapt <= 2.0 * k_shem3
    report(8, ok, f"vertical interfaces all at m=3: {counts_ok}, "
                  f"kappa {k_adapt:.2f} vs 2 x {k_shem3:.2f}")


def test_criterion_9_solutions_match_direct_solve(suite64, small_suite):
    worst = 0.0
    factors = {}
    for ctx, type_, m, c, x in suite64["solutions"]:
        from schwarzlab.assembly import apply_dirichlet, assemble_load
        ops = ctx.ops(c)
        system = apply_dirichlet(ops.A_full, assemble_load(ctx.mesh, 1.0), ctx.mesh)
        key = (id(ctx), c)
        if key not in factors:
            factors[key] = linalg.spd_factorize(system.A)
        xd = factors[key].solve(system.b)
        d = x - xd
        err = math.sqrt(max(float(d @ (system.A @ d)), 0.0)
                        / float(xd @ (system.A @ xd)))
        worst = max(worst, err)
    for entry in small_suite:
        system = entry["system"]
        xd = linalg.spd_solve(linalg.spd_factorize(system.A), system.b)
        d = entry["x"] - xd
        err = math.sqrt(max(float(d @ (system.A @ d)), 0.0)
                        / float(xd @ (system.A @ xd)))
        worst = max(worst, err)
    ok = worst <= 1e-5
    report(9, ok, f"worst relative A-norm error {worst:.2e}")
