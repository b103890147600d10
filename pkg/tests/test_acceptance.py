"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured values.
Run ``python3 tests/test_acceptance.py`` for the lines alone, or
``pytest tests/test_acceptance.py -v`` for the usual report.
"""

import time

import numpy as np
import pytest

from corrsets import cli, harness, lmi
from corrsets.corrbound import satisfies_definition, verify_bound_empirically
from corrsets.disturbance import decay_rate, stationary_cov
from corrsets.harness import ExperimentConfig, run_bound, run_violation_study
from corrsets.invariance import inclusion_implies_lyapunov, synth_invariant, synth_invariant_robust
from corrsets.probsets import (
    Ellipsoid,
    chebyshev_level,
    chi2_cdf,
    chi2_inv,
    minkowski_outer_check,
    reach_tube,
    tube_is_monotone,
)
from corrsets.streams import AUX, normals
from corrsets.symmat import dlyap, sqrt_psd

from oracles import (
    A_EX, F_EX1, EX2_STEADY_FREQ, GAMMA_EX1, GT_EX1, GW_EX1, GW_EX2, H_EX1, LAM_EX1, LAM_EX2,
    U_EX1, W_EX1, W_EX2, random_pd, random_stable,
)

LEVELS = [0.1, 0.2, 0.3, 0.4, 0.5]


@pytest.fixture
def report(capsys):
    """Print one pass/fail line past pytest's output capture; return ``ok``."""
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        return ok
    return emit


def test_criterion_1_stationary_covariance(report):
    G = stationary_cov(H_EX1, F_EX1, U_EX1)
    runs = []
    for _ in range(20):
        t = time.perf_counter()
        stationary_cov(H_EX1, F_EX1, U_EX1)
        runs.append(time.perf_counter() - t)
    err = np.abs(G - GT_EX1).max()
    ok = err <= 1e-3 and min(runs) < 1e-3
    assert report(1, ok, f"max |entry error| {err:.2e} (tol 1e-3), runtime {min(runs) * 1e3:.3f} ms (< 1 ms)")


def test_criterion_2_decay_rate(report):
    gamma = decay_rate(H_EX1, stationary_cov(H_EX1, F_EX1, U_EX1))
    ok = abs(gamma - GAMMA_EX1) <= 1e-3
    assert report(2, ok, f"gamma {gamma:.6f} vs {GAMMA_EX1} (tol 1e-3)")


def test_criterion_3_invariant_synthesis(report):
    errs = []
    for Gw, W, lam in ((GW_EX1, W_EX1, LAM_EX1), (GW_EX2, W_EX2, LAM_EX2)):
        inv = synth_invariant(A_EX, Gw)
        errs.append(max(np.abs(inv.W - W).max(), abs(inv.lam - lam)))
    ok = max(errs) <= 1e-3
    assert report(3, ok, f"max error example1 {errs[0]:.2e}, example2 {errs[1]:.2e} (tol 1e-3)")


@pytest.mark.parametrize("preset,reference", [("example1", GW_EX1), ("example2", GW_EX2)])
def test_criterion_4_bound_pipeline(preset, reference, report):
    t = time.perf_counter()
    cfg = ExperimentConfig.preset(preset)
    model = cfg.correlation_model()
    stage = run_bound(cfg)
    bound = stage.bound
    definition = satisfies_definition(model, bound, tol=1e-7)
    check = verify_bound_empirically(bound, cfg.A, cfg.make_generator(), 100, 10_000)
    elapsed = time.perf_counter() - t
    ratio = bound.trace / np.trace(reference)
    ok = definition and check.passed and ratio <= 1.05 and elapsed < 30
    assert report(4, ok, f"{preset}: definition {definition}, empirical {check.passed} "
                         f"(worst eig-slack {np.max(check.max_eig - check.slack):.3f}), "
                         f"trace ratio {ratio:.4f} (<= 1.05), {elapsed:.1f} s (< 30 s)")


def test_criterion_5_filtered_invariance(report):
    t = time.perf_counter()
    cfg = ExperimentConfig.preset("example1")
    stage = run_bound(cfg)
    inv = synth_invariant(cfg.A, stage.Gw)
    worst = []
    for seed in range(1, 6):
        rep = run_violation_study(cfg.with_overrides(seed=seed), inv.W, inv.lam)
        worst.append(np.max(rep.max_frequency() - np.array(LEVELS)))
    elapsed = time.perf_counter() - t
    ok = max(worst) <= 0 and elapsed < 60
    assert report(5, ok, f"max_k v_k/N - p_v over 5 seeds: {max(worst):+.3f} (<= 0), {elapsed:.1f} s (< 60 s)")


def test_criterion_6_constant_disturbance(report):
    cfg = ExperimentConfig.preset("example2").with_overrides(bound_source="reference")
    rep = run_violation_study(cfg)
    f = rep.frequencies
    steady = f[:, -1]
    dev = np.abs(steady - np.array(EX2_STEADY_FREQ))
    flat = bool(np.all(f[:, 9:] == f[:, 9:10]))
    computed = run_violation_study(ExperimentConfig.preset("example2")).frequencies[:, -1]
    ok = dev.max() <= 0.05 and flat
    assert report(6, ok, f"steady state {np.round(steady, 3).tolist()} vs {EX2_STEADY_FREQ} "
                         f"(max dev {dev.max():.3f}, tol 0.05), flat for k >= 10: {flat}; "
                         f"with the computed bound: {np.round(computed, 3).tolist()}")


def _crit7a():
    rng = np.random.default_rng(701)
    bad = 0
    for i in range(50):
        n = int(rng.integers(1, 5))
        rep = minkowski_outer_check(random_stable(rng, n), random_pd(rng, n, 0.0),
                                    random_pd(rng, n), rng.uniform(0.1, 10), 10_000, seed=i)
        bad += rep.violations
    return bad == 0, f"(a) inclusion violations {bad}"


def _crit7b():
    rng = np.random.default_rng(702)
    count = 0
    for _ in range(50):
        n = int(rng.integers(1, 5))
        count += tube_is_monotone(reach_tube(random_stable(rng, n, 0.98), random_pd(rng, n), 1.0, 100))
    return count == 50, f"(b) monotone tubes {count}/50"


def _crit7c():
    tube = reach_tube(A_EX, GW_EX1, 1.0, 200)
    err = np.linalg.norm(tube.levels[-1] - dlyap(A_EX, GW_EX1))
    return err <= 1e-6, f"(c) tube limit error {err:.1e}"


def _crit7d():
    G = np.array([[2.0, 0.7], [0.7, 1.0]])
    x = normals(7, (AUX, 77), 100_000, 2) @ sqrt_psd(G).T
    worst = np.inf
    for eps in (0.05, 0.1, 0.2):
        r = chebyshev_level(2, eps)
        inside = np.mean(Ellipsoid(G, r).level(x) <= r)
        worst = min(worst, inside - (1 - 2 / r - 0.01))
    return worst >= 0, f"(d) coverage margin {worst:.4f}"


def _crit7e():
    rng = np.random.default_rng(705)
    held = 0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        A, Gw, r = random_stable(rng, n), random_pd(rng, n), rng.uniform(1, 5)
        W = synth_invariant_robust(A, Gw, r).W
        held += lmi.ellipsoid_sum_inclusion(A, W, Gw, r).ok and inclusion_implies_lyapunov(A, Gw, W, r)
    return held == 200, f"(e) implication held {held}/200"


def _crit7f():
    err = max(abs(chi2_cdf(n, chi2_inv(n, q)) - q)
              for n in range(1, 7) for q in np.round(np.arange(0.01, 1.0, 0.01), 2))
    return err <= 1e-9, f"(f) chi2 round trip {err:.1e}"


def test_criterion_7_property_suites(report):
    parts = [_crit7a(), _crit7b(), _crit7c(), _crit7d(), _crit7e(), _crit7f()]
    ok = all(p[0] for p in parts)
    assert report(7, ok, "; ".join(p[1] for p in parts))


def test_criterion_8_determinism(tmp_path, report):
    same = True
    for preset in ("example1", "example2"):
        dirs = []
        for tag, jobs in (("a", 1), ("b", 1), ("c", 4)):
            out = tmp_path / f"{preset}-{tag}"
            assert cli.main(["pipeline", "--preset", preset, "--seed", "11",
                             "--jobs", str(jobs), "--out-dir", str(out)]) == 0
            dirs.append(out)
        names = sorted(p.name for p in dirs[0].iterdir())
        for other in dirs[1:]:
            same &= names == sorted(p.name for p in other.iterdir())
            same &= all((dirs[0] / n).read_bytes() == (other / n).read_bytes() for n in names)
    assert report(8, same, f"byte-identical outputs across reruns and --jobs 1/4: {same}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:randomly"]))
