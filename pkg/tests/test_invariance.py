import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrsets import lmi
from corrsets.errors import InfeasibleError
from corrsets.invariance import (
    LYAPUNOV,
    ROBUST,
    ViolationSpec,
    inclusion_implies_lyapunov,
    level_for_violation,
    synth_invariant,
    synth_invariant_robust,
)
from corrsets.probsets import chebyshev_level
from corrsets.symmat import dlyap, max_gen_eig, psd_leq

from oracles import A_EX, GW_EX1, GW_EX2, LAM_EX1, LAM_EX2, W_EX1, W_EX2, random_pd, random_stable


class TestSynthInvariant:
    def test_zero_system(self):
        inv = synth_invariant(np.zeros((2, 2)), GW_EX1)
        np.testing.assert_array_equal(inv.W, GW_EX1)
        assert inv.lam == 0.0
        assert inv.construction == LYAPUNOV

    @pytest.mark.parametrize("Gw,W,lam", [(GW_EX1, W_EX1, LAM_EX1), (GW_EX2, W_EX2, LAM_EX2)])
    def test_reference(self, Gw, W, lam):
        inv = synth_invariant(A_EX, Gw)
        np.testing.assert_allclose(inv.W, W, atol=1e-3)
        assert inv.lam == pytest.approx(lam, abs=1e-3)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_equality_and_contraction(self, seed, n):
        rng = np.random.default_rng(seed)
        A = random_stable(rng, n, 0.95)
        Gw = random_pd(rng, n)
        inv = synth_invariant(A, Gw)
        W = inv.W
        assert np.linalg.norm(W - A @ W @ A.T - Gw) <= 1e-9 * (1 + np.linalg.norm(W))
        assert psd_leq(A @ W @ A.T + Gw, W, 1e-7)
        assert psd_leq(A @ W @ A.T, inv.lam * W, 1e-9 * np.linalg.norm(W))
        assert 0 <= inv.lam < 1

    def test_nominal_decay(self):
        inv = synth_invariant(A_EX, GW_EX1)
        rho = level_for_violation(ViolationSpec(2, 0.1), inv.lam)
        Winv = np.linalg.inv(inv.W)
        rng = np.random.default_rng(0)
        for _ in range(100):
            u = rng.normal(size=2)
            x = math.sqrt(rho) * np.linalg.cholesky(inv.W) @ (u / np.linalg.norm(u))
            for k in range(1, 15):
                x = A_EX @ x
                assert x @ Winv @ x <= inv.lam**k * rho * (1 + 1e-9)

    def test_unstable(self):
        with pytest.raises(ArithmeticError):
            synth_invariant(np.eye(2), GW_EX1)

    def test_export(self):
        inv = synth_invariant(A_EX, GW_EX1)
        table = [(0.1, 5.0), (0.2, 4.0)]
        buf = io.StringIO()
        inv.to_csv(buf, table)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("construction,p_v,rho,lambda,w_0_0")
        assert len(lines) == 3
        data = json.loads(inv.to_json(table))
        assert data["construction"] == LYAPUNOV
        assert data["rho"][1] == {"p_v": 0.2, "rho": 4.0}


class TestLevels:
    def test_gaussian_no_contraction(self):
        assert level_for_violation(ViolationSpec(2, 0.1), 0.0) == pytest.approx(4.60517, abs=1e-5)

    def test_gaussian_reference_lambda(self):
        rho = level_for_violation(ViolationSpec(2, 0.1), 0.1221)
        assert rho == pytest.approx(-2 * math.log(0.1) / (1 - 0.1221), abs=1e-9)
        assert rho == pytest.approx(5.2457, abs=1e-4)

    def test_chebyshev(self):
        assert level_for_violation(ViolationSpec(2, 0.2, "chebyshev"), 0.5) == pytest.approx(20.0)

    def test_conservative(self):
        spec = ViolationSpec(2, 0.2, "chebyshev", conservative=True)
        assert level_for_violation(spec, 0.25) == pytest.approx(10 / 0.25)
        # the exact Minkowski-difference level never undercuts the default one
        for lam in np.linspace(0, 0.99, 20):
            assert level_for_violation(spec, lam) >= level_for_violation(
                ViolationSpec(2, 0.2, "chebyshev"), lam) - 1e-12

    def test_lambda_one_rejected(self):
        with pytest.raises(ValueError):
            level_for_violation(ViolationSpec(2, 0.1), 1.0)

    @pytest.mark.parametrize("p", [0.0, 1.0, 1.5])
    def test_bad_probability(self, p):
        with pytest.raises(ValueError):
            ViolationSpec(2, p)

    @pytest.mark.parametrize("dist", ["gaussian", "chebyshev"])
    @pytest.mark.parametrize("conservative", [False, True])
    def test_monotone(self, dist, conservative):
        ps = np.linspace(0.05, 0.95, 19)
        lams = np.linspace(0.0, 0.9, 10)
        for lam in lams:
            vals = [level_for_violation(ViolationSpec(3, p, dist, conservative), lam) for p in ps]
            assert all(b < a for a, b in zip(vals, vals[1:]))
        for p in ps:
            vals = [level_for_violation(ViolationSpec(3, p, dist, conservative), lam) for lam in lams]
            assert all(b > a for a, b in zip(vals, vals[1:]))


class TestRobust:
    def test_zero_system(self):
        r = 2.0
        inv = synth_invariant_robust(np.zeros((2, 2)), GW_EX1, r)
        assert inv.construction == ROBUST
        assert inv.s == pytest.approx(lmi.DEFAULT_S_GRID[0])
        np.testing.assert_allclose(inv.W, (1 + inv.s) * r * GW_EX1)

    def test_output_certified(self):
        r = 3.0
        inv = synth_invariant_robust(A_EX, GW_EX1, r)
        assert lmi.ellipsoid_sum_inclusion(A_EX, inv.W, GW_EX1, r).ok
        assert psd_leq(A_EX @ inv.W @ A_EX.T + GW_EX1, inv.W, 1e-7)

    def test_trace_minimal_on_grid(self):
        r = 2.0
        inv = synth_invariant_robust(A_EX, GW_EX1, r)
        traces = [np.trace(dlyap(math.sqrt(1 + 1 / s) * A_EX, (1 + s) * r * GW_EX1))
                  for s in lmi.DEFAULT_S_GRID if (1 + 1 / s) * 0.09 < 1]
        assert np.trace(inv.W) == pytest.approx(min(traces))

    def test_more_conservative_than_lyapunov(self):
        r = chebyshev_level(2, 0.1)
        robust = synth_invariant_robust(A_EX, GW_EX1, r)
        lyap = synth_invariant(A_EX, GW_EX1)
        rho = level_for_violation(ViolationSpec(2, 0.1, "chebyshev"), lyap.lam)
        assert np.trace(robust.W) >= rho * np.trace(lyap.W)

    def test_no_feasible_multiplier(self):
        with pytest.raises(InfeasibleError):
            synth_invariant_robust(0.99 * np.eye(2), GW_EX1, 1.0, s_grid=[0.001, 0.01])

    def test_contraction_rate(self):
        inv = synth_invariant_robust(A_EX, GW_EX1, 2.0)
        W = inv.W
        assert inv.lam == pytest.approx(max_gen_eig(A_EX @ W @ A_EX.T, W).lambda_max)


class TestInclusionImplication:
    def test_vacuous(self):
        assert inclusion_implies_lyapunov(A_EX, GW_EX1, 0.1 * np.eye(2), 1.0)

    def test_robust_output(self):
        W = synth_invariant_robust(A_EX, GW_EX1, 1.0).W
        assert lmi.ellipsoid_sum_inclusion(A_EX, W, GW_EX1, 1.0).ok
        assert inclusion_implies_lyapunov(A_EX, GW_EX1, W, 1.0)

    def test_requires_r_at_least_one(self):
        with pytest.raises(ValueError):
            inclusion_implies_lyapunov(A_EX, GW_EX1, np.eye(2), 0.5)

    def test_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(1, 4))
            A = random_stable(rng, n, 0.9)
            Gw = random_pd(rng, n)
            r = rng.uniform(1, 5)
            W = synth_invariant_robust(A, Gw, r).W
            assert lmi.ellipsoid_sum_inclusion(A, W, Gw, r).ok
            assert inclusion_implies_lyapunov(A, Gw, W, r)
