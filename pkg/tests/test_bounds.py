import math

import numpy as np
import pytest

from l1tv.bounds import (BoundQuery, InfeasibleBoundError, construction_bound, lambda_max,
                         lambda_ratio_coeffs, mc_width_upper, phi, phi_l1, phi_l1_sharp,
                         phi_tv, recovery_error_bound, sample_bound)
from l1tv.signals import sparsity_levels, synth_signal
from l1tv.solvers import RegParams, SensingProblem, default_step_params, pgm_ista


class TestBoundQuery:
    @pytest.mark.parametrize("kw", [
        dict(n=10, s_r=11, s_g=0),
        dict(n=10, s_r=3, s_g=10),
        dict(n=10, s_r=2, s_g=5),
        dict(n=10, s_r=3, s_g=2, lam1=0.0, lam2=0.0),
        dict(n=10, s_r=3, s_g=2, lam1=-1.0),
        dict(n=10, s_r=3, s_g=2, t=0.0),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            BoundQuery(**kw)


class TestPhi:
    def test_table_cells(self):
        assert math.ceil(phi(BoundQuery(1000, 50, 25))) == 92
        assert math.ceil(phi(BoundQuery(1000, 100, 100))) == 285

    def test_scale_invariance(self, rng):
        for _ in range(20):
            a, b, c = rng.uniform(0.01, 5, 3)
            q1 = BoundQuery(300, 40, 30, lam1=a, lam2=b)
            q2 = BoundQuery(300, 40, 30, lam1=c * a, lam2=c * b)
            assert phi(q1) == pytest.approx(phi(q2), rel=1e-13)

    def test_reductions(self):
        for n, s_r, s_g in [(1000, 50, 25), (200, 40, 7), (64, 10, 20)]:
            assert phi(BoundQuery(n, s_r, s_g, lam1=0.0, lam2=1.0)) == pytest.approx(
                phi_tv(n, s_g), rel=1e-14)
            assert phi(BoundQuery(n, s_r, s_g, lam1=1.0, lam2=0.0)) == pytest.approx(
                phi_l1(n, s_r), rel=1e-14)

    def test_monotone_in_sr(self):
        for ratio in (1.0, 0.1):
            for s_g in (25, 50, 75):
                vals = [phi(BoundQuery(1000, s_r, s_g, lam1=ratio))
                        for s_r in range(max(s_g // 2 + 1, s_g), 400, 10)]
                assert np.all(np.diff(vals) >= 0)

    def test_tabulated_variant(self):
        q = BoundQuery(1000, 50, 25, lam1=0.1, lam2=1.0)
        assert math.ceil(phi(q, cross_term="tabulated")) == 508
        # identical when lam1 = lam2
        q1 = BoundQuery(1000, 50, 25)
        assert phi(q1, cross_term="tabulated") == phi(q1)
        with pytest.raises(ValueError):
            phi(q1, cross_term="other")


class TestClassicalBounds:
    def test_sharp_l1(self):
        assert round(phi_l1_sharp(1000, 50)) == 400
        assert round(phi_l1_sharp(1000, 150)) == 869
        assert math.ceil(phi_l1_sharp(1000, 150)) == 870

    def test_l1_below_n(self):
        for n in (5, 100, 1000):
            for s_r in range(0, n + 1, max(1, n // 10)):
                assert phi_l1(n, s_r) <= n

    def test_tv(self):
        assert round(phi_tv(1000, 25)) == 552
        assert round(phi_tv(1000, 75)) == 606
        assert math.ceil(phi_tv(1000, 75)) == 607

    def test_tv_monotone(self):
        vals = [phi_tv(300, s) for s in range(0, 299)]
        assert np.all(np.diff(vals) > 0)


class TestSampleBound:
    @pytest.mark.parametrize("phi_value,t,m", [(0.0, 1.0, 3), (92.0, 1.0, 114), (400.0, 2.0, 486)])
    def test_examples(self, phi_value, t, m):
        assert sample_bound(phi_value, t) == m

    def test_strict_inequality(self):
        m = sample_bound(92.0, 1.0)
        assert m > (math.sqrt(92) + 1) ** 2 + 1 >= m - 1


class TestRecoveryErrorBound:
    def test_noiseless(self):
        assert recovery_error_bound(200, 92, 1, 0.0) == 0.0

    def test_value(self):
        expected = 0.2 / (math.sqrt(199) - math.sqrt(92) - 1)
        assert recovery_error_bound(200, 92, 1, 0.1) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.05690, abs=5e-6)

    def test_decreasing_in_m(self):
        vals = [recovery_error_bound(m, 92, 1, 0.1) for m in range(150, 400, 10)]
        assert np.all(np.diff(vals) < 0)

    def test_infeasible(self):
        with pytest.raises(InfeasibleBoundError):
            recovery_error_bound(50, 92, 1, 0.1)
        with pytest.raises(InfeasibleBoundError):
            recovery_error_bound(200, 92, 1, 0.1, printed=True)


class TestLambdaMax:
    def test_zero(self, rng):
        assert lambda_max(rng.standard_normal((3, 4)), np.zeros(3)) == 0.0

    def test_identity(self):
        assert lambda_max(np.eye(3), np.array([1.0, -4.0, 2.0])) == 4.0

    def test_zero_solution(self, rng):
        A = rng.standard_normal((8, 12))
        y = rng.standard_normal(8)
        p = SensingProblem(A, y)
        res = pgm_ista(p, RegParams(lambda_max(A, y), 0.0), default_step_params(p), tol=1e-10)
        np.testing.assert_array_equal(res.x, np.zeros(12))


class TestLambdaRatio:
    def test_degenerate(self):
        a, _, _ = lambda_ratio_coeffs(100, 100, 10, 50)
        assert a == 0.0

    def test_printed_nonnegative_leading(self, rng):
        for _ in range(50):
            n = int(rng.integers(10, 500))
            s_r = int(rng.integers(0, n + 1))
            s_g = int(rng.integers(0, n))
            assert lambda_ratio_coeffs(n, s_r, s_g, rng.uniform(0, n))[0] >= 0

    def test_printed_values(self):
        n, s_r, s_g, n0 = 1000, 50, 25, 400
        a, b, c = lambda_ratio_coeffs(n, s_r, s_g, n0)
        assert a == 2 * 950 ** 2
        assert b == pytest.approx(4 * math.sqrt(2) * 950 * 974 + (3000 + 12 * 25) * 400)
        assert c == 4 * 974 ** 2 + 4 * (2000 + 25 - 4) * 400

    def test_exact_form_equivalence(self):
        n, s_r, s_g, n0 = 1000, 50, 25, 400
        a, b, c = lambda_ratio_coeffs(n, s_r, s_g, n0, form="exact")
        for rho in np.geomspace(1e-3, 1e3, 400):
            inside = phi(BoundQuery(n, s_r, s_g, lam1=rho, lam2=1.0)) <= n0
            assert inside == (a * rho ** 2 + b * rho + c >= 0)

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            lambda_ratio_coeffs(10, 2, 2, 5, form="nope")


class TestWidthEstimator:
    def test_zero_signal_l1(self):
        est = mc_width_upper(np.zeros(30), 1.0, 0.0, 500, seed=1)
        assert est.mean <= 30

    def test_deterministic(self):
        x = synth_signal(100, 20, 1, 3).values
        assert mc_width_upper(x, 1.0, 1.0, 200, 5) == mc_width_upper(x, 1.0, 1.0, 200, 5)

    def test_below_construction_bound(self):
        x = synth_signal(100, 20, 4, 11, block_size=5).values
        for lam1, lam2 in [(1.0, 1.0), (0.1, 1.0), (1.0, 0.1)]:
            est = mc_width_upper(x, lam1, lam2, 2000, 2)
            assert est.mean <= construction_bound(x, lam1, lam2) + 3 * est.stderr

    def test_construction_bound_matches_phi_without_zero_pairs(self):
        # no adjacent zero pair: the extra term vanishes and the bound equals phi
        x = np.tile([1.0, 0.0], 20)
        s_r, s_g = sparsity_levels(x)
        assert construction_bound(x, 1.0, 1.0) == pytest.approx(
            phi(BoundQuery(40, s_r, s_g)), rel=1e-12)

    def test_trials_validation(self):
        with pytest.raises(ValueError):
            mc_width_upper(np.ones(5), 1.0, 1.0, 1, 0)
