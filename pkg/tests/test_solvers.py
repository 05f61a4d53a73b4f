import numpy as np
import pytest

from l1tv.bounds import lambda_max
from l1tv.linalg import gaussian_matrix
from l1tv.signals import rel_err, synth_signal
from l1tv.solvers import (AdmmConfig, RegParams, SensingProblem, StepParams, admm_constrained,
                          default_step_params, fista_reference, fixed_point_residual, objective,
                          pgm_ista, pgm_ista_step, validate_step_params)

from oracles import cvxpy_regularized, grid_minimize, naive_objective, regularized_subgradient


def _instance(seed, m=6, n=8):
    r = np.random.default_rng(seed)
    A = r.standard_normal((m, n))
    x = np.zeros(n)
    x[2:5] = r.standard_normal()
    return SensingProblem(A, A @ x + 0.05 * r.standard_normal(m))


class TestTypes:
    def test_norm_cached(self, rng):
        A = rng.standard_normal((5, 9))
        p = SensingProblem(A, np.zeros(5))
        assert p.spectral_norm_sq == pytest.approx(np.linalg.norm(A, 2) ** 2, rel=2e-6)
        assert p.shape == (5, 9)
        q = p.with_measurements(np.ones(5))
        assert q.spectral_norm_sq == p.spectral_norm_sq

    @pytest.mark.parametrize("A,y", [
        (np.ones((2, 1)), np.ones(2)),
        (np.ones((2, 3)), np.ones(3)),
        (np.array([[1.0, np.inf]]), np.ones(1)),
    ])
    def test_invalid_problem(self, A, y):
        with pytest.raises(ValueError):
            SensingProblem(A, y)

    def test_negative_weights(self):
        with pytest.raises(ValueError):
            RegParams(-1.0, 0.0)


class TestObjective:
    def test_zero_iterate(self, rng):
        p = SensingProblem(rng.standard_normal((4, 6)), rng.standard_normal(4))
        assert objective(p, RegParams(1, 1), np.zeros(6)) == pytest.approx(0.5 * p.y @ p.y)

    def test_exact_fit(self, rng):
        A = rng.standard_normal((4, 6))
        x = rng.standard_normal(6)
        assert objective(SensingProblem(A, A @ x), RegParams(0, 0), x) == pytest.approx(0, abs=1e-24)

    def test_naive_oracle(self, rng):
        for _ in range(10):
            A = rng.standard_normal((7, 11))
            y = rng.standard_normal(7)
            x = rng.standard_normal(11)
            lam1, lam2 = rng.uniform(0, 2, 2)
            got = objective(SensingProblem(A, y), RegParams(lam1, lam2), x)
            assert got == pytest.approx(naive_objective(A, y, lam1, lam2, x), rel=1e-12)


class TestStepParams:
    def test_default(self):
        p = SensingProblem(np.diag([2.0, 1.0]), np.ones(2), spectral_norm_sq=4.0)
        s = default_step_params(p)
        assert s.u == 0.25
        assert s.t == pytest.approx(0.225)
        validate_step_params(p, s)

    @pytest.mark.parametrize("u,t", [(0.5, 0.1), (0.0, 0.0), (0.2, 0.3), (0.2, 0.0)])
    def test_invalid(self, u, t):
        p = SensingProblem(np.diag([2.0, 1.0]), np.ones(2), spectral_norm_sq=4.0)
        with pytest.raises(ValueError):
            validate_step_params(p, StepParams(u, t))

    def test_bad_safety(self):
        p = SensingProblem(np.eye(2), np.ones(2))
        with pytest.raises(ValueError):
            default_step_params(p, safety=1.0)


class TestReferenceSolver:
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_cvxpy(self, seed):
        p = _instance(seed, 10, 16)
        r = RegParams(0.05, 0.1)
        x_ref = fista_reference(p, r).x
        x_cvx = cvxpy_regularized(p.A, p.y, r.lam1, r.lam2)
        assert objective(p, r, x_ref) <= objective(p, r, x_cvx) + 1e-9

    def test_two_dimensional_grid(self):
        r0 = np.random.default_rng(3)
        A = r0.standard_normal((2, 2))
        p = SensingProblem(A, r0.standard_normal(2))
        r = RegParams(0.3, 0.2)
        x = fista_reference(p, r).x

        def f(X):
            res = X @ A.T - p.y
            return (0.5 * np.sum(res ** 2, axis=1) + r.lam1 * np.sum(np.abs(X), axis=1)
                    + r.lam2 * np.abs(X[:, 1] - X[:, 0]))

        best, _ = grid_minimize(f, x, 0.5, 1001)
        assert objective(p, r, x) <= best + 1e-12

    def test_subgradient_cross_check(self):
        p = _instance(4)
        r = RegParams(0.1, 0.1)
        best, _ = regularized_subgradient(p.A, p.y, r.lam1, r.lam2,
                                          0.5 / p.spectral_norm_sq, 100_000)
        f_ref = objective(p, r, fista_reference(p, r).x)
        assert f_ref <= best + 1e-12
        assert best - f_ref < 1e-5


class TestPGMISTA:
    def test_zero_data(self, rng):
        p = SensingProblem(rng.standard_normal((4, 6)), np.zeros(4))
        res = pgm_ista(p, RegParams(0.1, 0.1), default_step_params(p))
        np.testing.assert_array_equal(res.x, np.zeros(6))
        assert res.converged and res.iterations == 1

    def test_lambda_max_zero_solution(self, rng):
        A = rng.standard_normal((6, 10))
        p = SensingProblem(A, rng.standard_normal(6))
        r = RegParams(lambda_max(A, p.y), 0.0)
        s = default_step_params(p)
        res = pgm_ista(p, r, s)
        np.testing.assert_array_equal(res.x, np.zeros(10))
        assert fixed_point_residual(p, r, s, res.x) < 1e-10

    def test_history_lengths(self):
        p = _instance(0)
        res = pgm_ista(p, RegParams(0.1, 0.1), default_step_params(p), max_iter=50, tol=0)
        assert len(res.objective_history) == res.iterations + 1 == 51
        assert len(res.residual_history) == 50
        assert min(res.residual_history) >= 0

    def test_close_to_reference(self):
        p = _instance(1)
        r = RegParams(0.01, 0.01)
        u = 0.1 * 2 / p.spectral_norm_sq
        res = pgm_ista(p, r, StepParams(u, 0.9 * u), max_iter=100_000, tol=1e-14,
                       record=False)
        f_ref = objective(p, r, fista_reference(p, r).x)
        assert abs(objective(p, r, res.x) - f_ref) <= 1e-5

    def test_matches_ista_without_tv(self):
        p = _instance(2)
        lam1 = 0.2
        u = 1.0 / p.spectral_norm_sq
        xs = []
        pgm_ista(p, RegParams(lam1, 0.0), StepParams(u, u), max_iter=30, tol=0,
                 callback=lambda k, x: xs.append(x.copy()))
        x = np.zeros(8)
        for k in range(30):
            v = x - u * (p.A.T @ (p.A @ x - p.y))
            x = np.sign(v) * np.maximum(np.abs(v) - u * lam1, 0)
            np.testing.assert_allclose(xs[k], x, atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_fejer_monotone(self, seed):
        p = _instance(seed, 10, 16)
        r = RegParams(0.05, 0.1)
        s = default_step_params(p, safety=0.7)
        x_inf = pgm_ista(p, r, s, max_iter=200_000, tol=1e-15, record=False).x
        dists = []
        pgm_ista(p, r, s, max_iter=500, tol=0, record=False,
                 callback=lambda k, x: dists.append(np.linalg.norm(x - x_inf)))
        assert np.all(np.diff(dists) <= 1e-10)

    def test_smaller_u_smaller_objective(self):
        eps = 1e-6
        for seed in range(5):
            p = _instance(seed)
            r = RegParams(0.1, 0.1)
            u1 = 1.0 / p.spectral_norm_sq
            finals = []
            for u in (u1, u1 / 4):
                s = StepParams(u, 0.7 * u)
                x = np.zeros(8)
                for _ in range(1_000_000):
                    x_new = pgm_ista_step(p, r, s, x)
                    done = np.linalg.norm(x_new - x) <= s.t * eps
                    x = x_new
                    if done:
                        break
                finals.append(objective(p, r, x))
            assert finals[1] <= finals[0] + 1e-8

    def test_fixed_point_residual(self, rng):
        p = _instance(3)
        r = RegParams(0.1, 0.1)
        s = default_step_params(p)
        tol = 1e-9
        res = pgm_ista(p, r, s, max_iter=100_000, tol=tol)
        assert res.converged
        assert fixed_point_residual(p, r, s, res.x) <= 10 * tol * max(np.linalg.norm(res.x), 1)
        assert fixed_point_residual(p, r, s, rng.standard_normal(8)) > 0
        q = SensingProblem(p.A, np.zeros(6))
        assert fixed_point_residual(q, r, s, np.zeros(8)) < 1e-15

    def test_invalid_steps_rejected(self):
        p = _instance(0)
        with pytest.raises(ValueError):
            pgm_ista(p, RegParams(0.1, 0.1), StepParams(3.0 / p.spectral_norm_sq, 0.1))


class TestADMM:
    def test_zero_data(self, rng):
        A = rng.standard_normal((5, 10))
        res = admm_constrained(A, np.zeros(5), RegParams(1e-3, 1.0))
        np.testing.assert_allclose(res.x, np.zeros(10), atol=1e-12)

    def test_exact_recovery(self):
        x = synth_signal(200, 40, 3, 5).values
        A = gaussian_matrix(120, 200, 6)
        y = A @ x
        res = admm_constrained(A, y, RegParams(1e-3, 1.0))
        assert res.converged
        assert rel_err(res.x, x) < 1e-3
        assert np.linalg.norm(A @ res.x - y) / np.linalg.norm(y) < 1e-6
        assert len(res.objective_history) == res.iterations + 1

    def test_settles_on_seeded_instances(self):
        for seed in range(3):
            x = synth_signal(100, 20, 1, seed).values
            A = gaussian_matrix(40, 100, seed + 10)
            y = A @ x
            res = admm_constrained(A, y, RegParams(0.1, 1.0))
            assert res.converged
            assert np.linalg.norm(A @ res.x - y) / np.linalg.norm(y) < 1e-6
            assert abs(res.objective_history[-1] - res.objective_history[-2]) < 1e-6

    def test_no_recording(self):
        A = gaussian_matrix(10, 20, 0)
        res = admm_constrained(A, A @ np.ones(20), RegParams(0.1, 1.0), AdmmConfig(record=False))
        assert len(res.objective_history) == 1

    def test_shape_check(self):
        with pytest.raises(ValueError):
            admm_constrained(np.ones((3, 4)), np.ones(4), RegParams(1, 1))
