import numpy as np
import pytest

from mdlearn.core import ValidationError
from mdlearn.game import (
    ConvergenceError,
    HedgeWeights,
    duality_gap,
    hedge_step,
    normalize,
    run_bilinear_hedge,
    solve_matrix_game,
)


class TestHedgeStep:
    def test_zero_reward_is_identity(self):
        s = HedgeWeights(log_w=[0.0, 0.0], eta=0.01)
        s2 = hedge_step(s, [0.0, 0.0])
        assert np.allclose(s2.log_w, [0.0, 0.0])

    def test_analytic_exponential(self):
        s = HedgeWeights(log_w=[0.0, 0.0], eta=np.log(2.0))
        s2 = hedge_step(s, [1.0, 0.0])
        assert np.allclose(normalize(s2), [2.0 / 3.0, 1.0 / 3.0], atol=1e-15)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            s = HedgeWeights(log_w=rng.normal(size=4), eta=0.3)
            r = rng.uniform(-0.9, 0.9, 4)
            c = rng.uniform(-0.1, 0.1)
            w1 = normalize(hedge_step(s, r))
            w2 = normalize(hedge_step(s, r + c))
            assert np.allclose(w1, w2, atol=1e-12)

    def test_out_of_range_reward_rejected(self):
        s = HedgeWeights(log_w=[0.0, 0.0], eta=0.1)
        with pytest.raises(ValidationError):
            hedge_step(s, [1.5, 0.0])

    def test_closed_form_update(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            s = HedgeWeights(log_w=rng.normal(size=5), eta=0.2)
            r = rng.uniform(-1, 1, 5)
            w_prev = normalize(s)
            w_next = normalize(hedge_step(s, r))
            unnorm = w_prev * np.exp(0.2 * r)
            assert np.allclose(w_next, unnorm / unnorm.sum(), atol=1e-12)


class TestNormalize:
    def test_uniform(self):
        assert np.allclose(normalize(HedgeWeights(log_w=[0.0] * 3, eta=1.0)),
                           [1 / 3] * 3, atol=1e-15)

    def test_no_overflow_at_700(self):
        w = normalize(HedgeWeights(log_w=[700.0, 0.0], eta=1.0))
        assert w[0] == pytest.approx(1.0, abs=1e-300)
        assert 0.0 < w[1] < 1e-300
        assert np.isfinite(w).all()

    def test_shift_invariance(self):
        a = normalize(HedgeWeights(log_w=[1.3, -0.4], eta=1.0))
        b = normalize(HedgeWeights(log_w=[1.3 + 55.0, -0.4 + 55.0], eta=1.0))
        assert np.allclose(a, b, atol=1e-15)

    def test_stable_at_huge_magnitudes(self):
        w = normalize(HedgeWeights(log_w=[1e6, 1e6 - 3.0], eta=1.0))
        assert abs(w.sum() - 1.0) < 1e-12
        assert w[0] == pytest.approx(1.0 / (1.0 + np.exp(-3.0)), rel=1e-12)


def brute_force_pure_bounds(M):
    return M.min(axis=0).max(), M.max(axis=1).min()


class TestSolveMatrixGame:
    def test_matching_pennies(self):
        M = np.array([[0.0, 1.0], [1.0, 0.0]])
        value, pi, w = solve_matrix_game(M, tol=1e-9)
        assert value == pytest.approx(0.5, abs=1e-8)
        assert np.allclose(pi, [0.5, 0.5], atol=1e-6)
        assert np.allclose(w, [0.5, 0.5], atol=1e-6)

    def test_dominant_zero_row(self):
        M = np.array([[0.0, 0.0], [0.5, 0.3], [0.2, 0.9]])
        value, pi, w = solve_matrix_game(M, tol=1e-8)
        assert value == pytest.approx(0.0, abs=1e-8)
        assert pi[0] == pytest.approx(1.0, abs=1e-6)

    def test_hard_style_matrix_concentrates_on_safe_row(self):
        # entries in {0, 8 eps}; one all-zero safe row, uneven groups per column
        eps = 0.05
        M = np.zeros((8, 2))
        M[0:3, 0] = 8 * eps
        M[3:7, 1] = 8 * eps
        value, pi, w = solve_matrix_game(M, tol=1e-8)
        assert value == pytest.approx(0.0, abs=1e-8)
        assert pi[7] == pytest.approx(1.0, abs=1e-6)

    def test_random_matrices_certified(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            H, k = int(rng.integers(2, 12)), int(rng.integers(2, 6))
            M = rng.uniform(-1, 1, (H, k))
            value, pi, w = solve_matrix_game(M, tol=1e-7)
            assert duality_gap(M, pi, w) <= 1e-7
            lo, hi = brute_force_pure_bounds(M)
            assert lo - 1e-7 <= value <= hi + 1e-7

    def test_deterministic(self):
        M = np.random.default_rng(6).uniform(-1, 1, (9, 4))
        r1 = solve_matrix_game(M, tol=1e-8)
        r2 = solve_matrix_game(M, tol=1e-8)
        assert r1[0] == r2[0]
        assert np.array_equal(r1[1], r2[1]) and np.array_equal(r1[2], r2[2])

    def test_convergence_error_carries_gap(self):
        # 8 iterations are not enough to certify 1e-9 on this matrix
        M = np.random.default_rng(7).uniform(-1, 1, (16, 6))
        with pytest.raises(ConvergenceError) as err:
            solve_matrix_game(M, tol=1e-9, max_iters=8)
        assert err.value.achieved_gap > 1e-9

    def test_nonfinite_rejected(self):
        with pytest.raises(ValidationError):
            solve_matrix_game(np.array([[np.nan, 0.0]]))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            solve_matrix_game(np.array([[2.0, 0.0]]))


class TestDualityGap:
    def test_exact_equilibrium_zero(self):
        M = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert duality_gap(M, [0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)

    def test_point_mass_on_worst_row(self):
        M = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert duality_gap(M, [1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.5, abs=1e-12)

    def test_matches_direct_computation(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            M = rng.uniform(-1, 1, (3, 3))
            pi = rng.dirichlet(np.ones(3))
            w = rng.dirichlet(np.ones(3))
            direct = max(pi @ M[:, i] for i in range(3)) - min(M[h] @ w for h in range(3))
            assert duality_gap(M, pi, w) == pytest.approx(direct, abs=1e-12)
            assert duality_gap(M, pi, w) >= -1e-12


class TestBilinearHedge:
    def test_zero_vector_set(self):
        traj = run_bilinear_hedge(np.zeros((1, 3)), eps=0.5)
        assert np.allclose(traj.weights, 1.0 / 3.0)
        assert np.all(traj.choices == 0)

    def test_antisymmetric_game_payoff(self):
        Y = np.array([[1.0, -1.0], [-1.0, 1.0]])
        traj = run_bilinear_hedge(Y, eps=0.2)
        # exact game value is 0 by symmetry; Hedge guarantees near-optimality
        assert traj.averaged_payoff() >= -0.2

    def test_trajectory_shape_and_simplex_rows(self):
        Y = np.random.default_rng(9).uniform(-1, 1, (5, 4))
        eps = 0.3
        traj = run_bilinear_hedge(Y, eps=eps)
        T = int(np.ceil(100 * np.log(4) / eps**2))
        assert len(traj) == T
        assert np.allclose(traj.weights.sum(axis=1), 1.0, atol=1e-9)

    def test_averaged_gap_within_eps(self):
        rng = np.random.default_rng(10)
        for _ in range(3):
            Y = rng.uniform(-1, 1, (8, 5))
            traj = run_bilinear_hedge(Y, eps=0.25)
            assert traj.averaged_gap() <= 0.25

    def test_tie_break_lowest_index(self):
        Y = np.array([[0.5, 0.5], [0.5, 0.5], [-0.5, 0.5]])
        traj = run_bilinear_hedge(Y, eps=0.5)
        assert traj.choices[0] == 2  # unique minimizer, sanity
        Y2 = np.array([[0.1, 0.1], [0.1, 0.1]])
        traj2 = run_bilinear_hedge(Y2, eps=0.5)
        assert np.all(traj2.choices == 0)

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            run_bilinear_hedge(np.zeros((0, 2)), eps=0.1)
        with pytest.raises(ValidationError):
            run_bilinear_hedge(np.zeros((2, 2)), eps=1.5)
        with pytest.raises(ValidationError):
            run_bilinear_hedge(np.array([[2.0, 0.0]]), eps=0.1)
