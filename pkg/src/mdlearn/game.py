"""Hedge weight dynamics and exact zero-sum matrix game solving.

Weights are kept in log space: the multiplicative update W_i <- W_i *
exp(eta * r_i) over millions of rounds overflows raw storage, while the
normalized weights only ever depend on log-weight differences.

The matrix-game solver is the benchmark oracle for every experiment: it
runs optimistic Hedge self-play and accepts the first candidate pair whose
computable duality-gap certificate drops below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ValidationError, check_simplex

REWARD_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """Solver failed to certify the requested tolerance within its cap."""

    def __init__(self, message, achieved_gap):
        super().__init__(message)
        self.achieved_gap = achieved_gap


@dataclass
class HedgeWeights:
    """Exponential-weights state: log unnormalized weights and a step size."""

    log_w: np.ndarray
    eta: float

    def __post_init__(self):
        self.log_w = np.asarray(self.log_w, dtype=float).copy()
        if self.log_w.ndim != 1 or self.log_w.size == 0:
            raise ValidationError("log_w must be a nonempty vector")
        if not np.all(np.isfinite(self.log_w)):
            raise ValidationError("log_w entries must be finite")
        if not (self.eta > 0):
            raise ValidationError("eta must be positive")

    @classmethod
    def uniform(cls, m: int, eta: float) -> "HedgeWeights":
        return cls(log_w=np.zeros(m), eta=eta)


def normalize(state: HedgeWeights) -> np.ndarray:
    """Normalized weights exp(log_w) / sum, stable for |log_w| up to ~1e6."""
    z = state.log_w - state.log_w.max()
    w = np.exp(z)
    w /= w.sum()
    return w


def hedge_step(state: HedgeWeights, r_hat) -> HedgeWeights:
    """One multiplicative-weights update: log_w_i += eta * r_i.

    Rejects reward entries outside [-1, 1] (beyond tolerance); an estimator
    that produces them is broken upstream.
    """
    r = np.asarray(r_hat, dtype=float)
    if r.shape != state.log_w.shape:
        raise ValidationError(f"reward shape {r.shape} != weights shape {state.log_w.shape}")
    peak = np.abs(r).max()
    if not peak <= 1.0 + REWARD_TOL:  # NaN also fails the comparison
        raise ValidationError("reward entries must lie in [-1, 1]")
    return HedgeWeights(log_w=state.log_w + state.eta * r, eta=state.eta)


def duality_gap(M, pi, w) -> float:
    """Equilibrium certificate max_i (pi^T M)_i - min_h (M w)_h, always >= 0."""
    M = np.asarray(M, dtype=float)
    H, k = M.shape
    pi = check_simplex(pi, H, name="pi")
    w = check_simplex(w, k, name="w")
    return float((pi @ M).max() - (M @ w).min())


def _square_polish(M, row_cost, col_pay):
    """Candidate equilibria from margin-ranked square subgames.

    Rank rows by cost against the averaged column mix and columns by payoff
    against the averaged row mix, then for each support size solve the
    square payoff-equalization system exactly.  On nondegenerate games this
    recovers the equilibrium to machine precision once self-play has the
    ranking right; the certificate check downstream decides acceptance.
    """
    H, k = M.shape
    cands = []
    row_order = np.argsort(row_cost, kind="stable")
    col_order = np.argsort(-col_pay, kind="stable")
    for s in range(1, min(H, k) + 1):
        rows = np.sort(row_order[:s])
        cols = np.sort(col_order[:s])
        sub = M[np.ix_(rows, cols)]
        A = np.zeros((s + 1, s + 1))
        A[:s, :s] = sub
        A[:s, -1] = -1.0
        A[s, :s] = 1.0
        b = np.zeros(s + 1)
        b[-1] = 1.0
        try:
            x = np.linalg.solve(A, b)
            A[:s, :s] = sub.T
            y = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            continue
        w = np.zeros(k)
        w[cols] = np.clip(x[:s], 0.0, None)
        pi = np.zeros(H)
        pi[rows] = np.clip(y[:s], 0.0, None)
        if w.sum() <= 0 or pi.sum() <= 0:
            continue
        cands.append((pi / pi.sum(), w / w.sum()))
    return cands


def solve_matrix_game(M, tol: float = 1e-6, max_iters: int = 10**8):
    """Solve min_pi max_w pi^T M w for an H x k loss matrix.

    Runs optimistic Hedge self-play (row player minimizes, column player
    maximizes) and periodically tests the duality-gap certificate of the
    last iterates, the running averages and square-subgame refinements.
    Success is defined by the certificate, not the iteration count.

    Returns
    -------
    (value, pi_star, w_star) with duality_gap(M, pi_star, w_star) <= tol.

    Raises
    ------
    ConvergenceError (carrying the best achieved gap) if the cap is hit.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValidationError("M must be a nonempty 2-d matrix")
    if not np.all(np.isfinite(M)):
        raise ValidationError("M entries must be finite")
    if np.abs(M).max() > 1.0 + REWARD_TOL:
        raise ValidationError("M entries must lie in [-1, 1]")
    if not (tol > 0):
        raise ValidationError("tol must be positive")
    H, k = M.shape

    eta = 0.25
    log_pi = np.zeros(H)
    log_w = np.zeros(k)
    gp_prev = np.zeros(H)
    gw_prev = np.zeros(k)
    sum_pi = np.zeros(H)
    sum_w = np.zeros(k)
    best = None
    best_gap = np.inf
    it = 0
    check = 64
    while True:
        block = min(check, max_iters - it)
        for _ in range(block):
            pi = np.exp(log_pi - log_pi.max())
            pi /= pi.sum()
            w = np.exp(log_w - log_w.max())
            w /= w.sum()
            gp = M @ w
            gw = pi @ M
            log_pi -= eta * (2.0 * gp - gp_prev)
            log_w += eta * (2.0 * gw - gw_prev)
            gp_prev, gw_prev = gp, gw
            sum_pi += pi
            sum_w += w
        it += block
        pi_bar = sum_pi / it
        w_bar = sum_w / it
        cands = [(pi, w), (pi_bar, w_bar)]
        cands += _square_polish(M, M @ w_bar, pi_bar @ M)
        for cp, cw in cands:
            gap = float((cp @ M).max() - (M @ cw).min())
            if gap < best_gap:
                best_gap = gap
                best = (cp.copy(), cw.copy())
        if best_gap <= tol:
            pi_star, w_star = best
            value = float(pi_star @ M @ w_star)
            return value, pi_star, w_star
        if it >= max_iters:
            raise ConvergenceError(
                f"duality gap {best_gap:.3e} > tol {tol:.3e} after {it} iterations",
                achieved_gap=best_gap,
            )
        check = min(check * 2, 8192)


@dataclass
class BilinearTrajectory:
    """Full trace of a bilinear-game Hedge run."""

    Y: np.ndarray            # the finite vector set, one row per action
    weights: np.ndarray      # T x k, w^t per round
    choices: np.ndarray      # T, index into Y chosen each round
    eta: float

    def __len__(self):
        return self.weights.shape[0]

    def averaged_weight(self) -> np.ndarray:
        return self.weights.mean(axis=0)

    def averaged_vector(self) -> np.ndarray:
        return self.Y[self.choices].mean(axis=0)

    def averaged_gap(self) -> float:
        """Duality gap of the time-averaged strategies.

        The maximizing player holds the averaged weight vector, the
        minimizing player the uniform mixture over the chosen vectors.
        """
        y_bar = self.averaged_vector()
        w_bar = self.averaged_weight()
        return float(y_bar.max() - (self.Y @ w_bar).min())

    def averaged_payoff(self) -> float:
        per_round = np.einsum("tk,tk->t", self.weights, self.Y[self.choices])
        return float(per_round.mean())


def run_bilinear_hedge(Y, eps: float, log_base: float = np.e) -> BilinearTrajectory:
    """Hedge against best response over a finite set of loss vectors.

    Runs T = ceil(100 * log(k) / eps^2) rounds with step size eta = eps / 10.
    Each round the responder picks y^t = argmin_y <w^t, y> (ties to the
    lowest index) and the weights update multiplicatively with reward y^t.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise ValidationError("Y must be a nonempty set of vectors")
    if not np.all(np.isfinite(Y)) or np.abs(Y).max() > 1.0 + REWARD_TOL:
        raise ValidationError("Y entries must lie in [-1, 1]")
    if not (0.0 < eps < 1.0):
        raise ValidationError("eps must lie in (0, 1)")
    k = Y.shape[1]
    eta = eps / 10.0
    T = max(1, int(np.ceil(100.0 * _log(k, log_base) / eps**2)))
    log_w = np.zeros(k)
    weights = np.empty((T, k))
    choices = np.empty(T, dtype=np.int64)
    for t in range(T):
        w = np.exp(log_w - log_w.max())
        w /= w.sum()
        weights[t] = w
        j = int(np.argmin(Y @ w))
        choices[t] = j
        log_w += eta * Y[j]
    return BilinearTrajectory(Y=Y, weights=weights, choices=choices, eta=eta)


def _log(x: float, base: float = np.e) -> float:
    if base == np.e:
        return float(np.log(x))
    return float(np.log(x) / np.log(base))
