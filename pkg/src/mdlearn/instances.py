"""Synthetic instance generators and complexity schedules.

All generators are pure functions of their parameters and seed.  Loss
observations are two-point distributions on {-1, +1} (Bernoulli-style with
a prescribed mean), which keeps every population quantity exactly
computable while still giving the estimators nontrivial variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Instance, ValidationError
from .game import solve_matrix_game

_RANDOM_TAG = 101
_HETERO_TAG = 103


def _coin(mean: float):
    """Two-point loss distribution on {-1, +1} with the given mean."""
    if not -1.0 <= mean <= 1.0:
        raise ValidationError(f"coin mean {mean} outside [-1, 1]")
    p_plus = (1.0 + mean) / 2.0
    return ((1.0, p_plus), (-1.0, 1.0 - p_plus))


def _point(value: float):
    return ((float(value), 1.0),)


def make_random_instance(k: int, H: int, d: int = 0, eps_gap: float = 0.05,
                         seed: int = 0, R: int = 1) -> Instance:
    """Random coin-loss instance with a planted near-minimax pure hypothesis.

    Hypothesis 0 is the plant: its per-distribution means sit within
    eps_gap/2 of the minimax value of the remaining random rows, so its
    exact worst-case loss is within eps_gap of the instance's optimum and
    ERM always has a uniformly decent pure strategy available.
    """
    if H < 2 or k < 1 or R < 1:
        raise ValidationError("need H >= 2, k >= 1, R >= 1")
    if not 0.0 < eps_gap < 1.0:
        raise ValidationError("eps_gap must lie in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_RANDOM_TAG,)))
    tables = []
    for _ in range(R):
        means = rng.uniform(0.0, 1.0, size=(H, k))
        opt0, _, _ = solve_matrix_game(means[1:], tol=min(1e-7, eps_gap / 10))
        v0 = max(0.0, opt0 - eps_gap / 2.0)
        jitter = rng.uniform(-eps_gap / 2.0, eps_gap / 2.0, size=k)
        means[0] = np.clip(v0 + jitter, 0.0, min(1.0, opt0))
        tables.append(tuple(tuple(_coin(means[h, i]) for i in range(k)) for h in range(H)))
    return Instance(
        k=k,
        hypotheses=tuple(f"h{j}" for j in range(H)),
        losses=tuple(tables),
        vc_dim_proxy=d or max(1, math.ceil(math.log2(H))),
        R=R,
        name=f"random-k{k}-H{H}-R{R}-s{seed}",
    )


def make_hard_instance(d: int, k: int, eps: float) -> Instance:
    """Instance on which every deterministic output is far from optimal.

    Builds N = 2^d hypotheses split into k groups of N0 = (2^d - 1)/k plus a
    single safe hypothesis (last index).  Under distribution i the loss of
    any hypothesis is a +/-1 coin: fair except for group i's members, whose
    coin is biased to mean exactly 8*eps.  The safe hypothesis is therefore
    the unique pure strategy with worst-case loss below 8*eps, while every
    group member pays 8*eps on its own distribution and 0 elsewhere.
    """
    if d < 1 or k < 1:
        raise ValidationError("need d >= 1 and k >= 1")
    N = 2**d
    if (N - 1) % k != 0:
        raise ValidationError(f"(2^d - 1) = {N - 1} is not divisible by k = {k}")
    if not 0.0 < eps < 0.125:
        raise ValidationError("eps must lie in (0, 1/8) so the biased coin is a distribution")
    N0 = (N - 1) // k
    names = [f"g{i}_{j}" for i in range(k) for j in range(N0)] + ["h_star"]
    fair = _coin(0.0)
    biased = _coin(8.0 * eps)
    rows = []
    for h in range(N):
        group = h // N0 if h < N - 1 else -1
        rows.append(tuple(biased if i == group else fair for i in range(k)))
    return Instance(
        k=k,
        hypotheses=tuple(names),
        losses=(tuple(rows),),
        vc_dim_proxy=d,
        R=1,
        name=f"hard-d{d}-k{k}-eps{eps}",
    )


def make_heterogeneous_instance(k: int = 4, seed: int = 0) -> Instance:
    """Instance where a uniform-budget pure-ERM baseline is handicapped.

    Distribution 0 is the 'hard' one: all hypotheses have means packed
    within +/-0.02 of 0.35, so ranking them takes many samples.  The
    remaining distributions are trivial to estimate (means far apart) but
    arranged so that every pure hypothesis is penalized on exactly one of
    them; only mixtures spread the penalty, so the best deterministic
    strategy sits well above the randomized optimum.
    """
    if k < 3:
        raise ValidationError("need k >= 3 (one hard distribution plus penalty structure)")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_HETERO_TAG,)))
    H = 2 * (k - 1)
    means = np.full((H, k), 0.02)
    means[:, 0] = 0.35 + rng.uniform(-0.02, 0.02, size=H)
    for i in range(1, k):
        g = i - 1
        means[2 * g, i] = 0.9
        means[2 * g + 1, i] = 0.9
    rows = tuple(tuple(_coin(means[h, i]) for i in range(k)) for h in range(H))
    return Instance(
        k=k,
        hypotheses=tuple(f"h{j}" for j in range(H)),
        losses=(rows,),
        vc_dim_proxy=max(1, math.ceil(math.log2(H))),
        R=1,
        name=f"hetero-k{k}-s{seed}",
    )


@dataclass(frozen=True)
class RademacherSchedule:
    """A non-increasing bound n -> C_n on estimator complexity."""

    kind: str                    # "vc" | "massart" | "custom"
    params: tuple = ()
    table: tuple = ()            # for kind == "custom": ((n, C_n), ...)

    def __call__(self, n) -> float:
        if n < 1:
            raise ValidationError("n must be >= 1")
        if self.kind == "vc":
            (d,) = self.params
            m = max(float(n), float(d))
            return math.sqrt(2.0 * d * math.log(math.e * m / d) / m)
        if self.kind == "massart":
            (H,) = self.params
            return math.sqrt(2.0 * math.log(H) / float(n))
        # custom step table: C_n = value at the largest tabulated point <= n
        value = self.table[0][1]
        for point, c in self.table:
            if point <= n:
                value = c
            else:
                break
        return value

    def to_config(self) -> dict:
        if self.kind == "vc":
            return {"kind": "vc", "d": self.params[0]}
        if self.kind == "massart":
            return {"kind": "massart", "H": self.params[0]}
        return {"kind": "custom", "table": [[n, c] for n, c in self.table]}

    @classmethod
    def from_config(cls, doc: dict) -> "RademacherSchedule":
        kind = doc.get("kind")
        if kind == "vc":
            return vc_rademacher_schedule(int(doc["d"]))
        if kind == "massart":
            return massart_rademacher_schedule(int(doc["H"]))
        if kind == "custom":
            return custom_schedule([(float(n), float(c)) for n, c in doc["table"]])
        raise ValidationError(f"unknown schedule kind {kind!r}")


def vc_rademacher_schedule(d: int) -> RademacherSchedule:
    """C_n = sqrt(2 d log(e n / d) / n), clamped flat below n = d.

    The raw form is non-increasing only for n >= d, so smaller n reuse the
    value at d to keep the schedule monotone.
    """
    if d < 1:
        raise ValidationError("d must be >= 1")
    return RademacherSchedule(kind="vc", params=(d,))


def massart_rademacher_schedule(H: int) -> RademacherSchedule:
    """Finite-class bound C_n = sqrt(2 log(H) / n)."""
    if H < 2:
        raise ValidationError("H must be >= 2")
    return RademacherSchedule(kind="massart", params=(H,))


def custom_schedule(table) -> RademacherSchedule:
    pts = tuple(sorted((float(n), float(c)) for n, c in table))
    if not pts:
        raise ValidationError("custom schedule table must be nonempty")
    values = [c for _, c in pts]
    if any(values[j + 1] > values[j] for j in range(len(values) - 1)):
        raise ValidationError("custom schedule must be non-increasing in n")
    return RademacherSchedule(kind="custom", table=pts)
