"""Trajectory analytics: running-max norms, dyadic weight buckets, segments.

A Trajectory may store only strided snapshots of the weight iterates (long
runs would otherwise hold millions of vectors), but the per-coordinate
running maximum is always tracked exactly, so trajectory_norm is exact
regardless of thinning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError, check_simplex

UNDERFLOW_J = 64  # coordinates with running max <= 2^-64 land in the underflow bucket


@dataclass
class Trajectory:
    """Stored weight iterates w^1..w^T (possibly thinned) plus exact maxima."""

    weights: np.ndarray       # (n_stored, k)
    times: np.ndarray         # (n_stored,) 1-based round indices
    running_max: np.ndarray   # (k,) exact coordinate-wise max over all rounds
    total_rounds: int
    stride: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.times = np.asarray(self.times, dtype=np.int64)
        self.running_max = np.asarray(self.running_max, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[0] == 0:
            raise ValidationError("trajectory must store at least one weight vector")
        if self.weights.shape[0] != self.times.shape[0]:
            raise ValidationError("weights and times must align")
        for row in self.weights:
            check_simplex(row, self.weights.shape[1], name="trajectory row")
        if np.any(self.running_max + 1e-12 < self.weights.max(axis=0)):
            raise ValidationError("running maxima are inconsistent with stored entries")

    @property
    def k(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def from_weights(cls, rows, stride: int = 1) -> "Trajectory":
        rows = np.asarray(rows, dtype=float)
        return cls(
            weights=rows,
            times=np.arange(1, rows.shape[0] + 1),
            running_max=rows.max(axis=0),
            total_rounds=rows.shape[0],
            stride=stride,
        )


class TrajectoryRecorder:
    """Incremental builder used by the learners.

    Stores every stride-th iterate (and always the last) while updating the
    exact running maximum each round.
    """

    def __init__(self, k: int, stride: int = 1):
        if stride < 1:
            raise ValidationError("stride must be >= 1")
        self.k = k
        self.stride = stride
        self.running_max = np.zeros(k)
        self._rows = []
        self._times = []
        self._t = 0
        self._last = None

    def append(self, w: np.ndarray):
        self._t += 1
        np.maximum(self.running_max, w, out=self.running_max)
        if (self._t - 1) % self.stride == 0:
            self._rows.append(w.copy())
            self._times.append(self._t)
            self._last = None
        else:
            self._last = (self._t, w.copy())

    def freeze(self) -> Trajectory:
        rows, times = list(self._rows), list(self._times)
        if self._last is not None:
            t, w = self._last
            rows.append(w)
            times.append(t)
        return Trajectory(
            weights=np.asarray(rows),
            times=np.asarray(times),
            running_max=self.running_max.copy(),
            total_rounds=self._t,
            stride=self.stride,
        )


def trajectory_norm(traj: Trajectory) -> float:
    """Sum over coordinates of the exact running maximum; lies in [1, k]."""
    return float(traj.running_max.sum())


def bucket_index(m: float):
    """Dyadic bucket j >= 1 with running max m in (2^-j, 2^-(j-1)].

    Returns None (underflow) for m <= 2^-UNDERFLOW_J.
    """
    if m <= 2.0 ** (-UNDERFLOW_J):
        return None
    j = int(math.floor(-math.log2(m))) + 1
    # guard against log2 rounding at exact powers of two
    if m > 2.0 ** (-(j - 1)):
        j -= 1
    elif m <= 2.0 ** (-j):
        j += 1
    return j


def weight_buckets(traj: Trajectory):
    """Partition coordinates by dyadic bucket of their running maximum.

    Returns a sorted list of (j, count) pairs over nonempty buckets, with an
    underflow entry (None, count) last when present; counts sum to k.
    """
    counts = {}
    for m in traj.running_max:
        j = bucket_index(float(m))
        counts[j] = counts.get(j, 0) + 1
    finite = sorted((j, c) for j, c in counts.items() if j is not None)
    if None in counts:
        finite.append((None, counts[None]))
    return finite


def find_segments(traj: Trajectory, p: float, q: float, x: float, index_sets=None):
    """Detect growth segments of coordinate-subset weight sums.

    A reported (t1, t2, subset) satisfies: the subset's weight sum lies in
    [p/2, p] at t1, reaches at least p*exp(x) at t2, and never drops below q
    on [t1, t2].  Within one subset the reported segments are disjoint and
    left-greedy (earliest valid start, then the farthest end reachable
    without violating the floor q).  Endpoints are 1-based round indices of
    stored snapshots; run unthinned trajectories for exact detection.
    """
    if not (p > 0 and q > 0 and x > 0):
        raise ValidationError("p, q and x must all be positive")
    if index_sets is None:
        index_sets = [(i,) for i in range(traj.k)]
    target = p * math.exp(x)
    results = []
    times = traj.times
    for subset in index_sets:
        idx = tuple(sorted(set(int(i) for i in subset)))
        if any(i < 0 or i >= traj.k for i in idx):
            raise ValidationError(f"index subset {subset} out of range")
        s = traj.weights[:, idx].sum(axis=1)
        n = s.shape[0]
        pos = 0
        while pos < n:
            if not (p / 2.0 <= s[pos] <= p) or s[pos] < q:
                pos += 1
                continue
            # walk right while the floor q holds, remembering the last
            # snapshot at or above the growth target
            end = -1
            reach = pos
            while reach < n and s[reach] >= q:
                if reach > pos and s[reach] >= target:
                    end = reach
                reach += 1
            if end >= 0:
                results.append((int(times[pos]), int(times[end]), idx))
                pos = end      # segments may share an endpoint, never overlap
            else:
                pos += 1
    return results
