"""On-demand sampling machinery: sample bank, triggers, and estimators.

The bank simulates i.i.d. draws from each distribution's finite loss table.
Schedule sizes reach 1e9..1e13 at the tested hyper-parameter scales, so
individual draws are never materialized.  Instead the bank records, per
(distribution, hypothesis, loss index), cumulative atom counts at a sorted
set of stream positions:

* advancing the frontier samples a multinomial block (counts of n i.i.d.
  draws are exactly multinomial);
* reading a prefix that falls inside a recorded block splits the block with
  a multivariate hypergeometric draw (the exact conditional law of the
  first j draws given the block's atom counts) and records the boundary so
  later reads stay consistent with one fixed realization.

Every statistic the learners consume (prefix loss sums) therefore has
exactly the joint distribution it would have under materialized draws, at
O(atoms) cost per event instead of O(draws).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import gammaln

from .core import Instance, ValidationError, check_simplex

_PURPOSE_CODES = {"bank": 0, "fresh": 1}

# numpy's generator rejects hypergeometric populations above this
_NP_HYPERGEOM_LIMIT = 10**9 - 1


class SamplerState:
    """Seeded RNG streams, one per (purpose, distribution), with draw counters.

    Separate bank/fresh streams mean a change in fresh-sample usage (e.g. a
    different round count) never perturbs bank contents.  Counters track
    logical sample draws, not raw variate consumption.
    """

    def __init__(self, seed: int, k: int):
        self.seed = int(seed)
        self.k = int(k)
        self._rngs = {}
        self.counters = {}

    def _rng(self, purpose: str, i: int) -> np.random.Generator:
        key = (purpose, i)
        rng = self._rngs.get(key)
        if rng is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(_PURPOSE_CODES[purpose], i))
            rng = np.random.default_rng(ss)
            self._rngs[key] = rng
        return rng

    def bank_rng(self, i: int) -> np.random.Generator:
        return self._rng("bank", i)

    def fresh_rng(self, i: int) -> np.random.Generator:
        return self._rng("fresh", i)

    def count(self, purpose: str, i: int, n: int):
        if purpose not in _PURPOSE_CODES:
            raise ValidationError(f"unknown stream purpose {purpose!r}")
        key = (purpose, i)
        self.counters[key] = self.counters.get(key, 0) + int(n)

    def total(self, purpose: str | None = None) -> int:
        return sum(v for (p, _), v in self.counters.items() if purpose in (None, p))


# ---------------------------------------------------------------------------
# exact hypergeometric sampling beyond numpy's population limit
# ---------------------------------------------------------------------------

_D1 = 1.7155277699214135  # 2*sqrt(2/e)
_D2 = 0.8989161620588988  # 3 - 2*sqrt(3/e)


def _lgam_diff(a, delta):
    """gammaln(a + delta) - gammaln(a), stable for huge a.

    Uses the Stirling expansion difference for large a (the leading terms
    are combined via log1p to avoid cancellation); falls back to direct
    gammaln differences where arguments are small enough to be exact.
    Shapes of a and delta must already match.
    """
    a = np.asarray(a, dtype=float)
    delta = np.asarray(delta, dtype=float)
    out = np.empty(a.shape)
    small = a < 1e8
    if small.any():
        out[small] = gammaln(a[small] + delta[small]) - gammaln(a[small])
        big = ~small
        ab, db = a[big], delta[big]
    else:
        big = slice(None)
        ab, db = a, delta
    r = db / ab
    out[big] = (
        (ab + db - 0.5) * np.log1p(r)
        + db * np.log(ab)
        - db
        + 1.0 / (12.0 * (ab + db))
        - 1.0 / (12.0 * ab)
    )
    return out


def _hrua_large(rng, good, bad, sample):
    """Vectorized HRUA ratio-of-uniforms hypergeometric for huge populations.

    Port of the classic rejection sampler; the log-pmf ratio against the
    mode is evaluated with cancellation-free gamma differences so the
    acceptance test stays exact at populations up to ~1e15.
    """
    good = np.asarray(good, dtype=float)
    bad = np.asarray(bad, dtype=float)
    sample = np.asarray(sample, dtype=float)
    popsize = good + bad
    mingoodbad = np.minimum(good, bad)
    maxgoodbad = np.maximum(good, bad)
    m = np.minimum(sample, popsize - sample)
    d4 = mingoodbad / popsize
    d5 = 1.0 - d4
    d6 = m * d4 + 0.5
    d7 = np.sqrt((popsize - m) * m * d4 * d5 / (popsize - 1.0) + 0.5)
    d8 = _D1 * d7 + _D2
    d9 = np.floor((m + 1.0) * (mingoodbad + 1.0) / (popsize + 2.0))
    d11 = np.minimum(np.minimum(m, mingoodbad) + 1.0, np.floor(d6 + 16.0 * d7))

    n = good.shape[0]
    # stacked log-pmf arguments at the mode; sign pattern of the shift below
    mode_args = np.stack([
        d9 + 1.0,
        mingoodbad - d9 + 1.0,
        m - d9 + 1.0,
        maxgoodbad - m + d9 + 1.0,
    ])
    signs = np.array([1.0, -1.0, -1.0, 1.0])[:, None]

    Z = np.zeros(n)
    idx = np.arange(n)
    for _ in range(10000):
        na = idx.size
        X = rng.random(na)
        Y = rng.random(na)
        W = d6[idx] + d8[idx] * (Y - 0.5) / X
        ok = (W >= 0.0) & (W < d11[idx])
        # clamp rejected lanes so the log-pmf arguments stay positive
        cand = np.floor(np.clip(W, 0.0, d11[idx] - 1.0))
        dz = cand - d9[idx]
        T = -_lgam_diff(mode_args[:, idx], signs * dz).sum(axis=0)
        accept = ok & (X * (4.0 - X) - 3.0 <= T)
        undecided = ok & ~accept & (X * (X - T) < 1.0)
        if undecided.any():
            accept |= undecided & (2.0 * np.log(X) <= T)
        if accept.any():
            sel = idx[accept]
            Z[sel] = cand[accept]
            idx = idx[~accept]
            if idx.size == 0:
                break
    else:
        raise RuntimeError("hypergeometric rejection sampler failed to accept")

    Z = np.where(good > bad, m - Z, Z)
    Z = np.where(m < sample, good - Z, Z)
    return Z.astype(np.int64)


def _hyp_small_m(rng, good, bad, sample):
    """Sequential exact draw for tiny effective sample sizes."""
    out = np.empty(good.shape[0], dtype=np.int64)
    for j in range(good.shape[0]):
        g, b, s = int(good[j]), int(bad[j]), int(sample[j])
        flip = s > (g + b) // 2
        if flip:
            s = g + b - s
        gg, bb, got = g, b, 0
        for _ in range(s):
            if rng.random() * (gg + bb) < gg:
                gg -= 1
                got += 1
            else:
                bb -= 1
        out[j] = g - got if flip else got
    return out


def hypergeometric(rng, good, bad, sample):
    """Exact hypergeometric draws for arbitrary int64 populations.

    Dispatches to numpy's generator when parameters are within its limits
    and to the large-population rejection sampler otherwise.
    """
    good = np.atleast_1d(np.asarray(good, dtype=np.int64))
    bad = np.atleast_1d(np.asarray(bad, dtype=np.int64))
    sample = np.atleast_1d(np.asarray(sample, dtype=np.int64))
    good, bad, sample = np.broadcast_arrays(good, bad, sample)
    if np.any(sample > good + bad) or np.any(sample < 0):
        raise ValidationError("need 0 <= sample <= good + bad")
    out = np.empty(good.shape, dtype=np.int64)

    trivial = (good == 0) | (sample == 0)
    out[trivial] = 0
    full = ~trivial & (bad == 0)
    out[full] = sample[full]
    allgone = ~trivial & ~full & (sample == good + bad)
    out[allgone] = good[allgone]
    rest = ~(trivial | full | allgone)
    if not np.any(rest):
        return out

    small = rest & (good < _NP_HYPERGEOM_LIMIT) & (bad < _NP_HYPERGEOM_LIMIT)
    if np.any(small):
        out[small] = rng.hypergeometric(good[small], bad[small], sample[small])
    big = rest & ~small
    if np.any(big):
        m = np.minimum(sample[big], good[big] + bad[big] - sample[big])
        tiny = m < 10
        bigidx = np.where(big)[0]
        if np.any(tiny):
            sel = bigidx[tiny]
            out[sel] = _hyp_small_m(rng, good[sel], bad[sel], sample[sel])
        if np.any(~tiny):
            sel = bigidx[~tiny]
            out[sel] = _hrua_large(rng, good[sel], bad[sel], sample[sel])
    return out


@njit(cache=True)
def _lgd(a, delta):
    """Scalar gammaln(a + delta) - gammaln(a), cancellation-free for huge a."""
    if a < 1e8:
        return math.lgamma(a + delta) - math.lgamma(a)
    r = delta / a
    return ((a + delta - 0.5) * math.log1p(r) + delta * math.log(a) - delta
            + 1.0 / (12.0 * (a + delta)) - 1.0 / (12.0 * a))


@njit(cache=True)
def _hyp_kernel(good, bad, sample, uniforms, out, start):
    """Scalar-loop exact hypergeometric over lanes, uniforms supplied.

    Processes lanes from `start`; returns (next_lane, consumed) where
    consumed == -1 signals the uniform buffer ran out before `next_lane`.
    """
    D1 = 1.7155277699214135
    D2 = 0.8989161620588988
    cur = 0
    nu = uniforms.shape[0]
    t = start
    n = good.shape[0]
    while t < n:
        G = float(good[t])
        B = float(bad[t])
        S = float(sample[t])
        total = G + B
        if G <= 0.0 or S <= 0.0:
            out[t] = 0
            t += 1
            continue
        if B <= 0.0:
            out[t] = np.int64(S)
            t += 1
            continue
        if S >= total:
            out[t] = np.int64(G)
            t += 1
            continue
        mingb = min(G, B)
        maxgb = max(G, B)
        m = min(S, total - S)
        if m < 10.0:
            if cur + 9 > nu:
                return t, -1
            g = G
            b = B
            got = 0.0
            for _ in range(int(m)):
                u = uniforms[cur]
                cur += 1
                if u * (g + b) < g:
                    g -= 1.0
                    got += 1.0
                else:
                    b -= 1.0
            if S <= total - S:
                out[t] = np.int64(got)
            else:
                out[t] = np.int64(G - got)  # we drew the complement
            t += 1
            continue
        d4 = mingb / total
        d5 = 1.0 - d4
        d6 = m * d4 + 0.5
        d7 = math.sqrt((total - m) * m * d4 * d5 / (total - 1.0) + 0.5)
        d8 = D1 * d7 + D2
        d9 = math.floor((m + 1.0) * (mingb + 1.0) / (total + 2.0))
        d11 = min(min(m, mingb) + 1.0, math.floor(d6 + 16.0 * d7))
        a1 = d9 + 1.0
        a2 = mingb - d9 + 1.0
        a3 = m - d9 + 1.0
        a4 = maxgb - m + d9 + 1.0
        Z = -1.0
        while True:
            if cur + 2 > nu:
                return t, -1
            X = uniforms[cur]
            Y = uniforms[cur + 1]
            cur += 2
            if X <= 0.0:
                continue
            W = d6 + d8 * (Y - 0.5) / X
            if W < 0.0 or W >= d11:
                continue
            cand = math.floor(W)
            dz = cand - d9
            T = -(_lgd(a1, dz) + _lgd(a2, -dz) + _lgd(a3, -dz) + _lgd(a4, dz))
            if X * (4.0 - X) - 3.0 <= T:
                Z = cand
                break
            if X * (X - T) >= 1.0:
                continue
            if 2.0 * math.log(X) <= T:
                Z = cand
                break
        if G > B:
            Z = m - Z
        if m < S:
            Z = G - Z
        out[t] = np.int64(Z)
        t += 1
    return t, cur


def _hyp_binary_fast(rng, good, bad, j):
    """Hot split path for two-atom blocks: first-j good counts.

    Exact for every parameter range; consumes uniforms pre-drawn from the
    caller's stream so per-distribution stream separation is preserved.
    """
    good = np.ascontiguousarray(good, dtype=np.int64)
    bad = np.ascontiguousarray(bad, dtype=np.int64)
    n = good.shape[0]
    sample = np.full(n, np.int64(j))
    out = np.empty(n, dtype=np.int64)
    start = 0
    while start < n:
        buf = rng.random(24 * (n - start) + 64)
        start, consumed = _hyp_kernel(good, bad, sample, buf, out, start)
        if consumed != -1:
            break
    return out


def multivariate_hypergeometric(rng, counts, sample):
    """Split multi-atom count rows: counts of the first `sample` draws.

    counts has shape (rows, A); one exact conditional split per row, done as
    a sequence of vectorized binary hypergeometric draws over the atoms.
    """
    counts = np.asarray(counts, dtype=np.int64)
    rows, A = counts.shape
    out = np.zeros_like(counts)
    if np.ndim(sample) == 0:
        remaining_draw = np.full(rows, int(sample), dtype=np.int64)
    else:
        remaining_draw = np.asarray(sample, dtype=np.int64).copy()
    remaining_pop = counts.sum(axis=1)
    for a in range(A - 1):
        g = counts[:, a]
        b = remaining_pop - g
        x = hypergeometric(rng, g, b, np.minimum(remaining_draw, remaining_pop))
        out[:, a] = x
        remaining_draw -= x
        remaining_pop -= g
    out[:, A - 1] = remaining_draw
    return out


# ---------------------------------------------------------------------------
# the sample bank
# ---------------------------------------------------------------------------

@dataclass
class WeightSnapshots:
    """Low-switching snapshot w_hat and running coordinate maximum w_bar."""

    w_hat: np.ndarray
    w_bar: np.ndarray

    @classmethod
    def zeros(cls, k: int) -> "WeightSnapshots":
        return cls(w_hat=np.zeros(k), w_bar=np.zeros(k))


class SampleBank:
    """Append-only simulated draw pool, keyed by distribution.

    mode="independent": each hypothesis's loss value at a shared draw is
    sampled independently from its own (h, i) table.  mode="shared": one
    uniform variate per draw is pushed through every hypothesis's inverse
    CDF, coupling the values across hypotheses (common random numbers).
    """

    def __init__(self, instance: Instance, mode: str = "independent"):
        if mode not in ("independent", "shared"):
            raise ValidationError(f"unknown bank mode {mode!r}")
        self.instance = instance
        self.mode = mode
        k = instance.k
        self._positions = [[0] for _ in range(k)]
        # per (i, ell): list of cumulative count arrays aligned with positions
        self._rows = [[None] for _ in range(k)]
        self._basis = {}
        self.topups = [0] * k
        self.schedule_floor = [0] * k
        for i in range(k):
            self._rows[i] = [[self._zero_row(i, l)] for l in range(instance.R)]
        self._sum_cache = {}
        self._stack_cache = {}

    # -- sampling basis per (i, ell) --------------------------------------

    def _get_basis(self, i: int, ell: int):
        key = (i, ell)
        basis = self._basis.get(key)
        if basis is None:
            values, probs = self.instance.atom_table(i, ell)
            if self.mode == "independent":
                basis = ("independent", probs, values)
            else:
                seg_p, seg_values = _refined_partition(values, probs)
                basis = ("shared", seg_p, seg_values)
            self._basis[key] = basis
        return basis

    def _zero_row(self, i: int, ell: int):
        kind, p, v = self._get_basis(i, ell)
        if kind == "independent":
            return np.zeros(p.shape, dtype=np.int64)
        return np.zeros(p.shape[0], dtype=np.int64)

    def _sample_block(self, i: int, ell: int, m: int, rng) -> np.ndarray:
        # independent mode: one vectorized (H, A) call; shared mode: (S,)
        _, p, _ = self._get_basis(i, ell)
        return rng.multinomial(m, p)

    def _split_block(self, i: int, ell: int, block: np.ndarray, j: int, rng) -> np.ndarray:
        if self.mode == "independent":
            if block.shape[1] == 2:
                good = _hyp_binary_fast(rng, block[:, 0], block[:, 1],
                                        np.int64(j))
                return np.stack([good, j - good], axis=1)
            return multivariate_hypergeometric(rng, block, j)
        return multivariate_hypergeometric(rng, block[None, :], j)[0]

    # -- sizes and growth --------------------------------------------------

    def size(self, i: int) -> int:
        return self._positions[i][-1]

    def sizes(self) -> tuple:
        return tuple(self.size(i) for i in range(self.instance.k))

    def ensure(self, i: int, n: int, sampler: SamplerState, topup: bool = False) -> int:
        """Grow distribution i's stream to at least n draws; returns new draws."""
        cur = self.size(i)
        if n <= cur:
            return 0
        m = n - cur
        rng = sampler.bank_rng(i)
        for l in range(self.instance.R):
            block = self._sample_block(i, l, m, rng)
            self._rows[i][l].append(self._rows[i][l][-1] + block)
            self._sum_cache.pop((i, l), None)
            self._stack_cache.pop(l, None)
        self._positions[i].append(n)
        sampler.count("bank", i, m)
        if topup:
            self.topups[i] += m
        return m

    def _boundary_index(self, i: int, n: int, sampler: SamplerState | None) -> int:
        """Index of boundary position n, materializing it if interior."""
        pos = self._positions[i]
        idx = bisect.bisect_left(pos, n)
        if idx < len(pos) and pos[idx] == n:
            return idx
        if n > pos[-1]:
            raise ValidationError(
                f"prefix {n} beyond bank size {pos[-1]} for distribution {i}")
        if sampler is None:
            raise ValidationError(
                "reading an interior prefix requires the run's SamplerState")
        lo, hi = pos[idx - 1], pos[idx]
        rng = sampler.bank_rng(i)
        for l in range(self.instance.R):
            rows = self._rows[i][l]
            block = rows[idx] - rows[idx - 1]
            first = self._split_block(i, l, block, n - lo, rng)
            rows.insert(idx, rows[idx - 1] + first)
        pos.insert(idx, n)
        return idx

    # -- statistics ---------------------------------------------------------

    def loss_sums(self, i: int, n: int, ell: int = 0,
                  sampler: SamplerState | None = None) -> np.ndarray:
        """Sum of the first n loss values per hypothesis, shape (H,)."""
        if n == 0:
            return np.zeros(self.instance.H)
        if n == self.size(i):
            cached = self._sum_cache.get((i, ell))
            if cached is not None:
                return cached
        idx = self._boundary_index(i, n, sampler)
        row = self._rows[i][ell][idx]
        kind, _, values = self._get_basis(i, ell)
        if kind == "independent":
            sums = np.einsum("ha,ha->h", values, row.astype(float))
        else:
            sums = values @ row.astype(float)
        if n == self.size(i):
            self._sum_cache[(i, ell)] = sums
        return sums

    def sums_matrix(self, ell: int = 0, counts=None,
                    sampler: SamplerState | None = None) -> np.ndarray:
        """Stacked loss sums, shape (k, H); row i covers the first counts[i] draws."""
        k = self.instance.k
        frontier = counts is None
        if frontier:
            cached = self._stack_cache.get(ell)
            if cached is not None:
                return cached
            counts = self.sizes()
        out = np.stack([self.loss_sums(i, int(counts[i]), ell, sampler)
                        if counts[i] > 0 else np.zeros(self.instance.H)
                        for i in range(k)])
        if frontier:
            self._stack_cache[ell] = out
        return out

    def counts(self) -> tuple:
        return self.sizes()

    # -- debug dump / replay -------------------------------------------------

    def dump_values(self, sampler: SamplerState, max_draws: int = 100_000) -> dict:
        """Materialize a consistent per-draw realization (small banks only)."""
        inst = self.instance
        total = sum(self.sizes())
        if total > max_draws:
            raise ValidationError(
                f"bank holds {total} draws; refusing to materialize more than {max_draws}")
        doc = {"mode": self.mode, "distributions": []}
        for i in range(inst.k):
            for n in range(1, self.size(i) + 1):
                self._boundary_index(i, n, sampler)
            per_ell = []
            for l in range(inst.R):
                rows = self._rows[i][l]
                kind, _, values = self._get_basis(i, l)
                draws = []
                for t in range(1, len(rows)):
                    delta = rows[t] - rows[t - 1]
                    if kind == "independent":
                        atom_idx = np.argmax(delta, axis=1)
                        draws.append([float(values[h, atom_idx[h]]) for h in range(inst.H)])
                    else:
                        seg = int(np.argmax(delta))
                        draws.append([float(values[h, seg]) for h in range(inst.H)])
                per_ell.append(draws)
            doc["distributions"].append({"i": i, "n": self.size(i), "losses": per_ell})
        return doc

    @classmethod
    def from_values(cls, instance: Instance, values_by_dist):
        """Build a unit-block bank from explicit loss values (replay path).

        values_by_dist[i][ell][j] is the length-H list of loss values of
        draw j from distribution i under loss index ell; single-loss input
        may drop the ell nesting.  Values must match table atoms exactly.
        """
        bank = cls(instance, mode="independent")
        for i, per_dist in enumerate(values_by_dist):
            if per_dist and not isinstance(per_dist[0][0], (list, tuple, np.ndarray)):
                per_dist = [per_dist]  # single-loss shorthand: [draw][h]
            ndraws = len(per_dist[0])
            for l in range(instance.R):
                values, _ = instance.atom_table(i, l)
                rows = bank._rows[i][l]
                cum = rows[0].copy()
                for j in range(ndraws):
                    draw = per_dist[l][j]
                    for h in range(instance.H):
                        a = int(np.argmin(np.abs(values[h] - float(draw[h]))))
                        if abs(values[h, a] - float(draw[h])) > 1e-12:
                            raise ValidationError(
                                f"value {draw[h]} not an atom of table (h={h}, i={i}, l={l})")
                        cum[h, a] += 1
                    rows.append(cum.copy())
            bank._positions[i] = list(range(ndraws + 1))
        return bank


def _refined_partition(values: np.ndarray, probs: np.ndarray):
    """Common-uniform coupling basis: refine [0,1) by all hypotheses' CDF cuts.

    Returns (segment probabilities (S,), per-hypothesis segment values (H, S)).
    """
    H, A = values.shape
    cuts = {0.0, 1.0}
    for h in range(H):
        c = 0.0
        for a in range(A - 1):
            c += probs[h, a]
            if 0.0 < c < 1.0:
                cuts.add(round(c, 15))
    edges = np.array(sorted(cuts))
    seg_p = np.diff(edges)
    keep = seg_p > 1e-15
    seg_p = seg_p[keep]
    mids = (edges[:-1] + edges[1:])[keep] / 2.0
    seg_values = np.empty((H, seg_p.size))
    for h in range(H):
        cdf = np.cumsum(probs[h])
        atom_of_mid = np.searchsorted(cdf, mids, side="right")
        atom_of_mid = np.minimum(atom_of_mid, A - 1)
        seg_values[h] = values[h, atom_of_mid]
    seg_p = seg_p / seg_p.sum()
    return seg_p, seg_values


# ---------------------------------------------------------------------------
# the four schedule operations
# ---------------------------------------------------------------------------

def resample_trigger(w, w_hat_prev) -> bool:
    """True iff some coordinate has doubled past its snapshot: w_j >= 2 w_hat_j."""
    w = np.asarray(w, dtype=float)
    w_hat_prev = np.asarray(w_hat_prev, dtype=float)
    if w.shape != w_hat_prev.shape:
        raise ValidationError("w and w_hat_prev must have the same length")
    return bool(np.any(w >= 2.0 * w_hat_prev))


def grow_bank(bank: SampleBank, w_hat_new, T1: int, sampler: SamplerState,
              base=None) -> tuple:
    """Grow the bank to the schedule n_i = ceil(T1 * w_hat_i) (+ base_i).

    base holds pre-seeded draws that sit ahead of the schedule in each
    stream (zero except for the Rademacher variant's initial block).
    Returns the new schedule counts.  A target below what the schedule
    already guaranteed indicates snapshot monotonicity was violated.
    """
    k = bank.instance.k
    w_hat_new = np.asarray(w_hat_new, dtype=float)
    if base is None:
        base = np.zeros(k, dtype=np.int64)
    targets = np.ceil(T1 * w_hat_new - 1e-12).astype(np.int64)
    for i in range(k):
        if targets[i] < bank.schedule_floor[i]:
            raise RuntimeError(
                f"schedule shrank for distribution {i}: "
                f"{targets[i]} < {bank.schedule_floor[i]}")
        bank.schedule_floor[i] = int(targets[i])
        bank.ensure(i, int(base[i]) + int(targets[i]), sampler)
    return tuple(int(t) for t in targets)


def empirical_weighted_loss(bank: SampleBank, w, h, ell: int = 0,
                            counts=None, sampler: SamplerState | None = None) -> float:
    """Weighted empirical mean sum_i (w_i / n_i) * sum_{j<=n_i} loss_ij(h).

    counts defaults to the bank's current sizes; the Rademacher variant
    passes its effective prefix counts instead.
    """
    inst = bank.instance
    w = check_simplex(w, inst.k)
    j = inst.index(h)
    if counts is None:
        counts = bank.sizes()
    total = 0.0
    for i in range(inst.k):
        if w[i] <= 0.0:
            continue
        n = int(counts[i])
        if n < 1:
            raise ValidationError(
                f"distribution {i} has positive weight but no samples in the bank")
        total += (w[i] / n) * float(bank.loss_sums(i, n, ell, sampler)[j])
    return total


def estimate_loss_vector(instance: Instance, h, w_bar, sampler: SamplerState):
    """Unbiased fresh-sample estimate of h's per-distribution expected loss.

    Draws ceil(k * w_bar_i) fresh samples from each distribution (one batch,
    evaluated under every loss index) and returns the per-(i, ell) means:
    shape (k,) for single-loss instances, (k, R) otherwise.  Fresh draws are
    never added to the bank.
    """
    k, R = instance.k, instance.R
    j = instance.index(h)
    w_bar = np.asarray(w_bar, dtype=float)
    if w_bar.shape != (k,) or not (w_bar.min() > 0.0 and w_bar.max() <= 1.0 + 1e-12):
        raise ValidationError("w_bar entries must lie in (0, 1]")
    batches = np.ceil(k * w_bar - 1e-12).astype(np.int64)
    assert batches.min() >= 1, "batch sizes are >= 1 since w_bar_i >= 1/k"
    values = instance._values[:, j]   # (R, k, A) views for the one hypothesis
    probs = instance._probs[:, j]
    out = np.empty((k, R))
    for i in range(k):
        rng = sampler.fresh_rng(i)
        m = int(batches[i])
        for l in range(R):
            c = rng.multinomial(m, probs[l, i])
            out[i, l] = (values[l, i] @ c) / m
        sampler.count("fresh", i, m)
    if R == 1:
        return out[:, 0]
    return out


def rad_effective_counts(w, T1: int, k: int, log_base: float = math.e) -> np.ndarray:
    """Effective prefix sizes min(ceil(T1 * w_i + 12 log(2k)), T1) per coordinate."""
    w = np.asarray(w, dtype=float)
    pad = 12.0 * math.log(2 * k) / math.log(log_base)
    counts = np.ceil(T1 * w + pad - 1e-12).astype(np.int64)
    return np.minimum(counts, np.int64(T1))
