"""Finite simulated instances and exact population-loss oracles.

An Instance bundles k sampling distributions, a finite hypothesis set and,
per loss index, a discrete loss table for every (hypothesis, distribution)
pair.  Because every distribution is a finite list of (value, probability)
atoms, all population quantities (mixture losses, worst-case losses,
optimality gaps) are computable in closed form, which is what the test
oracles and the experiment harness rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SIMPLEX_INPUT_TOL = 1e-9    # tolerance for caller-supplied weight vectors
SIMPLEX_BUILD_TOL = 1e-12   # tolerance for constructed probability tables

INSTANCE_SCHEMA_VERSION = 1


class ValidationError(ValueError):
    """Raised when an input fails a documented precondition."""


class ConfigError(ValueError):
    """Raised when an experiment configuration is unusable."""


def fmt_float(x: float) -> str:
    """Canonical float formatting: 17 significant digits, round-trip safe."""
    return format(float(x), ".17g")


def _emit(obj, out):
    # the stdlib C encoder always reformats floats, so emit by hand
    if isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        if not np.isfinite(obj):
            raise ValidationError("cannot serialize non-finite float")
        out.append(fmt_float(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for j, key in enumerate(sorted(obj)):
            if j:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for j, item in enumerate(obj):
            if j:
                out.append(",")
            _emit(item, out)
        out.append("]")
    elif isinstance(obj, np.floating):
        _emit(float(obj), out)
    else:
        raise TypeError(f"cannot canonicalize {type(obj)}")


def canonical_json(obj) -> str:
    """Serialize with deterministic key order and 17-significant-digit floats."""
    out = []
    _emit(obj, out)
    return "".join(out)


def check_simplex(w, n: int, tol: float = SIMPLEX_INPUT_TOL, name: str = "w") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValidationError(f"{name} must have length {n}, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValidationError(f"{name} contains non-finite entries")
    if w.min() < -tol:
        raise ValidationError(f"{name} has negative entry {w.min()}")
    s = w.sum()
    if abs(s - 1.0) > tol:
        raise ValidationError(f"{name} sums to {s}, not 1 within {tol}")
    return w


@dataclass
class Instance:
    """A finite multi-distribution learning problem.

    Parameters
    ----------
    k : number of distributions.
    hypotheses : identifiers of the finite hypothesis set (size H).
    losses : losses[l][h][i] is the discrete loss distribution of hypothesis
        h under distribution i for loss index l, as a list of
        (value, probability) pairs with values in [-1, 1].
    vc_dim_proxy : declared complexity d; defaults to ceil(log2(H)).
    R : number of loss functions (1 for the single-loss problem).
    """

    k: int
    hypotheses: tuple
    losses: tuple
    vc_dim_proxy: int = 0
    R: int = 1
    name: str = ""

    def __post_init__(self):
        self.hypotheses = tuple(str(h) for h in self.hypotheses)
        H = len(self.hypotheses)
        if self.k < 1 or H < 1 or self.R < 1:
            raise ValidationError("k, H and R must all be >= 1")
        if len(set(self.hypotheses)) != H:
            raise ValidationError("hypothesis identifiers must be distinct")
        if self.vc_dim_proxy == 0:
            self.vc_dim_proxy = max(1, int(np.ceil(np.log2(max(H, 2)))))
        if self.vc_dim_proxy < 1:
            raise ValidationError("vc_dim_proxy must be >= 1")
        if len(self.losses) != self.R:
            raise ValidationError(f"expected {self.R} loss tables, got {len(self.losses)}")
        self.losses = tuple(
            tuple(tuple(tuple((float(v), float(p)) for v, p in table[h][i]) for i in range(self.k))
                  for h in range(H))
            for table in self.losses
        )
        self._index = {h: j for j, h in enumerate(self.hypotheses)}
        self._build_arrays()
        self._opt_cache = {}

    def _build_arrays(self):
        H, k, R = self.H, self.k, self.R
        amax = max(
            len(self.losses[l][h][i]) for l in range(R) for h in range(H) for i in range(k)
        )
        values = np.zeros((R, H, k, amax))
        probs = np.zeros((R, H, k, amax))
        for l in range(R):
            for h in range(H):
                for i in range(k):
                    atoms = self.losses[l][h][i]
                    if not atoms:
                        raise ValidationError(f"empty loss table at (l={l}, h={h}, i={i})")
                    v = np.array([a[0] for a in atoms])
                    p = np.array([a[1] for a in atoms])
                    if v.min() < -1 - SIMPLEX_BUILD_TOL or v.max() > 1 + SIMPLEX_BUILD_TOL:
                        raise ValidationError(
                            f"loss values outside [-1, 1] at (l={l}, h={h}, i={i})")
                    if p.min() < -SIMPLEX_BUILD_TOL or abs(p.sum() - 1.0) > SIMPLEX_BUILD_TOL:
                        raise ValidationError(
                            f"probabilities at (l={l}, h={h}, i={i}) sum to {p.sum()}, not 1")
                    values[l, h, i, : len(atoms)] = v
                    probs[l, h, i, : len(atoms)] = p
        self._values = values
        self._probs = probs
        # exact per-(loss, hypothesis, distribution) means
        self._means = (values * probs).sum(axis=3)

    @property
    def H(self) -> int:
        return len(self.hypotheses)

    def index(self, h) -> int:
        try:
            return self._index[h]
        except KeyError:
            raise KeyError(f"unknown hypothesis id {h!r}") from None

    def mean_loss(self, h, i: int, ell: int = 0) -> float:
        """Exact E[loss(h, .)] under distribution i for loss index ell."""
        return float(self._means[ell, self.index(h), i])

    def means_matrix(self, ell: int = 0) -> np.ndarray:
        """Exact H x k matrix of per-distribution expected losses."""
        return self._means[ell].copy()

    def game_matrix(self) -> np.ndarray:
        """H x (k*R) matrix stacking the per-loss mean matrices column-wise."""
        return np.concatenate([self._means[l] for l in range(self.R)], axis=1)

    def atom_table(self, i: int, ell: int = 0):
        """(values, probs) arrays of shape (H, A) for distribution i, padded with
        zero-probability atoms so every hypothesis row has equal width."""
        return self._values[ell, :, i, :], self._probs[ell, :, i, :]

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "schema_version": INSTANCE_SCHEMA_VERSION,
            "k": self.k,
            "R": self.R,
            "d": self.vc_dim_proxy,
            "name": self.name,
            "hypotheses": list(self.hypotheses),
            "losses": [
                [[[ [v, p] for v, p in self.losses[l][h][i]] for i in range(self.k)]
                 for h in range(self.H)]
                for l in range(self.R)
            ],
        }
        return canonical_json(doc)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        doc = json.loads(text)
        if doc.get("schema_version") != INSTANCE_SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported instance schema_version {doc.get('schema_version')!r}")
        return cls(
            k=int(doc["k"]),
            hypotheses=tuple(doc["hypotheses"]),
            losses=tuple(doc["losses"]),
            vc_dim_proxy=int(doc["d"]),
            R=int(doc["R"]),
            name=str(doc.get("name", "")),
        )


@dataclass(frozen=True)
class RandomizedHypothesis:
    """A mixture over hypothesis identifiers (weights on the simplex)."""

    support: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(str(h) for h in self.support))
        object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))
        if len(self.support) != len(self.weights) or not self.support:
            raise ValidationError("support and weights must be equal-length and nonempty")
        if len(set(self.support)) != len(self.support):
            raise ValidationError("support entries must be distinct")
        w = np.array(self.weights)
        if w.min() < -SIMPLEX_BUILD_TOL or abs(w.sum() - 1.0) > SIMPLEX_BUILD_TOL:
            raise ValidationError(f"weights sum to {w.sum()}, not 1 within {SIMPLEX_BUILD_TOL}")

    @classmethod
    def point_mass(cls, h) -> "RandomizedHypothesis":
        return cls(support=(h,), weights=(1.0,))

    @classmethod
    def uniform_over(cls, hs) -> "RandomizedHypothesis":
        """Uniform over a multiset of ids, merging repeats by identity."""
        counts = {}
        for h in hs:
            counts[h] = counts.get(h, 0) + 1
        total = sum(counts.values())
        items = list(counts.items())
        return cls(
            support=tuple(h for h, _ in items),
            weights=tuple(c / total for _, c in items),
        )


def exact_mixture_loss(instance: Instance, h, w, ell: int = 0) -> float:
    """Exact loss of hypothesis h under the w-mixture of distributions.

    Returns sum_i w_i * E[loss(h, .) under distribution i], computed from the
    instance's discrete loss tables.
    """
    j = instance.index(h)
    w = check_simplex(w, instance.k)
    return float(instance._means[ell, j] @ w)


def exact_worst_case_loss(instance: Instance, pi: RandomizedHypothesis) -> float:
    """Exact max over distributions (and loss indices) of pi's expected loss."""
    idx = [instance.index(h) for h in pi.support]
    wts = np.array(pi.weights)
    worst = -np.inf
    for l in range(instance.R):
        per_dist = wts @ instance._means[l, idx, :]
        worst = max(worst, float(per_dist.max()))
    return worst


def optimality_gap(instance: Instance, pi: RandomizedHypothesis, opt_value: float) -> float:
    """exact_worst_case_loss(pi) minus the minimax benchmark value.

    May be slightly negative (within solver tolerance) because pi ranges over
    the same randomized class as the benchmark.
    """
    return exact_worst_case_loss(instance, pi) - float(opt_value)
