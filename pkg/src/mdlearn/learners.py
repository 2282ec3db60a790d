"""Algorithm drivers: hyper-parameters, ERM, and the full learning loops.

All drivers share the same skeleton: an exponential-weights adversary over
distributions proposes a mixture each round, an ERM best response is
computed from the reusable sample bank, a cheap fresh-sample estimate of
the response's per-distribution losses feeds the weight update, and the
output is the uniform mixture over the per-round responses.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    Instance,
    RandomizedHypothesis,
    ValidationError,
    exact_worst_case_loss,
)
from .diagnostics import TrajectoryRecorder, trajectory_norm
from .game import HedgeWeights, hedge_step, normalize, solve_matrix_game
from .instances import RademacherSchedule
from .sampling import (
    SampleBank,
    SamplerState,
    estimate_loss_vector,
    grow_bank,
    rad_effective_counts,
    resample_trigger,
)

REPORT_SCHEMA_VERSION = 1

RAD_T1_CAP = 10**18  # search cap for the schedule-driven sub-sample size


def _log(x: float, base: float) -> float:
    return math.log(x) / math.log(base)


@dataclass(frozen=True)
class HyperParams:
    """Step size, round count, and reuse-schedule size for one run."""

    eta: float
    T: int
    eps1: float
    T1: int
    scale: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not (self.eta > 0 and self.eps1 > 0 and self.T >= 1 and self.T1 >= 1):
            raise ValidationError("hyper-parameters out of range")


def paper_hyperparams(eps: float, delta: float, k: int, d: int,
                      scale=(1.0, 1.0, 1.0), t_formula: str = "algorithm",
                      log_base: float = math.e) -> HyperParams:
    """Hyper-parameters of the single-loss driver.

    eta = c_eta * eps/100, T = ceil(c_T * 20000 log(k/delta) / eps^2),
    eps1 = eps/100, T1 = ceil(c_T1 * 4000 (k log(k/eps1) + d log(k d/eps1)
    + log(1/delta)) / eps1^2).  t_formula="proof" replaces T's log(k/delta)
    with log(k/(delta*eps)).  Logs are natural unless log_base overrides.
    """
    c_eta, c_T, c_T1 = _check_common(eps, delta, k, d, scale)
    eta = c_eta * eps / 100.0
    tlog = _log(k / (delta * eps), log_base) if t_formula == "proof" \
        else _log(k / delta, log_base)
    if t_formula not in ("algorithm", "proof"):
        raise ValidationError(f"unknown t_formula {t_formula!r}")
    T = max(1, math.ceil(c_T * 20000.0 * tlog / eps**2))
    eps1 = eps / 100.0
    bracket = (k * _log(k / eps1, log_base)
               + d * _log(k * d / eps1, log_base)
               + _log(1.0 / delta, log_base))
    T1 = max(1, math.ceil(c_T1 * 4000.0 * bracket / eps1**2))
    return HyperParams(eta=eta, T=T, eps1=eps1, T1=T1, scale=tuple(scale))


def multi_loss_hyperparams(eps: float, delta: float, k: int, d: int, R: int,
                           scale=(1.0, 1.0, 1.0), log_base: float = math.e) -> HyperParams:
    """Hyper-parameters of the multi-loss driver (leading constant 40000)."""
    c_eta, c_T, c_T1 = _check_common(eps, delta, k, d, scale)
    if R < 2:
        raise ValidationError("multi-loss hyper-parameters need R >= 2")
    eta = c_eta * eps / 100.0
    T = max(1, math.ceil(c_T * 20000.0 * _log(k * R / (delta * eps), log_base) / eps**2))
    eps1 = eps / 100.0
    bracket = (k * _log(k * R / eps1, log_base)
               + d * _log(k * d / eps1, log_base)
               + _log(1.0 / delta, log_base))
    T1 = max(1, math.ceil(c_T1 * 40000.0 * bracket / eps1**2))
    return HyperParams(eta=eta, T=T, eps1=eps1, T1=T1, scale=tuple(scale))


def rad_t1(eps1: float, delta: float, k: int, schedule: RademacherSchedule,
           scale_t1: float = 1.0, log_base: float = math.e,
           cap: int = RAD_T1_CAP) -> int:
    """Schedule-driven sub-sample size for the Rademacher-class driver.

    Smallest t at least 4000 (k log(k/eps1) + log(1/delta)) / eps1^2 with
    C_t <= eps1/4800, found by bisection over the non-increasing schedule,
    then rescaled by scale_t1.
    """
    floor = max(1, math.ceil(4000.0 * (k * _log(k / eps1, log_base)
                                       + _log(1.0 / delta, log_base)) / eps1**2))
    threshold = eps1 / 4800.0
    if schedule(floor) <= threshold:
        raw = floor
    elif schedule(cap) > threshold:
        raise ConfigError(
            f"schedule never reaches C_t <= {threshold:.3e} within t <= {cap:.0e}")
    else:
        lo, hi = floor, cap  # schedule(lo) > threshold >= schedule(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if schedule(mid) <= threshold:
                hi = mid
            else:
                lo = mid
        raw = hi
    return max(1, math.ceil(scale_t1 * raw))


def _check_common(eps, delta, k, d, scale):
    if not (0.0 < eps < 1.0 and 0.0 < delta < 1.0):
        raise ValidationError("need 0 < eps < 1 and 0 < delta < 1")
    if k < 1 or d < 1:
        raise ValidationError("need k >= 1 and d >= 1")
    scale = tuple(float(c) for c in scale)
    if len(scale) != 3 or any(c <= 0 for c in scale):
        raise ValidationError("scale must be three positive multipliers")
    return scale


def erm(bank: SampleBank, weights, instance: Instance | None = None,
        counts=None, sampler: SamplerState | None = None, eps1: float = 0.0):
    """Empirical risk minimizer over the bank, ties to the lowest index.

    weights is a length-k mixture for single-loss instances or a (k, R)
    matrix of per-(distribution, loss) weights (jointly normalized) for
    multi-loss ones.  With eps1 > 0 the lowest-index hypothesis within eps1
    of the empirical minimum is returned instead of the exact argmin.
    """
    inst = instance if instance is not None else bank.instance
    if inst is not bank.instance:
        raise ValidationError("instance does not match the bank")
    if inst.H == 0:
        raise ValidationError("empty hypothesis set")
    u = np.asarray(weights, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
        if inst.R != 1:
            raise ValidationError("multi-loss instances need a (k, R) weight matrix")
    if u.shape != (inst.k, inst.R):
        raise ValidationError(f"weights shape {u.shape} != ({inst.k}, {inst.R})")
    frontier = counts is None
    counts = np.asarray(bank.sizes() if frontier else counts, dtype=np.int64)
    active = u.max(axis=1) > 0.0
    if np.any(active & (counts < 1)):
        i = int(np.argmax(active & (counts < 1)))
        raise ValidationError(
            f"distribution {i} has positive weight but no samples in the bank")
    coeff = np.where(active[:, None], u / np.maximum(counts, 1)[:, None], 0.0)
    scores = np.zeros(inst.H)
    for l in range(inst.R):
        scores += coeff[:, l] @ bank.sums_matrix(l, None if frontier else counts, sampler)
    if eps1 > 0.0:
        j = int(np.argmax(scores <= scores.min() + eps1))
    else:
        j = int(np.argmin(scores))
    return inst.hypotheses[j]


@dataclass
class RunReport:
    """Everything a single run produced, serializable to JSON."""

    algo: str
    seed: int
    instance_name: str
    k: int
    d: int
    R: int
    eps: float
    delta: float
    scale: tuple
    hyper: dict
    rounds: int
    final_hypothesis: RandomizedHypothesis
    samples_bank: int
    samples_fresh: int
    samples_rad_initial: int
    samples_total: int
    stream_counters: dict
    trigger_count: int
    trajectory: object
    traj_norm: float
    worst_case_loss: float
    opt_value: float
    gap: float
    wallclock_ms: float
    config: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def budget_identity_holds(self) -> bool:
        bank = sum(v for (p, _), v in self.stream_counters.items() if p == "bank")
        fresh = sum(v for (p, _), v in self.stream_counters.items() if p == "fresh")
        return (self.samples_bank + self.samples_rad_initial == bank
                and self.samples_fresh == fresh
                and self.samples_total == bank + fresh)

    def to_dict(self) -> dict:
        traj = self.trajectory
        return {
            "schema_version": self.schema_version,
            "algo": self.algo,
            "seed": self.seed,
            "instance": {"name": self.instance_name, "k": self.k,
                         "d": self.d, "R": self.R},
            "eps": self.eps,
            "delta": self.delta,
            "scale": list(self.scale),
            "hyper": self.hyper,
            "rounds": self.rounds,
            "final_hypothesis": {
                "support": list(self.final_hypothesis.support),
                "weights": list(self.final_hypothesis.weights),
            },
            "samples": {
                "bank": self.samples_bank,
                "fresh": self.samples_fresh,
                "rad_initial": self.samples_rad_initial,
                "total": self.samples_total,
            },
            "stream_counters": {f"{p}:{i}": v
                                for (p, i), v in sorted(self.stream_counters.items())},
            "trigger_count": self.trigger_count,
            "trajectory": {
                "stride": traj.stride,
                "total_rounds": traj.total_rounds,
                "times": traj.times.tolist(),
                "weights": [row.tolist() for row in traj.weights],
                "running_max": traj.running_max.tolist(),
            },
            "traj_norm": self.traj_norm,
            "worst_case_loss": self.worst_case_loss,
            "opt_value": self.opt_value,
            "gap": self.gap,
            "wallclock_ms": self.wallclock_ms,
            "config": self.config,
        }


def instance_opt(instance: Instance, tol: float = 1e-6) -> float:
    """Exact minimax benchmark of the instance (cached per instance and tol)."""
    cached = instance._opt_cache.get(tol)
    if cached is None:
        cached = solve_matrix_game(instance.game_matrix(), tol=tol)
        instance._opt_cache[tol] = cached
    return cached[0]


def _auto_stride(T: int, thin_stride) -> int:
    if thin_stride is not None:
        return max(1, int(thin_stride))
    return max(1, T // 512)


def _finish_report(*, algo, instance, eps, delta, scale, seed, hyper, rounds,
                   chosen, sampler, bank_total, rad_initial, recorder,
                   trigger_count, opt_tol, t_start, config) -> RunReport:
    traj = recorder.freeze()
    final = RandomizedHypothesis.uniform_over(chosen)
    worst = exact_worst_case_loss(instance, final)
    opt = instance_opt(instance, opt_tol)
    fresh_total = sampler.total("fresh")
    report = RunReport(
        algo=algo,
        seed=seed,
        instance_name=instance.name,
        k=instance.k,
        d=instance.vc_dim_proxy,
        R=instance.R,
        eps=eps,
        delta=delta,
        scale=tuple(scale),
        hyper=hyper,
        rounds=rounds,
        final_hypothesis=final,
        samples_bank=bank_total - rad_initial,
        samples_fresh=fresh_total,
        samples_rad_initial=rad_initial,
        samples_total=bank_total + fresh_total,
        stream_counters=dict(sampler.counters),
        trigger_count=trigger_count,
        trajectory=traj,
        traj_norm=trajectory_norm(traj),
        worst_case_loss=worst,
        opt_value=opt,
        gap=worst - opt,
        wallclock_ms=(time.perf_counter() - t_start) * 1000.0,
        config=config,
    )
    assert report.budget_identity_holds()
    return report


def run_mdl_hedge_vc(instance: Instance, eps: float, delta: float,
                     scale=(1.0, 1.0, 1.0), seed: int = 0, *,
                     erm_eps1: float = 0.0, bank_mode: str = "independent",
                     t_formula: str = "algorithm", log_base: float = math.e,
                     thin_stride=None, opt_tol: float = 1e-6) -> RunReport:
    """Single-loss driver: Hedge adversary, ERM best response, sample reuse.

    Per round: normalize weights; if some coordinate doubled past its
    snapshot, refresh the snapshot and grow the bank to ceil(T1 * w_hat);
    compute the ERM response on the bank; update the running max weights;
    estimate the response's loss vector from ceil(k * w_bar_i) fresh draws
    per distribution; multiplicative weight update.  Output is uniform over
    the per-round responses.  Deterministic given the seed.
    """
    if instance.R != 1:
        raise ValidationError("run_mdl_hedge_vc needs a single-loss instance (R=1)")
    t_start = time.perf_counter()
    hp = paper_hyperparams(eps, delta, instance.k, instance.vc_dim_proxy,
                           scale, t_formula=t_formula, log_base=log_base)
    k = instance.k
    sampler = SamplerState(seed, k)
    bank = SampleBank(instance, mode=bank_mode)
    state = HedgeWeights.uniform(k, hp.eta)
    w_hat = np.zeros(k)
    recorder = TrajectoryRecorder(k, _auto_stride(hp.T, thin_stride))
    chosen = []
    trigger_count = 0
    for _ in range(hp.T):
        w = normalize(state)
        if resample_trigger(w, w_hat):
            np.maximum(w_hat, w, out=w_hat)
            grow_bank(bank, w_hat, hp.T1, sampler)
            trigger_count += 1
        h_t = erm(bank, w, sampler=sampler, eps1=erm_eps1)
        chosen.append(h_t)
        recorder.append(w)                      # running max is now w_bar^t
        r_hat = estimate_loss_vector(instance, h_t, recorder.running_max, sampler)
        state = hedge_step(state, r_hat)
    return _finish_report(
        algo="hedge_vc", instance=instance, eps=eps, delta=delta, scale=scale,
        seed=seed, hyper={"eta": hp.eta, "T": hp.T, "eps1": hp.eps1, "T1": hp.T1},
        rounds=hp.T, chosen=chosen, sampler=sampler,
        bank_total=sampler.total("bank"), rad_initial=0, recorder=recorder,
        trigger_count=trigger_count, opt_tol=opt_tol, t_start=t_start,
        config={"erm_eps1": erm_eps1, "bank_mode": bank_mode,
                "t_formula": t_formula, "log_base": log_base},
    )


def run_mdl_hedge_rad(instance: Instance, eps: float, delta: float,
                      schedule: RademacherSchedule, scale=(1.0, 1.0, 1.0),
                      seed: int = 0, *, erm_eps1: float = 0.0,
                      bank_mode: str = "independent", t_formula: str = "algorithm",
                      log_base: float = math.e, thin_stride=None,
                      opt_tol: float = 1e-6, t1_cap: int = RAD_T1_CAP) -> RunReport:
    """Schedule-driven driver for classes with known complexity bounds C_n.

    Differs from the single-loss driver in three ways: every distribution
    is pre-seeded with ceil(12 log(2k)) bank draws; T1 comes from the
    schedule via rad_t1; and the ERM reads only the first
    min(ceil(T1 w_i + 12 log(2k)), T1) bank entries per distribution.  If a
    round's effective prefix outruns the grown bank (possible since the
    snapshot only guarantees w_hat >= w/2), the bank is topped up on demand
    and the extra draws are accounted as bank samples.
    """
    if instance.R != 1:
        raise ValidationError("run_mdl_hedge_rad needs a single-loss instance (R=1)")
    t_start = time.perf_counter()
    base_hp = paper_hyperparams(eps, delta, instance.k, instance.vc_dim_proxy,
                                scale, t_formula=t_formula, log_base=log_base)
    T1 = rad_t1(base_hp.eps1, delta, instance.k, schedule, scale_t1=scale[2],
                log_base=log_base, cap=t1_cap)
    hp = HyperParams(eta=base_hp.eta, T=base_hp.T, eps1=base_hp.eps1, T1=T1,
                     scale=tuple(scale))
    k = instance.k
    sampler = SamplerState(seed, k)
    bank = SampleBank(instance, mode=bank_mode)
    pad = math.ceil(12.0 * _log(2 * k, log_base))
    base = np.full(k, pad, dtype=np.int64)
    for i in range(k):
        bank.ensure(i, pad, sampler)
    rad_initial = int(base.sum())
    state = HedgeWeights.uniform(k, hp.eta)
    w_hat = np.zeros(k)
    recorder = TrajectoryRecorder(k, _auto_stride(hp.T, thin_stride))
    chosen = []
    trigger_count = 0
    for _ in range(hp.T):
        w = normalize(state)
        if resample_trigger(w, w_hat):
            np.maximum(w_hat, w, out=w_hat)
            grow_bank(bank, w_hat, hp.T1, sampler, base=base)
            trigger_count += 1
        counts = rad_effective_counts(w, hp.T1, k, log_base=log_base)
        for i in range(k):
            if bank.size(i) < counts[i]:
                bank.ensure(i, int(counts[i]), sampler, topup=True)
        h_t = erm(bank, w, counts=counts, sampler=sampler, eps1=erm_eps1)
        chosen.append(h_t)
        recorder.append(w)
        r_hat = estimate_loss_vector(instance, h_t, recorder.running_max, sampler)
        state = hedge_step(state, r_hat)
    return _finish_report(
        algo="hedge_rad", instance=instance, eps=eps, delta=delta, scale=scale,
        seed=seed, hyper={"eta": hp.eta, "T": hp.T, "eps1": hp.eps1, "T1": hp.T1,
                          "schedule": schedule.to_config()},
        rounds=hp.T, chosen=chosen, sampler=sampler,
        bank_total=sampler.total("bank"), rad_initial=rad_initial,
        recorder=recorder, trigger_count=trigger_count, opt_tol=opt_tol,
        t_start=t_start,
        config={"erm_eps1": erm_eps1, "bank_mode": bank_mode,
                "t_formula": t_formula, "log_base": log_base},
    )


def run_mlmdl_hedge(instance: Instance, eps: float, delta: float,
                    scale=(1.0, 1.0, 1.0), seed: int = 0, *,
                    erm_eps1: float = 0.0, bank_mode: str = "independent",
                    log_base: float = math.e, thin_stride=None,
                    opt_tol: float = 1e-6) -> RunReport:
    """Multi-loss driver: Hedge over (distribution, loss) pairs.

    The adversary holds k*R weights u_{i,l}; the resample trigger, the bank
    schedule and the fresh batch sizes all use the per-distribution
    marginals sum_l u_{i,l}, and one fresh batch per distribution is
    evaluated under every loss index simultaneously.
    """
    if instance.R < 2:
        raise ValidationError("run_mlmdl_hedge needs R >= 2; use run_mdl_hedge_vc for R=1")
    t_start = time.perf_counter()
    k, R = instance.k, instance.R
    hp = multi_loss_hyperparams(eps, delta, k, instance.vc_dim_proxy, R,
                                scale, log_base=log_base)
    sampler = SamplerState(seed, k)
    bank = SampleBank(instance, mode=bank_mode)
    state = HedgeWeights.uniform(k * R, hp.eta)
    w_hat = np.zeros(k)
    recorder = TrajectoryRecorder(k, _auto_stride(hp.T, thin_stride))
    chosen = []
    trigger_count = 0
    for _ in range(hp.T):
        u = normalize(state).reshape(k, R)
        marg = u.sum(axis=1)
        if resample_trigger(marg, w_hat):
            np.maximum(w_hat, marg, out=w_hat)
            grow_bank(bank, w_hat, hp.T1, sampler)
            trigger_count += 1
        h_t = erm(bank, u, sampler=sampler, eps1=erm_eps1)
        chosen.append(h_t)
        recorder.append(marg)
        r_hat = estimate_loss_vector(instance, h_t, recorder.running_max, sampler)
        state = hedge_step(state, r_hat.reshape(k * R))
    return _finish_report(
        algo="mlmdl", instance=instance, eps=eps, delta=delta, scale=scale,
        seed=seed, hyper={"eta": hp.eta, "T": hp.T, "eps1": hp.eps1, "T1": hp.T1},
        rounds=hp.T, chosen=chosen, sampler=sampler,
        bank_total=sampler.total("bank"), rad_initial=0, recorder=recorder,
        trigger_count=trigger_count, opt_tol=opt_tol, t_start=t_start,
        config={"erm_eps1": erm_eps1, "bank_mode": bank_mode, "log_base": log_base},
    )


def run_uniform_baseline(instance: Instance, total_budget: int, seed: int = 0, *,
                         bank_mode: str = "independent",
                         opt_tol: float = 1e-6) -> RunReport:
    """Non-adaptive strawman: equal budgets, pure empirical-worst-case ERM.

    Draws floor(budget/k) samples from every distribution and returns the
    deterministic hypothesis minimizing the maximum (over distributions and
    loss indices) empirical mean loss, ties to the lowest index.
    """
    k = instance.k
    if total_budget < k:
        raise ValidationError("total_budget must be at least k")
    t_start = time.perf_counter()
    m = total_budget // k
    sampler = SamplerState(seed, k)
    bank = SampleBank(instance, mode=bank_mode)
    for i in range(k):
        bank.ensure(i, m, sampler)
    worst_emp = np.full(instance.H, -np.inf)
    for i in range(k):
        for l in range(instance.R):
            means = bank.loss_sums(i, m, l) / m
            worst_emp = np.maximum(worst_emp, means)
    h = instance.hypotheses[int(np.argmin(worst_emp))]
    recorder = TrajectoryRecorder(k, 1)
    recorder.append(np.full(k, 1.0 / k))
    return _finish_report(
        algo="uniform", instance=instance, eps=None, delta=None,
        scale=(1.0, 1.0, 1.0), seed=seed,
        hyper={"budget": int(total_budget), "per_distribution": int(m)},
        rounds=1, chosen=[h], sampler=sampler,
        bank_total=sampler.total("bank"), rad_initial=0, recorder=recorder,
        trigger_count=0, opt_tol=opt_tol, t_start=t_start,
        config={"bank_mode": bank_mode},
    )
