import math

import numpy as np
import pytest

from mdlearn.core import ConfigError, Instance, ValidationError, canonical_json
from mdlearn.instances import (
    custom_schedule,
    make_random_instance,
    vc_rademacher_schedule,
)
from mdlearn.learners import (
    erm,
    instance_opt,
    multi_loss_hyperparams,
    paper_hyperparams,
    rad_t1,
    run_mdl_hedge_rad,
    run_mdl_hedge_vc,
    run_mlmdl_hedge,
    run_uniform_baseline,
)
from mdlearn.sampling import SampleBank, SamplerState

FAST = dict(eps=0.2, delta=0.2, scale=(1.0, 1e-3, 1e-3))


def point_mass_instance(means, R=1):
    """Deterministic losses: every draw equals the mean."""
    means = np.asarray(means, dtype=float)
    if means.ndim == 2:
        means = means[None, :, :]
    Rr, H, k = means.shape
    tables = tuple(
        tuple(tuple(((float(means[l, h, i]), 1.0),) for i in range(k))
              for h in range(H))
        for l in range(Rr)
    )
    return Instance(k=k, hypotheses=tuple(f"h{j}" for j in range(H)),
                    losses=tables, R=Rr)


class TestPaperHyperparams:
    def test_eta_value(self):
        hp = paper_hyperparams(0.1, 0.1, k=4, d=3)
        assert hp.eta == pytest.approx(0.001, abs=1e-15)
        assert hp.eps1 == pytest.approx(0.001, abs=1e-15)

    def test_round_count_printed_formula(self):
        hp = paper_hyperparams(0.1, 0.1, k=10, d=3)
        # 20000 * ln(100) / 0.01, evaluated directly
        assert hp.T == 9_210_341

    def test_linear_scaling_exact(self):
        base = paper_hyperparams(0.1, 0.1, k=10, d=3)
        scaled = paper_hyperparams(0.1, 0.1, k=10, d=3, scale=(1.0, 1e-3, 1e-3))
        assert scaled.T == math.ceil(1e-3 * 20000 * math.log(100) / 0.01)
        assert scaled.T1 == math.ceil(base.T1 * 1e-3) or \
            abs(scaled.T1 - 1e-3 * base.T1) <= 1.0
        assert scaled.eta == base.eta

    def test_proof_variant_larger(self):
        alg = paper_hyperparams(0.1, 0.1, k=4, d=3)
        prf = paper_hyperparams(0.1, 0.1, k=4, d=3, t_formula="proof")
        assert prf.T > alg.T

    def test_log_base_override(self):
        nat = paper_hyperparams(0.1, 0.1, k=10, d=3)
        b2 = paper_hyperparams(0.1, 0.1, k=10, d=3, log_base=2.0)
        assert b2.T == math.ceil(20000 * math.log2(100) / 0.01)
        assert b2.T > nat.T

    def test_validation(self):
        with pytest.raises(ValidationError):
            paper_hyperparams(1.5, 0.1, k=1, d=1)
        with pytest.raises(ValidationError):
            paper_hyperparams(0.1, 0.1, k=0, d=1)
        with pytest.raises(ValidationError):
            paper_hyperparams(0.1, 0.1, k=1, d=1, scale=(1.0, 0.0, 1.0))

    def test_multi_loss_constants(self):
        hp = multi_loss_hyperparams(0.1, 0.1, k=4, d=3, R=3)
        assert hp.T == math.ceil(20000 * math.log(4 * 3 / (0.1 * 0.1)) / 0.01)
        eps1 = 0.001
        bracket = (4 * math.log(4 * 3 / eps1)      # k log(kR/eps1)
                   + 3 * math.log(4 * 3 / eps1)    # d log(kd/eps1), kd = kR = 12 here
                   + math.log(10.0))
        assert hp.T1 == math.ceil(40000 * bracket / eps1**2)


class TestRadT1:
    def test_zero_schedule_hits_floor(self):
        sched = custom_schedule([(1, 0.0)])
        eps1, delta, k = 0.01, 0.1, 2
        floor = math.ceil(4000 * (k * math.log(k / eps1) + math.log(10.0)) / eps1**2)
        assert rad_t1(eps1, delta, k, sched) == floor

    def test_never_reaching_schedule_raises(self):
        sched = custom_schedule([(1, 1.0)])
        with pytest.raises(ConfigError):
            rad_t1(0.01, 0.1, 2, sched)

    def test_vc_schedule_binding(self):
        sched = vc_rademacher_schedule(4)
        eps1 = 0.01
        t1 = rad_t1(eps1, 0.1, 2, sched)
        assert sched(t1) <= eps1 / 4800
        assert sched(t1 - 1) > eps1 / 4800

    def test_scale_applies_after_search(self):
        sched = vc_rademacher_schedule(4)
        full = rad_t1(0.01, 0.1, 2, sched)
        tenth = rad_t1(0.01, 0.1, 2, sched, scale_t1=0.1)
        assert tenth == math.ceil(0.1 * full)


class TestErm:
    def test_direct_argmin(self):
        inst = point_mass_instance(np.array([[0.2], [0.1]]))
        sampler = SamplerState(0, 1)
        bank = SampleBank(inst)
        bank.ensure(0, 3, sampler)
        assert erm(bank, [1.0]) == "h1"

    def test_tie_breaks_to_lowest_index(self):
        inst = point_mass_instance(np.array([[0.3], [0.3], [0.3]]))
        sampler = SamplerState(0, 1)
        bank = SampleBank(inst)
        bank.ensure(0, 2, sampler)
        assert erm(bank, [1.0]) == "h0"

    def test_matches_brute_force_scan(self):
        inst = make_random_instance(k=3, H=5, seed=21)
        sampler = SamplerState(4, 3)
        bank = SampleBank(inst)
        for i in range(3):
            bank.ensure(i, 40, sampler)
        w = np.array([0.2, 0.5, 0.3])
        from mdlearn.sampling import empirical_weighted_loss
        scores = [empirical_weighted_loss(bank, w, h) for h in inst.hypotheses]
        assert erm(bank, w) == inst.hypotheses[int(np.argmin(scores))]

    def test_approximate_mode(self):
        inst = point_mass_instance(np.array([[0.100], [0.095]]))
        sampler = SamplerState(0, 1)
        bank = SampleBank(inst)
        bank.ensure(0, 2, sampler)
        assert erm(bank, [1.0]) == "h1"
        assert erm(bank, [1.0], eps1=0.01) == "h0"  # within eps1 of the minimum


class TestHedgeVcDriver:
    def test_realizable_instance(self):
        # one hypothesis has loss 0 everywhere; ERM finds it immediately
        means = np.array([[0.5, 0.6], [0.0, 0.0], [0.7, 0.2]])
        inst = point_mass_instance(means)
        rep = run_mdl_hedge_vc(inst, **FAST, seed=0)
        assert rep.gap <= 0.2
        assert rep.final_hypothesis.support == ("h1",)

    def test_output_weights_are_round_fractions(self):
        inst = make_random_instance(k=2, H=8, seed=1)
        rep = run_mdl_hedge_vc(inst, **FAST, seed=3)
        for w in rep.final_hypothesis.weights:
            assert (w * rep.rounds) == pytest.approx(round(w * rep.rounds), abs=1e-9)
        assert sum(rep.final_hypothesis.weights) == pytest.approx(1.0, abs=1e-12)

    def test_budget_identity_and_streams(self):
        inst = make_random_instance(k=3, H=8, seed=2)
        rep = run_mdl_hedge_vc(inst, **FAST, seed=1)
        assert rep.budget_identity_holds()
        fresh_by_stream = sum(v for (p, _), v in rep.stream_counters.items()
                              if p == "fresh")
        assert rep.samples_fresh == fresh_by_stream
        # fresh draws happen every round for every distribution
        assert rep.samples_fresh >= rep.rounds * inst.k

    def test_trigger_count_bound(self):
        inst = make_random_instance(k=4, H=8, seed=3)
        rep = run_mdl_hedge_vc(inst, **FAST, seed=2)
        k, T = inst.k, rep.rounds
        assert 1 <= rep.trigger_count <= k * math.ceil(math.log2(k * T)) + k

    def test_schedule_invariant(self):
        # after every round, bank counts satisfy n_i >= T1 * w_i / 2
        inst = make_random_instance(k=3, H=8, seed=4)
        rep = run_mdl_hedge_vc(inst, **FAST, seed=5)
        T1 = rep.hyper["T1"]
        bank_per_stream = {i: v for (p, i), v in rep.stream_counters.items()
                           if p == "bank"}
        for t in range(rep.trajectory.weights.shape[0]):
            w = rep.trajectory.weights[t]
            for i in range(inst.k):
                assert bank_per_stream[i] >= T1 * w[i] / 2 - 1

    def test_w_bar_monotone_and_consistent(self):
        inst = make_random_instance(k=2, H=8, seed=5)
        rep = run_mdl_hedge_vc(inst, **FAST, seed=6)
        assert np.all(rep.trajectory.running_max >= rep.trajectory.weights.max(axis=0) - 1e-15)

    def test_deterministic_reports(self):
        inst = make_random_instance(k=2, H=8, seed=6)
        docs = []
        for _ in range(2):
            rep = run_mdl_hedge_vc(inst, **FAST, seed=9)
            doc = rep.to_dict()
            doc["wallclock_ms"] = 0.0  # timing is the one nondeterministic field
            docs.append(canonical_json(doc))
        assert docs[0] == docs[1]

    def test_rejects_multi_loss_instance(self):
        inst = make_random_instance(k=2, H=4, seed=7, R=2)
        with pytest.raises(ValidationError):
            run_mdl_hedge_vc(inst, **FAST, seed=0)

    def test_round_structure_streams(self):
        # bank draws only grow at triggers; fresh draws grow every round
        inst = make_random_instance(k=2, H=8, seed=8)
        rep = run_mdl_hedge_vc(inst, **FAST, seed=11)
        batches = np.ceil(inst.k * rep.trajectory.running_max - 1e-12).sum()
        assert rep.samples_fresh <= rep.rounds * batches


class TestHedgeRadDriver:
    def test_smoke_and_identity(self):
        inst = make_random_instance(k=2, H=8, seed=9)
        sched = vc_rademacher_schedule(inst.vc_dim_proxy)
        rep = run_mdl_hedge_rad(inst, schedule=sched, **FAST, seed=0)
        assert rep.budget_identity_holds()
        assert rep.samples_rad_initial == 2 * math.ceil(12 * math.log(4))
        assert rep.gap <= 0.2

    def test_zero_schedule_t1_equals_floor(self):
        inst = make_random_instance(k=2, H=4, seed=10)
        sched = custom_schedule([(1, 0.0)])
        rep = run_mdl_hedge_rad(inst, schedule=sched, **FAST, seed=0)
        eps1 = 0.2 / 100
        floor = math.ceil(4000 * (2 * math.log(2 / eps1) + math.log(5.0)) / eps1**2)
        assert rep.hyper["T1"] == math.ceil(1e-3 * floor)

    def test_unreachable_schedule_is_config_error(self):
        inst = make_random_instance(k=2, H=4, seed=10)
        sched = custom_schedule([(1, 0.5)])
        with pytest.raises(ConfigError):
            run_mdl_hedge_rad(inst, schedule=sched, **FAST, seed=0)

    def test_determinism(self):
        inst = make_random_instance(k=2, H=8, seed=11)
        sched = vc_rademacher_schedule(inst.vc_dim_proxy)
        r1 = run_mdl_hedge_rad(inst, schedule=sched, **FAST, seed=4)
        r2 = run_mdl_hedge_rad(inst, schedule=sched, **FAST, seed=4)
        assert r1.gap == r2.gap
        assert r1.samples_total == r2.samples_total


class TestMultiLossDriver:
    def test_rejects_single_loss(self):
        inst = make_random_instance(k=2, H=4, seed=12)
        with pytest.raises(ValidationError):
            run_mlmdl_hedge(inst, **FAST, seed=0)

    def test_smoke_r2(self):
        inst = make_random_instance(k=2, H=8, seed=13, R=2)
        rep = run_mlmdl_hedge(inst, **FAST, seed=0)
        assert rep.budget_identity_holds()
        assert rep.gap <= 0.2
        assert rep.R == 2

    def test_duplicated_loss_statistically_matches_single(self):
        # same tables duplicated as a second loss: gap distributions overlap
        single = make_random_instance(k=2, H=8, seed=14)
        doubled = Instance(k=2, hypotheses=single.hypotheses,
                           losses=(single.losses[0], single.losses[0]),
                           vc_dim_proxy=single.vc_dim_proxy, R=2)
        g1 = [run_mdl_hedge_vc(single, **FAST, seed=s).gap for s in range(8)]
        g2 = [run_mlmdl_hedge(doubled, **FAST, seed=s).gap for s in range(8)]
        lo1, hi1 = min(g1), max(g1)
        lo2, hi2 = min(g2), max(g2)
        assert max(lo1, lo2) <= min(hi1, hi2) + 0.02  # overlapping ranges

    def test_fresh_batch_shared_across_losses(self):
        inst = make_random_instance(k=2, H=4, seed=15, R=3)
        rep = run_mlmdl_hedge(inst, **FAST, seed=1)
        # one batch per distribution per round, not one per (distribution, loss)
        assert rep.samples_fresh <= rep.rounds * inst.k * inst.k


class TestUniformBaseline:
    def test_budget_floor_smoke(self):
        inst = make_random_instance(k=3, H=4, seed=16)
        rep = run_uniform_baseline(inst, 3, seed=0)
        assert rep.samples_total == 3
        assert rep.final_hypothesis.support[0] in inst.hypotheses

    def test_deterministic_instance_finds_pure_minimax(self):
        means = np.array([[0.5, 0.1], [0.2, 0.3], [0.9, 0.0]])
        inst = point_mass_instance(means)
        rep = run_uniform_baseline(inst, 10, seed=0)
        assert rep.final_hypothesis.support == ("h1",)
        assert rep.gap == pytest.approx(0.3 - instance_opt(inst), abs=1e-6)

    def test_budget_validation(self):
        inst = make_random_instance(k=3, H=4, seed=17)
        with pytest.raises(ValidationError):
            run_uniform_baseline(inst, 2, seed=0)
