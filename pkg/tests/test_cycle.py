"""Full reasoning-cycle orchestration against a live link."""

import random

import pytest

from bamswitch import CaseBase, Measurements, Model, ProfileGuard, Status, Verdict
from bamswitch.cbr import CbrEngine, SimilarityConfig, default_schema
from bamswitch.policy import ManagerGoals, Thresholds, default_policy_set

from conftest import make_link


def window(window_id=0, util=0.4, preempted=0, devolved=0, unbroken=100,
           offered=(100.0, 100.0, 100.0), blocked=0):
    return Measurements(
        window_id=window_id, t_start=window_id * 60.0, t_end=(window_id + 1) * 60.0,
        util_total=util, util_per_class=(util, util, util),
        arrivals=1000, arrivals_per_class=(400, 300, 300),
        established=1000 - blocked, blocked=blocked,
        preempted=preempted, devolved=devolved, unbroken=unbroken,
        offered_per_class=offered,
    )


def make_engine(seed=1, mode="hint"):
    thresholds = Thresholds()
    return CbrEngine(
        similarity_cfg=SimilarityConfig("nearest_neighbor", default_schema(3, 1000.0)),
        thresholds=thresholds,
        goals=ManagerGoals(),
        guard=ProfileGuard(0.2),
        rules=default_policy_set(thresholds),
        rng=random.Random(seed),
        policy_solutions=mode,
    )


def fresh_bases():
    return CaseBase(Status.POSITIVE), CaseBase(Status.NEGATIVE)


class TestRunCycle:
    def test_compliant_state_is_no_action(self):
        engine = make_engine()
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        outcome = engine.run_cycle("reactive", link, positive, negative,
                                   window(util=0.95), now=60.0)
        assert outcome.action == "no-action" and outcome.reason == "compliant"
        assert len(positive) == 0 and len(negative) == 0
        assert link.active_model is Model.MAM

    def test_empty_bases_apply_arbitrary_then_retain(self):
        engine = make_engine()
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        outcome = engine.run_cycle("reactive", link, positive, negative,
                                   window(0, util=0.4, unbroken=100), now=60.0)
        assert outcome.action == "applied"
        assert outcome.source == "arbitrary"
        assert outcome.model is Model.ATCS  # the hint from the matching rule
        assert link.active_model is Model.ATCS
        assert engine.pending is not None
        verdict, added = engine.complete_revision(
            window(1, util=0.5, unbroken=150), positive, negative)
        assert verdict is Verdict.POSITIVE and added
        assert len(positive) == 1 and engine.pending is None

    def test_retrieval_hit_applies_without_randomness(self):
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        trainer = make_engine(seed=123)
        trainer.run_cycle("reactive", link, positive, negative, window(0), now=60.0)
        trainer.complete_revision(window(1, util=0.5, unbroken=150), positive, negative)
        assert len(positive) == 1

        for seed in (1, 77, 4242):
            link.reconfigure(Model.MAM, now=100.0)
            engine = make_engine(seed=seed)
            outcome = engine.run_cycle("reactive", link, positive, negative,
                                       window(5), now=300.0)
            assert outcome.action == "applied"
            assert outcome.source == "retrieval"
            assert outcome.model is Model.ATCS
            engine.complete_revision(window(6, util=0.5, unbroken=150), positive, negative)
        assert len(positive) == 1  # identical case deduplicated every time

    def test_invalid_candidate_restarts_cycle_with_exclusion(self):
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        trainer = make_engine(seed=5)
        trainer.run_cycle("reactive", link, positive, negative, window(0), now=60.0)
        trainer.complete_revision(window(1, util=0.5, unbroken=150), positive, negative)
        # the same pair is now also rejected, so the retrieval hit is invalid
        stored = positive.entries[0]
        negative.add(type(stored)(stored.problem, stored.solution, Status.NEGATIVE, 9.0))
        link.reconfigure(Model.MAM, now=100.0)
        engine = make_engine(seed=6)
        outcome = engine.run_cycle("reactive", link, positive, negative, window(5), now=300.0)
        assert outcome.action == "applied"
        assert outcome.model is Model.RDM  # only solution left after exclusions
        assert outcome.attempts == 2

    def test_pending_case_blocks_new_cycles(self):
        engine = make_engine()
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        first = engine.run_cycle("reactive", link, positive, negative, window(0), now=60.0)
        assert first.action == "applied"
        second = engine.run_cycle("reactive", link, positive, negative, window(1), now=120.0)
        assert second.action == "no-action" and second.reason == "revision-in-flight"

    def test_negative_verdict_feeds_exclusion(self):
        engine = make_engine()
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        engine.run_cycle("reactive", link, positive, negative, window(0, unbroken=100), now=60.0)
        verdict, added = engine.complete_revision(
            window(1, util=0.4, preempted=50, unbroken=100), positive, negative)
        assert verdict is Verdict.NEGATIVE and added
        assert len(negative) == 1
        # next cycle for the same problem must not repeat the rejected model
        link.reconfigure(Model.MAM, now=100.0)
        outcome = engine.run_cycle("reactive", link, positive, negative, window(5), now=300.0)
        assert outcome.model is Model.RDM

    def test_inconclusive_discards_without_learning(self):
        engine = make_engine()
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        engine.run_cycle("reactive", link, positive, negative,
                         window(0, offered=(100.0, 100.0, 100.0)), now=60.0)
        verdict, added = engine.complete_revision(
            window(1, util=0.5, unbroken=150, offered=(160.0, 100.0, 100.0)),
            positive, negative)
        assert verdict is Verdict.INCONCLUSIVE and not added
        assert len(positive) == 0 and len(negative) == 0
        assert link.active_model is Model.ATCS  # the solution stays applied

    def test_injected_solution_bypasses_compliance(self):
        engine = make_engine()
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        outcome = engine.run_cycle("injected", link, positive, negative,
                                   window(util=0.95), now=60.0,
                                   injected_solution=Model.RDM)
        assert outcome.action == "applied"
        assert outcome.source == "injected"
        assert link.active_model is Model.RDM

    def test_off_mode_ignores_the_hint(self):
        picks = set()
        for seed in range(12):
            engine = make_engine(seed=seed, mode="off")
            link = make_link(Model.MAM)
            positive, negative = fresh_bases()
            outcome = engine.run_cycle("reactive", link, positive, negative,
                                       window(0), now=60.0)
            picks.add(outcome.model)
        assert picks == {Model.RDM, Model.ATCS}

    def test_seed_mode_preloads_rule_solutions(self):
        engine = make_engine(mode="seed")
        link = make_link(Model.MAM)
        positive, _ = fresh_bases()
        added = engine.seed_from_rules(link, positive)
        assert added == 5
        assert all(c.status is Status.POSITIVE for c in positive.entries)

    def test_every_completed_cycle_changes_exactly_one_base(self):
        engine = make_engine()
        link = make_link(Model.MAM)
        positive, negative = fresh_bases()
        for k, after in enumerate([
            window(1, util=0.5, unbroken=150),                 # positive
            window(3, util=0.4, preempted=9, unbroken=100),    # negative
        ]):
            link.reconfigure(Model.MAM, now=k * 1000.0)
            sizes = (len(positive), len(negative))
            outcome = engine.run_cycle("reactive", link, positive, negative,
                                       window(2 * k), now=k * 1000.0 + 60.0)
            assert outcome.action == "applied"
            engine.complete_revision(after, positive, negative)
            grown = (len(positive) - sizes[0]) + (len(negative) - sizes[1])
            assert grown == 1
