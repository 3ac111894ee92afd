"""Allocation engine: matrix presets, admission, reclaim, release, reconfigure."""

import pytest

from bamswitch import (
    ConfigurationError,
    Link,
    Model,
    Outcome,
    TrafficClass,
    VictimKind,
    make_model_matrix,
    snapshot_measurements,
)

from conftest import CAPACITY, THREE_CLASSES, fill, make_link


class TestModelMatrices:
    def test_mam_is_identity(self, classes):
        m = make_model_matrix(Model.MAM, classes)
        for b in range(3):
            for l in range(3):
                assert m.permits(b, l) == (b == l)

    def test_rdm_high_to_low_only(self, classes):
        m = make_model_matrix(Model.RDM, classes)
        assert m.permits(0, 1) and m.permits(0, 2) and m.permits(1, 2)
        assert not m.permits(2, 0) and not m.permits(2, 1) and not m.permits(1, 0)

    def test_atcs_all_true(self, classes):
        m = make_model_matrix(Model.ATCS, classes)
        assert all(m.permits(b, l) for b in range(3) for l in range(3))

    def test_unknown_model_rejected(self, classes):
        with pytest.raises(ConfigurationError):
            make_model_matrix("XYZ", classes)

    def test_own_bc_always_allowed(self):
        with pytest.raises(ConfigurationError):
            from bamswitch import SharingMatrix

            SharingMatrix(((False,),))


class TestClassValidation:
    def test_bc_sum_must_match_capacity(self):
        with pytest.raises(ConfigurationError):
            Link.for_model([TrafficClass(0, 400), TrafficClass(1, 400)], 1000, Model.MAM)

    def test_bc_positive(self):
        with pytest.raises(ConfigurationError):
            Link.for_model([TrafficClass(0, 0), TrafficClass(1, 1000)], 1000, Model.MAM)

    def test_indexes_contiguous(self):
        with pytest.raises(ConfigurationError):
            Link.for_model([TrafficClass(1, 500), TrafficClass(2, 500)], 1000, Model.MAM)


class TestAdmission:
    def test_mam_overload_blocks(self):
        link = make_link(Model.MAM)
        fill(link, 0, 390)
        decision, _ = link.admit(0, 20)
        assert decision.outcome is Outcome.BLOCKED
        assert decision.breakdown == {} and decision.victims == ()
        assert link.used[0] == 390  # blocked request leaves the ledger alone

    def test_rdm_borrows_spare_from_higher_priority(self):
        link = make_link(Model.RDM)
        fill(link, 0, 400)
        fill(link, 1, 350)
        fill(link, 2, 150)
        decision, _ = link.admit(0, 10)
        assert decision.accepted
        assert decision.breakdown == {2: 10}

    def test_atcs_low_to_high_loan(self):
        link = make_link(Model.ATCS)
        fill(link, 2, 250)
        fill(link, 1, 350)
        fill(link, 0, 350)
        decision, _ = link.admit(2, 30)
        assert decision.accepted
        assert decision.breakdown == {0: 30}

    def test_same_request_blocked_under_rdm(self):
        link = make_link(Model.RDM)
        fill(link, 2, 250)
        fill(link, 1, 350)
        fill(link, 0, 350)
        decision, _ = link.admit(2, 30)
        assert decision.outcome is Outcome.BLOCKED

    def test_own_bc_fills_before_borrowing(self):
        link = make_link(Model.ATCS)
        decision, _ = link.admit(1, 100)
        assert decision.breakdown == {1: 100}

    def test_lender_order_prefers_near_priority(self):
        link = make_link(Model.ATCS)
        fill(link, 1, 350)
        # TC1 full; next for a TC1 borrower is TC0 and TC2 at distance one,
        # tie broken toward the lower class index
        decision, _ = link.admit(1, 10)
        assert decision.breakdown == {0: 10}

    def test_request_above_capacity_blocks_without_error(self):
        link = make_link(Model.ATCS)
        decision, _ = link.admit(0, CAPACITY + 1)
        assert decision.outcome is Outcome.BLOCKED

    def test_bad_request_raises(self):
        link = make_link()
        with pytest.raises(ValueError):
            link.admit(0, 0)
        with pytest.raises(ValueError):
            link.admit(9, 10)


class TestReclaim:
    def test_owner_reclaims_loaned_bandwidth(self):
        # three TC0 LSPs of 25M each squat in BC2; a TC2 request of 80M
        # tears down the two most recent and keeps the third
        link = make_link(Model.RDM)
        fill(link, 0, 400)
        fill(link, 1, 350)
        fill(link, 2, 145)
        squatters = [fill(link, 0, 25, now=float(i)) for i in range(3)]
        decision, _ = link.admit(2, 80, now=10.0)
        assert decision.accepted
        assert decision.breakdown == {2: 80}
        assert len(decision.victims) == 2
        assert all(kind is VictimKind.PREEMPTED for _, kind in decision.victims)
        victim_ids = {lsp_id for lsp_id, _ in decision.victims}
        assert victim_ids == {squatters[2].lsp_id, squatters[1].lsp_id}
        assert link.is_active(squatters[0].lsp_id)
        assert link.counters.preempted == 2

    def test_over_reclaim_residue_stays_spare(self):
        link = make_link(Model.RDM)
        fill(link, 0, 400)
        fill(link, 1, 350)
        fill(link, 2, 145)
        for i in range(3):
            fill(link, 0, 25, now=float(i))
        link.admit(2, 76, now=10.0)
        # two whole 25M teardowns freed 50 for a 46M deficit; the 4M residue is spare
        assert link.spare(2) == 4

    def test_victim_order_lowest_priority_then_most_recent(self):
        link = make_link(Model.ATCS)
        fill(link, 2, 250)
        fill(link, 0, 400)
        tc0_loan = fill(link, 0, 20, now=1.0)   # borrows from BC1
        tc2_loan = fill(link, 2, 20, now=2.0)   # borrows from BC1
        assert tc0_loan.breakdown == {1: 20} and tc2_loan.breakdown == {1: 20}
        decision, _ = link.admit(1, 340, now=3.0)
        assert decision.accepted
        # TC0 (rank 0) goes first even though TC2's loan is newer
        assert decision.victims[0] == (tc0_loan.lsp_id, VictimKind.PREEMPTED)
        assert decision.victims[1] == (tc2_loan.lsp_id, VictimKind.DEVOLVED)

    def test_reclaim_never_creates_room_in_other_bcs(self):
        # TC1's BC is full of TC1 traffic; TC2 may not preempt inside BC1
        link = make_link(Model.RDM)
        fill(link, 1, 350)
        fill(link, 2, 250)
        decision, _ = link.admit(2, 10)
        assert decision.outcome is Outcome.BLOCKED
        assert link.counters.preempted == 0

    def test_blocked_reclaim_leaves_state_untouched(self):
        link = make_link(Model.RDM)
        fill(link, 0, 400)
        fill(link, 1, 350)
        fill(link, 2, 200)
        fill(link, 0, 50, now=1.0)  # loan of 50 in BC2
        before_used = dict(link.used)
        before_active = set(link.active)
        decision, _ = link.admit(2, 80, now=2.0)  # spare 0 + reclaimable 50 < 80
        assert decision.outcome is Outcome.BLOCKED
        assert link.used == before_used
        assert set(link.active) == before_active


class TestRelease:
    def test_release_only_lsp_empties_link(self):
        link = make_link(Model.ATCS)
        record = fill(link, 0, 100)
        link.release(record.lsp_id, completed=True, now=5.0)
        assert all(v == 0 for v in link.used.values())
        assert link.counters.unbroken == 1

    def test_release_completed_increments_unbroken_once(self):
        link = make_link()
        record = fill(link, 1, 50)
        link.release(record.lsp_id, completed=True)
        assert link.counters.unbroken == 1
        link.release(record.lsp_id, completed=True)  # already gone: no-op
        assert link.counters.unbroken == 1

    def test_release_victimized_does_not_count_unbroken(self):
        link = make_link()
        record = fill(link, 2, 50)
        link.release(record.lsp_id, completed=False)
        assert link.counters.unbroken == 0

    def test_unknown_release_warns(self):
        link = make_link()
        link.release(999, completed=True, now=1.0)
        assert link.events[-1].kind == "warning"


class TestReconfigure:
    def test_idempotent_reconfigure_logs_event_only(self):
        link = make_link(Model.MAM)
        fill(link, 0, 100)
        used = dict(link.used)
        link.reconfigure(Model.MAM, now=1.0)
        assert link.used == used
        assert link.active_model is Model.MAM
        assert link.events[-1].kind == "reconfigure"

    def test_grandfathered_loan_survives_switch_then_devolves(self):
        # ATCS -> MAM with TC2 borrowing 30 from BC0: the loan persists,
        # and a later TC0 request reclaims it through the devolved path
        link = make_link(Model.ATCS)
        fill(link, 0, 370)
        fill(link, 1, 350)
        fill(link, 2, 250)
        loan = fill(link, 2, 30, now=1.0)
        assert loan.breakdown == {0: 30}
        link.reconfigure(Model.MAM, now=2.0)
        assert link.is_active(loan.lsp_id)
        decision, _ = link.admit(0, 20, now=3.0)
        assert decision.accepted
        assert decision.victims == ((loan.lsp_id, VictimKind.DEVOLVED),)
        assert link.counters.devolved == 1

    def test_mam_to_atcs_enables_loans(self):
        link = make_link(Model.MAM)
        fill(link, 0, 400)
        blocked, _ = link.admit(0, 10)
        assert blocked.outcome is Outcome.BLOCKED
        link.reconfigure(Model.ATCS, now=1.0)
        decision, _ = link.admit(0, 10, now=2.0)
        assert decision.accepted
        assert decision.breakdown == {1: 10}


class TestSnapshot:
    def test_empty_link_snapshot(self):
        link = make_link()
        m = snapshot_measurements(link, link.counters.copy())
        assert m.util_total == 0.0
        assert m.util_per_class == (0.0, 0.0, 0.0)
        assert m.preempted == m.devolved == m.blocked == m.unbroken == 0

    def test_single_lsp_utilization(self):
        link = make_link()
        fill(link, 0, 400)
        m = snapshot_measurements(link, link.counters.copy())
        assert m.util_total == pytest.approx(0.4)
        assert m.util_per_class[0] == pytest.approx(1.0)


def test_breakdown_sums_to_bandwidth_everywhere():
    link = make_link(Model.ATCS)
    for class_index, amount in [(0, 380), (1, 300), (2, 240), (0, 50), (2, 30)]:
        decision, record = link.admit(class_index, amount)
        assert decision.accepted
        assert sum(record.breakdown.values()) == amount
        for lender in record.breakdown:
            assert link.matrix.permits(class_index, lender)
    link.check_ledger()
