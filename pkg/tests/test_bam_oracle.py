"""Admission outcomes checked against an independent brute-force oracle.

The oracle enumerates every subset of the borrowers squatting in the
requesting class's BC and asks whether any teardown choice leaves enough
permitted spare; it shares no code with the engine's greedy path.
"""

import random
from itertools import combinations

from bamswitch import Link, Model, TrafficClass

MODELS = (Model.MAM, Model.RDM, Model.ATCS)


def oracle_accepts(link: Link, class_index: int, bandwidth: int) -> bool:
    permitted = [l for l in range(len(link.classes)) if link.matrix.permits(class_index, l)]
    candidates = [
        lsp for lsp in link.active.values()
        if lsp.class_index != class_index and lsp.breakdown.get(class_index, 0) > 0
    ]
    for r in range(len(candidates) + 1):
        for subset in combinations(candidates, r):
            spare = {l: link.bc(l) - link.used[l] for l in range(len(link.classes))}
            for lsp in subset:
                for lender, amount in lsp.breakdown.items():
                    spare[lender] += amount
            if sum(spare[l] for l in permitted) >= bandwidth:
                return True
    return False


def random_link(rng: random.Random) -> Link:
    n = rng.randint(1, 3)
    capacity = rng.randint(n, 30)
    cuts = sorted(rng.sample(range(1, capacity), n - 1)) if n > 1 else []
    bcs = [b - a for a, b in zip([0] + cuts, cuts + [capacity])]
    classes = [TrafficClass(i, bc) for i, bc in enumerate(bcs)]
    return Link.for_model(classes, capacity, rng.choice(MODELS), debug=True)


def run_micro_instance(rng: random.Random) -> int:
    """Replay a short op sequence, checking every admission against the oracle."""
    link = random_link(rng)
    n = len(link.classes)
    checks = 0
    for step in range(rng.randint(2, 12)):
        roll = rng.random()
        if roll < 0.6 and len(link.active) < 6:
            class_index = rng.randrange(n)
            bandwidth = rng.randint(1, 10)
            expected = oracle_accepts(link, class_index, bandwidth)
            before_used = dict(link.used)
            before_active = set(link.active)
            decision, _ = link.admit(class_index, bandwidth, now=float(step))
            assert decision.accepted == expected, (
                f"engine {decision.outcome} but oracle says accepted={expected} "
                f"for class {class_index} bw {bandwidth} on {link.active_model} "
                f"used={before_used} active={before_active}"
            )
            if not decision.accepted:
                assert link.used == before_used
                assert set(link.active) == before_active
            checks += 1
        elif roll < 0.8 and link.active:
            lsp_id = rng.choice(sorted(link.active))
            link.release(lsp_id, completed=bool(rng.getrandbits(1)), now=float(step))
        else:
            link.reconfigure(rng.choice(MODELS), now=float(step))
    return checks


def test_oracle_equivalence_sample():
    rng = random.Random(20240917)
    total_checks = 0
    for _ in range(1500):
        total_checks += run_micro_instance(rng)
    assert total_checks > 3000  # the sample actually exercised admissions


def test_oracle_agrees_on_reclaim_scenario():
    link = Link.for_model(
        [TrafficClass(0, 8), TrafficClass(1, 7), TrafficClass(2, 5)], 20, Model.RDM, debug=True
    )
    for class_index, amount in [(0, 8), (1, 7), (2, 1)]:
        assert link.admit(class_index, amount)[0].accepted
    assert link.admit(0, 2)[0].accepted  # loan lands in BC2
    assert oracle_accepts(link, 2, 4)    # spare 2 plus the reclaimed loan covers it
    decision, _ = link.admit(2, 4)
    assert decision.accepted and len(decision.victims) == 1
