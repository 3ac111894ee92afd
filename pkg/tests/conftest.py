import pytest

from bamswitch import Link, Model, TrafficClass

THREE_CLASSES = [TrafficClass(0, 400), TrafficClass(1, 350), TrafficClass(2, 250)]
CAPACITY = 1000


@pytest.fixture
def classes():
    return list(THREE_CLASSES)


def make_link(model=Model.MAM, debug=True):
    return Link.for_model(list(THREE_CLASSES), CAPACITY, model, debug=debug)


def fill(link, class_index, amount, now=0.0, holding=1e9):
    decision, record = link.admit(class_index, amount, now, holding)
    assert decision.accepted, f"setup admit failed: class {class_index} amount {amount}"
    return record
