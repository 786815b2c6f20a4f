import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metagap.tree.objective import Objective, objective_value

PS = Objective("prec-support", K=1.0, eps=1e-9, lam=0.0)
BA = Objective("balanced-accuracy", lam=0.0)


def test_prec_support_values():
    assert PS.value(tp=10, fp=0, fn=0, pos=10, neg=5) == pytest.approx(0.9)
    assert PS.value(tp=9, fp=1, fn=1, pos=10, neg=5) == pytest.approx(0.9 - 1 / 9)
    # no true positives is heavily punished
    assert PS.value(tp=0, fp=0, fn=10, pos=10, neg=5) < -1e8


def test_balanced_accuracy_values():
    assert BA.value(tp=10, fp=0, fn=0, pos=10, neg=10) == 1.0
    assert BA.value(tp=5, fp=5, fn=5, pos=10, neg=10) == 0.5


def test_penalized_counts_leaves():
    obj = Objective("balanced-accuracy", lam=0.01)
    assert obj.penalized(fp=0, fn=0, leaves=3, pos=4, neg=4) == pytest.approx(0.97)


def test_inconsistent_counts():
    with pytest.raises(ValueError):
        objective_value(3, 0, 0, 4, 4, PS)
    with pytest.raises(ValueError):
        objective_value(4, 5, 0, 4, 4, PS)


@pytest.mark.parametrize(
    "kwargs", [{"kind": "bogus"}, {"K": -1.0}, {"eps": 0.0}, {"lam": -0.1}]
)
def test_objective_validation(kwargs):
    with pytest.raises(ValueError):
        Objective(**kwargs)


counts = st.tuples(st.integers(1, 40), st.integers(1, 40)).flatmap(
    lambda pn: st.tuples(st.just(pn[0]), st.just(pn[1]), st.integers(0, pn[0]), st.integers(0, pn[1]))
)


@given(counts, st.sampled_from([PS, BA]))
def test_monotone_in_errors(c, obj):
    pos, neg, fn, fp = c
    v = obj.value(pos - fn, fp, fn, pos, neg)
    if fn < pos:
        assert obj.value(pos - fn - 1, fp, fn + 1, pos, neg) <= v
    if fp < neg:
        assert obj.value(pos - fn, fp + 1, fn, pos, neg) <= v


@given(counts, st.integers(0, 10), st.sampled_from([PS, BA]))
def test_best_split_of_errors_bounds_every_split(c, floor, obj):
    pos, neg, fn, fp = c
    bound = obj.best_split_of_errors(fp, fn, floor, pos, neg)
    assert bound <= obj.value(pos - fn, fp, fn, pos, neg) + 1e-12
    for x in range(floor + 1):
        extra_fn = min(floor - x, pos - fn)
        if fp + x <= neg:
            v = obj.value(pos - fn - extra_fn, fp + x, fn + extra_fn, pos, neg)
            assert v <= bound + 1e-12 or math.isclose(v, bound)


def test_vectorised_values_match_scalar():
    for obj in (PS, BA):
        got = obj.values([3, 4], [1, 0], [1, 0], 4, 6)
        assert got.tolist() == pytest.approx([obj.value(3, 1, 1, 4, 6), obj.value(4, 0, 0, 4, 6)])
