import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from storalloc.allocation import (AllocationVector, make_custom, make_minimal, make_symmetric,
                                  parse_strategy, validate)
from storalloc.errors import InvalidParameterError


@pytest.mark.parametrize("K,T,expected", [
    (6, 2, (1 / 3,) * 6),
    (1, 5, (5.0,)),
    (4, 2, (0.5,) * 4),
])
def test_symmetric_examples(K, T, expected):
    a = make_symmetric(K, T)
    assert a.sizes == pytest.approx(expected, abs=1e-15)
    assert a.budget == T


@pytest.mark.parametrize("T", [0, -1.0])
def test_symmetric_rejects_nonpositive_budget(T):
    with pytest.raises(InvalidParameterError):
        make_symmetric(3, T)


@pytest.mark.parametrize("K,T,expected", [
    (6, 2.25, (1, 1, 0.25, 0, 0, 0)),
    (6, 2, (1, 1, 0, 0, 0, 0)),
    (3, 1, (1, 0, 0)),
])
def test_minimal_examples(K, T, expected):
    assert make_minimal(K, T).sizes == tuple(float(x) for x in expected)


def test_minimal_needs_enough_nodes():
    with pytest.raises(InvalidParameterError):
        make_minimal(2, 2.5)


def test_validate_examples():
    assert validate(make_custom([1, 1, 0.25, 0, 0, 0]), 6, 2.25) == []
    assert any("negative" in v for v in validate([-0.1, 1], 2, 1))
    assert any("sum exceeds" in v for v in validate([0.8, 0.8], 2, 1.5))
    assert any("length" in v for v in validate([0.5, 0.5], 3, 1))


def test_validate_never_raises_on_garbage():
    assert validate([math.nan, 1], 2, 1)
    assert validate([], 2, 1)


def test_constructor_rejects_invalid():
    with pytest.raises(InvalidParameterError):
        AllocationVector((0.8, 0.8), 1.5)
    with pytest.raises(InvalidParameterError):
        AllocationVector((-0.1, 1.0), 2.0)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 64), st.floats(1e-6, 16.0))
def test_symmetric_always_valid(K, T):
    a = make_symmetric(K, T)
    assert validate(a, K, T) == []
    assert abs(a.total - T) <= 1e-12 * T


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 40), st.floats(0.01, 16.0))
def test_minimal_structure(K, T):
    if K < math.ceil(T):
        with pytest.raises(InvalidParameterError):
            make_minimal(K, T)
        return
    a = make_minimal(K, T)
    assert sum(1 for x in a.sizes if x == 1.0) == math.floor(T)
    # completeness carries a 1e-12 tolerance, so T just under an integer rounds up
    assert a.complete_nodes == math.floor(T + 1e-12)
    assert math.fsum(a.sizes) == pytest.approx(T, abs=1e-12)
    assert validate(a, K, T) == []


def test_json_round_trip():
    a = make_minimal(6, 2.25)
    b = AllocationVector.from_json(a.to_json(), budget=2.25)
    assert b == a
    assert json.loads(a.to_json()) == [1, 1, 0.25, 0, 0, 0]


def test_canonical_sorts_descending():
    assert make_custom([0, 0.5, 1], 1.5).canonical().sizes == (1.0, 0.5, 0.0)


@pytest.mark.parametrize("text,label,sizes", [
    ("symmetric", "symmetric", (0.5,) * 4),
    ("minimal", "minimal", (1.0, 1.0, 0.0, 0.0)),
    ("custom=[1, 0.5, 0.5, 0]", "custom[1,0.5,0.5,0]", (1.0, 0.5, 0.5, 0.0)),
])
def test_parse_strategy(text, label, sizes):
    got_label, alloc = parse_strategy(text, 4, 2)
    assert got_label == label
    assert alloc.sizes == sizes


@pytest.mark.parametrize("text", ["bogus", "custom=[1,1,1,1]", "custom=notjson", "custom=[1,1]"])
def test_parse_strategy_rejects(text):
    with pytest.raises(InvalidParameterError):
        parse_strategy(text, 4, 2)
