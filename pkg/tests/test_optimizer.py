import itertools

import pytest

from storalloc.allocation import make_symmetric
from storalloc.config import SystemConfig
from storalloc.errors import InvalidParameterError, SizeLimitError
from storalloc.optimizer import (IntractableGridError, best_allocation, count_allocations,
                                 enumerate_allocations, rank_allocations, winner_margin)


def brute_force_classes(K, units):
    return {tuple(sorted(c, reverse=True))
            for c in itertools.product(range(units + 1), repeat=K) if sum(c) <= units}


def test_two_nodes_half_step():
    got = [a.sizes for a in enumerate_allocations(2, 1, 0.5)]
    assert got == [(1.0, 0.0), (0.5, 0.5), (0.5, 0.0), (0.0, 0.0)]


def test_one_node_unit_step():
    assert [a.sizes for a in enumerate_allocations(1, 1, 1)] == [(1.0,), (0.0,)]


@pytest.mark.parametrize("K,T,step", [(3, 1.5, 0.25), (2, 1, 0.5), (4, 2, 0.5), (5, 1, 0.2),
                                      (3, 3, 1), (6, 2, 1 / 3)])
def test_count_matches_brute_force(K, T, step):
    units = round(T / step)
    expected = brute_force_classes(K, units)
    got = enumerate_allocations(K, T, step)
    assert len(got) == len(expected) == count_allocations(K, T, step)
    assert {tuple(round(a / step) for a in c.sizes) for c in got} == expected


def test_three_node_grid_has_23_classes():
    assert len(enumerate_allocations(3, 1.5, 0.25)) == 23


def test_step_must_divide_budget():
    with pytest.raises(InvalidParameterError):
        enumerate_allocations(3, 1.5, 0.4)


def test_grid_guard():
    with pytest.raises(IntractableGridError):
        enumerate_allocations(20, 10, 0.05)
    assert issubclass(IntractableGridError, SizeLimitError)


@pytest.mark.parametrize("T", [1.0, 2.0, 3.5])
def test_single_node_keeps_one_unit(T):
    cfg = SystemConfig(1, T, 1, 3.0, seed=4)
    alloc, est = best_allocation(1, T, 0.5, cfg, 20_000)
    assert alloc.sizes == (1.0,)


def test_ranking_invariants():
    cfg = SystemConfig.from_db(3, 1.5, 1, 10.0, seed=8)
    ranked = rank_allocations(enumerate_allocations(3, 1.5, 0.25), cfg, 50_000)
    best = ranked[0]
    assert best.diff_vs_best == 0.0
    for r in ranked[1:]:
        # no silent non-minimality
        assert best.estimate.p_hat <= r.estimate.p_hat + 2 * r.std_err_vs_best + 1e-15
    assert winner_margin(ranked) >= 0


def test_symmetric_wins_above_crossing():
    cfg = SystemConfig.from_db(6, 2, 1, 10.0, seed=20160401)
    ranked = rank_allocations(enumerate_allocations(6, 2, 1 / 6), cfg, 50_000)
    assert ranked[0].allocation.sizes == pytest.approx(make_symmetric(6, 2).sizes)
