import heapq

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minimax_es.mmde import (ConfigError, HeapEntry, MmdeConfig, bottom_boost_refine, de_variation,
                             is_heap, run_mmde)
from minimax_es.problems import BudgetCounter, MinimaxProblem, Optimum, get_problem


def quad_problem():
    """min_x max_y over [0,1]: L = -(y - x)^2 + x, inner max x at y = x."""
    return MinimaxProblem("quad", 1, 1, np.array([[0.0, 1.0]]), np.array([[0.0, 1.0]]),
                          lambda X, Y: -(Y[:, 0] - X[:, 0]) ** 2 + X[:, 0], Optimum((0.0,), (0.0,), 0.0))


def test_de_f_zero_full_crossover_gives_base(rng):
    pop = rng.random((6, 3))
    trials = de_variation(pop, 0.0, 1.0, rng)
    for t in trials:
        assert any(np.array_equal(t, p) for p in pop)


def test_de_cr_zero_changes_one_coordinate(rng):
    pop = rng.random((8, 5))
    trials = de_variation(pop, 0.7, 0.0, rng)
    assert np.all((trials != pop).sum(axis=1) <= 1)


def test_de_identical_members(rng):
    pop = np.tile([0.3, 0.6], (5, 1))
    assert np.array_equal(de_variation(pop, 0.9, 0.5, rng), pop)


def test_de_small_population(rng):
    with pytest.raises(ConfigError):
        de_variation(np.zeros((3, 2)), 0.5, 0.5, rng)


@given(st.integers(0, 2 ** 31))
def test_de_clamps(seed):
    rng = np.random.default_rng(seed)
    pop = rng.random((6, 2))
    out = de_variation(pop, 1.0, 1.0, rng, np.array([[0.0, 1.0]] * 2))
    assert np.all((out >= 0) & (out <= 1))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
def test_is_heap_matches_heapq(values):
    heap = [HeapEntry(np.zeros(1), v, np.zeros(1)) for v in values]
    heapq.heapify(heap)
    assert is_heap(heap)
    heap.sort(key=lambda e: -e.worst_case_estimate)
    assert is_heap(heap) == all(heap[i].worst_case_estimate <= heap[j].worst_case_estimate
                                for j in range(1, len(heap)) for i in [(j - 1) // 2])


def test_single_entry_refines_to_grid_max(rng):
    p = get_problem("L4")
    x = np.array([7.044146])
    entry = HeapEntry(x, -np.inf, np.array([5.0]))
    heap = bottom_boost_refine([entry], p, BudgetCounter(10_000), 38, rng, Ks=190)
    grid = p.slice_y(x)(np.linspace(0, 10, 10 ** 6)[:, None]).max()
    assert heap[0].refinement_evals == 190
    assert abs(heap[0].worst_case_estimate - grid) < 1e-2


def test_better_candidate_becomes_incumbent(rng):
    p = quad_problem()
    # both estimates start optimistic; B (x=0.9) looks better until refined
    a = HeapEntry(np.array([0.2]), 0.1, np.array([0.9]))
    b = HeapEntry(np.array([0.9]), -0.5, np.array([0.0]))
    heap = [a, b]
    heapq.heapify(heap)
    bottom_boost_refine(heap, p, BudgetCounter(10_000), 38, rng, Ks=190)
    assert heap[0] is a and is_heap(heap)
    assert b.worst_case_estimate > a.worst_case_estimate
    assert a.worst_case_estimate == pytest.approx(0.2, abs=1e-6)


def test_refinement_monotone_and_budget_stop(rng):
    p = get_problem("L3")
    entries = [HeapEntry(x, v, p.sample_y(rng)) for x, v in zip(p.sample_x(rng, 5), [0.0] * 5)]
    before = {e.uid: e.worst_case_estimate for e in entries}
    heap = list(entries)
    heapq.heapify(heap)
    b = BudgetCounter(100)
    bottom_boost_refine(heap, p, b, 38, rng, Ks=190)
    assert b.used == 100 and is_heap(heap)
    assert all(e.worst_case_estimate >= before[e.uid] for e in entries)


def test_unlimited_refinement_finds_brute_force_minimax(rng):
    p = quad_problem()
    xs = np.array([[0.8], [0.1], [0.5], [0.3], [0.65]])
    heap = [HeapEntry(x, -np.inf, np.array([1.0])) for x in xs]
    heapq.heapify(heap)
    bottom_boost_refine(heap, p, BudgetCounter(10 ** 6), 38, rng, Ks=190)
    grid = np.linspace(0, 1, 10_001)[:, None]
    brute = xs[np.argmin([p.slice_y(x)(grid).max() for x in xs])]
    assert np.array_equal(heap[0].x, brute)


def test_run_deterministic_and_exact_budget():
    p = get_problem("L5")
    a = run_mmde(p, MmdeConfig(4000, seed=9))
    b = run_mmde(p, MmdeConfig(4000, seed=9))
    assert a.to_dict(with_history=True) == b.to_dict(with_history=True)
    assert a.evaluations == 4000


def test_config_validation():
    with pytest.raises(ConfigError):
        MmdeConfig(1000, population_size=3)
    with pytest.raises(ConfigError):
        MmdeConfig(1000, F=1.5)
    with pytest.raises(ConfigError):
        MmdeConfig(50)
