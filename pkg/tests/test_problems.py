import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from minimax_es.problems import (SCALABLE_DIMS, BudgetCounter, BudgetExhausted, DomainError,
                                 FilterDomainError, FilterParams, evaluate, evaluate_batch,
                                 filter_amplitude, filter_error, get_problem, known_optimum_x,
                                 make_l1, make_l2, manifest, mse, problem_ids, saddle_value,
                                 write_manifest)

FIXED = ["L1", "L2", "L3", "L4", "L5", "L6"]


def budget(cap=10_000):
    return BudgetCounter(cap)


# -- evaluate examples --------------------------------------------------------

@pytest.mark.parametrize("pid, x, y, expected", [
    ("L1", [5, 5, 5], [5, 5, 5], 0.0),
    ("L1", [0, 0, 0], [5, 5, 5], 75.0),
    ("L6", [1, 1], [3, 7], 1.0),
    ("L5", [0.5, 0.25], [0, 0], 0.25),
])
def test_evaluate_examples(pid, x, y, expected):
    b = budget()
    assert evaluate(get_problem(pid), x, y, b) == pytest.approx(expected, abs=1e-12)
    assert b.used == 1


def test_l3_value_at_optimum_is_grid_inner_max():
    p = get_problem("L3")
    ys = np.linspace(1e-9, 10, 10 ** 6)[:, None]
    grid = p.slice_y([10.0])(ys).max()
    assert p([10.0], [2.125683]) == pytest.approx(0.09780, abs=1e-5)
    assert abs(p([10.0], [2.125683]) - grid) < 1e-9


@pytest.mark.parametrize("pid, value", [("L1", 0.0), ("L6", 1.0), ("L2", 9.0)])
def test_saddle_value(pid, value):
    assert saddle_value(get_problem(pid)) == pytest.approx(value)


def test_l2_saddle_value_by_grid():
    # per coordinate: max_y min(3 - .2x + .3y, 3 + .2x - .1y), then min over x
    g = np.linspace(0, 10, 401)
    X, Y = np.meshgrid(g, g, indexing="ij")
    per = np.minimum(3 - 0.2 * X + 0.3 * Y, 3 + 0.2 * X - 0.1 * Y)
    assert 3 * per.max(axis=1).min() == pytest.approx(9.0, abs=1e-9)


@pytest.mark.parametrize("pid", FIXED)
def test_optimum_value_consistent(pid, rng):
    p = get_problem(pid)
    x = known_optimum_x(p)
    ys = [p.optimum.y] if p.optimum.y is not None else list(p.sample_y(rng, 100))
    for y in ys:
        assert abs(p(x, y) - p.optimum.value) <= 1e-9


@pytest.mark.parametrize("pid", ["L1", "L6"])
def test_saddle_inequalities(pid, rng):
    p = get_problem(pid)
    xs, ys = p.sample_x(rng, 1000), p.sample_y(rng, 1000)
    x_star = known_optimum_x(p)
    # L6 has y* = "any" for the max side; the min side needs the KKT multiplier (2/3, 2/3)
    y_star = np.array(p.optimum.y) if p.optimum.y is not None else np.array([2 / 3, 2 / 3])
    v = p(x_star, y_star)
    assert np.all(p.batch(np.tile(x_star, (1000, 1)), ys) <= v + 1e-9)
    assert np.all(v <= p.batch(xs, np.tile(y_star, (1000, 1))) + 1e-9)


@pytest.mark.parametrize("n", SCALABLE_DIMS)
@pytest.mark.parametrize("make", [make_l1, make_l2])
def test_scalable_additivity(make, n, rng):
    small, big = make(n), make(2 * n)
    x, y = small.sample_x(rng), small.sample_y(rng)
    assert big(np.concatenate([x, x]), np.concatenate([y, y])) == pytest.approx(2 * small(x, y))


# -- metering and domain ------------------------------------------------------

def test_budget_counter_exhaustion_charges_nothing():
    p, b = get_problem("L1"), BudgetCounter(3)
    evaluate_batch(p, np.full((2, 3), 5.0), np.full((2, 3), 5.0), b)
    with pytest.raises(BudgetExhausted):
        evaluate_batch(p, np.full((2, 3), 5.0), np.full((2, 3), 5.0), b)
    assert b.used == 2
    evaluate(p, [5, 5, 5], [5, 5, 5], b)
    with pytest.raises(BudgetExhausted):
        evaluate(p, [5, 5, 5], [5, 5, 5], b)
    assert b.used == b.cap == 3


def test_domain_errors():
    p, b = get_problem("L1"), budget()
    with pytest.raises(DomainError):
        evaluate(p, [11, 0, 0], [5, 5, 5], b)
    with pytest.raises(DomainError):
        evaluate(p, [1, 1], [5, 5, 5], b)
    assert b.used == 0


def test_open_lower_bound_of_l3():
    p = get_problem("L3")
    assert p.x_bounds[0, 0] == pytest.approx(1e-9)
    assert np.isfinite(p([1e-9], [1e-9]))
    with pytest.raises(DomainError):
        evaluate(p, [0.0], [1.0], budget())


def test_intervals_valid_and_read_only():
    for pid in problem_ids(include_scaled=True):
        p = get_problem(pid)
        assert np.all(p.x_bounds[:, 0] < p.x_bounds[:, 1])
        assert np.all(p.y_bounds[:, 0] < p.y_bounds[:, 1])
    with pytest.raises(ValueError):
        get_problem("L1").x_bounds[0, 0] = 3.0


def test_registry():
    assert get_problem("L1-n3") is not None and get_problem("L1-n3").id == "L1"
    assert get_problem("L2-n20").n_x == 20
    with pytest.raises(KeyError):
        get_problem("L7")
    with pytest.raises(KeyError):
        get_problem("L1-n0")


def test_manifest_roundtrip(tmp_path):
    path = write_manifest(tmp_path / "m.json")
    data = json.loads(path.read_text())
    assert [d["id"] for d in data] == problem_ids(include_scaled=True)
    filt = next(d for d in data if d["id"] == "filter")
    assert filt["n_x"] == 9 and filt["known_optimum"]["x"] is None
    assert data == manifest()


# -- mse ----------------------------------------------------------------------

@pytest.mark.parametrize("x, xs, expected", [
    ([5, 5, 5], [5, 5, 5], 0.0), ([6, 6, 6], [5, 5, 5], 1.0), ([1, 3], [0, 0], 5.0)])
def test_mse_examples(x, xs, expected):
    assert mse(x, xs) == expected


def test_mse_length_mismatch():
    with pytest.raises(ValueError):
        mse([1, 2], [1, 2, 3])


vec = arrays(np.float64, 4, elements=st.floats(-100, 100))


@given(vec, vec, st.permutations(range(4)))
def test_mse_properties(x, xs, perm):
    v = mse(x, xs)
    assert v >= 0
    assert (v == 0) == bool(np.all(x == xs)) or v < 1e-300
    assert mse(x[list(perm)], xs[list(perm)]) == pytest.approx(v)


# -- filter -------------------------------------------------------------------

@given(st.floats(0, math.pi))
def test_identity_filter_amplitude(theta):
    assert filter_amplitude(FilterParams.identity(), theta) == pytest.approx(1.0)


@given(arrays(np.float64, 8, elements=st.floats(-0.5, 0.5)), st.floats(0, math.pi))
def test_zero_gain(rest, theta):
    assert filter_amplitude(FilterParams.from_vector([0.0, *rest]), theta) == 0.0


def test_gain_two():
    z = (0.0, 0.0)
    assert filter_amplitude(FilterParams(2.0, z, z, z, z), math.pi / 2) == pytest.approx(2.0)


@pytest.mark.parametrize("psi, expected", [(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)])
def test_filter_error_identity(psi, expected):
    assert filter_error(FilterParams.identity(), psi) == pytest.approx(expected, abs=1e-12)


def test_filter_amplitude_against_complex_transfer_function(rng):
    # |H| from the second-order sections evaluated on the unit circle
    for _ in range(20):
        x = rng.uniform(-0.6, 0.6, 9)
        p = FilterParams.from_vector(x)
        theta = rng.uniform(0, math.pi)
        z = np.exp(-1j * theta)
        H = 1.0
        for k in range(2):
            H *= (1 + p.a[k] * z + p.b[k] * z * z) / (1 + p.c[k] * z + p.d[k] * z * z)
        # the gain multiplies the magnitude, so its sign is kept
        assert filter_amplitude(p, theta) == pytest.approx(p.A * abs(H), rel=1e-10)


def test_filter_domain_error():
    p = FilterParams(1.0, (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0))
    with pytest.raises(FilterDomainError):
        filter_amplitude(p, 0.0)  # 1 + 1 - 2 = 0
    with pytest.raises(DomainError):
        filter_error(FilterParams.identity(), 1.5)


def test_filter_problem_objective_matches_error(rng):
    p = get_problem("filter")
    x = rng.uniform(-0.5, 0.5, 9)
    psi = 0.3
    assert p(x, [psi]) == pytest.approx(abs(filter_error(FilterParams.from_vector(x), psi)))
    assert FilterParams.from_vector(x).to_vector().tolist() == x.tolist()
