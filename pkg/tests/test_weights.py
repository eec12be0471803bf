from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetoda.weights import (
    TraceZeroVector,
    WeightSystem,
    dot,
    kernel,
    primitive_integer,
    project_trace_zero,
    rank,
    root_vector,
    trace_zero_kernel,
)


@pytest.mark.parametrize(
    "r, pair, expected",
    [(2, (1, 2), (1, -1)), (3, (3, 2), (0, -1, 1)), (3, (1, 3), (1, 0, -1))],
)
def test_root_vector_examples(r, pair, expected):
    ws = WeightSystem(r, (pair,))
    assert tuple(root_vector(ws, *pair)) == expected


@pytest.mark.parametrize("pair", [(0, 1), (1, 4), (2, 2)])
def test_root_vector_rejects_bad_indices(pair):
    with pytest.raises((IndexError, ValueError)):
        root_vector(WeightSystem(3, ()), *pair)


@pytest.mark.parametrize(
    "active",
    [((1, 1),), ((1, 2), (1, 2)), ((0, 2),), ((1, 5),)],
)
def test_weight_system_validates_pairs(active):
    with pytest.raises((IndexError, ValueError)):
        WeightSystem(3, active)


@pytest.mark.parametrize(
    "x, expected",
    [((1, 1), (0, 0)), ((2, 0), (1, -1)), ((3, -1, -2), (3, -1, -2))],
)
def test_project_trace_zero_examples(x, expected):
    out = project_trace_zero(tuple(Fraction(v) for v in x))
    assert tuple(out) == expected
    assert out.exact


def test_trace_zero_vector_invariant():
    TraceZeroVector((Fraction(1, 3), Fraction(-1, 3)))
    TraceZeroVector((1.0, -1.0 + 1e-14))
    with pytest.raises(ValueError):
        TraceZeroVector((Fraction(1), Fraction(0)))
    with pytest.raises(ValueError):
        TraceZeroVector((1.0, -0.999))


@given(st.integers(2, 7), st.data())
def test_root_antisymmetry_and_cycle_sum(r, data):
    i = data.draw(st.integers(1, r))
    j = data.draw(st.integers(1, r).filter(lambda v: v != i))
    ws = WeightSystem(r, ())
    assert tuple(root_vector(ws, i, j)) == tuple(-v for v in root_vector(ws, j, i))
    cycle = [(k + 1, k) for k in range(1, r)] + [(1, r)]
    total = [sum(root_vector(ws, *pair)[m] for pair in cycle) for m in range(r)]
    assert total == [0] * r


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=8))
def test_project_is_idempotent_float(x):
    once = project_trace_zero(x)
    twice = project_trace_zero(once)
    assert np.allclose(once, twice, atol=1e-9)


@given(st.lists(st.fractions(max_denominator=20).filter(lambda f: abs(f) < 100), min_size=2, max_size=8))
def test_project_is_idempotent_exact(x):
    once = project_trace_zero(x)
    assert tuple(project_trace_zero(once)) == tuple(once)
    assert sum(once) == 0


def test_roots_array_and_rank():
    ws = WeightSystem(3, ((2, 1), (3, 2), (1, 3)))
    assert ws.roots().tolist() == [[-1, 1, 0], [0, -1, 1], [1, 0, -1]]
    assert rank(ws.roots().tolist()) == 2


def test_kernel_and_trace_zero_kernel():
    rows = [[1, -1, 0]]
    ker = kernel(rows, 3)
    assert len(ker) == 2
    assert all(dot(rows[0], k) == 0 for k in ker)
    tz = trace_zero_kernel(rows, 3)
    assert len(tz) == 1
    assert primitive_integer(tz[0]) in {(1, 1, -2), (-1, -1, 2)}


def test_primitive_integer():
    assert primitive_integer((Fraction(1, 2), Fraction(-1, 4), Fraction(-1, 4))) == (2, -1, -1)
    assert primitive_integer((0, 6, -6)) == (0, 1, -1)
