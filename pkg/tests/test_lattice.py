from hypothesis import given, strategies as st

from unifield.lattice import (
    Box,
    Site,
    external_boundary,
    increasing_order,
    internal_boundary,
    order_key,
    parents_of,
)

regions = st.frozensets(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), max_size=25)


def test_parents():
    assert set(parents_of((3, 2))) == {(2, 2), (3, 1)}
    assert set(parents_of((1, 1))) == {(0, 1), (1, 0)}
    assert set(parents_of((0, 0))) == {(-1, 0), (0, -1)}


def test_external_boundary_examples():
    assert external_boundary(Box(2, 2).region) == {(1, 0), (2, 0), (0, 1), (0, 2)}
    assert external_boundary({(1, 2)}) == {(0, 2), (1, 1)}
    assert external_boundary(set()) == frozenset()


def test_internal_boundary_examples():
    assert internal_boundary(Box(2, 2).region) == {(1, 1), (1, 2), (2, 1)}
    assert internal_boundary({(1, 2)}) == {(1, 2)}
    assert internal_boundary(Box(3, 1).region) == {(1, 1), (2, 1), (3, 1)}


def test_box_internal_boundary_order():
    # left column first, then the bottom row
    assert Box(3, 2).internal_boundary() == [(1, 1), (1, 2), (2, 1), (3, 1)]
    assert set(Box(5, 4).internal_boundary()) == internal_boundary(Box(5, 4).region)


def test_increasing_order_examples():
    assert increasing_order(Box(2, 2).region) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert increasing_order({(0, 2), (1, 1), (1, 2)}) == [(0, 2), (1, 1), (1, 2)]
    assert increasing_order({(5, -3)}) == [(5, -3)]


def test_row_major():
    assert Box(2, 2).row_major() == [(1, 1), (2, 1), (1, 2), (2, 2)]


def test_box_rejects_empty():
    import pytest
    with pytest.raises(ValueError):
        Box(0, 3)


@given(regions)
def test_parents_inside_or_on_boundary(r):
    ext = external_boundary(r)
    for s in r:
        for p in parents_of(s):
            assert p in r or p in ext


@given(regions)
def test_boundaries_disjointness(r):
    assert internal_boundary(r) <= r
    assert not (external_boundary(r) & r)


@given(regions)
def test_increasing_order_is_linear_extension(r):
    order = increasing_order(r)
    pos = {s: k for k, s in enumerate(order)}
    assert sorted(order) == sorted(r)
    for s in r:
        for p in parents_of(s):
            if p in r:
                assert pos[p] < pos[s]


def test_order_key():
    assert order_key(Site(2, 3)) == (5, 2)
