import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tadpole.errors import InvalidGeometry, NonCommensurateTail
from tadpole.graph import (GraphFunction, assemble_laplacian, build_grid, inner, mass_weights,
                           symmetrize, tail_length_for)


def test_default_grid_layout(grid):
    assert grid.h == pytest.approx(math.pi / 50)
    assert grid.n_ring == 100 and grid.n_tail == 50
    assert grid.n_unknowns == 99 + 1 + 49
    assert grid.junction == 99
    assert grid.ring_x[0] == pytest.approx(-math.pi + grid.h)
    assert grid.tail_x[-1] == pytest.approx(2 * math.pi - grid.h)


@pytest.mark.parametrize("args, exc", [
    ((-1.0, 2.0, 100), InvalidGeometry),
    ((math.pi, math.pi, 100), InvalidGeometry),
    ((math.pi, 2 * math.pi, 7), InvalidGeometry),
    ((math.pi, 2 * math.pi, 101), InvalidGeometry),
    ((math.pi, 2 * math.pi + 0.01, 100), NonCommensurateTail),
])
def test_bad_geometry_rejected(args, exc):
    with pytest.raises(exc):
        build_grid(*args)


def test_tail_length_for_is_commensurate():
    L_inf = tail_length_for(math.pi, 100, 40.0)
    g = build_grid(math.pi, L_inf, 100)
    assert g.L_inf - g.L >= 40.0
    assert g.L_inf - g.L < 40.0 + g.h + 1e-12


def test_mass_weights_total(grid):
    # 2L of ring plus the tail, less half a cell for the clamped end
    w = mass_weights(grid)
    assert w[grid.junction] == pytest.approx(1.5 * grid.h)
    assert w.sum() == pytest.approx(grid.L_inf + grid.L - grid.h / 2)


def test_laplacian_annihilates_constants_away_from_clamp(grid):
    A = assemble_laplacian(grid)
    r = A @ np.ones(grid.n_unknowns)
    assert np.max(np.abs(r[:-1])) < 1e-9
    assert r[-1] == pytest.approx(1 / grid.h ** 2)


def test_junction_stencil(grid):
    A = assemble_laplacian(grid).toarray()
    J = grid.junction
    c = 2 / (3 * grid.h ** 2)
    row = A[J]
    assert row[J] == pytest.approx(3 * c)
    assert sorted(np.nonzero(row)[0].tolist()) == sorted([0, J - 1, J, J + 1])
    assert row[0] == row[J - 1] == row[J + 1] == pytest.approx(-c)


def test_laplacian_second_order_on_ring():
    # cos(x) on the ring meets the constant -1 on the tail at the junction
    errs = []
    for n in (50, 100, 200):
        g = build_grid(math.pi, 2 * math.pi, n)
        f = GraphFunction.from_segments(g, np.cos, lambda x: -np.ones_like(x))
        r = assemble_laplacian(g) @ f.values
        errs.append(np.max(np.abs(r[g.ring_slice] - np.cos(g.ring_x))))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2, abs=0.2)
    assert math.log2(errs[1] / errs[2]) == pytest.approx(2, abs=0.2)


def test_graph_function_segments(grid):
    f = GraphFunction.from_segments(grid, lambda x: x, lambda x: 5 - x)
    assert f.junction == pytest.approx(5 - grid.L)
    assert f.ring_full.size == grid.n_ring + 1
    assert f.tail_full.size == grid.n_tail + 1
    assert f.tail_full[-1] == 0.0
    assert np.allclose((-f).values, -f.values)
    with pytest.raises(ValueError):
        GraphFunction(grid, np.zeros(3))


def test_refined_grid(grid):
    g2 = grid.refined()
    assert g2.n_ring == 200 and g2.h == pytest.approx(grid.h / 2)
    assert g2.L_inf == grid.L_inf


@settings(max_examples=25, deadline=None)
@given(half=st.integers(4, 40), tail=st.integers(4, 40))
def test_symmetrized_laplacian_is_symmetric_positive(half, tail):
    n_ring = 2 * half
    L = 1.3
    h = 2 * L / n_ring
    g = build_grid(L, L + tail * h, n_ring)
    S = symmetrize(assemble_laplacian(g), mass_weights(g))
    assert np.max(np.abs(S - S.T)) < 1e-9 * np.max(np.abs(S))
    assert np.linalg.eigvalsh(S).min() > 0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_laplacian_self_adjoint_in_weighted_product(seed):
    g = build_grid(math.pi, 2 * math.pi, 20)
    rng = np.random.default_rng(seed)
    f, h = rng.normal(size=(2, g.n_unknowns))
    A = assemble_laplacian(g)
    assert inner(g, A @ f, h) == pytest.approx(inner(g, f, A @ h), rel=1e-10, abs=1e-8)
