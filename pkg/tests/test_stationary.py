import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import grid_for, wave_for
from tadpole.errors import (BranchCollapsed, ContinuationStalled, DomainError, NewtonDiverged,
                            OutOfRange)
from tadpole.graph import GraphFunction, build_grid, tail_length_for
from tadpole.scalar_waves import count_interior_zeros, exact_cn_wave
from tadpole.stationary import (Branch, continue_branch, higher_shift, jacobian, make_seed,
                                newton_solve, profile_rows, residual, segment_masses,
                                solve_wave, tail_shift)

L = math.pi


def test_branch_parse_roundtrip():
    for text in ("primary", "vanishing_tail:2:+", "higher:1:-"):
        assert str(Branch.parse(text)) == text
    assert Branch.parse("higher:3:-").sign == -1
    assert not Branch.parse("vanishing_tail:1:+").coupled
    assert Branch.parse("primary:0:+") == Branch("primary")


@pytest.mark.parametrize("text", ["bogus:1:+", "higher:0:+", "higher:x:+", "higher:1:*",
                                  "higher:1"])
def test_branch_parse_errors(text):
    with pytest.raises(DomainError):
        Branch.parse(text)


def test_jacobian_matches_finite_difference(grid):
    rng = np.random.default_rng(3)
    phi = GraphFunction(grid, rng.normal(size=grid.n_unknowns))
    dphi = rng.normal(size=grid.n_unknowns)
    J = jacobian(phi, -1.0, 1.0)
    d = 1e-6
    plus = residual(GraphFunction(grid, phi.values + d * dphi), -1.0, 1.0).values
    minus = residual(GraphFunction(grid, phi.values - d * dphi), -1.0, 1.0).values
    fd = (plus - minus) / (2 * d)
    assert np.max(np.abs(J @ dphi - fd)) < 1e-4 * np.max(np.abs(fd))


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("sign", [1, -1])
def test_vanishing_tail_wave(n, sign):
    w = wave_for(f"vanishing_tail:{n}:{'+' if sign > 0 else '-'}", -1.0)
    assert w.residual_norm < 1e-10
    assert np.all(w.profile.tail == 0) and w.profile.junction == 0
    ring = w.profile.ring_full
    assert np.allclose(ring, -ring[::-1], atol=1e-12)
    assert count_interior_zeros(ring[1:-1]) == 2 * n - 1
    cn = exact_cn_wave(n, sign, -1.0, L, grid=w.grid)
    assert np.max(np.abs(ring - cn.profile)) < 10 * w.grid.h ** 2 * np.max(np.abs(ring))
    assert w.flux_residual == 0.0


def test_primary_wave_shape():
    w = wave_for("primary", -1.0)
    ring, tail = w.profile.ring_full, w.profile.tail_full
    assert w.residual_norm < 1e-10
    assert ring.min() > 0 and tail[:-1].min() > 0
    assert np.allclose(ring, ring[::-1], atol=1e-10)
    assert np.argmax(ring) == w.grid.n_ring // 2
    assert w.ring_mass + w.tail_mass == pytest.approx(w.mass)


@pytest.mark.parametrize("n", [1, 2])
def test_higher_wave(n):
    plus = wave_for(f"higher:{n}:+", -1.0)
    minus = wave_for(f"higher:{n}:-", -1.0)
    for w in (plus, minus):
        assert w.residual_norm < 1e-10
        assert np.max(np.abs(w.profile.tail)) > 0.1
        assert w.ring_shift_b is not None
    # the two signs are mirror images on the ring with the same tail
    assert plus.ring_shift_b == pytest.approx(-minus.ring_shift_b, rel=1e-8)
    assert plus.ring_mass == pytest.approx(minus.ring_mass, rel=1e-10)
    assert plus.tail_mass == pytest.approx(minus.tail_mass, rel=1e-10)


def test_flux_residual_is_second_order():
    vals = []
    for n_ring in (100, 200):
        g = grid_for(n_ring)
        vals.append(solve_wave("higher:1:+", -1.0, 1.0, g).flux_residual)
    assert vals[1] < vals[0] / 3
    assert vals[0] < grid_for().h ** 2


def test_segment_masses_split_junction(grid):
    phi = GraphFunction(grid, np.ones(grid.n_unknowns))
    ring, tail = segment_masses(phi)
    assert ring == pytest.approx(2 * L)
    assert tail == pytest.approx((grid.L_inf - L) - grid.h / 2)


def test_tail_shift_on_long_tail():
    eps = 0.1
    g = build_grid(L, tail_length_for(L, 100, 16 / eps), 100)
    w = solve_wave("primary", -eps ** 2, 1.0, g)
    a = tail_shift(w)
    assert 0 < a < 2 * L * eps
    assert w.tail_shift_a == a


def test_tail_shift_undefined_on_short_tail():
    w = wave_for("primary", -0.01)
    assert w.tail_shift_a is None
    assert "exceeds" in w.meta["a_error"]
    with pytest.raises(OutOfRange):
        tail_shift(w)


def test_higher_shift_hits_level():
    b, ue = higher_shift(1, 1, 0.3, 1.0, L)
    assert float(ue.evaluate(L + b)) == pytest.approx(0.3, abs=1e-12)
    assert b > 0


def test_omega_validity():
    g = grid_for()
    with pytest.raises(DomainError):
        solve_wave("vanishing_tail:1:+", 1.0, 1.0, g)
    with pytest.raises(DomainError):
        solve_wave("higher:1:+", 0.0, 1.0, g)


def test_collapse_near_bifurcation():
    with pytest.raises(BranchCollapsed) as info:
        solve_wave("primary", -1e-4, 1.0, grid_for())
    assert isinstance(info.value, NewtonDiverged)


def test_continuation_samples_and_stall():
    g = grid_for()
    waves = continue_branch("higher:1:+", -0.5, -1.0, 6, 1.0, g)
    assert [w.omega for w in waves] == pytest.approx(list(np.linspace(-0.5, -1.0, 6)))
    assert all(w.residual_norm < 1e-10 for w in waves)
    direct = wave_for("higher:1:+", -1.0)
    assert np.max(np.abs(waves[-1].profile.values - direct.profile.values)) < 1e-8


def test_continuation_stall_keeps_partial_branch(monkeypatch):
    import tadpole.stationary as st_mod
    real = st_mod.newton_solve

    def failing(seed, omega, *args, **kwargs):
        if omega < -0.8:
            raise NewtonDiverged("injected", 1.0, 0)
        return real(seed, omega, *args, **kwargs)

    monkeypatch.setattr(st_mod, "newton_solve", failing)
    with pytest.raises(ContinuationStalled) as info:
        continue_branch("higher:1:+", -0.5, -1.0, 6, 1.0, grid_for())
    assert [w.omega for w in info.value.partial] == pytest.approx([-0.5, -0.6, -0.7, -0.8])


def test_newton_rejects_nonfinite_seed(grid):
    seed = GraphFunction(grid, np.full(grid.n_unknowns, np.nan))
    with pytest.raises(DomainError):
        newton_solve(seed, -1.0, 1.0)


def test_profile_rows_cover_both_segments():
    w = wave_for("higher:1:+", -1.0)
    rows = profile_rows(w)
    ring = [r for r in rows if r[2] == "ring"]
    tail = [r for r in rows if r[2] == "tail"]
    assert len(ring) == w.grid.n_ring + 1 and len(tail) == w.grid.n_tail + 1
    assert ring[0][1] == ring[-1][1] == tail[0][1]
    assert tail[-1][1] == 0.0


BRANCHES = ["primary", "vanishing_tail:1:+", "vanishing_tail:2:-", "higher:1:+", "higher:2:-"]


@settings(max_examples=20, deadline=None)
@given(branch=st.sampled_from(BRANCHES), omega=st.sampled_from([-0.5, -1.0, -2.0]))
def test_sign_flip_symmetry(branch, omega):
    g = grid_for()
    b = Branch.parse(branch)
    if b.kind == "primary":
        seed = wave_for("primary", omega).profile
    else:
        seed = make_seed(b, math.sqrt(-omega), 1.0, g, omega=omega)
    up = newton_solve(seed, omega, 1.0, branch=b)
    down = newton_solve(-seed, omega, 1.0, branch=b)
    assert np.max(np.abs(up.profile.values + down.profile.values)) < 1e-12
    assert up.mass == pytest.approx(down.mass, rel=1e-13)
