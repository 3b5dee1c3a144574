import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import wave_for
from tadpole.errors import NotImaginary, SectorMismatch
from tadpole.graph import mass_weights
from tadpole.spectra import assemble_linearization, wave_spectrum
from tadpole.stability import (block_spectrum, classify, krein_sign_estimate, krein_signs,
                               lambdas_from_mu, match_spectra, quadruple_symmetry_defect,
                               reduced_sector_spectra, stability_rows, stability_spectrum,
                               sweep_stability, union_defect)
from tadpole.stationary import continue_branch


def test_lambdas_from_mu_pairs():
    lam = lambdas_from_mu([4.0, -9.0, 1 + 1j])
    assert np.allclose(lam[:2], [2j, 3.0])
    assert np.allclose(lam[:3] ** 2, [-4.0, 9.0, -(1 + 1j)])
    assert np.allclose(lam[3:], -lam[:3])


def test_classify_tags():
    lam = [0.0, 0.5, 0.5 + 0.5j, 0.3j, 2.0j]
    tags = list(classify(lam, -1.0, 1e-3, 1e-3, 1e-3))
    assert tags == ["zero", "real", "quartet", "imaginary", "continuum"]


def test_match_spectra_size_mismatch():
    with pytest.raises(SectorMismatch):
        match_spectra([1, 2], [1])
    assert match_spectra([1, 2j], [2j, 1]).max() == 0


@pytest.mark.parametrize("branch, verdict, real, quartets", [
    ("vanishing_tail:1:+", "unstable_complex", 0, 1),
    ("vanishing_tail:2:+", "unstable_complex", 0, 3),
    ("higher:1:+", "unstable_real", 1, 0),
    ("higher:2:+", "mixed", 1, 2),
    ("primary", "spectrally_stable", 0, 0),
])
def test_classification_at_omega_minus_one(branch, verdict, real, quartets):
    rep = stability_spectrum(wave_for(branch, -1.0))
    assert (rep.verdict, rep.n_real_pairs, rep.n_quartets) == (verdict, real, quartets)
    assert quadruple_symmetry_defect(rep) < 1e-6
    # right half-plane members only: one per real pair, two per quartet
    assert rep.unstable.size == real + 2 * quartets


def _nonzero(lam, tol):
    return lam[np.abs(lam) > tol]


@pytest.mark.parametrize("branch", ["vanishing_tail:1:+", "higher:1:+", "primary"])
def test_product_matches_block_problem(branch):
    w = wave_for(branch, -1.0, n_ring=24)
    rep = stability_spectrum(w)
    blk = block_spectrum(w)
    zt = 1e-3
    assert np.sum(np.abs(blk) <= zt) == np.sum(np.abs(rep.lambda_set) <= zt)
    assert match_spectra(_nonzero(rep.lambda_set, zt), _nonzero(blk, zt)).max() < 1e-6


@pytest.mark.parametrize("n", [1, 2])
def test_sector_union_reproduces_full_spectrum(n):
    w = wave_for(f"vanishing_tail:{n}:+", -1.0)
    odd, even = reduced_sector_spectra(w)
    full = stability_spectrum(w)
    assert union_defect(full, odd, even) < 1e-6
    assert odd.n_quartets + even.n_quartets == full.n_quartets
    assert (odd.n_quartets, even.n_quartets) == (n - 1, n)


def test_sector_reduction_needs_vanishing_tail():
    with pytest.raises(SectorMismatch):
        reduced_sector_spectra(wave_for("higher:1:+", -1.0))


def test_krein_count_after_restabilization():
    # n(L+) + n(L-) - 1 = 2 unstable-or-negative-Krein directions on the n = 1 branch
    for omega in (-1.0, -2.5):
        w = wave_for("vanishing_tail:1:+", omega)
        rep = stability_spectrum(w)
        signs = [s for _, s, _ in krein_signs(w, rep)]
        assert "indeterminate" not in signs
        total = rep.n_real_pairs + 2 * rep.n_quartets + 2 * signs.count("-")
        counts = wave_spectrum(w, "plus").n_neg + wave_spectrum(w, "minus").n_neg
        assert total == counts - 1


def test_split_quartet_has_opposite_krein_signs():
    # past the restabilization both members of the split pair sit in the gap
    w = wave_for("vanishing_tail:1:+", -2.5)
    rep = stability_spectrum(w)
    assert rep.n_quartets == 0
    ks = krein_signs(w, rep)
    assert len(ks) == 3
    upper = {s for _, s, _ in ks[1:]}
    assert upper == {"+", "-"}


def test_krein_rejects_non_imaginary():
    w = wave_for("vanishing_tail:1:+", -1.0)
    Lm = assemble_linearization(w, "minus")
    Lp = assemble_linearization(w, "plus")
    U = np.ones(w.grid.n_unknowns)
    with pytest.raises(NotImaginary):
        krein_sign_estimate(0.5 + 1j, U, Lm, Lp, mass_weights(w.grid), h=w.grid.h)


def test_sweep_logs_quartet_transition():
    waves = continue_branch("vanishing_tail:1:+", -1.0, -2.5, 16, 1.0, wave_for("primary", -1.0).grid)
    sweep = sweep_stability(waves)
    assert [t[2:] for t in sweep.transitions] == [("n_quartets", 1, 0)]
    star = sweep.omega_star["n_quartets"]
    assert -2.5 < star["omega"] < -1.0
    assert star["resolution"] == pytest.approx(0.1)


def test_stability_rows_sorted():
    rows = stability_rows(stability_spectrum(wave_for("higher:1:+", -1.0)))
    assert rows == sorted(rows, key=lambda r: (r[3], r[1], r[2]))
    assert {r[3] for r in rows} >= {"real", "zero", "continuum"}


@settings(max_examples=12, deadline=None)
@given(branch=st.sampled_from(["vanishing_tail:1:-", "vanishing_tail:2:+", "higher:1:-",
                               "higher:2:+", "primary"]),
       omega=st.sampled_from([-0.5, -1.5, -3.0]))
def test_quadruple_symmetry_every_solve(branch, omega):
    rep = stability_spectrum(wave_for(branch, omega))
    assert quadruple_symmetry_defect(rep) < 1e-6
