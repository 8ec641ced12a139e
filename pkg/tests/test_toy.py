"""The synthetic three-variable stream and its closed-form density."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from spnstream import toy


def test_generated_moments_match_the_mixture():
    rows = toy.generate(100_000, np.random.default_rng(0))
    assert rows.shape == (100_000, 3)
    # Component means average to (16, 17); x3 is N(3, 3).
    assert abs(rows[:, 0].mean() - 16.0) < 0.15
    assert abs(rows[:, 1].mean() - 17.0) < 0.15
    assert abs(rows[:, 2].mean() - 3.0) < 0.05
    assert abs(rows[:, 2].var() - 3.0) < 0.1
    # Mixture variance: within-component plus spread of the centers.
    centers_var = toy.CENTERS[:, 0].var()
    assert abs(rows[:, 0].var() - (1.0 + centers_var)) < 2.0


def test_first_two_variables_are_strongly_correlated():
    rows = toy.generate(100_000, np.random.default_rng(1))
    r = np.corrcoef(rows[:, 0], rows[:, 1])[0, 1]
    assert r > 0.97
    r13 = np.corrcoef(rows[:, 0], rows[:, 2])[0, 1]
    assert abs(r13) < 0.02


def test_log_density_at_the_first_center():
    val = toy.true_log_density(np.array([[1.0, 2.0, 3.0]]))[0]
    assert val == pytest.approx(-5.0389896953479365, abs=1e-12)


def test_log_density_matches_direct_mixture_formula():
    rng = np.random.default_rng(2)
    rows = toy.generate(50, rng)
    got = toy.true_log_density(rows)
    for row, g in zip(rows, got):
        mix = sum(
            0.25
            * norm.pdf(row[0], c1, math.sqrt(toy.VAR_X1))
            * norm.pdf(row[1], c2, math.sqrt(toy.VAR_X2))
            for c1, c2 in toy.CENTERS
        )
        want = math.log(mix) + norm.logpdf(row[2], toy.X3_MEAN, math.sqrt(toy.VAR_X3))
        assert g == pytest.approx(want, abs=1e-10)


def test_average_log_density_near_entropy_rate():
    rows = toy.generate(200_000, np.random.default_rng(3))
    avg = float(toy.true_log_density(rows).mean())
    # Monte-Carlo negative entropy of the generating model.
    assert avg == pytest.approx(-6.54, abs=0.03)


def test_generation_is_deterministic_per_seed():
    a = toy.generate(100, np.random.default_rng(7))
    b = toy.generate(100, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_density_rejects_wrong_width():
    with pytest.raises(ValueError):
        toy.true_log_density(np.zeros((4, 2)))
