## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from roddsim.types import ParameterError, GridRefinementError, Status
from roddsim.session import Session
from roddsim.geometry import sample_neighbor_coefficients
from roddsim.denoiser import (
    GridSpec,
    PriorModel,
    build_prior,
    real_part_density,
    conditional_mean_var,
    build_interp_tables,
)


def test_prior_total_mass(prior5):
    assert prior5.total_mass == pytest.approx(1.0, abs=1e-6)
    assert prior5.atom_masses[0] == pytest.approx(1.0 - 2.0 ** -5)
    assert prior5.continuous_mass == pytest.approx(2.0 ** -5, rel=1e-9)


def test_prior_is_symmetric(prior5):
    np.testing.assert_array_equal(prior5.grid, -prior5.grid[::-1])
    np.testing.assert_array_equal(prior5.density, prior5.density[::-1])
    assert prior5.mean == pytest.approx(0.0, abs=1e-12)
    assert prior5.max_amplitude == pytest.approx(1e-3 * 1e6)


def test_prior_is_read_only(prior5):
    with pytest.raises(ValueError):
        prior5.density[0] = 1.0


def test_prior_is_journaled():
    session = Session()
    build_prior(1e-6, 4.0, 3, session=session)
    assert [r.status for r in session.records] == [Status.SUCCESS] * 2


def test_real_part_density_is_continuous_at_zero():
    values = real_part_density([0.0, 1e-7], 1e-6, 4.0, 1e3)
    assert values[1] == pytest.approx(values[0], rel=1e-4)
    assert real_part_density(2e3, 1e-6, 4.0, 1e3) == 0.0


def test_real_part_density_matches_samples(prior5):
    rng = np.random.default_rng(12)
    samples = sample_neighbor_coefficients(1e-6, 4.0, 50_000, rng, tail_epsilon=1e-6).real

    cdf = cumulative_trapezoid(prior5.density, prior5.grid, initial=0.0)
    cdf /= cdf[-1]
    index = np.unique(np.searchsorted(cdf, np.linspace(0.0, 1.0, 21)[1:-1]))
    edges = np.concatenate([[-np.inf], prior5.grid[index], [np.inf]])
    probs = np.diff(np.concatenate([[0.0], cdf[index], [1.0]]))

    observed, _ = np.histogram(samples, bins=edges)
    result = stats.chisquare(observed, probs * len(samples))
    assert result.pvalue > 0.001


def test_coarse_grid_is_rejected():
    with pytest.raises(GridRefinementError):
        build_prior(1e-6, 4.0, 5, spec=GridSpec(core_points=3, tail_points=3))


def test_prior_parameters_are_checked():
    with pytest.raises(ParameterError):
        build_prior(1e-6, 2.0, 5)
    with pytest.raises(ParameterError):
        build_prior(0.0, 4.0, 5)


def test_point_mass_posterior():
    assert conditional_mean_var(0.7, 0.3, PriorModel.point_mass()) == (0.0, 0.0)


@given(st.floats(-5.0, 5.0), st.floats(0.1, 4.0))
def test_binary_posterior(y, noise):
    prior = PriorModel.discrete([-1.0, 1.0], [1.0, 1.0])
    mean, var = conditional_mean_var(y, noise, prior)
    assert mean == pytest.approx(math.tanh(y / noise), abs=1e-9)
    assert var == pytest.approx(1.0 - math.tanh(y / noise) ** 2, abs=1e-9)


def test_ternary_posterior():
    prior = PriorModel.discrete([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    y, noise = 0.4, 0.5
    weights = np.array([0.25, 0.5, 0.25]) * np.exp(-(y - np.array([-1.0, 0.0, 1.0])) ** 2 / (2 * noise))
    weights /= weights.sum()
    mean, var = conditional_mean_var(y, noise, prior)
    assert mean == pytest.approx(weights[2] - weights[0], abs=1e-12)
    assert var == pytest.approx(weights[2] + weights[0] - mean ** 2, abs=1e-12)


def test_posterior_shapes(prior5):
    mean, var = conditional_mean_var(np.zeros((3, 4)), 1e-6, prior5)
    assert mean.shape == var.shape == (3, 4)
    mean, var = conditional_mean_var(1e-3, np.array([1e-6, 1e-4]), prior5)
    assert mean.shape == (2,)


def test_posterior_arguments_are_checked(prior5):
    with pytest.raises(ParameterError):
        conditional_mean_var(0.1, 0.0, prior5)
    with pytest.raises(ParameterError):
        conditional_mean_var(np.nan, 1.0, prior5)


def test_posterior_is_odd(prior5):
    y = np.linspace(1e-4, 0.05, 37)
    positive, pv = conditional_mean_var(y, 1e-6, prior5)
    negative, nv = conditional_mean_var(-y, 1e-6, prior5)
    np.testing.assert_allclose(negative, -positive, rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(nv, pv, rtol=1e-6, atol=1e-15)


def test_posterior_limits(prior5):
    # Small residuals are shrunk to zero, large ones pass through.
    assert abs(conditional_mean_var(1e-5, 1e-6, prior5)[0]) < 1e-6
    assert conditional_mean_var(100.0, 1e-6, prior5)[0] == pytest.approx(100.0, rel=1e-3)


@settings(deadline=None, max_examples=50)
@given(st.floats(-1.0, 1.0), st.floats(1e-8, 1.0))
def test_posterior_variance_is_non_negative(y, noise):
    prior = build_prior(1e-6, 4.0, 5)
    mean, var = conditional_mean_var(y, noise, prior)
    assert var >= 0.0
    assert prior.grid[0] <= mean <= prior.grid[-1]


@pytest.mark.slow
def test_posterior_matches_monte_carlo(prior5):
    rng = np.random.default_rng(21)
    n = 400_000
    active = rng.random(n) < 2.0 ** -5
    x = np.zeros(n)
    x[active] = sample_neighbor_coefficients(1e-6, 4.0, int(active.sum()), rng, tail_epsilon=1e-6).real
    noise = 1e-6
    y = x + math.sqrt(noise) * rng.standard_normal(n)

    mean, var = conditional_mean_var(y, noise, prior5)
    # The posterior variance is the expected squared error of the posterior mean.
    assert np.mean((x - mean) ** 2) == pytest.approx(np.mean(var), rel=0.05)
    # Residuals are orthogonal to any function of the observation.
    assert np.mean((x - mean) * np.tanh(y / 1e-3)) == pytest.approx(0.0, abs=1e-5)


def test_table_is_exact_at_nodes(prior5):
    tables = build_interp_tables(prior5, 1e-6)
    mean, var = tables(tables.points[[0, 100, 200]])
    np.testing.assert_allclose(mean, tables.means[[0, 100, 200]], rtol=1e-12, atol=1e-18)
    np.testing.assert_allclose(var, np.maximum(tables.variances[[0, 100, 200]], 0.0), rtol=1e-12, atol=1e-18)


def test_table_interpolates_linearly(prior5):
    tables = build_interp_tables(prior5, 1e-6)
    midpoint = 0.5 * (tables.points[50] + tables.points[51])
    expected = 0.5 * (tables.means[50] + tables.means[51])
    assert float(tables(midpoint)[0]) == pytest.approx(expected, rel=1e-9, abs=1e-18)


def test_table_extrapolates_linearly(prior5):
    tables = build_interp_tables(prior5, 1e-6)
    step = tables.points[-1] - tables.points[-2]
    slope = (tables.means[-1] - tables.means[-2]) / step
    beyond = tables.points[-1] + 3 * step
    assert float(tables(beyond)[0]) == pytest.approx(tables.means[-1] + 3 * step * slope, rel=1e-9)


def test_table_variance_holds_beyond_span(prior5):
    tables = build_interp_tables(prior5, 1e-6, degree=20.0)
    y = np.linspace(tables.points[-1], 0.05, 40)
    mean, var = tables(y)
    np.testing.assert_array_equal(var, tables.variances[-1])
    np.testing.assert_array_equal(tables(-y)[1], tables.variances[0])

    # Large neighbors sit far from the atom, so the posterior variance is the noise.
    exact_mean, exact_var = conditional_mean_var(y, tables.noise, prior5)
    np.testing.assert_allclose(var, exact_var, rtol=0.05)
    np.testing.assert_allclose(mean, exact_mean, rtol=1e-2)


def test_tables_are_shared(prior5):
    assert build_prior(1e-6, 4.0, 5) is prior5
    assert build_interp_tables(prior5, 3e-6, degree=3.0) is build_interp_tables(prior5, 3e-6, degree=3.0)


def test_table_span_and_noise(prior5):
    tables = build_interp_tables(prior5, 4e-6, degree=4.0)
    assert tables.noise == pytest.approx(1e-6)
    assert tables.points[-1] == pytest.approx(8.0 * 1e-3 + prior5.scale)
    assert len(tables.points) == GridSpec().table_points


def test_table_matches_exact_denoiser(prior5):
    tables = build_interp_tables(prior5, 1e-6)
    y = np.linspace(-0.01, 0.01, 997)
    exact, _ = conditional_mean_var(y, 1e-6, prior5)
    approx, _ = tables(y)
    assert np.max(np.abs(approx - exact)) < 1e-3 * math.sqrt(prior5.variance)


def test_table_noise_is_checked(prior5):
    with pytest.raises(ParameterError):
        build_interp_tables(prior5, 0.0)
